// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/qnetwork.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "lattice_rl/error.hpp"
#include "lattice_rl/rng.hpp"

namespace lrl {

QNetwork::QNetwork(const Lattice& lattice, NetConfig config)
    : lattice_(lattice), config_(config) {
    if (config_.channels < 1 || config_.hidden_layers < 1 || config_.kernel < 1 ||
        config_.kernel % 2 == 0) {
        fail(ErrorCode::InvalidArgument, "network needs channels >= 1, hidden_layers >= 1 and an odd kernel");
    }
    const int r = config_.kernel / 2;
    const int n = lattice_.n_sites();
    const bool two_d = lattice_.dimension() == 2;
    taps_ = two_d ? config_.kernel * config_.kernel : config_.kernel;
    neighbor_.reserve(static_cast<std::size_t>(n) * taps_);
    for (int p = 0; p < n; ++p) {
        for (int dy = two_d ? -r : 0; dy <= (two_d ? r : 0); ++dy) {
            for (int dx = -r; dx <= r; ++dx) neighbor_.push_back(lattice_.displaced(p, dx, dy));
        }
    }

    std::size_t offset = 0;
    int in = 1;
    for (int l = 0; l <= config_.hidden_layers; ++l) {
        const int out = l == config_.hidden_layers ? 1 : config_.channels;
        Layer layer;
        layer.in_channels = in;
        layer.out_channels = out;
        layer.weight_offset = offset;
        offset += static_cast<std::size_t>(out) * taps_ * in;
        layer.bias_offset = offset;
        offset += static_cast<std::size_t>(out);
        layers_.push_back(layer);
        in = out;
    }
    params_.assign(offset, 0.0);
}

void QNetwork::initialize(std::uint64_t seed) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), 0.0);
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(taps_ * layer.in_channels));
        std::uniform_real_distribution<double> u(-bound, bound);
        const std::size_t end = layer.bias_offset + layer.out_channels;
        for (std::size_t i = layer.weight_offset; i < end; ++i) params_[i] = u(rng);
    }
}

std::vector<ParamGroup> QNetwork::parameter_groups() const {
    std::vector<ParamGroup> groups;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const std::string prefix = "conv" + std::to_string(l);
        groups.push_back({prefix + ".weight",
                          {layer.out_channels, taps_, layer.in_channels},
                          layer.weight_offset,
                          static_cast<std::size_t>(layer.out_channels) * taps_ * layer.in_channels});
        groups.push_back({prefix + ".bias", {layer.out_channels}, layer.bias_offset,
                          static_cast<std::size_t>(layer.out_channels)});
    }
    return groups;
}

void QNetwork::im2col(const Eigen::MatrixXd& act, int batch, Eigen::MatrixXd& cols) const {
    const Eigen::Index c = act.rows();
    const int n = n_sites();
    cols.resize(taps_ * c, static_cast<Eigen::Index>(batch) * n);
    for (int b = 0; b < batch; ++b) {
        const double* src = act.data() + static_cast<Eigen::Index>(b) * n * c;
        for (int p = 0; p < n; ++p) {
            double* dst = cols.data() + (static_cast<Eigen::Index>(b) * n + p) * cols.rows();
            const int* nb = neighbor_.data() + static_cast<std::size_t>(p) * taps_;
            for (int k = 0; k < taps_; ++k, dst += c) {
                if (nb[k] < 0) {
                    std::fill_n(dst, c, 0.0);
                } else {
                    std::copy_n(src + nb[k] * c, c, dst);
                }
            }
        }
    }
}

void QNetwork::col2im(const Eigen::MatrixXd& cols, int batch, int channels,
                      Eigen::MatrixXd& act) const {
    const int n = n_sites();
    act.setZero(channels, static_cast<Eigen::Index>(batch) * n);
    for (int b = 0; b < batch; ++b) {
        double* dst = act.data() + static_cast<Eigen::Index>(b) * n * channels;
        for (int p = 0; p < n; ++p) {
            const double* src = cols.data() + (static_cast<Eigen::Index>(b) * n + p) * cols.rows();
            const int* nb = neighbor_.data() + static_cast<std::size_t>(p) * taps_;
            for (int k = 0; k < taps_; ++k, src += channels) {
                if (nb[k] < 0) continue;
                double* out = dst + nb[k] * channels;
                for (int c = 0; c < channels; ++c) out[c] += src[c];
            }
        }
    }
}

Eigen::MatrixXd QNetwork::run(std::span<const SpinConfig> batch, Cache* cache) const {
    const int n = n_sites();
    const int b = static_cast<int>(batch.size());
    Eigen::MatrixXd act(1, static_cast<Eigen::Index>(b) * n);
    for (int i = 0; i < b; ++i) {
        if (batch[i].n_sites() != n) {
            fail(ErrorCode::ShapeError, "configuration has " + std::to_string(batch[i].n_sites()) +
                                            " sites, the network expects " + std::to_string(n));
        }
        for (int p = 0; p < n; ++p) act(0, static_cast<Eigen::Index>(i) * n + p) = batch[i].spin(p);
    }
    if (cache) {
        cache->batch = b;
        cache->columns.resize(layers_.size());
        cache->hidden.resize(layers_.size() - 1);
    }
    thread_local Eigen::MatrixXd local_cols;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        Eigen::MatrixXd& cols = cache ? cache->columns[l] : local_cols;
        im2col(act, b, cols);
        Eigen::Map<const Eigen::MatrixXd> w(params_.data() + layer.weight_offset, layer.out_channels,
                                            static_cast<Eigen::Index>(taps_) * layer.in_channels);
        Eigen::Map<const Eigen::VectorXd> bias(params_.data() + layer.bias_offset, layer.out_channels);
        Eigen::MatrixXd z(layer.out_channels, cols.cols());
        z.noalias() = w * cols;
        z.colwise() += bias;
        if (l + 1 < layers_.size()) {
            z = z.cwiseMax(0.0);
            if (cache) cache->hidden[l] = z;
        }
        act = std::move(z);
    }
    return Eigen::Map<const Eigen::MatrixXd>(act.data(), n, b);
}

Eigen::MatrixXd QNetwork::forward(std::span<const SpinConfig> batch) const {
    return run(batch, nullptr);
}

Eigen::MatrixXd QNetwork::forward(std::span<const SpinConfig> batch, Cache& cache) const {
    return run(batch, &cache);
}

std::vector<double> QNetwork::forward(const SpinConfig& s) const {
    Eigen::MatrixXd out = run(std::span<const SpinConfig>(&s, 1), nullptr);
    return {out.data(), out.data() + out.size()};
}

void QNetwork::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                        std::span<double> grad) const {
    const int n = n_sites();
    const int b = cache.batch;
    if (d_out.rows() != n || d_out.cols() != b || grad.size() != params_.size()) {
        fail(ErrorCode::ShapeError, "gradient shapes do not match the forward pass");
    }
    Eigen::MatrixXd dz = Eigen::Map<const Eigen::MatrixXd>(d_out.data(), 1,
                                                           static_cast<Eigen::Index>(b) * n);
    Eigen::MatrixXd dcols;
    Eigen::MatrixXd dact;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const Eigen::Index width = static_cast<Eigen::Index>(taps_) * layer.in_channels;
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + layer.weight_offset, layer.out_channels, width);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer.bias_offset, layer.out_channels);
        gw.noalias() += dz * cache.columns[l].transpose();
        gb += dz.rowwise().sum();
        if (l == 0) break;
        Eigen::Map<const Eigen::MatrixXd> w(params_.data() + layer.weight_offset, layer.out_channels,
                                            width);
        dcols.noalias() = w.transpose() * dz;
        col2im(dcols, b, layer.in_channels, dact);
        dz = (cache.hidden[l - 1].array() > 0.0).select(dact, 0.0);
    }
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        fail(ErrorCode::ShapeError, "Adam state does not match the parameter count");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

} // namespace lrl
