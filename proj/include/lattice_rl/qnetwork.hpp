// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lattice_rl/lattice.hpp"

namespace lrl {

struct NetConfig {
    int channels = 64;
    int hidden_layers = 3;
    /// Odd kernel extent per lattice dimension.
    int kernel = 3;

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct ParamGroup {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Fully convolutional action-value network. The input is the +-1 spin field
/// on the lattice, the output one value per site: out(p, b) = Q(s_b, flip p).
/// Padding is circular along periodic dimensions and zero along open ones, so
/// the output has the lattice's shape and commutes with translations.
///
/// Parameters live in one flat array. Layer l stores its weights as a
/// column-major (out_channels x taps*in_channels) matrix whose column index
/// is tap * in_channels + c, followed by out_channels biases.
class QNetwork {
public:
    struct Layer {
        int in_channels = 0;
        int out_channels = 0;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;
    };

    /// Per-layer intermediates of a batched forward pass.
    struct Cache {
        int batch = 0;
        /// im2col input of every layer, (taps*in) x (batch*sites).
        std::vector<Eigen::MatrixXd> columns;
        /// Post-ReLU activations of the hidden layers.
        std::vector<Eigen::MatrixXd> hidden;
    };

    QNetwork(const Lattice& lattice, NetConfig config = {});

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; the output
    /// layer starts at zero so that Q is identically 0.
    void initialize(std::uint64_t seed);

    const Lattice& lattice() const noexcept { return lattice_; }
    const NetConfig& config() const noexcept { return config_; }
    int n_sites() const noexcept { return lattice_.n_sites(); }
    int taps() const noexcept { return taps_; }
    std::size_t n_params() const noexcept { return params_.size(); }
    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::span<const Layer> layers() const noexcept { return layers_; }
    std::vector<ParamGroup> parameter_groups() const;

    /// (sites x batch) matrix of Q-values. Throws ShapeError when a
    /// configuration does not match the lattice.
    Eigen::MatrixXd forward(std::span<const SpinConfig> batch) const;
    Eigen::MatrixXd forward(std::span<const SpinConfig> batch, Cache& cache) const;
    /// Q-values of one configuration.
    std::vector<double> forward(const SpinConfig& s) const;

    /// Adds dL/dparams to `grad` given dL/dout (sites x batch) and the cache
    /// of the forward pass that produced `out`.
    void backward(const Cache& cache, const Eigen::MatrixXd& d_out, std::span<double> grad) const;

private:
    void im2col(const Eigen::MatrixXd& act, int batch, Eigen::MatrixXd& cols) const;
    void col2im(const Eigen::MatrixXd& cols, int batch, int channels, Eigen::MatrixXd& act) const;
    Eigen::MatrixXd run(std::span<const SpinConfig> batch, Cache* cache) const;

    Lattice lattice_;
    NetConfig config_;
    int taps_ = 0;
    /// neighbor_[p * taps + k]: source site of tap k at output site p, or -1.
    std::vector<int> neighbor_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
public:
    explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(std::span<double> params, std::span<const double> grad, double lr);

    long steps() const noexcept { return t_; }
    std::span<const double> first_moment() const noexcept { return m_; }
    std::span<const double> second_moment() const noexcept { return v_; }

private:
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

} // namespace lrl
