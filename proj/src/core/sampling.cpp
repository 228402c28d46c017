// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lattice_rl/error.hpp"

namespace lrl {

namespace {

double log_sum_exp(std::span<const double> x, std::span<const char> skip) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!skip[i]) peak = std::max(peak, x[i]);
    }
    if (!std::isfinite(peak)) return peak;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!skip[i]) acc += std::exp(x[i] - peak);
    }
    return peak + std::log(acc);
}

int proposal_size(const Proposal& proposal, int n) {
    const int k = proposal.kind == Proposal::Kind::QMultiFlip ? proposal.k : 1;
    if (k < 1 || k > n) {
        fail(ErrorCode::InvalidArgument, "multi-flip size must lie in [1, N]");
    }
    return k;
}

void draw_order(std::span<const double> logits, const Proposal& proposal, int k, Rng& rng,
                std::vector<int>& order) {
    const int n = static_cast<int>(logits.size());
    order.clear();
    if (proposal.kind == Proposal::Kind::UniformSingleFlip) {
        order.push_back(std::uniform_int_distribution<int>(0, n - 1)(rng));
        return;
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> weight(n);
    for (int i = 0; i < n; ++i) weight[i] = std::exp(logits[i] - peak);
    for (int j = 0; j < k; ++j) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += weight[i];
        double u = uniform01(rng) * total;
        int pick = -1;
        for (int i = 0; i < n; ++i) {
            if (weight[i] == 0.0) continue;
            pick = i;
            if ((u -= weight[i]) < 0.0) break;
        }
        order.push_back(pick);
        weight[pick] = 0.0;
    }
}

void enumerate_orders(int n, int k, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(prefix.size()) == k) {
        out.push_back(prefix);
        return;
    }
    for (int i = 0; i < n; ++i) {
        if (std::find(prefix.begin(), prefix.end(), i) != prefix.end()) continue;
        prefix.push_back(i);
        enumerate_orders(n, k, prefix, out);
        prefix.pop_back();
    }
}

SpinConfig flip_all(SpinConfig s, std::span<const int> order) {
    for (int i : order) s = s.flipped(i);
    return s;
}

double variance_of(std::span<const double> x, double mean) {
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(x.size());
}

McResult chain_impl(const StoquasticModel& model, const Guide& guide, const Proposal& proposal,
                    const McOptions& options, Rng& rng, bool local) {
    const int n = model.n_sites();
    if (guide.n_sites() != n) fail(ErrorCode::ShapeError, "guide and model sizes differ");
    const long burn = options.burn_in.value_or(10L * n * n);
    if (burn < 0 || options.steps <= burn) {
        fail(ErrorCode::InvalidArgument, "steps must exceed the burn-in");
    }
    SpinConfig start = options.start.value_or(SpinConfig(
        n, n == 64 ? rng() : rng() & ((std::uint64_t{1} << n) - 1)));
    ChainState state = ChainState::at(guide, start);

    McResult result;
    const std::size_t kept = static_cast<std::size_t>(options.steps - burn);
    result.diagonal_energies.reserve(kept);
    if (local) result.local_energies.reserve(kept);
    std::vector<SpinConfig> neighbors;
    std::vector<double> values;
    std::vector<double> log_phi;
    double current_local = 0.0;
    bool stale = true;
    long accepted = 0;
    long accepted_kept = 0;
    for (long step = 0; step < options.steps; ++step) {
        if (mh_step(state, guide, proposal, rng)) {
            ++accepted;
            if (step >= burn) ++accepted_kept;
            stale = true;
        }
        if (step < burn) continue;
        result.diagonal_energies.push_back(model.diag(state.s));
        if (!local) continue;
        if (stale) {
            neighbors.clear();
            values.clear();
            model.for_each_offdiag(state.s, [&](Action, SpinConfig t, double v) {
                neighbors.push_back(t);
                values.push_back(v);
            });
            log_phi.resize(neighbors.size());
            guide.log_amplitudes(neighbors, log_phi);
            current_local = model.diag(state.s);
            for (std::size_t i = 0; i < neighbors.size(); ++i) {
                current_local += values[i] * std::exp(log_phi[i] - state.log_phi);
            }
            stale = false;
        }
        result.local_energies.push_back(current_local);
    }
    if (accepted == 0) {
        fail(ErrorCode::SamplerStuck, "no proposal was accepted in " + std::to_string(options.steps) +
                                          " steps");
    }
    result.stats.samples = kept;
    result.stats.acceptance = static_cast<double>(accepted_kept) / static_cast<double>(kept);
    try {
        result.stats.autocorrelation = autocorrelation_time(result.diagonal_energies);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateSeries) throw;
        result.stats.autocorrelation.flagged = true;
    }
    if (local) {
        const double m = std::accumulate(result.local_energies.begin(), result.local_energies.end(),
                                         0.0) /
                         static_cast<double>(kept);
        result.energy = m;
        const double var = variance_of(result.local_energies, m);
        double tau = 0.0;
        if (var > 1e-300 * std::max(1.0, m * m) && kept >= 3) {
            try {
                tau = autocorrelation_time(result.local_energies).tau;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateSeries) throw;
            }
            result.std_error = std::sqrt(var * (1.0 + 2.0 * tau) / static_cast<double>(kept));
        }
        result.stats.std_error = result.std_error;
    }
    if (!options.keep_series) {
        result.local_energies.clear();
        result.local_energies.shrink_to_fit();
        result.diagonal_energies.clear();
        result.diagonal_energies.shrink_to_fit();
    }
    return result;
}

} // namespace

Proposal Proposal::parse(std::string_view text) {
    if (text == "uniform") return uniform();
    if (text == "q1") return q_single();
    if (text.substr(0, 3) == "qk:") {
        const std::string digits(text.substr(3));
        std::size_t used = 0;
        int k = 0;
        try {
            k = std::stoi(digits, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == digits.size() && !digits.empty() && k >= 1) return q_multi(k);
    }
    fail(ErrorCode::InvalidArgument,
         "unknown proposal '" + std::string(text) + "' (expected uniform, q1 or qk:<k>)");
}

std::string Proposal::name() const {
    switch (kind) {
    case Kind::UniformSingleFlip: return "uniform";
    case Kind::QSingleFlip: return "q1";
    case Kind::QMultiFlip: return "qk:" + std::to_string(k);
    }
    return "?";
}

void Guide::log_amplitudes(std::span<const SpinConfig> states, std::span<double> out) const {
    std::vector<double> logits(n_sites());
    for (std::size_t i = 0; i < states.size(); ++i) evaluate(states[i], out[i], logits);
}

FunctionGuide::FunctionGuide(int n_sites, Amplitude phi, Logits logits)
    : n_sites_(n_sites), phi_(std::move(phi)), logits_(std::move(logits)) {}

void FunctionGuide::evaluate(const SpinConfig& s, double& log_phi, std::span<double> logits) const {
    const double value = phi_(s);
    if (!(value > 0.0)) {
        fail(ErrorCode::DivisionByZeroAmplitude, "sampling needs phi > 0 at " + s.to_string());
    }
    log_phi = std::log(value);
    if (logits_) {
        logits_(s, logits);
    } else {
        std::fill(logits.begin(), logits.end(), 0.0);
    }
}

TableGuide::TableGuide(SharedSpace space, std::vector<double> log_phi, std::vector<double> logits)
    : space_(std::move(space)), log_phi_(std::move(log_phi)), logits_(std::move(logits)) {
    if (space_->magnetization()) {
        fail(ErrorCode::InvalidArgument, "spin-flip sampling needs the full state space");
    }
    if (log_phi_.size() != space_->size() ||
        (!logits_.empty() && logits_.size() != space_->size() * space_->n_sites())) {
        fail(ErrorCode::ShapeError, "table sizes do not match the state space");
    }
}

TableGuide TableGuide::tabulate(const Guide& guide, SharedSpace space) {
    const std::size_t n = space->size();
    const int sites = space->n_sites();
    std::vector<double> log_phi(n);
    std::vector<double> logits(n * sites);
    for (std::size_t i = 0; i < n; ++i) {
        guide.evaluate((*space)[i], log_phi[i],
                       std::span<double>(logits.data() + i * sites, sites));
    }
    return TableGuide(std::move(space), std::move(log_phi), std::move(logits));
}

void TableGuide::evaluate(const SpinConfig& s, double& log_phi, std::span<double> logits) const {
    const std::size_t i = space_->index(s);
    log_phi = log_phi_[i];
    if (logits_.empty()) {
        std::fill(logits.begin(), logits.end(), 0.0);
    } else {
        const int n = space_->n_sites();
        std::copy_n(logits_.begin() + static_cast<std::ptrdiff_t>(i * n), n, logits.begin());
    }
}

void TableGuide::log_amplitudes(std::span<const SpinConfig> states, std::span<double> out) const {
    for (std::size_t i = 0; i < states.size(); ++i) out[i] = log_phi_[space_->index(states[i])];
}

ChainState ChainState::at(const Guide& guide, const SpinConfig& s) {
    ChainState state;
    state.s = s;
    state.logits.resize(guide.n_sites());
    guide.evaluate(s, state.log_phi, state.logits);
    return state;
}

double proposal_log_probability(std::span<const double> logits, const Proposal& proposal,
                                std::span<const int> order) {
    const int n = static_cast<int>(logits.size());
    if (proposal.kind == Proposal::Kind::UniformSingleFlip) return -std::log(static_cast<double>(n));
    std::vector<char> used(n, 0);
    double acc = 0.0;
    for (int site : order) {
        acc += logits[site] - log_sum_exp(logits, used);
        used[site] = 1;
    }
    return acc;
}

bool mh_step(ChainState& state, const Guide& guide, const Proposal& proposal, Rng& rng) {
    const int n = guide.n_sites();
    const int k = proposal_size(proposal, n);
    std::vector<int> order;
    draw_order(state.logits, proposal, k, rng, order);
    const SpinConfig next = flip_all(state.s, order);
    double next_log_phi = 0.0;
    std::vector<double> next_logits(n);
    guide.evaluate(next, next_log_phi, next_logits);
    double log_ratio = 2.0 * (next_log_phi - state.log_phi);
    if (proposal.kind != Proposal::Kind::UniformSingleFlip) {
        log_ratio += proposal_log_probability(next_logits, proposal, order) -
                     proposal_log_probability(state.logits, proposal, order);
    }
    if (log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio) {
        state.s = next;
        state.log_phi = next_log_phi;
        state.logits = std::move(next_logits);
        return true;
    }
    return false;
}

Eigen::MatrixXd mh_transition_matrix(const StateSpace& space, const Guide& guide,
                                     const Proposal& proposal) {
    if (space.magnetization()) fail(ErrorCode::InvalidArgument, "needs the full state space");
    const int n = space.n_sites();
    const int k = proposal_size(proposal, n);
    std::vector<std::vector<int>> orders;
    std::vector<int> prefix;
    enumerate_orders(n, k, prefix, orders);
    const auto size = static_cast<Eigen::Index>(space.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
        const ChainState here = ChainState::at(guide, space[i]);
        for (const auto& order : orders) {
            const ChainState there = ChainState::at(guide, flip_all(here.s, order));
            const double fwd = proposal_log_probability(here.logits, proposal, order);
            double log_ratio = 2.0 * (there.log_phi - here.log_phi);
            if (proposal.kind != Proposal::Kind::UniformSingleFlip) {
                log_ratio += proposal_log_probability(there.logits, proposal, order) - fwd;
            }
            const double q = std::exp(fwd);
            const double a = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
            const auto j = static_cast<Eigen::Index>(space.index(there.s));
            p(i, j) += q * a;
            p(i, i) += q * (1.0 - a);
        }
    }
    return p;
}

Autocorrelation autocorrelation_time(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 3) fail(ErrorCode::DegenerateSeries, "series too short for an autocorrelation");
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    const double var = variance_of(series, mean);
    if (!(var > 1e-300) || var <= 1e-28 * mean * mean) {
        fail(ErrorCode::DegenerateSeries, "series is constant; autocorrelation undefined");
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = series[i] - mean;

    Autocorrelation out;
    double sum_tl = 0.0;
    double sum_tt = 0.0;
    double sum_rho = 0.0;
    for (std::size_t t = 1; t < n / 2; ++t) {
        double acc = 0.0;
        for (std::size_t i = 0; i + t < n; ++i) acc += x[i] * x[i + t];
        const double rho = acc / (static_cast<double>(n) * var);
        if (!(rho > 0.05)) break;
        const double td = static_cast<double>(t);
        sum_tl += td * std::log(rho);
        sum_tt += td * td;
        sum_rho += rho;
        ++out.lags_used;
    }
    out.tau_integrated = 0.5 + sum_rho;
    if (out.lags_used == 0) {
        out.flagged = true;
        return out;
    }
    out.tau = -sum_tt / sum_tl;
    return out;
}

McResult variational_energy_mc(const StoquasticModel& model, const Guide& guide,
                               const Proposal& proposal, const McOptions& options, Rng& rng) {
    return chain_impl(model, guide, proposal, options, rng, true);
}

McResult run_chain(const StoquasticModel& model, const Guide& guide, const Proposal& proposal,
                   const McOptions& options, Rng& rng) {
    return chain_impl(model, guide, proposal, options, rng, false);
}

} // namespace lrl
