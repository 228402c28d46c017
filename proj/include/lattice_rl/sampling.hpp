// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lattice_rl/exact.hpp"
#include "lattice_rl/hamiltonian.hpp"
#include "lattice_rl/rng.hpp"

namespace lrl {

/// Spin-flip proposals for Metropolis-Hastings on phi^2.
///
///  UniformSingleFlip  one site, uniformly.
///  QSingleFlip        one site i with probability softmax(Q(s, .))_i.
///  QMultiFlip         k distinct sites drawn sequentially without
///                     replacement from softmax(Q(s, .)), flipped together.
///
/// Multi-flip acceptance uses the probability of the drawn ordering in both
/// directions: (s, order) -> (s', order) is an involution, so weighting by the
/// ordering's forward and reverse probabilities keeps phi^2 invariant without
/// summing over the k! orderings.
struct Proposal {
    enum class Kind { UniformSingleFlip, QSingleFlip, QMultiFlip };
    Kind kind = Kind::UniformSingleFlip;
    int k = 1;

    static Proposal uniform() { return {Kind::UniformSingleFlip, 1}; }
    static Proposal q_single() { return {Kind::QSingleFlip, 1}; }
    static Proposal q_multi(int k) { return {Kind::QMultiFlip, k}; }

    /// "uniform", "q1" or "qk:<k>".
    static Proposal parse(std::string_view text);
    std::string name() const;
};

/// Amplitude (and proposal logits) source for a chain.
class Guide {
public:
    virtual ~Guide() = default;
    virtual int n_sites() const = 0;
    /// log phi(s) and Q(s, flip i) for i < n_sites, from one evaluation.
    virtual void evaluate(const SpinConfig& s, double& log_phi, std::span<double> logits) const = 0;
    /// log phi over a batch; the default calls evaluate() per state.
    virtual void log_amplitudes(std::span<const SpinConfig> states, std::span<double> out) const;
};

/// Guide from an amplitude function; all proposal logits are zero unless a
/// logits function is given.
class FunctionGuide final : public Guide {
public:
    using Logits = std::function<void(const SpinConfig&, std::span<double>)>;
    FunctionGuide(int n_sites, Amplitude phi, Logits logits = {});
    int n_sites() const override { return n_sites_; }
    void evaluate(const SpinConfig& s, double& log_phi, std::span<double> logits) const override;

private:
    int n_sites_;
    Amplitude phi_;
    Logits logits_;
};

/// Guide tabulated over the full enumerated space.
class TableGuide final : public Guide {
public:
    /// `logits` is row-major (state, site); empty means all zero.
    TableGuide(SharedSpace space, std::vector<double> log_phi, std::vector<double> logits = {});
    /// Tabulates any guide over `space`.
    static TableGuide tabulate(const Guide& guide, SharedSpace space);

    int n_sites() const override { return space_->n_sites(); }
    void evaluate(const SpinConfig& s, double& log_phi, std::span<double> logits) const override;
    void log_amplitudes(std::span<const SpinConfig> states, std::span<double> out) const override;
    const StateSpace& space() const noexcept { return *space_; }
    std::span<const double> log_phi() const noexcept { return log_phi_; }

private:
    SharedSpace space_;
    std::vector<double> log_phi_;
    std::vector<double> logits_;
};

struct ChainState {
    SpinConfig s;
    double log_phi = 0.0;
    std::vector<double> logits;

    static ChainState at(const Guide& guide, const SpinConfig& s);
};

/// One Metropolis-Hastings step. Returns true when the move was accepted.
bool mh_step(ChainState& state, const Guide& guide, const Proposal& proposal, Rng& rng);

/// log q(order | s) for an ordered tuple of distinct sites.
double proposal_log_probability(std::span<const double> logits, const Proposal& proposal,
                                std::span<const int> order);

/// Explicit MH transition matrix P(i -> j) over a full enumerated space.
Eigen::MatrixXd mh_transition_matrix(const StateSpace& space, const Guide& guide,
                                     const Proposal& proposal);

struct Autocorrelation {
    /// Exponential decay time from a fit of log ACF through the origin over the
    /// leading lags with ACF > 0.05. Zero when no lag qualifies (`flagged`).
    double tau = 0.0;
    /// 1/2 + sum of the ACF over the same lags.
    double tau_integrated = 0.0;
    int lags_used = 0;
    bool flagged = false;
};

/// Throws DegenerateSeries for constant or too-short series.
Autocorrelation autocorrelation_time(std::span<const double> series);

struct ChainStats {
    std::size_t samples = 0;
    double acceptance = 0.0;
    /// Of the diagonal (classical) energy series.
    Autocorrelation autocorrelation;
    double std_error = 0.0;
};

struct McResult {
    double energy = 0.0;
    double std_error = 0.0;
    ChainStats stats;
    std::vector<double> local_energies;
    std::vector<double> diagonal_energies;
};

struct McOptions {
    long steps = 100000;
    /// Defaults to 10 sweeps of N steps each.
    std::optional<long> burn_in;
    std::optional<SpinConfig> start;
    bool keep_series = false;
};

/// Mean local energy over an MH chain sampling phi^2. The standard error uses
/// the effective sample size n / (1 + 2 tau). A chain that never accepts
/// throws SamplerStuck.
McResult variational_energy_mc(const StoquasticModel& model, const Guide& guide,
                               const Proposal& proposal, const McOptions& options, Rng& rng);

/// Runs the chain only and returns the diagonal-energy series and acceptance.
McResult run_chain(const StoquasticModel& model, const Guide& guide, const Proposal& proposal,
                   const McOptions& options, Rng& rng);

} // namespace lrl
