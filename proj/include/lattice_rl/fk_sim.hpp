// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lattice_rl/exact.hpp"
#include "lattice_rl/hamiltonian.hpp"
#include "lattice_rl/mdp.hpp"
#include "lattice_rl/rng.hpp"

namespace lrl {

/// Sign of the energy shift in the Feynman-Kac exponent exp(-int (V -/+ E0) dt).
/// Only MinusE0 makes the ground state a fixed point of the estimator.
enum class EnergySign { MinusE0, PlusE0 };
inline constexpr EnergySign kDefaultEnergySign = EnergySign::MinusE0;

/// Continuous-time jump rates over the model's transitions. Rates are always
/// aligned with StoquasticModel::for_each_offdiag, so a rate map can only put
/// weight on moves the passive dynamics also allows.
class RateMap {
public:
    enum class Kind { Passive, Parameterized };
    /// Writes one rate per passive transition of `s` into `out`.
    using Fn = std::function<void(const SpinConfig& s, std::span<const Transition> passive,
                                  std::span<double> out)>;

    static RateMap passive(StoquasticModel model);
    /// Gamma * phi(s') / phi(s).
    static RateMap doob(StoquasticModel model, Amplitude phi);
    /// factor * Gamma.
    static RateMap scaled(StoquasticModel model, double factor);
    /// Rates from a table built over an enumerated space (same transition order).
    static RateMap from_table(StoquasticModel model, RateTable table);
    static RateMap custom(StoquasticModel model, Fn fn);

    Kind kind() const noexcept { return kind_; }
    const StoquasticModel& model() const noexcept { return model_; }

    /// Fills `passive` with the model's transitions at `s` (value = Gamma > 0)
    /// and `rates` with the aligned rates of this map.
    void evaluate(const SpinConfig& s, std::vector<Transition>& passive,
                  std::vector<double>& rates) const;

private:
    RateMap(StoquasticModel model, Kind kind, Fn fn)
        : model_(std::move(model)), kind_(kind), fn_(std::move(fn)) {}

    StoquasticModel model_;
    Kind kind_;
    Fn fn_;
};

struct Trajectory {
    /// states[0] = s0; states[k] is occupied on [jump_times[k-1], jump_times[k]).
    std::vector<SpinConfig> states;
    std::vector<double> jump_times;
    double horizon = 0.0;

    std::size_t n_jumps() const noexcept { return jump_times.size(); }
    const SpinConfig& final_state() const noexcept { return states.back(); }
};

/// Exponential-clock simulation up to time T. A state with zero exit rate is
/// held until T.
Trajectory simulate_ctmc(const RateMap& rates, const SpinConfig& s0, double T, Rng& rng);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    /// Sample variance of the per-trajectory values.
    double variance = 0.0;
    double n_jumps_mean = 0.0;
    std::size_t n = 0;
};

struct FkOptions {
    /// E0 in the exponent; omitted means the energy term is off.
    std::optional<double> energy;
    EnergySign sign = kDefaultEnergySign;
};

/// Monte-Carlo mean of exp(-int (V(s_t) - E0) dt) terminal(s_T) over passive
/// trajectories from s0. Trajectory i draws from stream_rng(seed, i).
Estimate fk_estimate(const StoquasticModel& model, const SpinConfig& s0, double T,
                     const Amplitude& terminal, std::size_t n_traj, std::uint64_t seed,
                     const FkOptions& options = {});

/// Same quantity as fk_estimate, sampled under `rates` and reweighted by the
/// path-measure ratio exp(sum_jumps log(Gamma/Gamma_theta) + int sum (Gamma_theta - Gamma) dt).
/// Rates must be positive exactly where Gamma is (SupportMismatch otherwise).
Estimate fk_importance_estimate(const RateMap& rates, const SpinConfig& s0, double T,
                                const Amplitude& terminal, std::size_t n_traj, std::uint64_t seed,
                                const FkOptions& options = {});

/// sum_{s'} [Gamma - Gamma_theta + Gamma_theta log(Gamma_theta / Gamma)] for
/// aligned rows. Gamma_theta > 0 where Gamma = 0 is a SupportMismatch.
double entropy_rate(std::span<const double> theta, std::span<const double> passive);

/// Time average of -(V + entropy rate) along trajectories of `rates` from s0.
Estimate objective_estimate(const RateMap& rates, const SpinConfig& s0, double T,
                            std::size_t n_traj, std::uint64_t seed);

/// sum_s pi(s) [-V(s) - entropy rate(s)] under the stationary distribution pi
/// of a rate table built by passive_rate_table or optimal_rates.
double objective_exact(const StoquasticModel& model, const RateTable& rates);

/// Pairwise (cascade) summation, independent of thread count.
double pairwise_sum(std::span<const double> values);

} // namespace lrl
