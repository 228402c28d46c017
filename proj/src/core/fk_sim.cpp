// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/fk_sim.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lattice_rl/error.hpp"
#include "parallel.hpp"

namespace lrl {

namespace {

// Drives one exponential-clock trajectory. hold(s, duration, passive, rates,
// theta_total) is called for every holding interval, jump(k, passive, rates)
// before every move.
template <class OnHold, class OnJump>
void walk(const RateMap& map, SpinConfig s, double T, Rng& rng, OnHold&& hold, OnJump&& jump) {
    std::vector<Transition> passive;
    std::vector<double> rates;
    double t = 0.0;
    while (true) {
        map.evaluate(s, passive, rates);
        const double total = std::accumulate(rates.begin(), rates.end(), 0.0);
        const double wait = total > 0.0 ? std::exponential_distribution<double>(total)(rng)
                                        : std::numeric_limits<double>::infinity();
        if (t + wait >= T) {
            hold(s, T - t, passive, rates, total);
            return;
        }
        hold(s, wait, passive, rates, total);
        t += wait;
        double u = uniform01(rng) * total;
        std::size_t k = 0;
        while (k + 1 < rates.size() && (u -= rates[k]) >= 0.0) ++k;
        // skip a zero-rate tail entry picked up by rounding
        while (rates[k] == 0.0 && k > 0) --k;
        jump(k, passive, rates, t);
        s = passive[k].target;
    }
}

double passive_total(std::span<const Transition> passive) {
    double acc = 0.0;
    for (const Transition& tr : passive) acc += tr.value;
    return acc;
}

double energy_term(const FkOptions& options) {
    if (!options.energy) return 0.0;
    return options.sign == EnergySign::MinusE0 ? -*options.energy : *options.energy;
}

void require_sampling_args(double T, std::size_t n_traj) {
    if (!(T >= 0.0) || !std::isfinite(T)) fail(ErrorCode::InvalidArgument, "T must be finite and >= 0");
    if (n_traj < 2) fail(ErrorCode::InvalidArgument, "need at least two trajectories");
}

Estimate summarize(const std::vector<double>& values, const std::vector<double>& jumps) {
    Estimate e;
    e.n = values.size();
    const double n = static_cast<double>(e.n);
    e.mean = pairwise_sum(values) / n;
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - e.mean) * (values[i] - e.mean);
    e.variance = pairwise_sum(sq) / (n - 1.0);
    e.std_error = std::sqrt(e.variance / n);
    e.n_jumps_mean = pairwise_sum(jumps) / n;
    return e;
}

} // namespace

RateMap RateMap::passive(StoquasticModel model) {
    return RateMap(std::move(model), Kind::Passive,
                   [](const SpinConfig&, std::span<const Transition> passive, std::span<double> out) {
                       for (std::size_t k = 0; k < passive.size(); ++k) out[k] = passive[k].value;
                   });
}

RateMap RateMap::doob(StoquasticModel model, Amplitude phi) {
    return RateMap(std::move(model), Kind::Parameterized,
                   [phi = std::move(phi)](const SpinConfig& s, std::span<const Transition> passive,
                                          std::span<double> out) {
                       const double here = phi(s);
                       if (!(here > 0.0)) {
                           fail(ErrorCode::DivisionByZeroAmplitude,
                                "Doob rates need phi > 0 at " + s.to_string());
                       }
                       for (std::size_t k = 0; k < passive.size(); ++k) {
                           out[k] = passive[k].value * phi(passive[k].target) / here;
                       }
                   });
}

RateMap RateMap::scaled(StoquasticModel model, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) {
        fail(ErrorCode::InvalidArgument, "rate scale factor must be positive");
    }
    return RateMap(std::move(model), Kind::Parameterized,
                   [factor](const SpinConfig&, std::span<const Transition> passive,
                            std::span<double> out) {
                       for (std::size_t k = 0; k < passive.size(); ++k) {
                           out[k] = factor * passive[k].value;
                       }
                   });
}

RateMap RateMap::from_table(StoquasticModel model, RateTable table) {
    return RateMap(std::move(model), Kind::Parameterized,
                   [table = std::move(table)](const SpinConfig& s,
                                              std::span<const Transition> passive,
                                              std::span<double> out) {
                       auto row = table.row(table.space->index(s));
                       if (row.size() != passive.size()) {
                           fail(ErrorCode::SupportMismatch,
                                "rate table row does not match the model's transitions");
                       }
                       for (std::size_t k = 0; k < row.size(); ++k) out[k] = row[k].rate;
                   });
}

RateMap RateMap::custom(StoquasticModel model, Fn fn) {
    return RateMap(std::move(model), Kind::Parameterized, std::move(fn));
}

void RateMap::evaluate(const SpinConfig& s, std::vector<Transition>& passive,
                       std::vector<double>& rates) const {
    passive.clear();
    model_.for_each_offdiag(s, [&](Action a, SpinConfig t, double v) { passive.push_back({a, t, -v}); });
    rates.assign(passive.size(), 0.0);
    fn_(s, passive, rates);
    for (double r : rates) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
            fail(ErrorCode::InvalidArgument, "rates must be finite and non-negative");
        }
    }
}

Trajectory simulate_ctmc(const RateMap& rates, const SpinConfig& s0, double T, Rng& rng) {
    if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorCode::InvalidArgument, "T must be positive");
    Trajectory traj;
    traj.horizon = T;
    traj.states.push_back(s0);
    walk(
        rates, s0, T, rng, [](const SpinConfig&, double, auto&, auto&, double) {},
        [&](std::size_t k, const std::vector<Transition>& passive, auto&, double t) {
            traj.jump_times.push_back(t);
            traj.states.push_back(passive[k].target);
        });
    return traj;
}

Estimate fk_estimate(const StoquasticModel& model, const SpinConfig& s0, double T,
                     const Amplitude& terminal, std::size_t n_traj, std::uint64_t seed,
                     const FkOptions& options) {
    require_sampling_args(T, n_traj);
    std::vector<double> values(n_traj);
    std::vector<double> jumps(n_traj);
    const double shift = energy_term(options);
    if (T == 0.0) {
        const double value = terminal(s0);
        std::fill(values.begin(), values.end(), value);
        return summarize(values, jumps);
    }
    const RateMap passive = RateMap::passive(model);
    detail::parallel_for(n_traj, [&](std::size_t i) {
        Rng rng = stream_rng(seed, i);
        double exponent = 0.0;
        std::size_t n_jumps = 0;
        SpinConfig last = s0;
        walk(
            passive, s0, T, rng,
            [&](const SpinConfig& s, double duration, const std::vector<Transition>& row, auto&,
                double) {
                const double v = model.diag(s) - passive_total(row);
                exponent -= (v + shift) * duration;
                last = s;
            },
            [&](std::size_t, auto&, auto&, double) { ++n_jumps; });
        values[i] = std::exp(exponent) * terminal(last);
        jumps[i] = static_cast<double>(n_jumps);
    });
    return summarize(values, jumps);
}

Estimate fk_importance_estimate(const RateMap& rates, const SpinConfig& s0, double T,
                                const Amplitude& terminal, std::size_t n_traj, std::uint64_t seed,
                                const FkOptions& options) {
    require_sampling_args(T, n_traj);
    std::vector<double> values(n_traj);
    std::vector<double> jumps(n_traj);
    const double shift = energy_term(options);
    const StoquasticModel& model = rates.model();
    if (T == 0.0) {
        const double value = terminal(s0);
        std::fill(values.begin(), values.end(), value);
        return summarize(values, jumps);
    }
    detail::parallel_for(n_traj, [&](std::size_t i) {
        Rng rng = stream_rng(seed, i);
        double log_weight = 0.0;
        std::size_t n_jumps = 0;
        SpinConfig last = s0;
        walk(
            rates, s0, T, rng,
            [&](const SpinConfig& s, double duration, const std::vector<Transition>& row,
                const std::vector<double>& theta, double theta_total) {
                for (std::size_t k = 0; k < row.size(); ++k) {
                    if (!(theta[k] > 0.0)) {
                        fail(ErrorCode::SupportMismatch,
                             "importance rates vanish where the passive rate does not at " +
                                 s.to_string());
                    }
                }
                const double gamma_total = passive_total(row);
                const double v = model.diag(s) - gamma_total;
                log_weight += (theta_total - gamma_total - v - shift) * duration;
                last = s;
            },
            [&](std::size_t k, const std::vector<Transition>& row, const std::vector<double>& theta,
                double) {
                log_weight += std::log(row[k].value / theta[k]);
                ++n_jumps;
            });
        values[i] = std::exp(log_weight) * terminal(last);
        jumps[i] = static_cast<double>(n_jumps);
    });
    return summarize(values, jumps);
}

double entropy_rate(std::span<const double> theta, std::span<const double> passive) {
    if (theta.size() != passive.size()) {
        fail(ErrorCode::SupportMismatch, "rate rows have different lengths");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double g = passive[k];
        const double t = theta[k];
        if (!(g >= 0.0) || !(t >= 0.0)) fail(ErrorCode::InvalidArgument, "rates must be non-negative");
        if (g == 0.0) {
            if (t > 0.0) fail(ErrorCode::SupportMismatch, "Gamma_theta > 0 where Gamma = 0");
            continue;
        }
        acc += g - t + (t > 0.0 ? t * std::log(t / g) : 0.0);
    }
    return acc;
}

Estimate objective_estimate(const RateMap& rates, const SpinConfig& s0, double T,
                            std::size_t n_traj, std::uint64_t seed) {
    require_sampling_args(T, n_traj);
    if (!(T > 0.0)) fail(ErrorCode::InvalidArgument, "T must be positive");
    std::vector<double> values(n_traj);
    std::vector<double> jumps(n_traj);
    const StoquasticModel& model = rates.model();
    detail::parallel_for(n_traj, [&](std::size_t i) {
        Rng rng = stream_rng(seed, i);
        double integral = 0.0;
        std::size_t n_jumps = 0;
        std::vector<double> gamma;
        walk(
            rates, s0, T, rng,
            [&](const SpinConfig& s, double duration, const std::vector<Transition>& row,
                const std::vector<double>& theta, double) {
                gamma.resize(row.size());
                for (std::size_t k = 0; k < row.size(); ++k) gamma[k] = row[k].value;
                const double v = model.diag(s) - passive_total(row);
                integral -= (v + entropy_rate(theta, gamma)) * duration;
            },
            [&](std::size_t, auto&, auto&, double) { ++n_jumps; });
        values[i] = integral / T;
        jumps[i] = static_cast<double>(n_jumps);
    });
    return summarize(values, jumps);
}

double objective_exact(const StoquasticModel& model, const RateTable& rates) {
    const std::vector<double> pi = stationary_distribution(rates);
    const StateSpace& space = *rates.space;
    std::vector<double> terms(space.size());
    std::vector<double> gamma;
    std::vector<double> theta;
    for (std::size_t i = 0; i < space.size(); ++i) {
        gamma.clear();
        model.for_each_offdiag(space[i], [&](Action, SpinConfig, double v) { gamma.push_back(-v); });
        theta.clear();
        for (const RateEntry& e : rates.row(i)) theta.push_back(e.rate);
        terms[i] = pi[i] * (-model.potential(space[i]) - entropy_rate(theta, gamma));
    }
    return pairwise_sum(terms);
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace lrl
