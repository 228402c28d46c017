// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "lattice_rl/error.hpp"
#include "lattice_rl/fk_sim.hpp"
#include "oracles.hpp"

using namespace lrl;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode{};
}

struct Oracle {
    SharedSpace space;
    double energy;
    std::vector<double> phi;

    double operator()(const SpinConfig& s) const { return phi[space->index(s)]; }
};

Oracle ising_oracle(const StoquasticModel& m) {
    auto space = make_space(m, std::nullopt);
    auto dense = oracle::dense_hamiltonian(m.lattice(), 0, m.J(), m.h());
    auto pair = oracle::lowest_eigenpair(dense);
    return {space, pair.energy, {pair.vector.data(), pair.vector.data() + pair.vector.size()}};
}

bool within_sigma(double a, double b, double sigma, double k = 3.0) {
    return std::abs(a - b) <= k * sigma;
}

} // namespace

TEST_CASE("simulate_ctmc holding times and jump counts") {
    auto pair = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    // only site 0 may flip, at rate 2
    auto single = RateMap::custom(pair, [](const SpinConfig&, std::span<const Transition>,
                                           std::span<double> out) { out[0] = 2.0; });
    const int runs = 20000;
    double sum = 0.0;
    for (int i = 0; i < runs; ++i) {
        Rng rng = stream_rng(11, i);
        auto traj = simulate_ctmc(single, SpinConfig::all_up(2), 100.0, rng);
        sum += traj.jump_times.front();
    }
    CHECK(within_sigma(sum / runs, 0.5, 0.5 / std::sqrt(double(runs))));

    auto ring = StoquasticModel::ising(Lattice::chain(4, true), 1.0, 1.0);
    auto passive = RateMap::passive(ring);
    double jumps = 0.0;
    for (int i = 0; i < runs; ++i) {
        Rng rng = stream_rng(12, i);
        auto traj = simulate_ctmc(passive, SpinConfig::all_up(4), 1.0, rng);
        jumps += static_cast<double>(traj.n_jumps());
        for (std::size_t k = 0; k < traj.n_jumps(); ++k) {
            REQUIRE(traj.jump_times[k] < 1.0);
            if (k > 0) REQUIRE(traj.jump_times[k] > traj.jump_times[k - 1]);
            auto diff = traj.states[k].bits() ^ traj.states[k + 1].bits();
            REQUIRE(std::popcount(diff) == 1);
        }
    }
    CHECK(within_sigma(jumps / runs, 4.0, std::sqrt(4.0 / runs)));

    auto frozen = RateMap::custom(pair, [](auto&, auto, std::span<double>) {});
    Rng rng(3);
    auto still = simulate_ctmc(frozen, SpinConfig::from_string("+-"), 5.0, rng);
    CHECK(still.n_jumps() == 0);
    CHECK(still.states.size() == 1);
}

TEST_CASE("fk_estimate examples") {
    auto xxx = StoquasticModel::xxz(Lattice::chain(4, true), 1.0, 1.0);
    auto flat = fk_estimate(xxx, SpinConfig::from_string("+-+-"), 0.7,
                            [](const SpinConfig&) { return 1.0; }, 50, 1);
    CHECK(flat.mean == doctest::Approx(std::exp(4.0 * 0.7)).epsilon(1e-12));
    CHECK(flat.variance < 1e-20 * flat.mean * flat.mean);

    auto pair = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    Oracle phi = ising_oracle(pair);
    CHECK(phi.energy == doctest::Approx(-std::sqrt(5.0)));
    const SpinConfig s0 = SpinConfig::all_up(2);
    FkOptions opts;
    opts.energy = phi.energy;
    auto est = fk_estimate(pair, s0, 1.0, phi, 100000, 7, opts);
    CHECK(within_sigma(est.mean, phi(s0), est.std_error));

    auto zero = fk_estimate(pair, s0, 0.0, phi, 10, 7, opts);
    CHECK(zero.mean == phi(s0));
    CHECK(zero.variance == 0.0);

    // The other sign is off by exp(-2 E0 T).
    opts.sign = EnergySign::PlusE0;
    auto flipped = fk_estimate(pair, s0, 1.0, phi, 100000, 7, opts);
    CHECK(within_sigma(flipped.mean, phi(s0) * std::exp(-2.0 * phi.energy), flipped.std_error));
    CHECK_FALSE(within_sigma(flipped.mean, phi(s0), flipped.std_error));
}

TEST_CASE("fk_estimate is T-independent at the ground state") {
    auto ring = StoquasticModel::ising(Lattice::chain(4, true), 1.0, 1.0);
    Oracle phi = ising_oracle(ring);
    const SpinConfig s0 = SpinConfig::from_string("++-+");
    FkOptions opts;
    opts.energy = phi.energy;
    for (double T : {0.5, 1.0, 2.0}) {
        auto est = fk_estimate(ring, s0, T, phi, 100000, 100 + static_cast<int>(T * 10), opts);
        CAPTURE(T);
        CHECK(within_sigma(est.mean, phi(s0), est.std_error));
    }
}

TEST_CASE("estimates are reproducible per seed") {
    auto ring = StoquasticModel::ising(Lattice::chain(4, true), 1.0, 1.0);
    auto one = [](const SpinConfig&) { return 1.0; };
    auto a = fk_estimate(ring, SpinConfig::all_up(4), 1.0, one, 1000, 5);
    auto b = fk_estimate(ring, SpinConfig::all_up(4), 1.0, one, 1000, 5);
    auto c = fk_estimate(ring, SpinConfig::all_up(4), 1.0, one, 1000, 6);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
    CHECK(a.mean != c.mean);
}

TEST_CASE("entropy_rate") {
    std::vector<double> g{1.0, 2.0};
    CHECK(entropy_rate(g, g) == 0.0);
    CHECK(entropy_rate(std::vector<double>{2.0}, std::vector<double>{1.0}) ==
          doctest::Approx(1.0 - 2.0 + 2.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(entropy_rate(std::vector<double>{1e-300}, std::vector<double>{1.0}) ==
          doctest::Approx(1.0));
    CHECK(entropy_rate(std::vector<double>{0.0}, std::vector<double>{1.0}) == 1.0);
    CHECK(code_of([] { entropy_rate(std::vector<double>{1.0}, std::vector<double>{0.0}); }) ==
          ErrorCode::SupportMismatch);
    CHECK(code_of([] { entropy_rate(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}); }) ==
          ErrorCode::SupportMismatch);

    Rng rng(99);
    std::uniform_real_distribution<double> u(0.01, 5.0);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> a{u(rng), u(rng), u(rng)};
        std::vector<double> b{u(rng), u(rng), u(rng)};
        REQUIRE(entropy_rate(a, b) >= 0.0);
        REQUIRE(std::abs(entropy_rate(a, a)) < 1e-12);
    }
}

TEST_CASE("objective at the Doob rates equals -E0") {
    auto ring = StoquasticModel::ising(Lattice::chain(4, true), 1.0, 1.0);
    Oracle phi = ising_oracle(ring);
    auto doob = RateMap::doob(ring, phi);
    auto est = objective_estimate(doob, SpinConfig::all_up(4), 200.0, 40, 21);
    CHECK(within_sigma(est.mean, -phi.energy, est.std_error));

    auto table = optimal_rates(ring, phi.space, phi.phi);
    CHECK(std::abs(objective_exact(ring, table) + phi.energy) < 1e-10);
    auto passive_value = objective_exact(ring, passive_rate_table(ring, phi.space));
    CHECK(passive_value < -phi.energy);
    auto passive = objective_estimate(RateMap::passive(ring), SpinConfig::all_up(4), 200.0, 40, 22);
    CHECK(passive.mean <= -phi.energy + 3.0 * passive.std_error);

    auto xxx = StoquasticModel::xxz(Lattice::chain(4, true), 1.0, 1.0);
    auto flat = objective_estimate(RateMap::passive(xxx), SpinConfig::from_string("++--"), 10.0, 4, 1);
    CHECK(flat.mean == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("entropy-reward balance at the tabular continuous-time optimum") {
    for (int n : {4, 8}) {
        auto ring = StoquasticModel::ising(Lattice::chain(n, true), 1.0, 0.9);
        auto space = make_space(ring, std::nullopt);
        Mdp fk(ring, Formulation::continuous_fk(1e-4), space.get());
        auto table = solve_tabular(fk, space);
        std::vector<double> phi(table.values.size());
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = std::exp(table.values[i]);
        auto dense = oracle::dense_hamiltonian(ring.lattice(), 0, ring.J(), ring.h());
        const double e0 = oracle::lowest_eigenpair(dense).energy;
        CAPTURE(n);
        CHECK(std::abs(objective_exact(ring, optimal_rates(ring, space, phi)) + e0) < 1e-6);
    }
}

TEST_CASE("importance sampling") {
    auto pair = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    Oracle phi = ising_oracle(pair);
    const SpinConfig s0 = SpinConfig::from_string("+-");
    FkOptions opts;
    opts.energy = phi.energy;

    auto plain = fk_estimate(pair, s0, 1.0, phi, 20000, 31, opts);
    auto same = fk_importance_estimate(RateMap::passive(pair), s0, 1.0, phi, 20000, 31, opts);
    CHECK(same.mean == doctest::Approx(plain.mean).epsilon(1e-12));

    auto ideal = fk_importance_estimate(RateMap::doob(pair, phi), s0, 2.0, phi, 5000, 32, opts);
    CHECK(ideal.variance / (ideal.mean * ideal.mean) < 1e-20);
    CHECK(ideal.mean == doctest::Approx(phi(s0)).epsilon(1e-12));

    auto reference = fk_estimate(pair, s0, 1.0, phi, 100000, 33, opts);
    auto boosted = fk_importance_estimate(RateMap::scaled(pair, 1.5), s0, 1.0, phi, 100000, 34, opts);
    const double combined = std::hypot(reference.std_error, boosted.std_error);
    CHECK(within_sigma(boosted.mean, reference.mean, combined));
    CHECK(boosted.variance != doctest::Approx(reference.variance));

    auto ring = StoquasticModel::ising(Lattice::chain(4, true), 1.0, 1.0);
    Oracle rphi = ising_oracle(ring);
    FkOptions ropts;
    ropts.energy = rphi.energy;
    auto base = fk_estimate(ring, SpinConfig::all_up(4), 1.0, rphi, 50000, 40, ropts);
    Rng rng(41);
    std::uniform_real_distribution<double> factor(0.5, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        auto table = passive_rate_table(ring, rphi.space);
        for (auto& e : table.entries) e.rate *= factor(rng);
        auto map = RateMap::from_table(ring, table);
        auto est = fk_importance_estimate(map, SpinConfig::all_up(4), 1.0, rphi, 50000, 50 + trial, ropts);
        CAPTURE(trial);
        CHECK(within_sigma(est.mean, base.mean, std::hypot(est.std_error, base.std_error)));
    }

    auto holes = RateMap::custom(pair, [](auto&, std::span<const Transition>, std::span<double> out) {
        out[0] = 1.0;
    });
    CHECK(code_of([&] { fk_importance_estimate(holes, s0, 1.0, phi, 10, 1, opts); }) ==
          ErrorCode::SupportMismatch);
    CHECK(code_of([&] { fk_estimate(pair, s0, 1.0, phi, 1, 1, opts); }) ==
          ErrorCode::InvalidArgument);
}
