// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "lattice_rl/error.hpp"
#include "lattice_rl/exact.hpp"
#include "lattice_rl/rng.hpp"
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

std::vector<std::uint64_t> bits_of(const StateSpace& space) {
    std::vector<std::uint64_t> out;
    for (auto& s : space.states()) out.push_back(s.bits());
    return out;
}

} // namespace

TEST_CASE("ground_state_dense examples") {
    auto pair = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    auto gs = ground_state_dense(pair, std::nullopt);
    auto ref = oracle::lowest_eigenpair(oracle::dense_hamiltonian(pair.lattice(), 0, 1.0, 1.0));
    CHECK(ref.energy == doctest::Approx(-std::sqrt(5.0)).epsilon(1e-14));
    CHECK(std::abs(gs.energy - ref.energy) < 1e-10);
    CHECK(gs.residual < 1e-10);
    for (double a : gs.amplitudes) CHECK(a > 0.0);

    auto xxx = StoquasticModel::xxz(Lattice::chain(4, true), 1.0, 1.0);
    auto flat = ground_state_dense(xxx, 0);
    CHECK(std::abs(flat.energy + 4.0) < 1e-10);
    const double uniform = 1.0 / std::sqrt(6.0);
    for (double a : flat.amplitudes) CHECK(std::abs(a - uniform) < 1e-10);

    auto classical = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1e-3);
    CHECK(std::abs(ground_state_dense(classical, std::nullopt).energy + 1.0) < 1e-5);
}

TEST_CASE("ground state matches the dense eigensolver oracle") {
    struct Case {
        StoquasticModel model;
        std::optional<int> sector;
        int kind;
    };
    std::vector<Case> cases = {
        {StoquasticModel::ising(Lattice::chain(8, true), 1.0, 1.0), std::nullopt, 0},
        {StoquasticModel::ising(Lattice::square(3, true), 1.0, 1.0), std::nullopt, 0},
        {StoquasticModel::ising(Lattice({3, 2}, {false, false}), 0.4, 1.0), std::nullopt, 0},
        {StoquasticModel::xxz(Lattice::chain(8, true), 0.5, 1.0), 0, 1},
        {StoquasticModel::xxz(Lattice::chain(7, false), -1.0, 0.6), 1, 1},
    };
    for (auto& c : cases) {
        auto gs = ground_state_dense(c.model, c.sector);
        auto dense = oracle::dense_hamiltonian(c.model.lattice(), c.kind, c.model.J(),
                                               c.kind == 0 ? c.model.h() : c.model.J_perp());
        auto ref = oracle::lowest_eigenpair(oracle::restrict_to(dense, bits_of(*gs.space)));
        CHECK(std::abs(gs.energy - ref.energy) < 1e-10);
        CHECK(gs.residual < 1e-10);
        double worst = 0.0;
        for (std::size_t i = 0; i < gs.amplitudes.size(); ++i) {
            worst = std::max(worst, std::abs(gs.amplitudes[i] - ref.vector(i)));
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("ground state energy is independent of the shift") {
    auto model = StoquasticModel::ising(Lattice::chain(6, true), 0.8, 1.1);
    GroundStateOptions a;
    GroundStateOptions b;
    b.shift = 20.0;
    CHECK(std::abs(ground_state_dense(model, std::nullopt, a).energy -
                   ground_state_dense(model, std::nullopt, b).energy) < 1e-10);
}

TEST_CASE("ground state errors") {
    auto frozen = StoquasticModel::ising(Lattice::chain(3), 1.0, 0.0, ModelCheck::AllowNonErgodic);
    CHECK(code_of([&] { ground_state_dense(frozen, std::nullopt); }) ==
          ErrorCode::DegenerateGroundState);
    auto xxz = StoquasticModel::xxz(Lattice::chain(4), 1.0, 1.0);
    CHECK(code_of([&] { ground_state_dense(xxz, std::nullopt); }) ==
          ErrorCode::DegenerateGroundState);
    GroundStateOptions tight;
    tight.max_iterations = 3;
    CHECK(code_of([&] {
              ground_state_dense(StoquasticModel::ising(Lattice::chain(6), 1, 1), std::nullopt,
                                 tight);
          }) == ErrorCode::ConvergenceFailure);
    GroundStateOptions low;
    low.shift = -5.0;
    CHECK(code_of([&] {
              ground_state_dense(StoquasticModel::ising(Lattice::chain(4), 1, 1), std::nullopt, low);
          }) == ErrorCode::InvalidShift);
}

TEST_CASE("p1 chain examples") {
    auto model = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    auto space = make_space(model, std::nullopt);
    const double e0 = -std::sqrt(5.0);
    auto chain = build_p1_chain(model, space, 2.0, e0);
    const std::size_t upup = space->index(SpinConfig::from_string("++"));
    CHECK(chain.normalizer[upup] == doctest::Approx(5.0));
    CHECK(chain.probability(upup, upup) == doctest::Approx(3.0 / 5.0));
    CHECK(chain.probability(upup, space->index(SpinConfig::from_string("-+"))) ==
          doctest::Approx(1.0 / 5.0));
    CHECK(chain.probability(upup, space->index(SpinConfig::from_string("+-"))) ==
          doctest::Approx(1.0 / 5.0));
    CHECK(code_of([&] { build_p1_chain(model, space, 1.0, e0); }) == ErrorCode::InvalidShift);
}

TEST_CASE("both stochastic representations have the ground state as fixed point") {
    std::vector<std::pair<StoquasticModel, std::optional<int>>> cases = {
        {StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0), std::nullopt},
        {StoquasticModel::ising(Lattice::chain(8, true), 1.0, 1.0), std::nullopt},
        {StoquasticModel::ising(Lattice::square(3, true), 0.5, 1.0), std::nullopt},
        {StoquasticModel::xxz(Lattice::chain(8, true), 0.4, 1.0), 0},
    };
    for (auto& [model, sector] : cases) {
        auto gs = ground_state_dense(model, sector);
        auto h = build_hamiltonian(model, gs.space);
        auto p1 = build_p1_chain(model, gs.space, h.max_diagonal() + 1.0, gs.energy);
        auto p2 = build_p2_chain(model, gs.space, gs.energy);
        for (const auto* chain : {&p1, &p2}) {
            for (std::size_t i = 0; i < gs.space->size(); ++i) {
                double total = 0.0;
                for (auto& e : chain->row(i)) {
                    CHECK(e.probability >= 0.0);
                    total += e.probability;
                }
                CHECK(std::abs(total - 1.0) < 1e-12);
            }
            CHECK(chain->fixed_point_residual(gs.amplitudes) < 1e-10);
        }
        for (std::size_t i = 0; i < gs.space->size(); ++i) CHECK(p2.probability(i, i) == 0.0);
    }
}

TEST_CASE("p2 chain examples and errors") {
    auto model = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    auto space = make_space(model, std::nullopt);
    auto chain = build_p2_chain(model, space, -std::sqrt(5.0));
    const std::size_t upup = space->index(SpinConfig::from_string("++"));
    CHECK(chain.normalizer[upup] == doctest::Approx(2.0));
    CHECK(chain.probability(upup, space->index(SpinConfig::from_string("-+"))) ==
          doctest::Approx(0.5));
    CHECK(chain.probability(upup, upup) == 0.0);
    CHECK(code_of([&] { build_p2_chain(model, space, -1.0); }) == ErrorCode::InvalidScale);

    auto xxz = StoquasticModel::xxz(Lattice::chain(4), 1.0, 1.0);
    CHECK(code_of([&] { build_p2_chain(xxz, make_space(xxz, std::nullopt), -10.0); }) ==
          ErrorCode::NonErgodic);
}

TEST_CASE("local_energy examples") {
    auto model = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    auto gs = ground_state_dense(model, std::nullopt);
    Amplitude exact = [&](const SpinConfig& s) { return gs.amplitude(s); };
    for (auto& s : gs.space->states()) {
        CHECK(std::abs(local_energy(model, exact, s) - gs.energy) < 1e-9);
    }
    Amplitude uniform = [](const SpinConfig&) { return 1.0; };
    CHECK(local_energy(model, uniform, SpinConfig::from_string("++")) == doctest::Approx(-3.0));

    auto xxx = StoquasticModel::xxz(Lattice::chain(4, true), 1.0, 1.0);
    for (auto& s : enumerate_states(xxx.lattice(), 0)) {
        CHECK(local_energy(xxx, uniform, s) == doctest::Approx(-4.0));
    }
    Amplitude zero = [](const SpinConfig&) { return 0.0; };
    CHECK(code_of([&] { local_energy(model, zero, SpinConfig::all_up(2)); }) ==
          ErrorCode::DivisionByZeroAmplitude);
}

TEST_CASE("variational_energy_exact examples and the variational principle") {
    auto model = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    auto gs = ground_state_dense(model, std::nullopt);
    auto h = build_hamiltonian(model, gs.space);
    CHECK(std::abs(variational_energy_exact(h, gs.amplitudes) - gs.energy) < 1e-12);
    std::vector<double> uniform(4, 1.0);
    CHECK(variational_energy_exact(h, uniform) == doctest::Approx(-2.0));
    Amplitude one = [](const SpinConfig&) { return 1.0; };
    CHECK(variational_energy_exact(model, *gs.space, one) == doctest::Approx(-2.0));
    std::vector<double> zeros(4, 0.0);
    CHECK(code_of([&] { variational_energy_exact(h, zeros); }) == ErrorCode::InvalidWavefunction);

    Rng rng(11);
    for (auto m : {StoquasticModel::ising(Lattice::chain(10, true), 1.0, 1.0),
                   StoquasticModel::ising(Lattice::square(3, true), 0.3, 1.0)}) {
        auto g = ground_state_dense(m, std::nullopt);
        auto hm = build_hamiltonian(m, g.space);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> phi(g.space->size());
            for (double& v : phi) v = 0.01 + uniform01(rng);
            CHECK(variational_energy_exact(hm, phi) >= g.energy - 1e-12);
        }
    }
}
