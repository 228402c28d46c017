// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <utility>

#include "doctest.h"
#include "lattice_rl/error.hpp"
#include "lattice_rl/lattice.hpp"
#include "lattice_rl/rng.hpp"

using namespace lrl;

namespace {

// Counts unordered nearest-neighbour pairs straight from coordinates.
std::size_t brute_force_bond_count(int lx, int ly, bool periodic) {
    std::set<std::pair<int, int>> pairs;
    for (int y = 0; y < ly; ++y) {
        for (int x = 0; x < lx; ++x) {
            const int moves[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
            for (auto& m : moves) {
                int nx = x + m[0], ny = y + m[1];
                if (!periodic && (nx < 0 || nx >= lx || ny < 0 || ny >= ly)) continue;
                nx = (nx + lx) % lx;
                ny = (ny + ly) % ly;
                int a = y * lx + x, b = ny * lx + nx;
                if (a != b) pairs.insert({std::min(a, b), std::max(a, b)});
            }
        }
    }
    return pairs.size();
}

} // namespace

TEST_CASE("build_lattice examples") {
    auto ring = Lattice::chain(4, true);
    CHECK(ring.n_sites() == 4);
    CHECK(ring.bonds().size() == 4);

    auto pair = Lattice::chain(2, false);
    CHECK(pair.n_sites() == 2);
    CHECK(pair.bonds().size() == 1);

    auto sq = Lattice::square(3, true);
    CHECK(sq.n_sites() == 9);
    CHECK(sq.bonds().size() == brute_force_bond_count(3, 3, true));
    CHECK(sq.bonds().size() == 18);
}

TEST_CASE("bond lists match brute-force enumeration and neighbour counts") {
    for (int lx = 2; lx <= 5; ++lx) {
        for (bool periodic : {true, false}) {
            Lattice chain({lx}, {periodic});
            std::size_t expected = periodic ? (lx == 2 ? 1 : lx) : lx - 1;
            CHECK(chain.bonds().size() == expected);
            for (int ly = 2; ly <= 4; ++ly) {
                Lattice lat({lx, ly}, {periodic, periodic});
                CHECK(lat.bonds().size() == brute_force_bond_count(lx, ly, periodic));
                std::set<std::pair<int, int>> seen;
                for (const Bond& b : lat.bonds()) CHECK(seen.insert({b.a, b.b}).second);
            }
        }
    }
    auto sq = Lattice::square(4, true);
    for (int s = 0; s < sq.n_sites(); ++s) CHECK(sq.neighbors(s).size() == 4);
    auto ring = Lattice::chain(6, true);
    for (int s = 0; s < ring.n_sites(); ++s) CHECK(ring.neighbors(s).size() == 2);
    auto open = Lattice::square(3, false);
    for (int s = 0; s < open.n_sites(); ++s) CHECK(open.neighbors(s).size() >= 1);
}

TEST_CASE("row-major site ordering") {
    Lattice lat({3, 2}, {true, true});
    CHECK(lat.site_at(2, 1) == 5);
    CHECK(lat.coords(4) == std::array<int, 2>{1, 1});
}

TEST_CASE("invalid lattices are rejected") {
    CHECK_THROWS_AS(Lattice::chain(1), Error);
    CHECK_THROWS_AS(Lattice({2, 2, 2}, {true, true, true}), Error);
    try {
        Lattice({4, 1}, {true, true});
        FAIL("expected InvalidLattice");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidLattice);
    }
}

TEST_CASE("apply_action examples") {
    auto lat = Lattice::chain(2, false);
    auto upup = SpinConfig::from_string("++");
    CHECK(apply_action(lat, upup, Action::flip(0)).to_string() == "-+");
    auto updown = SpinConfig::from_string("+-");
    CHECK(apply_action(lat, updown, Action::exchange(0)).to_string() == "-+");
    CHECK(apply_action(lat, updown, Action::stay()) == updown);
    try {
        apply_action(lat, upup, Action::exchange(0));
        FAIL("expected InvalidAction");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidAction);
    }
}

TEST_CASE("flip is an involution and exchange conserves magnetization") {
    auto lat = Lattice::square(3, true);
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        SpinConfig s(9, rng() & 0x1ff);
        for (int i = 0; i < 9; ++i) {
            CHECK(apply_action(lat, apply_action(lat, s, Action::flip(i)), Action::flip(i)) == s);
        }
        for (int b = 0; b < static_cast<int>(lat.bonds().size()); ++b) {
            const Bond& bond = lat.bonds()[b];
            if (s.up(bond.a) == s.up(bond.b)) continue;
            CHECK(apply_action(lat, s, Action::exchange(b)).magnetization() == s.magnetization());
        }
    }
}

TEST_CASE("spin configuration invariants") {
    CHECK_THROWS_AS(SpinConfig(3, 0b1000), Error);
    for (std::uint64_t bits = 0; bits < 32; ++bits) {
        SpinConfig s(5, bits);
        CHECK(std::abs(s.magnetization()) <= 5);
        CHECK(((s.magnetization() + 5) % 2) == 0);
        CHECK(SpinConfig::from_string(s.to_string()) == s);
    }
    CHECK(SpinConfig::from_string("+--").bits() == 1);
    CHECK_THROWS_AS(SpinConfig::from_string("+x"), Error);
}

TEST_CASE("enumerate_states examples") {
    auto lat = Lattice::chain(2, false);
    auto all = enumerate_states(lat);
    REQUIRE(all.size() == 4);
    for (std::uint64_t i = 0; i < 4; ++i) CHECK(all[i].bits() == i);
    auto sector = enumerate_states(lat, 0);
    REQUIRE(sector.size() == 2);
    CHECK(sector[0].bits() == 0b01);
    CHECK(sector[1].bits() == 0b10);
    CHECK(enumerate_states(Lattice::chain(4), 0).size() == 6);
}

TEST_CASE("enumerate_states cardinality and ordering") {
    auto binom = [](int n, int k) {
        double r = 1;
        for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return static_cast<std::size_t>(r + 0.5);
    };
    for (int n : {4, 6, 9, 12}) {
        Lattice lat = n == 9 ? Lattice::square(3) : Lattice::chain(n);
        auto all = enumerate_states(lat);
        CHECK(std::set<SpinConfig>(all.begin(), all.end()).size() == (std::size_t{1} << n));
        for (int up = 0; up <= n; ++up) {
            auto sector = enumerate_states(lat, 2 * up - n);
            CHECK(std::set<SpinConfig>(sector.begin(), sector.end()).size() == binom(n, up));
            CHECK(std::is_sorted(sector.begin(), sector.end()));
            for (auto& s : sector) CHECK(s.n_up() == up);
        }
    }
    CHECK_THROWS_AS(enumerate_states(Lattice::square(5)), Error);
    CHECK_THROWS_AS(enumerate_states(Lattice::chain(4), 1), Error);
}

TEST_CASE("translate_config examples") {
    auto ring = Lattice::chain(4, true);
    auto s = SpinConfig::from_string("+---");
    CHECK(translate_config(s, ring, {1, 0}).to_string() == "-+--");
    auto up = SpinConfig::all_up(4);
    for (int k = 0; k < 4; ++k) CHECK(translate_config(up, ring, {k, 0}) == up);
    auto t = SpinConfig::from_string("+-+-");
    CHECK(translate_config(t, ring, {4, 0}) == t);
    CHECK(translate_config(translate_config(s, ring, {3, 0}), ring, {-3, 0}) == s);
    try {
        translate_config(s, Lattice::chain(4, false), {1, 0});
        FAIL("expected SymmetryUnavailable");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SymmetryUnavailable);
    }
}

TEST_CASE("translations preserve magnetization and bond energy") {
    for (auto lat : {Lattice::chain(8), Lattice({4, 2}, {true, true})}) {
        for (const SpinConfig& s : enumerate_states(lat)) {
            for (int dx = 0; dx < lat.width(); ++dx) {
                for (int dy = 0; dy < lat.height(); ++dy) {
                    auto t = translate_config(s, lat, {dx, dy});
                    CHECK(t.magnetization() == s.magnetization());
                    CHECK(bond_sum(lat, t) == bond_sum(lat, s));
                }
            }
        }
    }
}
