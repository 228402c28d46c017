// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lattice_rl/hamiltonian.hpp"
#include "lattice_rl/lattice.hpp"

namespace lrl {

/// Enumerated basis of a full space or a fixed-magnetization sector, in
/// ascending bit order, with constant-time (full) or logarithmic (sector)
/// reverse lookup.
class StateSpace {
public:
    StateSpace(const Lattice& lattice, std::optional<int> magnetization,
               int max_sites = kDefaultEnumerationCap);

    std::size_t size() const noexcept { return states_.size(); }
    const SpinConfig& operator[](std::size_t i) const noexcept { return states_[i]; }
    std::span<const SpinConfig> states() const noexcept { return states_; }
    std::optional<int> magnetization() const noexcept { return magnetization_; }
    int n_sites() const noexcept { return n_sites_; }

    std::optional<std::size_t> find(const SpinConfig& s) const noexcept;
    /// Index of `s`; throws InvalidArgument when `s` lies outside the space.
    std::size_t index(const SpinConfig& s) const;

private:
    std::vector<SpinConfig> states_;
    std::optional<int> magnetization_;
    int n_sites_ = 0;
};

using SharedSpace = std::shared_ptr<const StateSpace>;

/// Validated state space for `model`: sectors are only allowed when the
/// dynamics conserves magnetization.
SharedSpace make_space(const StoquasticModel& model, std::optional<int> magnetization,
                       int max_sites = kDefaultEnumerationCap);

/// Row-compressed Hamiltonian restricted to a state space.
struct SparseHamiltonian {
    SharedSpace space;
    std::vector<double> diagonal;
    std::vector<std::size_t> row_offsets;
    std::vector<std::uint32_t> columns;
    std::vector<double> values;

    std::size_t size() const noexcept { return diagonal.size(); }
    /// out = H * in.
    void apply(std::span<const double> in, std::span<double> out) const;
    double max_diagonal() const;
};

SparseHamiltonian build_hamiltonian(const StoquasticModel& model, SharedSpace space);

struct GroundState {
    SharedSpace space;
    double energy = 0.0;
    /// Positive, normalized so that the squares sum to one.
    std::vector<double> amplitudes;
    /// max_s |(H phi)(s) - E0 phi(s)|.
    double residual = 0.0;
    long iterations = 0;
    double shift = 0.0;

    double amplitude(const SpinConfig& s) const { return amplitudes[space->index(s)]; }
};

struct GroundStateOptions {
    /// Shift C of the iterated operator C - H; defaults to max_s H_ss + 1.
    std::optional<double> shift;
    double energy_tol = 1e-12;
    double residual_tol = 1e-10;
    long max_iterations = 2'000'000;
    int max_sites = kDefaultEnumerationCap;
};

/// Dominant eigenpair of C - H by power iteration from a uniform start.
GroundState ground_state_dense(const StoquasticModel& model, std::optional<int> magnetization,
                               const GroundStateOptions& options = {});

struct ChainEntry {
    std::uint32_t target = 0;
    double probability = 0.0;
};

/// Discrete-time chain s -> s' plus a per-state scale factor such that the
/// ground state obeys phi(s) = scale(s) * E_{s' ~ p(.|s)}[phi(s')].
struct MarkovChainSpec {
    SharedSpace space;
    std::vector<std::size_t> row_offsets;
    std::vector<ChainEntry> entries;
    /// Z(s) of the representation (row normalizer before division).
    std::vector<double> normalizer;
    std::vector<double> scale;

    std::span<const ChainEntry> row(std::size_t i) const {
        return {entries.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }
    double probability(std::size_t from, std::size_t to) const;
    /// max_s |phi(s) - scale(s) * sum_s' p(s'|s) phi(s')|.
    double fixed_point_residual(std::span<const double> phi) const;
};

/// Lazy representation: stay with probability (C - H_ss)/Z1, move to s' with
/// probability -H_ss'/Z1; scale Z1(s)/(C - E0).
MarkovChainSpec build_p1_chain(const StoquasticModel& model, SharedSpace space, double shift,
                               double energy);

/// Jump representation: never stays, moves with probability -H_ss'/Z2;
/// scale Z2(s)/(H_ss - E0).
MarkovChainSpec build_p2_chain(const StoquasticModel& model, SharedSpace space, double energy);

using Amplitude = std::function<double(const SpinConfig&)>;

/// (H phi)(s) / phi(s), including the diagonal term.
double local_energy(const StoquasticModel& model, const Amplitude& phi, const SpinConfig& s);

/// <phi|H|phi> / <phi|phi> over an enumerated space.
double variational_energy_exact(const SparseHamiltonian& hamiltonian, std::span<const double> phi);
double variational_energy_exact(const StoquasticModel& model, const StateSpace& space,
                                const Amplitude& phi);

} // namespace lrl
