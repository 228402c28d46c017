// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lattice_rl/error.hpp"

namespace lrl {

StateSpace::StateSpace(const Lattice& lattice, std::optional<int> magnetization, int max_sites)
    : states_(enumerate_states(lattice, magnetization, max_sites)),
      magnetization_(magnetization),
      n_sites_(lattice.n_sites()) {}

std::optional<std::size_t> StateSpace::find(const SpinConfig& s) const noexcept {
    if (s.n_sites() != n_sites_) return std::nullopt;
    if (!magnetization_) return static_cast<std::size_t>(s.bits());
    auto it = std::lower_bound(states_.begin(), states_.end(), s);
    if (it == states_.end() || *it != s) return std::nullopt;
    return static_cast<std::size_t>(it - states_.begin());
}

std::size_t StateSpace::index(const SpinConfig& s) const {
    auto i = find(s);
    if (!i) fail(ErrorCode::InvalidArgument, "configuration " + s.to_string() + " not in space");
    return *i;
}

SharedSpace make_space(const StoquasticModel& model, std::optional<int> magnetization,
                       int max_sites) {
    if (magnetization && !model.conserves_magnetization()) {
        fail(ErrorCode::InvalidArgument,
             "the Ising dynamics does not conserve magnetization; omit the sector");
    }
    return std::make_shared<const StateSpace>(model.lattice(), magnetization, max_sites);
}

void SparseHamiltonian::apply(std::span<const double> in, std::span<double> out) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = diagonal[i] * in[i];
        for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            acc += values[k] * in[columns[k]];
        }
        out[i] = acc;
    }
}

double SparseHamiltonian::max_diagonal() const {
    return *std::max_element(diagonal.begin(), diagonal.end());
}

SparseHamiltonian build_hamiltonian(const StoquasticModel& model, SharedSpace space) {
    SparseHamiltonian h;
    const std::size_t n = space->size();
    h.diagonal.resize(n);
    h.row_offsets.reserve(n + 1);
    h.row_offsets.push_back(0);
    for (std::size_t i = 0; i < n; ++i) {
        const SpinConfig& s = (*space)[i];
        h.diagonal[i] = model.diag(s);
        model.for_each_offdiag(s, [&](Action, SpinConfig t, double v) {
            h.columns.push_back(static_cast<std::uint32_t>(space->index(t)));
            h.values.push_back(v);
        });
        h.row_offsets.push_back(h.columns.size());
    }
    h.space = std::move(space);
    return h;
}

GroundState ground_state_dense(const StoquasticModel& model, std::optional<int> magnetization,
                               const GroundStateOptions& options) {
    auto space = make_space(model, magnetization, options.max_sites);
    if (!check_ergodic(model, magnetization, options.max_sites).ergodic) {
        fail(ErrorCode::DegenerateGroundState,
             "passive dynamics is not ergodic on this sector; the ground state is not unique");
    }
    const SparseHamiltonian h = build_hamiltonian(model, space);
    const std::size_t n = h.size();
    const double shift = options.shift.value_or(h.max_diagonal() + 1.0);
    if (!(shift > h.max_diagonal())) {
        fail(ErrorCode::InvalidShift, "shift must exceed max_s H_ss");
    }

    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> hx(n);
    double previous = std::numeric_limits<double>::infinity();
    GroundState gs;
    gs.shift = shift;
    for (long it = 1; it <= options.max_iterations; ++it) {
        h.apply(x, hx);
        double rq = 0.0;
        for (std::size_t i = 0; i < n; ++i) rq += x[i] * hx[i];
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            residual = std::max(residual, std::abs(hx[i] - rq * x[i]));
        }
        if (std::abs(rq - previous) < options.energy_tol && residual < options.residual_tol) {
            gs.energy = rq;
            gs.residual = residual;
            gs.iterations = it;
            gs.amplitudes = std::move(x);
            gs.space = std::move(space);
            return gs;
        }
        previous = rq;
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = shift * x[i] - hx[i];
            norm += x[i] * x[i];
        }
        norm = std::sqrt(norm);
        for (double& v : x) v /= norm;
    }
    fail(ErrorCode::ConvergenceFailure,
         "power iteration did not converge in " + std::to_string(options.max_iterations) +
             " iterations");
}

double MarkovChainSpec::probability(std::size_t from, std::size_t to) const {
    double p = 0.0;
    for (const ChainEntry& e : row(from)) {
        if (e.target == to) p += e.probability;
    }
    return p;
}

double MarkovChainSpec::fixed_point_residual(std::span<const double> phi) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < scale.size(); ++i) {
        double expect = 0.0;
        for (const ChainEntry& e : row(i)) expect += e.probability * phi[e.target];
        worst = std::max(worst, std::abs(phi[i] - scale[i] * expect));
    }
    return worst;
}

MarkovChainSpec build_p1_chain(const StoquasticModel& model, SharedSpace space, double shift,
                               double energy) {
    MarkovChainSpec chain;
    const std::size_t n = space->size();
    chain.row_offsets.push_back(0);
    for (std::size_t i = 0; i < n; ++i) {
        const SpinConfig& s = (*space)[i];
        const double hss = model.diag(s);
        if (!(shift > hss)) fail(ErrorCode::InvalidShift, "shift must exceed max_s H_ss");
        const double z1 = shift - hss - model.offdiag_sum(s);
        chain.entries.push_back({static_cast<std::uint32_t>(i), (shift - hss) / z1});
        model.for_each_offdiag(s, [&](Action, SpinConfig t, double v) {
            chain.entries.push_back({static_cast<std::uint32_t>(space->index(t)), -v / z1});
        });
        chain.row_offsets.push_back(chain.entries.size());
        chain.normalizer.push_back(z1);
        chain.scale.push_back(z1 / (shift - energy));
    }
    chain.space = std::move(space);
    return chain;
}

MarkovChainSpec build_p2_chain(const StoquasticModel& model, SharedSpace space, double energy) {
    MarkovChainSpec chain;
    const std::size_t n = space->size();
    chain.row_offsets.push_back(0);
    for (std::size_t i = 0; i < n; ++i) {
        const SpinConfig& s = (*space)[i];
        const double hss = model.diag(s);
        const double z2 = -model.offdiag_sum(s);
        if (!(z2 > 0.0)) {
            fail(ErrorCode::NonErgodic, "state " + s.to_string() + " has no transitions");
        }
        if (!(hss - energy > 0.0)) {
            fail(ErrorCode::InvalidScale, "H_ss - E0 must be positive at " + s.to_string());
        }
        model.for_each_offdiag(s, [&](Action, SpinConfig t, double v) {
            chain.entries.push_back({static_cast<std::uint32_t>(space->index(t)), -v / z2});
        });
        chain.row_offsets.push_back(chain.entries.size());
        chain.normalizer.push_back(z2);
        chain.scale.push_back(z2 / (hss - energy));
    }
    chain.space = std::move(space);
    return chain;
}

double local_energy(const StoquasticModel& model, const Amplitude& phi, const SpinConfig& s) {
    const double center = phi(s);
    if (center == 0.0) {
        fail(ErrorCode::DivisionByZeroAmplitude, "phi vanishes at " + s.to_string());
    }
    double acc = model.diag(s) * center;
    model.for_each_offdiag(s, [&](Action, SpinConfig t, double v) { acc += v * phi(t); });
    return acc / center;
}

double variational_energy_exact(const SparseHamiltonian& hamiltonian, std::span<const double> phi) {
    std::vector<double> hphi(hamiltonian.size());
    hamiltonian.apply(phi, hphi);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        num += phi[i] * hphi[i];
        den += phi[i] * phi[i];
    }
    if (!(den > 0.0)) fail(ErrorCode::InvalidWavefunction, "wavefunction is identically zero");
    return num / den;
}

double variational_energy_exact(const StoquasticModel& model, const StateSpace& space,
                                const Amplitude& phi) {
    std::vector<double> values(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) values[i] = phi(space[i]);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < space.size(); ++i) {
        const SpinConfig& s = space[i];
        double hphi = model.diag(s) * values[i];
        model.for_each_offdiag(s, [&](Action, SpinConfig t, double v) {
            hphi += v * values[space.index(t)];
        });
        num += values[i] * hphi;
        den += values[i] * values[i];
    }
    if (!(den > 0.0)) fail(ErrorCode::InvalidWavefunction, "wavefunction is identically zero");
    return num / den;
}

} // namespace lrl
