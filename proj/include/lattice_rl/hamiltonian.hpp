// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lattice_rl/lattice.hpp"

namespace lrl {

enum class ModelKind { Ising, Xxz };

/// Off-diagonal matrix element H_ss' (or a passive rate, depending on the
/// producer) together with the action that maps s to s'.
struct Transition {
    Action action;
    SpinConfig target;
    double value = 0.0;
};

/// Whether construction insists on an ergodic passive dynamics. Permissive
/// construction still rejects non-stoquastic couplings (h < 0, J_perp < 0).
enum class ModelCheck { Strict, AllowNonErgodic };

/// Transverse-field Ising, H = -J sum ZZ - h sum X, or XXZ,
/// H = -sum [J ZZ + J_perp (XX + YY)], in the Z basis. J > 0 is ferromagnetic.
///
/// Writing H = -Gamma + V splits the Hamiltonian into passive rates
/// Gamma_{s->s'} = -H_ss' and a diagonal potential
/// V(s) = H_ss + sum_{s' != s} H_ss'.
class StoquasticModel {
public:
    static StoquasticModel ising(Lattice lattice, double J, double h,
                                 ModelCheck check = ModelCheck::Strict);
    static StoquasticModel xxz(Lattice lattice, double J, double J_perp,
                               ModelCheck check = ModelCheck::Strict);

    ModelKind kind() const noexcept { return kind_; }
    const Lattice& lattice() const noexcept { return lattice_; }
    int n_sites() const noexcept { return lattice_.n_sites(); }
    double J() const noexcept { return J_; }
    /// Transverse field (Ising) or exchange coupling J_perp (XXZ).
    double h() const noexcept { return kind_ == ModelKind::Ising ? kinetic_ : 0.0; }
    double J_perp() const noexcept { return kind_ == ModelKind::Xxz ? kinetic_ : 0.0; }
    /// True for XXZ, whose dynamics conserves magnetization.
    bool conserves_magnetization() const noexcept { return kind_ == ModelKind::Xxz; }

    double diag(const SpinConfig& s) const;
    std::vector<Transition> offdiag_row(const SpinConfig& s) const;
    /// sum_{s' != s} H_ss' (never positive).
    double offdiag_sum(const SpinConfig& s) const;
    double potential(const SpinConfig& s) const;
    /// Gamma_{s->s'} = -H_ss' for every s' reachable from s.
    std::vector<Transition> passive_rates(const SpinConfig& s) const;

    /// Visits (action, s', H_ss') without allocating.
    template <class Visitor>
    void for_each_offdiag(const SpinConfig& s, Visitor&& visit) const {
        if (kind_ == ModelKind::Ising) {
            if (kinetic_ == 0.0) return;
            for (int site = 0; site < n_sites(); ++site) {
                visit(Action::flip(site), s.flipped(site), -kinetic_);
            }
            return;
        }
        if (kinetic_ == 0.0) return;
        const auto bonds = lattice_.bonds();
        for (int b = 0; b < static_cast<int>(bonds.size()); ++b) {
            if (s.up(bonds[b].a) != s.up(bonds[b].b)) {
                visit(Action::exchange(b), s.flipped(bonds[b].a).flipped(bonds[b].b),
                      -2.0 * kinetic_);
            }
        }
    }

    /// Upper bound on max_s H_ss valid without enumeration: |J| * bonds + h * N.
    double diag_upper_bound() const noexcept;
    /// Lower bound on E0 from Gershgorin discs: -|J| * bonds - max row off-diagonal sum.
    double energy_lower_bound() const noexcept;

    std::string describe() const;

private:
    StoquasticModel(ModelKind kind, Lattice lattice, double J, double kinetic)
        : kind_(kind), lattice_(std::move(lattice)), J_(J), kinetic_(kinetic) {}

    ModelKind kind_;
    Lattice lattice_;
    double J_;
    double kinetic_;
};

struct ErgodicityReport {
    bool ergodic = false;
    int components = 0;
};

/// Connected components of the passive-rate graph over the enumerated
/// sector (or the full space when no sector is given).
ErgodicityReport check_ergodic(const StoquasticModel& model,
                               std::optional<int> magnetization = std::nullopt,
                               int max_sites = kDefaultEnumerationCap);

} // namespace lrl
