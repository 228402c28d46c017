// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/hamiltonian.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "lattice_rl/error.hpp"
#include "lattice_rl/exact.hpp"

namespace lrl {

namespace {

void check_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        fail(ErrorCode::InvalidModel, std::string(name) + " must be finite");
    }
}

void check_kinetic(double v, const char* name, ModelCheck check) {
    check_finite(v, name);
    if (v < 0.0) {
        fail(ErrorCode::InvalidModel,
             std::string(name) + " < 0 makes the Hamiltonian non-stoquastic in the Z basis");
    }
    if (v == 0.0 && check == ModelCheck::Strict) {
        fail(ErrorCode::InvalidModel,
             std::string(name) + " = 0 leaves the passive dynamics non-ergodic");
    }
}

} // namespace

StoquasticModel StoquasticModel::ising(Lattice lattice, double J, double h, ModelCheck check) {
    check_finite(J, "J");
    check_kinetic(h, "h", check);
    return {ModelKind::Ising, std::move(lattice), J, h};
}

StoquasticModel StoquasticModel::xxz(Lattice lattice, double J, double J_perp, ModelCheck check) {
    check_finite(J, "J");
    check_kinetic(J_perp, "J_perp", check);
    return {ModelKind::Xxz, std::move(lattice), J, J_perp};
}

double StoquasticModel::diag(const SpinConfig& s) const {
    return -J_ * static_cast<double>(bond_sum(lattice_, s));
}

std::vector<Transition> StoquasticModel::offdiag_row(const SpinConfig& s) const {
    std::vector<Transition> row;
    for_each_offdiag(s, [&](Action a, SpinConfig t, double v) { row.push_back({a, t, v}); });
    return row;
}

double StoquasticModel::offdiag_sum(const SpinConfig& s) const {
    if (kind_ == ModelKind::Ising) return -kinetic_ * n_sites();
    int anti = 0;
    for (const Bond& bond : lattice_.bonds()) anti += s.up(bond.a) != s.up(bond.b);
    return -2.0 * kinetic_ * anti;
}

double StoquasticModel::potential(const SpinConfig& s) const { return diag(s) + offdiag_sum(s); }

std::vector<Transition> StoquasticModel::passive_rates(const SpinConfig& s) const {
    std::vector<Transition> row;
    for_each_offdiag(s, [&](Action a, SpinConfig t, double v) { row.push_back({a, t, -v}); });
    return row;
}

double StoquasticModel::diag_upper_bound() const noexcept {
    const double bonds = static_cast<double>(lattice_.bonds().size());
    return std::abs(J_) * bonds + h() * n_sites();
}

double StoquasticModel::energy_lower_bound() const noexcept {
    const double bonds = static_cast<double>(lattice_.bonds().size());
    const double max_exit =
        kind_ == ModelKind::Ising ? kinetic_ * n_sites() : 2.0 * kinetic_ * bonds;
    return -std::abs(J_) * bonds - max_exit;
}

std::string StoquasticModel::describe() const {
    std::ostringstream out;
    out.precision(17);
    if (kind_ == ModelKind::Ising) {
        out << "ising J=" << J_ << " h=" << kinetic_;
    } else {
        out << "xxz J=" << J_ << " J_perp=" << kinetic_;
    }
    out << " on " << lattice_.describe();
    return out.str();
}

ErgodicityReport check_ergodic(const StoquasticModel& model, std::optional<int> magnetization,
                               int max_sites) {
    if (magnetization && !model.conserves_magnetization()) {
        fail(ErrorCode::InvalidArgument, "magnetization sectors need a conserving model");
    }
    const StateSpace space(model.lattice(), magnetization, max_sites);
    const std::size_t n = space.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    std::size_t components = n;
    for (std::size_t i = 0; i < n; ++i) {
        model.for_each_offdiag(space[i], [&](Action, SpinConfig t, double) {
            std::size_t a = find(i);
            std::size_t b = find(space.index(t));
            if (a != b) {
                parent[std::max(a, b)] = std::min(a, b);
                --components;
            }
        });
    }
    return {components == 1, static_cast<int>(components)};
}

} // namespace lrl
