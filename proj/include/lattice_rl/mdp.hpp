// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lattice_rl/exact.hpp"
#include "lattice_rl/hamiltonian.hpp"

namespace lrl {

/// The three ways of casting the ground-state problem as a maximum-entropy
/// control problem.
///
///  ContinuousFK      r(s) = -V(s) dt, reference policy = passive dynamics
///                    discretized with step dt, infinite horizon, R* = E0 dt.
///  DiscreteInfinite  r(s) = log Z1(s), reference policy = lazy chain p1 with
///                    shift C, infinite horizon, R* = -log(C - E0).
///  DiscreteTerminal  r(s) = log(Z2(s) / (H_ss - E0)), reference policy =
///                    jump chain p2, episodes end on terminal states (U = 0).
///
/// In every case exp(U*) is the ground-state wavefunction.
enum class FormulationKind { ContinuousFK, DiscreteInfinite, DiscreteTerminal };

std::string_view formulation_name(FormulationKind kind) noexcept;
FormulationKind parse_formulation(std::string_view name);

enum class TerminalChoice {
    /// The two fully magnetized states.
    Magnetized,
    /// The first state (in bit order) minimizing H_ss.
    ClassicalGround,
    /// Formulation::terminal_states.
    Explicit,
};

struct Formulation {
    FormulationKind kind = FormulationKind::DiscreteInfinite;
    /// Time step of the discretized passive policy (ContinuousFK).
    double dt = 1e-4;
    /// Shift C > max_s H_ss (DiscreteInfinite); defaults to max_s H_ss + 1.
    std::optional<double> shift;
    /// Ground-state energy entering the terminal reward. Tabular solvers take
    /// it from the infinite-horizon solution when absent.
    std::optional<double> energy;
    TerminalChoice terminals = TerminalChoice::Magnetized;
    std::vector<SpinConfig> terminal_states;
    /// Also make every lattice translate of the chosen terminals terminal.
    bool terminal_translates = false;

    static Formulation continuous_fk(double dt = 1e-4);
    static Formulation discrete_infinite(std::optional<double> shift = std::nullopt);
    static Formulation discrete_terminal(std::optional<double> energy = std::nullopt);
};

/// One action of a (reference or learned) policy and where it leads.
struct PolicyStep {
    Action action;
    SpinConfig target;
    double probability = 0.0;
};

/// Passive dynamics over one step dt: each transition with probability
/// Gamma dt, the trivial action with the remainder. Listed transitions first,
/// Stay last.
std::vector<PolicyStep> passive_policy_dt(const StoquasticModel& model, const SpinConfig& s,
                                          double dt);

/// A formulation bound to a model, with its constants (C, E0, terminal set)
/// resolved.
class Mdp {
public:
    /// Resolves defaults against `space` (max_s H_ss for the shift, terminal
    /// states). `energy` is required for DiscreteTerminal unless the caller
    /// later supplies one through with_energy().
    Mdp(StoquasticModel model, Formulation formulation, const StateSpace* space = nullptr);

    const StoquasticModel& model() const noexcept { return model_; }
    const Formulation& formulation() const noexcept { return formulation_; }
    FormulationKind kind() const noexcept { return formulation_.kind; }
    double shift() const noexcept { return shift_; }
    double dt() const noexcept { return formulation_.dt; }
    std::optional<double> energy() const noexcept { return energy_; }
    std::span<const SpinConfig> terminals() const noexcept { return terminals_; }
    bool has_trivial_action() const noexcept {
        return formulation_.kind != FormulationKind::DiscreteTerminal;
    }

    Mdp with_energy(double energy) const;

    double reward(const SpinConfig& s) const;
    bool is_terminal(const SpinConfig& s) const;
    /// Reference policy p(.|s). Stay (when present) is listed last.
    void reference_policy(const SpinConfig& s, std::vector<PolicyStep>& out) const;
    std::vector<PolicyStep> reference_policy(const SpinConfig& s) const;

    /// Ground-state energy implied by an average reward R*.
    double energy_from_r_star(double r_star) const;

private:
    StoquasticModel model_;
    Formulation formulation_;
    double shift_ = 0.0;
    std::optional<double> energy_;
    std::vector<SpinConfig> terminals_;
};

struct ValueTable {
    SharedSpace space;
    /// U(s) = log phi(s) up to the formulation's normalization.
    std::vector<double> values;
    double r_star = 0.0;
    /// E0 recovered from R* (terminal formulation: the energy used).
    double energy = 0.0;
    long iterations = 0;
    /// Sup-norm change of the final sweep.
    double residual = 0.0;

    double value(const SpinConfig& s) const { return values[space->index(s)]; }
};

/// Result of one soft Bellman backup.
struct Backup {
    std::vector<double> values;
    double r_star = 0.0;
};

/// U'(s) = R* + r(s) + log E_{a~p(.|s)} exp U(a(s)). Terminal formulation:
/// R* = 0 and U' = 0 on terminal states. Infinite horizon: R* is chosen so
/// that U at the reference state (the classical ground state) is unchanged.
Backup soft_backup_U(const Mdp& mdp, const StateSpace& space, std::span<const double> values);

struct SolveOptions {
    double tol = 1e-13;
    long max_iterations = 50'000'000;
};

/// Value iteration on the soft Bellman equation until the sup-norm change of
/// a sweep drops below tol.
ValueTable solve_tabular(const Mdp& mdp, SharedSpace space, const SolveOptions& options = {});

struct Desirability {
    SharedSpace space;
    /// z = exp(U); normalized to 1 at the reference state (infinite horizon)
    /// or at the terminals (terminal formulation).
    std::vector<double> z;
    double r_star = 0.0;
    double energy = 0.0;
    long iterations = 0;
};

/// Power iteration of the linear operator z(s) <- e^{r(s)} E_{a~p}[z(a(s))].
Desirability desirability_power_iteration(const Mdp& mdp, SharedSpace space,
                                          const SolveOptions& options = {});

/// Action value together with the reference-policy weight of the action.
struct ActionValue {
    Action action;
    SpinConfig target;
    double probability = 0.0;
    double q = 0.0;
};

/// Source of Q(s, .) over the reference policy's actions.
class QFunction {
public:
    virtual ~QFunction() = default;
    virtual std::vector<ActionValue> action_values(const SpinConfig& s) const = 0;
};

/// Q(s, a) = R* + r(s) + U(a(s)), with U = 0 on terminal states.
class TabularQ final : public QFunction {
public:
    TabularQ(Mdp mdp, ValueTable table);
    std::vector<ActionValue> action_values(const SpinConfig& s) const override;
    const Mdp& mdp() const noexcept { return mdp_; }
    const ValueTable& table() const noexcept { return table_; }

private:
    Mdp mdp_;
    ValueTable table_;
};

/// log sum_a p(a|s) exp Q(s, a), computed with a max shift.
double log_wavefunction_from_Q(std::span<const ActionValue> values);
/// phi(s) = E_{a~p(.|s)}[exp Q(s, a)].
double wavefunction_from_Q(const QFunction& q, const SpinConfig& s);

/// pi(a|s) = p(a|s) exp Q(s,a) / E_p[exp Q(s,.)], aligned with `values`.
std::vector<double> optimal_policy_from_Q(std::span<const ActionValue> values);

struct RateEntry {
    std::uint32_t target = 0;
    double rate = 0.0;
};

/// Continuous-time rates over an enumerated space, row-compressed.
struct RateTable {
    SharedSpace space;
    std::vector<std::size_t> row_offsets;
    std::vector<RateEntry> entries;

    std::span<const RateEntry> row(std::size_t i) const {
        return {entries.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }
};

RateTable passive_rate_table(const StoquasticModel& model, SharedSpace space);

/// Gamma*_{s->s'} = Gamma_{s->s'} phi(s') / phi(s): the ground-state Doob
/// transform of the passive dynamics.
RateTable optimal_rates(const StoquasticModel& model, SharedSpace space, std::span<const double> phi);

/// Stationary distribution of a rate table (dense null-space solve).
std::vector<double> stationary_distribution(const RateTable& rates);

} // namespace lrl
