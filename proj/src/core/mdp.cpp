// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "lattice_rl/error.hpp"

namespace lrl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Row-compressed (log p, target) table of the reference policy over a space.
struct CompiledMdp {
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> targets;
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<char> terminal;
    std::size_t reference = 0;
};

std::size_t classical_ground_index(const StoquasticModel& model, const StateSpace& space) {
    std::size_t best = 0;
    double best_diag = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < space.size(); ++i) {
        const double d = model.diag(space[i]);
        if (d < best_diag) {
            best_diag = d;
            best = i;
        }
    }
    return best;
}

CompiledMdp compile(const Mdp& mdp, const StateSpace& space) {
    CompiledMdp c;
    const std::size_t n = space.size();
    c.offsets.reserve(n + 1);
    c.offsets.push_back(0);
    c.rewards.resize(n);
    c.terminal.resize(n);
    std::vector<PolicyStep> steps;
    for (std::size_t i = 0; i < n; ++i) {
        const SpinConfig& s = space[i];
        c.terminal[i] = mdp.is_terminal(s);
        c.rewards[i] = c.terminal[i] ? 0.0 : mdp.reward(s);
        if (!c.terminal[i]) {
            mdp.reference_policy(s, steps);
            for (const PolicyStep& step : steps) {
                if (step.probability <= 0.0) continue;
                c.targets.push_back(static_cast<std::uint32_t>(space.index(step.target)));
                c.log_probs.push_back(std::log(step.probability));
            }
        }
        c.offsets.push_back(c.targets.size());
    }
    c.reference = classical_ground_index(mdp.model(), space);
    return c;
}

// r(s) + log E_p exp U(a(s)) for a non-terminal state.
double raw_backup(const CompiledMdp& c, std::size_t i, std::span<const double> u) {
    double peak = kNegInf;
    for (std::size_t k = c.offsets[i]; k < c.offsets[i + 1]; ++k) {
        peak = std::max(peak, c.log_probs[k] + u[c.targets[k]]);
    }
    double acc = 0.0;
    for (std::size_t k = c.offsets[i]; k < c.offsets[i + 1]; ++k) {
        acc += std::exp(c.log_probs[k] + u[c.targets[k]] - peak);
    }
    return c.rewards[i] + peak + std::log(acc);
}

double backup_into(const Mdp& mdp, const CompiledMdp& c, std::span<const double> u,
                   std::span<double> out) {
    const std::size_t n = u.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = c.terminal[i] ? 0.0 : raw_backup(c, i, u);
    if (mdp.kind() == FormulationKind::DiscreteTerminal) return 0.0;
    const double r_star = u[c.reference] - out[c.reference];
    for (double& v : out) v += r_star;
    return r_star;
}

void require_terminals_reachable(const CompiledMdp& c) {
    const std::size_t n = c.terminal.size();
    // Reverse adjacency, then BFS from the terminal set.
    std::vector<std::vector<std::uint32_t>> incoming(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = c.offsets[i]; k < c.offsets[i + 1]; ++k) {
            incoming[c.targets[k]].push_back(static_cast<std::uint32_t>(i));
        }
    }
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (c.terminal[i]) {
            seen[i] = 1;
            queue.push_back(i);
        }
    }
    if (queue.empty()) fail(ErrorCode::TerminalUnreachable, "no terminal state in the space");
    while (!queue.empty()) {
        std::size_t i = queue.front();
        queue.pop_front();
        for (auto j : incoming[i]) {
            if (!seen[j]) {
                seen[j] = 1;
                queue.push_back(j);
            }
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        fail(ErrorCode::TerminalUnreachable, "some states cannot reach a terminal state");
    }
}

void require_ergodic(const Mdp& mdp, const StateSpace& space) {
    if (!check_ergodic(mdp.model(), space.magnetization(), space.n_sites()).ergodic) {
        fail(ErrorCode::NonErgodic, "passive dynamics is not ergodic on this space");
    }
}

struct Sweeps {
    long iterations = 0;
    double change = 0.0;
    double r_star = 0.0;
    bool diverged = false;
};

// Value iteration in place on `u`.
Sweeps iterate_values(const Mdp& mdp, const CompiledMdp& c, std::vector<double>& u,
                      const SolveOptions& options) {
    std::vector<double> next(u.size());
    Sweeps out;
    for (long it = 1; it <= options.max_iterations; ++it) {
        out.r_star = backup_into(mdp, c, u, next);
        double change = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) change = std::max(change, std::abs(next[i] - u[i]));
        u.swap(next);
        out.iterations = it;
        out.change = change;
        if (!std::isfinite(change) || *std::max_element(u.begin(), u.end()) > 700.0) {
            out.diverged = true;
            return out;
        }
        if (change < options.tol) return out;
    }
    fail(ErrorCode::ConvergenceFailure,
         "soft value iteration did not converge in " + std::to_string(options.max_iterations) +
             " sweeps");
}

// Jacobi iteration of the desirability; returns (sweeps, lambda).
Sweeps iterate_desirability(const Mdp& mdp, const CompiledMdp& c, std::vector<double>& z,
                            const SolveOptions& options) {
    const std::size_t n = z.size();
    const bool terminal = mdp.kind() == FormulationKind::DiscreteTerminal;
    std::vector<double> next(n);
    std::vector<double> expr(n);
    for (std::size_t i = 0; i < n; ++i) expr[i] = std::exp(c.rewards[i]);
    Sweeps out;
    for (long it = 1; it <= options.max_iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            if (c.terminal[i]) {
                next[i] = 1.0;
                continue;
            }
            double acc = 0.0;
            for (std::size_t k = c.offsets[i]; k < c.offsets[i + 1]; ++k) {
                acc += std::exp(c.log_probs[k]) * z[c.targets[k]];
            }
            next[i] = expr[i] * acc;
        }
        double lambda = 1.0;
        if (!terminal) {
            lambda = next[c.reference];
            for (double& v : next) v /= lambda;
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            change = std::max(change, std::abs(next[i] - z[i]) / std::max(std::abs(z[i]), 1e-300));
        }
        z.swap(next);
        out.iterations = it;
        out.change = change;
        out.r_star = terminal ? 0.0 : -std::log(lambda);
        if (!std::isfinite(change) || *std::max_element(z.begin(), z.end()) > 1e300) {
            out.diverged = true;
            return out;
        }
        if (change < options.tol) return out;
    }
    fail(ErrorCode::ConvergenceFailure,
         "desirability iteration did not converge in " + std::to_string(options.max_iterations) +
             " sweeps");
}

// E0 for a terminal formulation without one: the infinite-horizon solution
// on the same space.
Mdp with_resolved_energy(const Mdp& mdp, SharedSpace space, const SolveOptions& options) {
    if (mdp.energy()) return mdp;
    const Mdp infinite(mdp.model(), Formulation::discrete_infinite(), space.get());
    return mdp.with_energy(desirability_power_iteration(infinite, space, options).energy);
}

} // namespace

std::string_view formulation_name(FormulationKind kind) noexcept {
    switch (kind) {
    case FormulationKind::ContinuousFK: return "fk";
    case FormulationKind::DiscreteInfinite: return "infinite";
    case FormulationKind::DiscreteTerminal: return "terminal";
    }
    return "?";
}

FormulationKind parse_formulation(std::string_view name) {
    if (name == "fk" || name == "continuous") return FormulationKind::ContinuousFK;
    if (name == "infinite") return FormulationKind::DiscreteInfinite;
    if (name == "terminal") return FormulationKind::DiscreteTerminal;
    fail(ErrorCode::InvalidArgument, "unknown formulation '" + std::string(name) + "'");
}

Formulation Formulation::continuous_fk(double dt) {
    Formulation f;
    f.kind = FormulationKind::ContinuousFK;
    f.dt = dt;
    return f;
}

Formulation Formulation::discrete_infinite(std::optional<double> shift) {
    Formulation f;
    f.kind = FormulationKind::DiscreteInfinite;
    f.shift = shift;
    return f;
}

Formulation Formulation::discrete_terminal(std::optional<double> energy) {
    Formulation f;
    f.kind = FormulationKind::DiscreteTerminal;
    f.energy = energy;
    return f;
}

std::vector<PolicyStep> passive_policy_dt(const StoquasticModel& model, const SpinConfig& s,
                                          double dt) {
    if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "time step must be positive");
    std::vector<PolicyStep> out;
    double moving = 0.0;
    model.for_each_offdiag(s, [&](Action a, SpinConfig t, double v) {
        out.push_back({a, t, -v * dt});
        moving += -v * dt;
    });
    if (!(moving < 1.0)) {
        fail(ErrorCode::TimestepTooLarge,
             "dt times the exit rate must stay below 1 (got " + std::to_string(moving) + ")");
    }
    out.push_back({Action::stay(), s, 1.0 - moving});
    return out;
}

Mdp::Mdp(StoquasticModel model, Formulation formulation, const StateSpace* space)
    : model_(std::move(model)), formulation_(std::move(formulation)) {
    switch (formulation_.kind) {
    case FormulationKind::ContinuousFK:
        if (!(formulation_.dt > 0.0)) fail(ErrorCode::InvalidArgument, "dt must be positive");
        break;
    case FormulationKind::DiscreteInfinite: {
        double max_diag = model_.diag_upper_bound();
        if (space) {
            max_diag = -std::numeric_limits<double>::infinity();
            for (const SpinConfig& s : space->states()) max_diag = std::max(max_diag, model_.diag(s));
        }
        shift_ = formulation_.shift.value_or(max_diag + 1.0);
        if (!(shift_ > max_diag)) {
            fail(ErrorCode::InvalidShift, "shift C must exceed max_s H_ss");
        }
        break;
    }
    case FormulationKind::DiscreteTerminal: {
        energy_ = formulation_.energy;
        const int n = model_.n_sites();
        std::vector<SpinConfig> base;
        switch (formulation_.terminals) {
        case TerminalChoice::Magnetized:
            base = {SpinConfig::all_down(n), SpinConfig::all_up(n)};
            break;
        case TerminalChoice::ClassicalGround:
            if (!space) {
                fail(ErrorCode::InvalidArgument, "classical-ground terminals need a state space");
            }
            base = {(*space)[classical_ground_index(model_, *space)]};
            break;
        case TerminalChoice::Explicit: base = formulation_.terminal_states; break;
        }
        for (const SpinConfig& s : base) {
            if (s.n_sites() != n) fail(ErrorCode::InvalidArgument, "terminal state size mismatch");
            if (space && !space->find(s)) continue;
            terminals_.push_back(s);
            if (formulation_.terminal_translates && model_.lattice().fully_periodic()) {
                for (int dx = 0; dx < model_.lattice().width(); ++dx) {
                    for (int dy = 0; dy < model_.lattice().height(); ++dy) {
                        terminals_.push_back(translate_config(s, model_.lattice(), {dx, dy}));
                    }
                }
            }
        }
        std::sort(terminals_.begin(), terminals_.end());
        terminals_.erase(std::unique(terminals_.begin(), terminals_.end()), terminals_.end());
        if (terminals_.empty()) {
            fail(ErrorCode::TerminalUnreachable, "no terminal state lies in the state space");
        }
        break;
    }
    }
}

Mdp Mdp::with_energy(double energy) const {
    Mdp copy = *this;
    copy.energy_ = energy;
    copy.formulation_.energy = energy;
    return copy;
}

double Mdp::reward(const SpinConfig& s) const {
    switch (formulation_.kind) {
    case FormulationKind::ContinuousFK: return -model_.potential(s) * formulation_.dt;
    case FormulationKind::DiscreteInfinite:
        return std::log(shift_ - model_.diag(s) - model_.offdiag_sum(s));
    case FormulationKind::DiscreteTerminal: {
        if (!energy_) {
            fail(ErrorCode::InvalidArgument, "terminal formulation needs an energy estimate");
        }
        const double gap = model_.diag(s) - *energy_;
        if (!(gap > 0.0)) {
            fail(ErrorCode::InvalidScale, "H_ss - E0 must be positive at " + s.to_string());
        }
        return std::log(-model_.offdiag_sum(s) / gap);
    }
    }
    return 0.0;
}

bool Mdp::is_terminal(const SpinConfig& s) const {
    return formulation_.kind == FormulationKind::DiscreteTerminal &&
           std::binary_search(terminals_.begin(), terminals_.end(), s);
}

void Mdp::reference_policy(const SpinConfig& s, std::vector<PolicyStep>& out) const {
    out.clear();
    switch (formulation_.kind) {
    case FormulationKind::ContinuousFK: out = passive_policy_dt(model_, s, formulation_.dt); return;
    case FormulationKind::DiscreteInfinite: {
        const double hss = model_.diag(s);
        const double z1 = shift_ - hss - model_.offdiag_sum(s);
        model_.for_each_offdiag(s, [&](Action a, SpinConfig t, double v) {
            out.push_back({a, t, -v / z1});
        });
        out.push_back({Action::stay(), s, (shift_ - hss) / z1});
        return;
    }
    case FormulationKind::DiscreteTerminal: {
        const double z2 = -model_.offdiag_sum(s);
        if (!(z2 > 0.0)) fail(ErrorCode::NonErgodic, "state " + s.to_string() + " has no moves");
        model_.for_each_offdiag(s, [&](Action a, SpinConfig t, double v) {
            out.push_back({a, t, -v / z2});
        });
        return;
    }
    }
}

std::vector<PolicyStep> Mdp::reference_policy(const SpinConfig& s) const {
    std::vector<PolicyStep> out;
    reference_policy(s, out);
    return out;
}

double Mdp::energy_from_r_star(double r_star) const {
    switch (formulation_.kind) {
    case FormulationKind::ContinuousFK: return r_star / formulation_.dt;
    case FormulationKind::DiscreteInfinite: return shift_ - std::exp(-r_star);
    case FormulationKind::DiscreteTerminal: return energy_.value_or(0.0);
    }
    return 0.0;
}

Backup soft_backup_U(const Mdp& mdp, const StateSpace& space, std::span<const double> values) {
    const CompiledMdp c = compile(mdp, space);
    Backup out;
    out.values.resize(values.size());
    out.r_star = backup_into(mdp, c, values, out.values);
    return out;
}

ValueTable solve_tabular(const Mdp& mdp, SharedSpace space, const SolveOptions& options) {
    require_ergodic(mdp, *space);
    ValueTable table;
    table.space = space;
    table.values.assign(space->size(), 0.0);

    if (mdp.kind() != FormulationKind::DiscreteTerminal) {
        const CompiledMdp c = compile(mdp, *space);
        Sweeps sweeps = iterate_values(mdp, c, table.values, options);
        if (sweeps.diverged) fail(ErrorCode::ConvergenceFailure, "soft value iteration diverged");
        table.iterations = sweeps.iterations;
        table.residual = sweeps.change;
        table.r_star = sweeps.r_star;
        table.energy = mdp.energy_from_r_star(sweeps.r_star);
        return table;
    }

    const Mdp fixed = with_resolved_energy(mdp, space, options);
    const CompiledMdp c = compile(fixed, *space);
    require_terminals_reachable(c);
    Sweeps sweeps = iterate_values(fixed, c, table.values, options);
    if (sweeps.diverged) {
        fail(ErrorCode::ConvergenceFailure, "terminal value iteration diverged; the energy is above E0");
    }
    table.iterations = sweeps.iterations;
    table.residual = sweeps.change;
    table.energy = *fixed.energy();
    return table;
}

Desirability desirability_power_iteration(const Mdp& mdp, SharedSpace space,
                                          const SolveOptions& options) {
    require_ergodic(mdp, *space);
    Desirability out;
    out.space = space;
    out.z.assign(space->size(), 1.0);

    if (mdp.kind() != FormulationKind::DiscreteTerminal) {
        const CompiledMdp c = compile(mdp, *space);
        Sweeps sweeps = iterate_desirability(mdp, c, out.z, options);
        if (sweeps.diverged) fail(ErrorCode::ConvergenceFailure, "desirability iteration diverged");
        out.iterations = sweeps.iterations;
        out.r_star = sweeps.r_star;
        out.energy = mdp.energy_from_r_star(sweeps.r_star);
        return out;
    }

    const Mdp fixed = with_resolved_energy(mdp, space, options);
    const CompiledMdp c = compile(fixed, *space);
    require_terminals_reachable(c);
    Sweeps sweeps = iterate_desirability(fixed, c, out.z, options);
    if (sweeps.diverged) {
        fail(ErrorCode::ConvergenceFailure,
             "terminal desirability iteration diverged; the energy is above E0");
    }
    out.iterations = sweeps.iterations;
    out.energy = *fixed.energy();
    return out;
}

TabularQ::TabularQ(Mdp mdp, ValueTable table) : mdp_(std::move(mdp)), table_(std::move(table)) {}

std::vector<ActionValue> TabularQ::action_values(const SpinConfig& s) const {
    const double base =
        mdp_.reward(s) + (mdp_.kind() == FormulationKind::DiscreteTerminal ? 0.0 : table_.r_star);
    std::vector<ActionValue> out;
    for (const PolicyStep& step : mdp_.reference_policy(s)) {
        out.push_back({step.action, step.target, step.probability, base + table_.value(step.target)});
    }
    return out;
}

double log_wavefunction_from_Q(std::span<const ActionValue> values) {
    double peak = kNegInf;
    for (const ActionValue& v : values) {
        if (v.probability > 0.0) peak = std::max(peak, v.q);
    }
    if (peak == kNegInf) return kNegInf;
    double acc = 0.0;
    for (const ActionValue& v : values) {
        if (v.probability > 0.0) acc += v.probability * std::exp(v.q - peak);
    }
    return peak + std::log(acc);
}

double wavefunction_from_Q(const QFunction& q, const SpinConfig& s) {
    auto values = q.action_values(s);
    return std::exp(log_wavefunction_from_Q(values));
}

std::vector<double> optimal_policy_from_Q(std::span<const ActionValue> values) {
    const double log_norm = log_wavefunction_from_Q(values);
    std::vector<double> out;
    out.reserve(values.size());
    for (const ActionValue& v : values) {
        out.push_back(v.probability > 0.0 ? v.probability * std::exp(v.q - log_norm) : 0.0);
    }
    return out;
}

RateTable passive_rate_table(const StoquasticModel& model, SharedSpace space) {
    RateTable table;
    table.row_offsets.push_back(0);
    for (std::size_t i = 0; i < space->size(); ++i) {
        model.for_each_offdiag((*space)[i], [&](Action, SpinConfig t, double v) {
            table.entries.push_back({static_cast<std::uint32_t>(space->index(t)), -v});
        });
        table.row_offsets.push_back(table.entries.size());
    }
    table.space = std::move(space);
    return table;
}

RateTable optimal_rates(const StoquasticModel& model, SharedSpace space, std::span<const double> phi) {
    RateTable table = passive_rate_table(model, std::move(space));
    for (std::size_t i = 0; i + 1 < table.row_offsets.size(); ++i) {
        if (!(phi[i] > 0.0)) {
            fail(ErrorCode::DivisionByZeroAmplitude,
                 "Doob transform needs a positive amplitude at " + (*table.space)[i].to_string());
        }
        for (std::size_t k = table.row_offsets[i]; k < table.row_offsets[i + 1]; ++k) {
            table.entries[k].rate *= phi[table.entries[k].target] / phi[i];
        }
    }
    return table;
}

std::vector<double> stationary_distribution(const RateTable& rates) {
    const std::size_t n = rates.row_offsets.size() - 1;
    if (n > 4096) fail(ErrorCode::StateSpaceTooLarge, "dense stationary solve limited to 4096 states");
    // Solve pi^T G = 0 with sum(pi) = 1 by replacing one balance equation.
    Eigen::MatrixXd gt = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const RateEntry& e : rates.row(i)) {
            gt(e.target, i) += e.rate;
            gt(i, i) -= e.rate;
        }
    }
    gt.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::VectorXd pi = gt.fullPivLu().solve(rhs);
    return {pi.data(), pi.data() + n};
}

} // namespace lrl
