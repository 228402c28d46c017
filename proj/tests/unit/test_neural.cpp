// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lattice_rl/error.hpp"
#include "lattice_rl/neural.hpp"
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
};

Oracle oracle_for(const StoquasticModel& m) {
    auto pair = oracle::lowest_eigenpair(oracle::dense_hamiltonian(m.lattice(), 0, m.J(), m.h()));
    return {make_space(m, std::nullopt), pair.energy,
            {pair.vector.data(), pair.vector.data() + pair.vector.size()}};
}

// Per-site outputs that reproduce a Q-function's flip values.
std::vector<double> flip_values(const QFunction& q, const SpinConfig& s) {
    std::vector<double> out(static_cast<std::size_t>(s.n_sites()), 0.0);
    for (const ActionValue& av : q.action_values(s)) {
        if (av.action.kind == Action::Kind::Flip) out[av.action.index] = av.q;
    }
    return out;
}

// Every (s, a) pair of the reference policy over non-terminal states.
std::vector<Experience> all_experiences(const Mdp& mdp, const StateSpace& space) {
    std::vector<Experience> out;
    for (const SpinConfig& s : space.states()) {
        if (mdp.is_terminal(s)) continue;
        for (const PolicyStep& step : mdp.reference_policy(s)) {
            out.push_back({s, step.action, 0.0, step.target, mdp.is_terminal(step.target)});
        }
    }
    return out;
}

double loss_from(const QFunction& q, const Mdp& mdp, std::span<const Experience> batch, double shift = 0.0) {
    const int n = mdp.model().n_sites();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(batch.size()));
    Eigen::MatrixXd tout(n, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto a = flip_values(q, batch[j].s);
        const auto b = flip_values(q, batch[j].next);
        for (int i = 0; i < n; ++i) {
            out(i, static_cast<Eigen::Index>(j)) = a[i] + shift;
            tout(i, static_cast<Eigen::Index>(j)) = b[i];
        }
    }
    return residual_loss(bellman_residuals(batch, out, tout, mdp), mdp.has_trivial_action()).loss;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("lrl_test_" + name);
}

} // namespace

TEST_CASE("trivial action value of the two-spin example") {
    auto pair = StoquasticModel::ising(Lattice::chain(2, false), 1.0, 1.0);
    const std::vector<double> zero(2, 0.0);
    const double q0 = q_trivial_action(pair, SpinConfig::all_up(2), zero, -std::sqrt(5.0));
    CHECK(q0 == doctest::Approx(std::log(2.0 / (std::sqrt(5.0) - 1.0))).epsilon(1e-14));
    CHECK(q0 == doctest::Approx(0.4812).epsilon(1e-4));

    std::vector<double> w(2);
    const std::vector<double> q{0.3, -0.5};
    q_trivial_action(pair, SpinConfig::all_up(2), q, -3.0, w);
    CHECK(w[0] + w[1] == doctest::Approx(1.0));
    CHECK(w[0] / w[1] == doctest::Approx(std::exp(0.8)));

    CHECK(code_of([&] { q_trivial_action(pair, SpinConfig::all_up(2), zero, -1.0); }) ==
          ErrorCode::InvalidScale);
    auto xxz = StoquasticModel::xxz(Lattice::chain(4, true), 1.0, 1.0);
    const std::vector<double> four(4, 0.0);
    CHECK(code_of([&] { q_trivial_action(xxz, SpinConfig::all_up(4), four, -100.0); }) ==
          ErrorCode::InvalidScale);
}

TEST_CASE("trivial action closure reproduces tabular values") {
    for (int n : {4, 6, 8}) {
        auto model = StoquasticModel::ising(Lattice::chain(n, true), 0.9, 1.0);
        const Oracle truth = oracle_for(model);
        const Mdp mdp(model, Formulation::discrete_infinite(), truth.space.get());
        const TabularQ q(mdp, solve_tabular(mdp, truth.space));
        double worst = 0.0;
        for (const SpinConfig& s : truth.space->states()) {
            const auto flips = flip_values(q, s);
            const double closure = q_trivial_action(model, s, flips, truth.energy);
            for (const ActionValue& av : q.action_values(s)) {
                if (av.action.is_stay()) worst = std::max(worst, std::abs(av.q - closure));
            }
        }
        CAPTURE(n);
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("loss vanishes at the tabular optimum") {
    auto model = StoquasticModel::ising(Lattice::chain(6, true), 0.8, 1.0);
    const Oracle truth = oracle_for(model);

    SUBCASE("infinite horizon") {
        const Mdp base(model, Formulation::discrete_infinite(), truth.space.get());
        const TabularQ q(base, solve_tabular(base, truth.space));
        const Mdp mdp = base.with_energy(truth.energy);
        const auto batch = all_experiences(mdp, *truth.space);
        CHECK(loss_from(q, mdp, batch) < 1e-10);
        // The residual is R* itself, yet its variance is zero.
        const int n = model.n_sites();
        Eigen::MatrixXd out(n, static_cast<Eigen::Index>(batch.size()));
        Eigen::MatrixXd tout(n, static_cast<Eigen::Index>(batch.size()));
        for (std::size_t j = 0; j < batch.size(); ++j) {
            const auto a = flip_values(q, batch[j].s);
            const auto b = flip_values(q, batch[j].next);
            for (int i = 0; i < n; ++i) {
                out(i, static_cast<Eigen::Index>(j)) = a[i];
                tout(i, static_cast<Eigen::Index>(j)) = b[i];
            }
        }
        const auto delta = bellman_residuals(batch, out, tout, mdp);
        const auto value = residual_loss(delta, true);
        CHECK(value.mean_residual == doctest::Approx(q.table().r_star).epsilon(1e-9));
        CHECK(std::abs(value.mean_residual) > 0.1);
        CHECK(loss_from(q, mdp, batch, 0.75) < 1e-10);
    }

    SUBCASE("terminal") {
        const Mdp mdp(model, Formulation::discrete_terminal(truth.energy), truth.space.get());
        const TabularQ q(mdp, solve_tabular(mdp, truth.space));
        const auto batch = all_experiences(mdp, *truth.space);
        CHECK(loss_from(q, mdp, batch) < 1e-10);
        CHECK(loss_from(q, mdp, batch, 0.1) == doctest::Approx(0.01).epsilon(1e-6));
    }

    SUBCASE("continuous time with the exact ground state") {
        // Q(s, a) = r(s) + log phi0(a(s)); the residual is E0 dt + O(dt^2).
        const Mdp mdp = Mdp(model, Formulation::continuous_fk(1e-4)).with_energy(truth.energy);
        const auto batch = all_experiences(mdp, *truth.space);
        class Exact final : public QFunction {
        public:
            Exact(const Mdp& m, const Oracle& o) : m_(m), o_(o) {}
            std::vector<ActionValue> action_values(const SpinConfig& s) const override {
                std::vector<ActionValue> out;
                for (const PolicyStep& st : m_.reference_policy(s)) {
                    out.push_back({st.action, st.target, st.probability,
                                   m_.reward(s) + std::log(o_.phi[o_.space->index(st.target)])});
                }
                return out;
            }

        private:
            const Mdp& m_;
            const Oracle& o_;
        } q(mdp, truth);
        CHECK(loss_from(q, mdp, batch) < 1e-10);
    }
}

TEST_CASE("loss gradient matches finite differences") {
    auto model = StoquasticModel::ising(Lattice::chain(5, true), 0.7, 1.0);
    QNetwork net(model.lattice(), {4, 2, 3});
    Rng rng(3);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (double& p : net.params()) p = u(rng);
    QNetwork target = net;
    for (double& p : target.params()) p += u(rng) * 0.1;

    for (const Formulation& f : {Formulation::discrete_infinite(), Formulation::discrete_terminal(),
                                 Formulation::continuous_fk(0.01)}) {
        const Mdp mdp = Mdp(model, f).with_energy(-9.0);
        std::vector<Experience> batch;
        Rng pick(5);
        for (int j = 0; j < 12; ++j) {
            const SpinConfig s(5, pick() & 31);
            const auto steps = mdp.reference_policy(s);
            const auto& st = steps[pick() % steps.size()];
            batch.push_back({s, st.action, 0.0, st.target, mdp.is_terminal(st.target)});
        }
        std::vector<double> grad(net.n_params(), 0.0);
        bellman_residual_loss(batch, net, target, mdp, grad);
        const double h = 1e-6;
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < net.n_params(); ++i) {
            const double keep = net.params()[i];
            net.params()[i] = keep + h;
            const double up = bellman_residual_loss(batch, net, target, mdp, {}).loss;
            net.params()[i] = keep - h;
            const double down = bellman_residual_loss(batch, net, target, mdp, {}).loss;
            net.params()[i] = keep;
            const double fd = (up - down) / (2 * h);
            num += (fd - grad[i]) * (fd - grad[i]);
            den += grad[i] * grad[i];
        }
        CAPTURE(formulation_name(f.kind));
        CHECK(den > 0.0);
        CHECK(std::sqrt(num) <= 1e-5 * std::sqrt(den));
    }
}

TEST_CASE("variance loss ignores a constant output shift") {
    auto model = StoquasticModel::ising(Lattice::chain(6, true), 1.0, 1.0);
    QNetwork net(model.lattice(), {4, 2, 3});
    Rng rng(9);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (double& p : net.params()) p = u(rng);
    const QNetwork target = net;
    const Mdp mdp = Mdp(model, Formulation::discrete_infinite()).with_energy(-12.0);
    std::vector<Experience> batch;
    for (int j = 0; j < 40; ++j) {
        const SpinConfig s(6, rng() & 63);
        const auto steps = mdp.reference_policy(s);
        const auto& st = steps[rng() % steps.size()];
        batch.push_back({s, st.action, 0.0, st.target, false});
    }
    const double base = bellman_residual_loss(batch, net, target, mdp, {}).loss;
    QNetwork shifted = net;
    shifted.params()[shifted.layers().back().bias_offset] += 1.5;
    const double moved = bellman_residual_loss(batch, shifted, target, mdp, {}).loss;
    CHECK(moved == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("replay buffer") {
    ReplayBuffer buf(4);
    for (int i = 0; i < 6; ++i) buf.push({SpinConfig(3, static_cast<std::uint64_t>(i)), Action::flip(0), i * 1.0, {}, false});
    CHECK(buf.full());
    CHECK(buf.size() == 4);
    std::vector<double> rewards;
    for (std::size_t i = 0; i < buf.size(); ++i) rewards.push_back(buf[i].r);
    CHECK(rewards == std::vector<double>{4, 5, 2, 3});
    Rng rng(1);
    const auto idx = buf.sample(3, rng);
    CHECK(idx.size() == 3);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    CHECK(code_of([&] { buf.sample(5, rng); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { ReplayBuffer(0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("training configuration checks") {
    TrainConfig cfg;
    auto ising = StoquasticModel::ising(Lattice::square(4, true), 0.32758, 1.0);
    CHECK_NOTHROW(cfg.validate(ising));
    CHECK(code_of([&] { cfg.validate(StoquasticModel::xxz(Lattice::chain(4, true), 1.0, 1.0)); }) ==
          ErrorCode::InvalidModel);
    cfg.formulation = Formulation::continuous_fk(0.1);
    CHECK(code_of([&] { cfg.validate(ising); }) == ErrorCode::TimestepTooLarge);
    cfg.formulation = Formulation::continuous_fk(1e-4);
    cfg.buffer_size = 10;
    CHECK(code_of([&] { cfg.validate(ising); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("checkpoint round trip") {
    auto model = StoquasticModel::ising(Lattice::square(3, true), 0.5, 1.2);
    QNetwork net(model.lattice(), {6, 2, 3});
    Rng rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& p : net.params()) p = u(rng);
    net.params()[0] = -0.0;
    net.params()[1] = 1e-310;
    Formulation f = Formulation::discrete_terminal(-11.25);
    f.terminals = TerminalChoice::Explicit;
    f.terminal_states = {SpinConfig::from_string("+-+-+-+-+")};
    const auto path = temp_file("roundtrip.lrlq");
    save_checkpoint(path, {model, f, net, -11.5, 120});
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model.describe() == model.describe());
    CHECK(back.formulation.kind == f.kind);
    CHECK(back.formulation.energy == f.energy);
    CHECK(back.formulation.terminal_states == f.terminal_states);
    CHECK(back.net.config() == net.config());
    CHECK(back.e0_estimate == -11.5);
    CHECK(back.episode == 120);
    REQUIRE(back.net.n_params() == net.n_params());
    CHECK(std::memcmp(back.net.params().data(), net.params().data(), net.n_params() * sizeof(double)) == 0);

    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    const auto broken = temp_file("broken.lrlq");
    {
        std::ofstream out(broken, std::ios::binary);
        out << bytes.substr(0, bytes.size() - 3);
    }
    CHECK(code_of([&] { load_checkpoint(broken); }) == ErrorCode::FormatError);
    {
        std::ofstream out(broken, std::ios::binary);
        out << "XX" << bytes.substr(2);
    }
    CHECK(code_of([&] { load_checkpoint(broken); }) == ErrorCode::FormatError);
    CHECK(code_of([&] { load_checkpoint(temp_file("missing.lrlq")); }) == ErrorCode::IoError);
    std::filesystem::remove(path);
    std::filesystem::remove(broken);
}

TEST_CASE("training is deterministic") {
    auto model = StoquasticModel::ising(Lattice::chain(6, true), 1.0, 1.0);
    TrainConfig cfg;
    cfg.formulation = Formulation::discrete_infinite();
    cfg.network = {4, 2, 3};
    cfg.batch_size = 32;
    cfg.buffer_size = 128;
    cfg.episodes = 25;
    cfg.validation_interval = 10;
    cfg.seed = 77;
    int calls = 0;
    const auto a = train_soft_q(model, cfg, [&](const TrainLogEntry&) { ++calls; });
    const auto b = train_soft_q(model, cfg);
    CHECK(calls == 25);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].loss == b.log[i].loss);
        CHECK(a.log[i].e_var == b.log[i].e_var);
    }
    CHECK(a.log[9].e_var.has_value());
    CHECK(a.log.back().e_var.has_value());
    CHECK(!a.log[10].e_var.has_value());
    CHECK(a.log[10].lr == doctest::Approx(1e-3 * 0.99));
    cfg.seed = 78;
    const auto c = train_soft_q(model, cfg);
    CHECK(c.log.back().loss != a.log.back().loss);
}

TEST_CASE("divergence leaves a finite checkpoint") {
    auto model = StoquasticModel::ising(Lattice::chain(4, true), 1.0, 1.0);
    TrainConfig cfg;
    cfg.formulation = Formulation::discrete_infinite();
    cfg.network = {4, 2, 3};
    cfg.batch_size = 16;
    cfg.buffer_size = 32;
    cfg.episodes = 50;
    cfg.learning_rate = 1e300;
    cfg.lr_decay = 1.0;
    cfg.divergence_checkpoint = temp_file("diverged.lrlq");
    CHECK(code_of([&] { train_soft_q(model, cfg); }) == ErrorCode::TrainingDiverged);
    const Checkpoint cp = load_checkpoint(*cfg.divergence_checkpoint);
    CHECK(std::all_of(cp.net.params().begin(), cp.net.params().end(), [](double p) { return std::isfinite(p); }));
    std::filesystem::remove(*cfg.divergence_checkpoint);
}

TEST_CASE("trained chain wavefunction matches the ground state") {
    auto model = StoquasticModel::ising(Lattice::chain(8, true), 1.0, 1.0);
    const Oracle truth = oracle_for(model);
    TrainConfig cfg;
    cfg.formulation = Formulation::discrete_infinite();
    cfg.network = {16, 3, 3};
    cfg.batch_size = 256;
    cfg.buffer_size = 2048;
    cfg.episodes = 1500;
    cfg.validation_interval = 100;
    cfg.seed = 1;
    const auto result = train_soft_q(model, cfg);
    const Mdp mdp = Mdp(model, cfg.formulation, truth.space.get()).with_energy(result.e0_estimate);
    const NeuralQ q(result.net, mdp);
    const auto log_phi = q.log_phi(truth.space->states());
    std::vector<double> phi(log_phi.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        phi[i] = std::exp(log_phi[i]);
        norm += phi[i] * phi[i];
    }
    double err = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double d = phi[i] / std::sqrt(norm) - truth.phi[i];
        err += d * d;
    }
    MESSAGE("relative L2 error " << std::sqrt(err) << ", E_var " << result.final_energy << ", E0 "
                                 << truth.energy);
    CHECK(std::sqrt(err) < 0.05);
}

TEST_CASE("tabulated network agrees with direct evaluation") {
    auto model = StoquasticModel::ising(Lattice::square(3, true), 0.6, 1.0);
    QNetwork net(model.lattice(), {6, 2, 3});
    Rng rng(12);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (double& p : net.params()) p = u(rng);
    Formulation f = Formulation::discrete_terminal(-12.0);
    f.terminals = TerminalChoice::Explicit;
    f.terminal_states = {SpinConfig::from_string("++-+-----")};
    const NeuralQ q(net, Mdp(model, f));
    const TableGuide table = tabulate_network(q);
    double worst = 0.0;
    std::vector<double> logits(9);
    std::vector<double> direct(9);
    for (const SpinConfig& s : table.space().states()) {
        double a = 0.0;
        double b = 0.0;
        table.evaluate(s, a, logits);
        NeuralGuide(q).evaluate(s, b, direct);
        worst = std::max(worst, std::abs(a - b));
        for (int i = 0; i < 9; ++i) worst = std::max(worst, std::abs(logits[i] - direct[i]));
    }
    CHECK(worst < 1e-11);
    CHECK(table.log_phi()[table.space().index(f.terminal_states[0])] == 0.0);
}
