// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "lattice_rl/error.hpp"
#include "lattice_rl/neural.hpp"

namespace lrl {

namespace {

constexpr std::size_t kChunk = 1024;

bool finite(double x) { return std::isfinite(x); }

Eigen::MatrixXd forward_chunked(const QNetwork& net, std::span<const SpinConfig> states) {
    Eigen::MatrixXd out(net.n_sites(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t start = 0; start < states.size(); start += kChunk) {
        const std::size_t len = std::min(kChunk, states.size() - start);
        out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
            net.forward(states.subspan(start, len));
    }
    return out;
}

std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
    return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

// Enumerated space with one representative per translation orbit. For state
// i, translate(i, shift_of[i]) is its representative.
struct OrbitTable {
    SharedSpace space;
    std::vector<SpinConfig> reps;
    std::vector<std::uint32_t> rep_of;
    std::vector<std::array<int, 2>> shift_of;

    OrbitTable(const StoquasticModel& model, int max_sites)
        : space(make_space(model, std::nullopt, max_sites)) {
        const Lattice& lat = model.lattice();
        rep_of.assign(space->size(), 0);
        shift_of.assign(space->size(), {0, 0});
        if (!lat.fully_periodic()) {
            reps.assign(space->states().begin(), space->states().end());
            std::iota(rep_of.begin(), rep_of.end(), 0U);
            return;
        }
        std::vector<std::int64_t> slot(space->size(), -1);
        for (std::size_t i = 0; i < space->size(); ++i) {
            const SpinConfig& s = (*space)[i];
            SpinConfig best = s;
            std::array<int, 2> best_shift{0, 0};
            for (int dy = 0; dy < lat.height(); ++dy) {
                for (int dx = 0; dx < lat.width(); ++dx) {
                    const SpinConfig t = translate_config(s, lat, {dx, dy});
                    if (t < best) {
                        best = t;
                        best_shift = {dx, dy};
                    }
                }
            }
            const std::size_t b = space->index(best);
            if (slot[b] < 0) {
                slot[b] = static_cast<std::int64_t>(reps.size());
                reps.push_back(best);
            }
            rep_of[i] = static_cast<std::uint32_t>(slot[b]);
            shift_of[i] = best_shift;
        }
    }

    // Per-site outputs for every state (sites x states). Equivariance gives
    // Q(s)(x) = Q(rep)(x + shift).
    Eigen::MatrixXd outputs(const QNetwork& net) const {
        const Eigen::MatrixXd rep_out = forward_chunked(net, reps);
        const Lattice& lat = net.lattice();
        const int n = net.n_sites();
        Eigen::MatrixXd out(n, static_cast<Eigen::Index>(space->size()));
        for (std::size_t i = 0; i < space->size(); ++i) {
            const auto [dx, dy] = shift_of[i];
            for (int x = 0; x < n; ++x) {
                const int src = dx == 0 && dy == 0 ? x : lat.displaced(x, dx, dy);
                out(x, static_cast<Eigen::Index>(i)) = rep_out(src, rep_of[i]);
            }
        }
        return out;
    }

    std::vector<double> log_phi(const NeuralQ& q, const Eigen::MatrixXd& out) const {
        std::vector<double> result(space->size());
        for (std::size_t i = 0; i < space->size(); ++i) {
            result[i] = log_phi_from_outputs(q.mdp(), (*space)[i], column(out, static_cast<Eigen::Index>(i)));
        }
        return result;
    }
};

struct ExactValidator {
    OrbitTable orbits;
    SparseHamiltonian hamiltonian;

    ExactValidator(const StoquasticModel& model, int max_sites)
        : orbits(model, max_sites), hamiltonian(build_hamiltonian(model, orbits.space)) {}

    double energy(const NeuralQ& q) const {
        const std::vector<double> log_phi = orbits.log_phi(q, orbits.outputs(q.net()));
        const double top = *std::max_element(log_phi.begin(), log_phi.end());
        std::vector<double> phi(log_phi.size());
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = std::exp(log_phi[i] - top);
        return variational_energy_exact(hamiltonian, phi);
    }
};

double mc_energy(const NeuralQ& q, long samples, Rng& rng) {
    NeuralGuide guide(q);
    McOptions opts;
    const long n = q.net().n_sites();
    opts.burn_in = 10 * n * n;
    opts.steps = samples + *opts.burn_in;
    return variational_energy_mc(q.mdp().model(), guide, Proposal::q_single(), opts, rng).energy;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

} // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) fail(ErrorCode::InvalidArgument, "replay buffer capacity must be positive");
    items_.reserve(capacity);
}

void ReplayBuffer::push(Experience e) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(e));
    } else {
        items_[head_] = std::move(e);
    }
    head_ = (head_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    if (n > items_.size()) {
        fail(ErrorCode::InvalidArgument, "cannot sample " + std::to_string(n) + " experiences from " +
                                             std::to_string(items_.size()));
    }
    std::vector<std::size_t> all(items_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> out;
    out.reserve(n);
    std::sample(all.begin(), all.end(), std::back_inserter(out), n, rng);
    return out;
}

void TrainConfig::validate(const StoquasticModel& model) const {
    if (model.kind() != ModelKind::Ising) {
        fail(ErrorCode::InvalidModel, "neural training supports Ising models only");
    }
    if (!(model.h() > 0.0)) {
        fail(ErrorCode::InvalidModel, "neural training needs a positive transverse field");
    }
    auto require = [](bool ok, const char* what) {
        if (!ok) fail(ErrorCode::InvalidArgument, what);
    };
    require(learning_rate > 0.0 && finite(learning_rate), "learning_rate must be positive and finite");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
    require(lr_decay_every >= 1, "lr_decay_every must be at least 1");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(buffer_size >= batch_size, "buffer_size must be at least batch_size");
    require(!walkers || *walkers >= 1, "walkers must be at least 1");
    require(target_update >= 1, "target_update must be at least 1");
    require(episodes >= 0, "episodes must be non-negative");
    require(validation_interval >= 1, "validation_interval must be at least 1");
    require(validation_samples >= 1, "validation_samples must be at least 1");
    require(!initial_energy || finite(*initial_energy), "initial_energy must be finite");
    if (formulation.kind == FormulationKind::ContinuousFK) {
        require(formulation.dt > 0.0 && finite(formulation.dt), "dt must be positive and finite");
        if (!(formulation.dt * model.h() * model.n_sites() < 1.0)) {
            fail(ErrorCode::TimestepTooLarge, "dt * h * N must be below 1");
        }
    }
}

double q_trivial_action(const StoquasticModel& model, const SpinConfig& s,
                        std::span<const double> q, double energy, std::span<double> weights) {
    const double gap = model.diag(s) - energy;
    if (!(gap > 0.0)) {
        fail(ErrorCode::InvalidScale, "H_ss - E0 must be positive for the trivial action at " + s.to_string());
    }
    thread_local std::vector<std::pair<int, double>> terms;
    terms.clear();
    double top = -std::numeric_limits<double>::infinity();
    model.for_each_offdiag(s, [&](Action a, const SpinConfig&, double value) {
        if (a.kind != Action::Kind::Flip) {
            fail(ErrorCode::InvalidModel, "per-site network outputs need flip actions");
        }
        const double term = std::log(-value) + q[a.index];
        terms.emplace_back(a.index, term);
        top = std::max(top, term);
    });
    if (terms.empty()) {
        fail(ErrorCode::InvalidScale, "no off-diagonal transitions at " + s.to_string());
    }
    double sum = 0.0;
    for (const auto& [site, term] : terms) sum += std::exp(term - top);
    const double lse = top + std::log(sum);
    if (!weights.empty()) {
        std::fill(weights.begin(), weights.end(), 0.0);
        for (const auto& [site, term] : terms) weights[site] = std::exp(term - lse);
    }
    return lse - std::log(gap);
}

std::vector<ActionValue> action_values_from_outputs(const Mdp& mdp, const SpinConfig& s,
                                                    std::span<const double> q) {
    std::vector<ActionValue> out;
    for (const PolicyStep& step : mdp.reference_policy(s)) {
        double value = 0.0;
        if (step.action.is_stay()) {
            if (!mdp.energy()) {
                fail(ErrorCode::InvalidArgument, "the trivial action needs an energy estimate");
            }
            value = q_trivial_action(mdp.model(), s, q, *mdp.energy());
        } else if (step.action.kind == Action::Kind::Flip) {
            value = q[step.action.index];
        } else {
            fail(ErrorCode::InvalidModel, "per-site network outputs need flip actions");
        }
        out.push_back({step.action, step.target, step.probability, value});
    }
    return out;
}

double log_phi_from_outputs(const Mdp& mdp, const SpinConfig& s, std::span<const double> q) {
    if (mdp.kind() == FormulationKind::DiscreteTerminal && mdp.is_terminal(s)) return 0.0;
    return log_wavefunction_from_Q(action_values_from_outputs(mdp, s, q));
}

NeuralQ::NeuralQ(const QNetwork& net, Mdp mdp) : net_(&net), mdp_(std::move(mdp)) {
    if (mdp_.model().lattice().dims() != net.lattice().dims() ||
        mdp_.model().lattice().periodic() != net.lattice().periodic()) {
        fail(ErrorCode::ShapeError, "network lattice does not match the model");
    }
}

std::vector<ActionValue> NeuralQ::action_values(const SpinConfig& s) const {
    return action_values_from_outputs(mdp_, s, net_->forward(s));
}

double NeuralQ::log_phi(const SpinConfig& s) const {
    return log_phi_from_outputs(mdp_, s, net_->forward(s));
}

std::vector<double> NeuralQ::log_phi(std::span<const SpinConfig> states) const {
    const Eigen::MatrixXd out = forward_chunked(*net_, states);
    std::vector<double> result(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        result[i] = log_phi_from_outputs(mdp_, states[i], column(out, static_cast<Eigen::Index>(i)));
    }
    return result;
}

void NeuralGuide::evaluate(const SpinConfig& s, double& log_phi, std::span<double> logits) const {
    const std::vector<double> q = q_.net().forward(s);
    log_phi = log_phi_from_outputs(q_.mdp(), s, q);
    std::copy(q.begin(), q.end(), logits.begin());
}

void NeuralGuide::log_amplitudes(std::span<const SpinConfig> states, std::span<double> out) const {
    const std::vector<double> values = q_.log_phi(states);
    std::copy(values.begin(), values.end(), out.begin());
}

namespace {

// Residuals from per-site outputs; fills dq(:, j) = dQ(s_j, a_j)/dout(:, j)
// when dq is given.
std::vector<double> residuals(std::span<const Experience> batch, const Eigen::MatrixXd& out,
                              const Eigen::MatrixXd& target_out, const Mdp& mdp, Eigen::MatrixXd* dq) {
    const Eigen::Index n = out.rows();
    const auto b = static_cast<Eigen::Index>(batch.size());
    if (out.cols() != b || target_out.cols() != b || target_out.rows() != n) {
        fail(ErrorCode::ShapeError, "output matrices do not match the batch");
    }
    if (dq) dq->setZero(n, b);
    std::vector<double> delta(batch.size());
    for (Eigen::Index j = 0; j < b; ++j) {
        const Experience& e = batch[j];
        const auto col = column(out, j);
        double qa = 0.0;
        if (e.a.is_stay()) {
            if (!mdp.energy()) fail(ErrorCode::InvalidArgument, "the trivial action needs an energy estimate");
            std::span<double> w;
            if (dq) w = {dq->data() + j * n, static_cast<std::size_t>(n)};
            qa = q_trivial_action(mdp.model(), e.s, col, *mdp.energy(), w);
        } else {
            qa = col[e.a.index];
            if (dq) (*dq)(e.a.index, j) = 1.0;
        }
        delta[j] = qa - mdp.reward(e.s) - log_phi_from_outputs(mdp, e.next, column(target_out, j));
    }
    return delta;
}

} // namespace

std::vector<double> bellman_residuals(std::span<const Experience> batch, const Eigen::MatrixXd& out,
                                      const Eigen::MatrixXd& target_out, const Mdp& mdp) {
    return residuals(batch, out, target_out, mdp, nullptr);
}

LossValue residual_loss(std::span<const double> delta, bool variance) {
    if (delta.empty()) fail(ErrorCode::InvalidArgument, "loss needs a nonempty batch");
    const double mean = std::accumulate(delta.begin(), delta.end(), 0.0) / static_cast<double>(delta.size());
    const double center = variance ? mean : 0.0;
    double loss = 0.0;
    for (double d : delta) loss += (d - center) * (d - center);
    return {loss / static_cast<double>(delta.size()), mean};
}

LossValue bellman_residual_loss(std::span<const Experience> batch, const QNetwork& net,
                                const QNetwork& target, const Mdp& mdp, std::span<double> grad) {
    if (batch.empty()) fail(ErrorCode::InvalidArgument, "loss needs a nonempty batch");
    if (!grad.empty() && grad.size() != net.n_params()) {
        fail(ErrorCode::ShapeError, "gradient buffer does not match the network");
    }
    const std::size_t b = batch.size();
    const bool variance = mdp.has_trivial_action();
    std::vector<SpinConfig> states(b);
    std::vector<SpinConfig> nexts(b);
    for (std::size_t j = 0; j < b; ++j) {
        states[j] = batch[j].s;
        nexts[j] = batch[j].next;
    }
    const Eigen::MatrixXd tout = forward_chunked(target, nexts);

    // One chunk keeps its cache; larger batches recompute the forward pass
    // chunk by chunk for the backward pass.
    const bool single = b <= kChunk;
    QNetwork::Cache cache;
    const Eigen::MatrixXd out = single && !grad.empty() ? net.forward(states, cache)
                                                        : forward_chunked(net, states);
    Eigen::MatrixXd dq;
    const std::vector<double> delta = residuals(batch, out, tout, mdp, grad.empty() ? nullptr : &dq);
    const LossValue value = residual_loss(delta, variance);
    if (grad.empty()) return value;

    const double center = variance ? value.mean_residual : 0.0;
    for (std::size_t j = 0; j < b; ++j) {
        dq.col(static_cast<Eigen::Index>(j)) *= 2.0 * (delta[j] - center) / static_cast<double>(b);
    }
    if (single) {
        net.backward(cache, dq, grad);
    } else {
        for (std::size_t start = 0; start < b; start += kChunk) {
            const std::size_t len = std::min(kChunk, b - start);
            net.forward(std::span<const SpinConfig>(states).subspan(start, len), cache);
            net.backward(cache, dq.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)),
                         grad);
        }
    }
    return value;
}

double clamp_energy_estimate(const StoquasticModel& model, double e_var) {
    const double bonds = static_cast<double>(model.lattice().bonds().size());
    return std::min(e_var, -std::abs(model.J()) * bonds - model.h());
}

double network_energy(const NeuralQ& q, int max_exact_sites, long samples, Rng& rng) {
    if (q.net().n_sites() <= max_exact_sites) {
        return ExactValidator(q.mdp().model(), max_exact_sites).energy(q);
    }
    return mc_energy(q, samples, rng);
}

TableGuide tabulate_network(const NeuralQ& q, int max_sites) {
    const OrbitTable orbits(q.mdp().model(), max_sites);
    const Eigen::MatrixXd out = orbits.outputs(q.net());
    return TableGuide(orbits.space, orbits.log_phi(q, out),
                      std::vector<double>(out.data(), out.data() + out.size()));
}

TrainResult train_soft_q(const StoquasticModel& model, const TrainConfig& config,
                         const TrainCallback& callback) {
    config.validate(model);
    const int n = model.n_sites();
    std::optional<ExactValidator> exact;
    if (n <= config.exact_validation_max_sites) exact.emplace(model, config.exact_validation_max_sites);
    const Mdp base(model, config.formulation, exact ? exact->orbits.space.get() : nullptr);
    Formulation resolved = config.formulation;
    if (resolved.kind == FormulationKind::DiscreteInfinite) resolved.shift = base.shift();

    double e0 = clamp_energy_estimate(model, config.initial_energy.value_or(model.energy_lower_bound()));
    Mdp mdp = base.with_energy(e0);

    QNetwork net(model.lattice(), config.network);
    net.initialize(substream_seed(config.seed, "init"));
    QNetwork target = net;
    Adam adam(net.n_params());
    ReplayBuffer buffer(static_cast<std::size_t>(config.buffer_size));
    Rng rng(substream_seed(config.seed, "train"));
    const std::uint64_t validation_seed = substream_seed(config.seed, "validate");

    const int n_walkers = config.walkers.value_or(config.batch_size);
    std::vector<SpinConfig> walkers;
    walkers.reserve(n_walkers);
    {
        std::vector<int> sites(n);
        std::iota(sites.begin(), sites.end(), 0);
        for (int w = 0; w < n_walkers; ++w) {
            std::shuffle(sites.begin(), sites.end(), rng);
            std::uint64_t bits = 0;
            for (int i = 0; i < n / 2; ++i) bits |= std::uint64_t{1} << sites[i];
            walkers.emplace_back(n, bits);
        }
    }

    auto record = [&](int w, const Action& a, const SpinConfig& next) {
        const SpinConfig& s = walkers[w];
        buffer.push({s, a, mdp.reward(s), next, mdp.is_terminal(next)});
        walkers[w] = next;
    };

    std::vector<PolicyStep> steps;
    while (!buffer.full()) {
        for (int w = 0; w < n_walkers && !buffer.full(); ++w) {
            mdp.reference_policy(walkers[w], steps);
            const auto pick = std::uniform_int_distribution<std::size_t>(0, steps.size() - 1)(rng);
            record(w, steps[pick].action, steps[pick].target);
        }
    }

    auto validate = [&](int episode) {
        const NeuralQ q(net, mdp);
        if (exact) return exact->energy(q);
        Rng vrng = stream_rng(validation_seed, static_cast<std::uint64_t>(episode));
        return mc_energy(q, config.validation_samples, vrng);
    };

    TrainResult result{net, resolved, {}, e0, 0.0};
    std::vector<double> grad(net.n_params());
    std::vector<double> last_finite;
    std::vector<Experience> batch(static_cast<std::size_t>(config.batch_size));

    auto diverge = [&](int episode, const std::string& why) {
        std::string where;
        if (config.divergence_checkpoint) {
            QNetwork keep = net;
            std::copy(last_finite.begin(), last_finite.end(), keep.params().begin());
            save_checkpoint(*config.divergence_checkpoint,
                            {model, resolved, keep, e0, episode - 1});
            where = "; last finite network saved to " + config.divergence_checkpoint->string();
        }
        fail(ErrorCode::TrainingDiverged,
             "training diverged at episode " + std::to_string(episode) + " (" + why + ")" + where);
    };

    for (int e = 0; e < config.episodes; ++e) {
        const int episode = e + 1;
        const double lr = config.learning_rate * std::pow(config.lr_decay, e / config.lr_decay_every);

        const Eigen::MatrixXd out = forward_chunked(net, walkers);
        for (int w = 0; w < n_walkers; ++w) {
            const auto values = action_values_from_outputs(mdp, walkers[w], column(out, w));
            const auto probs = optimal_policy_from_Q(values);
            const auto& chosen = values[sample_index(probs, rng)];
            record(w, chosen.action, chosen.target);
        }

        const auto idx = buffer.sample(batch.size(), rng);
        for (std::size_t j = 0; j < idx.size(); ++j) batch[j] = buffer[idx[j]];
        last_finite.assign(net.params().begin(), net.params().end());
        std::fill(grad.begin(), grad.end(), 0.0);
        const LossValue loss = bellman_residual_loss(batch, net, target, mdp, grad);
        if (!finite(loss.loss) || !std::all_of(grad.begin(), grad.end(), finite)) {
            diverge(episode, "non-finite loss");
        }
        adam.step(net.params(), grad, lr);
        if (!std::all_of(net.params().begin(), net.params().end(), finite)) {
            diverge(episode, "non-finite parameters");
        }
        if (episode % config.target_update == 0) {
            std::copy(net.params().begin(), net.params().end(), target.params().begin());
        }

        TrainLogEntry entry{episode, loss.loss, std::nullopt, e0, lr};
        if (episode % config.validation_interval == 0 || episode == config.episodes) {
            const double e_var = validate(episode);
            if (!finite(e_var)) diverge(episode, "non-finite variational energy");
            entry.e_var = e_var;
            result.final_energy = e_var;
            e0 = clamp_energy_estimate(model, e_var);
            mdp = base.with_energy(e0);
            entry.e0_estimate = e0;
        }
        result.log.push_back(entry);
        if (callback) callback(entry);
    }
    if (config.episodes == 0) result.final_energy = validate(0);
    result.net = net;
    result.e0_estimate = e0;
    return result;
}

} // namespace lrl
