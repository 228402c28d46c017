// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lattice_rl/mdp.hpp"
#include "lattice_rl/qnetwork.hpp"
#include "lattice_rl/rng.hpp"
#include "lattice_rl/sampling.hpp"

namespace lrl {

struct Experience {
    SpinConfig s;
    Action a;
    /// Reward at generation time. Losses recompute r(s) with the current
    /// energy estimate.
    double r = 0.0;
    SpinConfig next;
    bool terminal = false;
};

/// Fixed-capacity ring buffer of experiences.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Experience e);
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool full() const noexcept { return items_.size() == capacity_; }
    const Experience& operator[](std::size_t i) const { return items_[i]; }

    /// `n` distinct indices, uniformly, in ascending order.
    std::vector<std::size_t> sample(std::size_t n, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Experience> items_;
};

struct TrainConfig {
    Formulation formulation = Formulation::discrete_terminal();
    double learning_rate = 1e-3;
    double lr_decay = 0.99;
    int lr_decay_every = 10;
    int batch_size = 4096;
    int buffer_size = 65536;
    /// Parallel walkers generating experiences; defaults to batch_size.
    std::optional<int> walkers;
    int target_update = 20;
    int episodes = 4500;
    std::uint64_t seed = 0;
    int validation_interval = 20;
    /// Chain length of Monte Carlo validation on lattices too large to
    /// enumerate.
    long validation_samples = 20000;
    /// Largest lattice validated by enumeration.
    int exact_validation_max_sites = 20;
    NetConfig network;
    /// Energy estimate before the first validation; defaults to the model's
    /// lower bound -|J| (bonds) - h N.
    std::optional<double> initial_energy;
    /// Where to write the last finite network if training diverges.
    std::optional<std::filesystem::path> divergence_checkpoint;

    /// Throws InvalidArgument, InvalidModel or TimestepTooLarge.
    void validate(const StoquasticModel& model) const;
};

struct TrainLogEntry {
    int episode = 0;
    double loss = 0.0;
    std::optional<double> e_var;
    double e0_estimate = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    QNetwork net;
    /// The configured formulation with its shift resolved.
    Formulation formulation;
    std::vector<TrainLogEntry> log;
    double e0_estimate = 0.0;
    /// Variational energy after the last episode.
    double final_energy = 0.0;
};

/// Q(s, a0) = log sum_a Gamma_a exp Q(s, a) - log(H_ss - E0), with `q` the
/// per-site flip values. Throws InvalidScale when s has no transitions or
/// H_ss <= E0. `weights`, when given, receives dQ(s, a0)/dq.
double q_trivial_action(const StoquasticModel& model, const SpinConfig& s,
                        std::span<const double> q, double energy,
                        std::span<double> weights = {});

/// Reference-policy actions of s with their values from per-site outputs.
/// The trivial action (if any) takes q_trivial_action at the Mdp's energy.
std::vector<ActionValue> action_values_from_outputs(const Mdp& mdp, const SpinConfig& s,
                                                    std::span<const double> q);

/// log phi(s) = log E_{a~p} exp Q(s, a); 0 on terminal states.
double log_phi_from_outputs(const Mdp& mdp, const SpinConfig& s, std::span<const double> q);

/// A network read as a Q-function. The Mdp must carry an energy whenever it
/// has a trivial action or a terminal reward.
class NeuralQ final : public QFunction {
public:
    NeuralQ(const QNetwork& net, Mdp mdp);
    std::vector<ActionValue> action_values(const SpinConfig& s) const override;
    double log_phi(const SpinConfig& s) const;
    /// log phi over a batch with one network call.
    std::vector<double> log_phi(std::span<const SpinConfig> states) const;
    const QNetwork& net() const noexcept { return *net_; }
    const Mdp& mdp() const noexcept { return mdp_; }

private:
    const QNetwork* net_;
    Mdp mdp_;
};

/// Sampling guide: amplitudes from NeuralQ, proposal logits from the raw
/// per-site outputs.
class NeuralGuide final : public Guide {
public:
    explicit NeuralGuide(NeuralQ q) : q_(std::move(q)) {}
    int n_sites() const override { return q_.net().n_sites(); }
    void evaluate(const SpinConfig& s, double& log_phi, std::span<double> logits) const override;
    void log_amplitudes(std::span<const SpinConfig> states, std::span<double> out) const override;

private:
    NeuralQ q_;
};

struct LossValue {
    double loss = 0.0;
    /// Batch mean of the residual; estimates R* for infinite-horizon losses.
    double mean_residual = 0.0;
};

/// Residuals of a batch given the per-site outputs (sites x batch) of the
/// online network at the states and of the target network at the successors.
std::vector<double> bellman_residuals(std::span<const Experience> batch, const Eigen::MatrixXd& out,
                                      const Eigen::MatrixXd& target_out, const Mdp& mdp);

/// Var(delta) when `variance`, else mean(delta^2).
LossValue residual_loss(std::span<const double> delta, bool variance);

/// Soft Bellman residual delta = Q(s,a) - r(s) - log E_{a'~p} exp Qt(s', a'),
/// with Qt from `target` and delta = Q - r on terminal successors. The loss
/// is Var(delta) with a trivial action in the formulation, mean(delta^2)
/// without. Adds dloss/dparams of `net` into `grad` when it is non-empty.
LossValue bellman_residual_loss(std::span<const Experience> batch, const QNetwork& net,
                                const QNetwork& target, const Mdp& mdp, std::span<double> grad);

/// Energy estimate with H_ss - E > 0 on every state: min(e_var, -|J| B - h).
double clamp_energy_estimate(const StoquasticModel& model, double e_var);

using TrainCallback = std::function<void(const TrainLogEntry&)>;

/// Soft Q-learning with a replay buffer and a target network. Walkers start
/// with half their spins up at random, the buffer is filled with a uniform
/// policy, and each episode then advances every walker once under the
/// current soft policy and takes one Adam step on a sampled batch.
/// Validation every `validation_interval` episodes refreshes the energy
/// estimate. Throws TrainingDiverged on a non-finite loss.
TrainResult train_soft_q(const StoquasticModel& model, const TrainConfig& config,
                         const TrainCallback& callback = {});

/// Variational energy of a trained network: exact by enumeration up to
/// `max_exact_sites` (translation orbits share one network call), otherwise
/// a Monte Carlo chain of `samples` steps with single-flip Q proposals.
double network_energy(const NeuralQ& q, int max_exact_sites, long samples, Rng& rng);

/// A network's amplitudes and per-site outputs over the full state space,
/// with one network call per translation orbit on periodic lattices.
TableGuide tabulate_network(const NeuralQ& q, int max_sites = kDefaultEnumerationCap);

struct Checkpoint {
    StoquasticModel model;
    Formulation formulation;
    QNetwork net;
    double e0_estimate = 0.0;
    int episode = 0;

    /// The network's Mdp with the stored energy estimate.
    Mdp mdp() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary file: 8-byte magic "LRLQNET1", uint32 version, uint64 header
/// length, JSON header {model, formulation, network, parameters (name and
/// shape per group), e0_estimate, episode}, then the parameters as 64-bit
/// little-endian floats. Throws IoError or FormatError.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace lrl
