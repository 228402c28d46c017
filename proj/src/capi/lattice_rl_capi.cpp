// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/lattice_rl.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <type_traits>

#include "lattice_rl/error.hpp"
#include "lattice_rl/exact.hpp"
#include "lattice_rl/fk_sim.hpp"
#include "lattice_rl/mdp.hpp"
#include "lattice_rl/neural.hpp"
#include "lattice_rl/rng.hpp"
#include "lattice_rl/sampling.hpp"
#include "lattice_rl/serialize.hpp"

struct lrl_model {
    lrl::StoquasticModel model;
};

struct lrl_qnet {
    lrl::Checkpoint cp;
};

namespace {

using lrl::ErrorCode;
using lrl::fail;
using lrl::Json;

constexpr std::size_t kMaxDumpStates = std::size_t{1} << 14;

thread_local std::string last_error;

template <class F>
lrl_status guard(F&& body) noexcept {
    last_error.clear();
    try {
        body();
        return LRL_OK;
    } catch (const lrl::Error& e) {
        last_error = e.what();
        return static_cast<lrl_status>(e.code());
    } catch (const nlohmann::json::exception& e) {
        last_error = e.what();
        return LRL_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return LRL_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return LRL_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return LRL_INTERNAL;
    }
}

char* copy_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

void emit(const Json& j, char** out) {
    *out = copy_string(j.dump());
}

template <class T>
void require_pointer(const T* p, const char* what) {
    if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

Json parse_document(const char* text, const std::string& context) {
    if (!text || !*text) return Json::object();
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::InvalidArgument, context + ": invalid JSON: " + e.what());
    }
    if (j.is_null()) return Json::object();
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, context + " must be a JSON object");
    return j;
}

[[noreturn]] void wrong_type(const std::string& where, const char* expected) {
    fail(ErrorCode::InvalidArgument, where + ": expected " + expected);
}

template <class T>
T convert(const Json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) wrong_type(where, "a boolean");
        return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) wrong_type(where, "an integer");
        if (v.is_number_unsigned()) {
            const auto u = v.get<std::uint64_t>();
            if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) wrong_type(where, "a smaller integer");
            return static_cast<T>(u);
        }
        const auto i = v.get<std::int64_t>();
        if constexpr (std::is_unsigned_v<T>) {
            if (i < 0) wrong_type(where, "a non-negative integer");
        } else {
            if (i < std::numeric_limits<T>::min() || i > std::numeric_limits<T>::max()) {
                wrong_type(where, "a smaller integer");
            }
        }
        return static_cast<T>(i);
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) wrong_type(where, "a number");
        return v.get<double>();
    } else {
        if (!v.is_string()) wrong_type(where, "a string");
        return v.get<std::string>();
    }
}

// Typed access to an options object. Every key read is copied, with its
// default filled in, into `resolved`.
class Options {
public:
    Options(const char* text, std::string context, std::initializer_list<std::string_view> keys)
        : j_(parse_document(text, context)), context_(std::move(context)) {
        lrl::require_keys(j_, keys, context_);
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        T value = has(key) ? convert<T>(j_[key], where(key)) : fallback;
        resolved[key] = value;
        return value;
    }

    template <class T>
    std::optional<T> maybe(const std::string& key) {
        if (!has(key)) {
            resolved[key] = nullptr;
            return std::nullopt;
        }
        T value = convert<T>(j_[key], where(key));
        resolved[key] = value;
        return value;
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_[key].is_null(); }
    const Json& raw(const std::string& key) const { return j_.at(key); }
    std::string where(const std::string& key) const { return context_ + "." + key; }

    Json resolved = Json::object();

private:
    Json j_;
    std::string context_;
};

std::optional<lrl::SpinConfig> parse_state(const std::optional<std::string>& text, int n_sites,
                                           const std::string& where) {
    if (!text) return std::nullopt;
    lrl::SpinConfig s = lrl::SpinConfig::from_string(*text);
    if (s.n_sites() != n_sites) {
        fail(ErrorCode::InvalidArgument, where + ": expected " + std::to_string(n_sites) + " spins");
    }
    return s;
}

lrl::Formulation read_formulation(Options& opts, const std::string& key, lrl::Formulation fallback) {
    lrl::Formulation f = opts.has(key) ? lrl::formulation_from_json(opts.raw(key)) : fallback;
    opts.resolved[key] = lrl::formulation_to_json(f);
    return f;
}

double max_relative_error(std::span<const double> u, std::span<const double> phi) {
    const double top = *std::max_element(u.begin(), u.end());
    std::vector<double> psi(u.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        psi[i] = std::exp(u[i] - top);
        norm += psi[i] * psi[i];
    }
    norm = std::sqrt(norm);
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) worst = std::max(worst, std::abs(psi[i] / norm - phi[i]) / phi[i]);
    return worst;
}

lrl::Amplitude table_amplitude(std::shared_ptr<const lrl::TableGuide> table) {
    return [table](const lrl::SpinConfig& s) {
        return std::exp(table->log_phi()[table->space().index(s)]);
    };
}

lrl::Amplitude oracle_amplitude(std::shared_ptr<const lrl::GroundState> gs) {
    return [gs](const lrl::SpinConfig& s) { return gs->amplitude(s); };
}

bool enumerable(const lrl::StoquasticModel& model) {
    return model.n_sites() <= lrl::kDefaultEnumerationCap;
}

void check_match(const lrl::StoquasticModel& model, const lrl_qnet* qnet) {
    if (qnet && lrl::model_to_json(model) != lrl::model_to_json(qnet->cp.model)) {
        fail(ErrorCode::InvalidArgument, "model does not match the network's model");
    }
}

} // namespace

extern "C" {

const char* lrl_version(void) {
    return "1.0.0";
}

const char* lrl_status_name(lrl_status status) {
    switch (status) {
    case LRL_OK: return "OK";
    case LRL_INTERNAL: return "INTERNAL";
    default: break;
    }
    const int code = static_cast<int>(status);
    if (code >= 1 && code <= static_cast<int>(ErrorCode::FormatError)) {
        return lrl::error_code_name(static_cast<ErrorCode>(code)).data();
    }
    return "UNKNOWN";
}

const char* lrl_last_error(void) {
    return last_error.c_str();
}

void lrl_string_free(char* text) {
    std::free(text);
}

lrl_status lrl_model_create(const char* spec_json, lrl_model** out) {
    return guard([&] {
        require_pointer(out, "out");
        *out = nullptr;
        require_pointer(spec_json, "spec_json");
        const Json spec = parse_document(spec_json, "model");
        *out = new lrl_model{lrl::model_from_json(spec)};
    });
}

void lrl_model_destroy(lrl_model* model) {
    delete model;
}

lrl_status lrl_model_to_json(const lrl_model* model, char** out_json) {
    return guard([&] {
        require_pointer(model, "model");
        require_pointer(out_json, "out_json");
        emit(lrl::model_to_json(model->model), out_json);
    });
}

int lrl_model_n_sites(const lrl_model* model) {
    return model ? model->model.n_sites() : 0;
}

lrl_status lrl_ground_state(const lrl_model* model, const char* options_json, char** result_json) {
    return guard([&] {
        require_pointer(model, "model");
        require_pointer(result_json, "result_json");
        Options opts(options_json, "validate",
                     {"sector", "energy_tol", "residual_tol", "max_iterations", "dump_states"});
        lrl::GroundStateOptions go;
        const auto sector = opts.maybe<int>("sector");
        go.energy_tol = opts.get("energy_tol", go.energy_tol);
        go.residual_tol = opts.get("residual_tol", go.residual_tol);
        go.max_iterations = opts.get("max_iterations", go.max_iterations);
        const bool dump = opts.get("dump_states", false);

        const lrl::GroundState gs = lrl::ground_state_dense(model->model, sector, go);
        Json result = {{"options", opts.resolved},
                       {"E0", gs.energy},
                       {"E0_per_site", gs.energy / model->model.n_sites()},
                       {"residual", gs.residual},
                       {"iterations", gs.iterations},
                       {"n_states", gs.space->size()},
                       {"sector", sector ? Json(*sector) : Json(nullptr)}};
        if (dump) {
            if (gs.space->size() > kMaxDumpStates) {
                fail(ErrorCode::StateSpaceTooLarge, "state dumps are limited to 16384 states");
            }
            Json states = Json::array();
            for (std::size_t i = 0; i < gs.space->size(); ++i) {
                states.push_back({{"state", (*gs.space)[i].to_string()}, {"phi", gs.amplitudes[i]}});
            }
            result["states"] = std::move(states);
        }
        emit(result, result_json);
    });
}

lrl_status lrl_solve(const lrl_model* model, const char* options_json, char** result_json) {
    return guard([&] {
        require_pointer(model, "model");
        require_pointer(result_json, "result_json");
        Options opts(options_json, "solve",
                     {"formulation", "sector", "method", "tol", "max_iterations", "dump_states", "oracle"});
        const lrl::Formulation f = read_formulation(opts, "formulation", lrl::Formulation::discrete_infinite());
        const auto sector = opts.maybe<int>("sector");
        const std::string method = opts.get<std::string>("method", "value_iteration");
        lrl::SolveOptions so;
        so.tol = opts.get("tol", so.tol);
        so.max_iterations = opts.get("max_iterations", so.max_iterations);
        const bool dump = opts.get("dump_states", false);
        const bool oracle = opts.get("oracle", true);
        if (method != "value_iteration" && method != "power_iteration") {
            fail(ErrorCode::InvalidArgument,
                 "solve.method: expected \"value_iteration\" or \"power_iteration\"");
        }
        if (!(so.tol > 0.0)) fail(ErrorCode::InvalidArgument, "solve.tol: must be positive");
        if (so.max_iterations <= 0) fail(ErrorCode::InvalidArgument, "solve.max_iterations: must be positive");

        const lrl::SharedSpace space = lrl::make_space(model->model, sector);
        if (dump && space->size() > kMaxDumpStates) {
            fail(ErrorCode::StateSpaceTooLarge, "state dumps are limited to 16384 states");
        }
        lrl::Mdp mdp(model->model, f, space.get());
        std::vector<double> u;
        double r_star = 0.0;
        double energy = 0.0;
        long iterations = 0;
        if (method == "value_iteration") {
            lrl::ValueTable table = lrl::solve_tabular(mdp, space, so);
            u = std::move(table.values);
            r_star = table.r_star;
            energy = table.energy;
            iterations = table.iterations;
        } else {
            const lrl::Desirability d = lrl::desirability_power_iteration(mdp, space, so);
            u.resize(d.z.size());
            std::transform(d.z.begin(), d.z.end(), u.begin(), [](double z) { return std::log(z); });
            r_star = d.r_star;
            energy = d.energy;
            iterations = d.iterations;
        }
        if (f.kind == lrl::FormulationKind::DiscreteTerminal) mdp = mdp.with_energy(energy);
        const lrl::Backup backup = lrl::soft_backup_U(mdp, *space, u);
        double residual = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) residual = std::max(residual, std::abs(backup.values[i] - u[i]));

        lrl::Formulation resolved = f;
        if (f.kind == lrl::FormulationKind::DiscreteInfinite) resolved.shift = mdp.shift();
        if (f.kind == lrl::FormulationKind::DiscreteTerminal) resolved.energy = energy;
        Json result = {{"options", opts.resolved},
                       {"formulation", lrl::formulation_to_json(resolved)},
                       {"method", method},
                       {"E0", energy},
                       {"R_star", r_star},
                       {"residual", residual},
                       {"iterations", iterations},
                       {"n_states", space->size()}};
        if (oracle) {
            const lrl::GroundState gs = lrl::ground_state_dense(model->model, sector);
            result["oracle"] = {{"E0", gs.energy},
                                {"E0_error", std::abs(energy - gs.energy)},
                                {"amplitude_error", max_relative_error(u, gs.amplitudes)}};
        }
        if (dump) {
            Json states = Json::array();
            for (std::size_t i = 0; i < space->size(); ++i) {
                states.push_back({{"state", (*space)[i].to_string()}, {"U", u[i]}});
            }
            result["states"] = std::move(states);
        }
        emit(result, result_json);
    });
}

lrl_status lrl_fk_estimate(const lrl_model* model, const lrl_qnet* qnet, const char* options_json,
                           char** result_json) {
    return guard([&] {
        require_pointer(model, "model");
        require_pointer(result_json, "result_json");
        check_match(model->model, qnet);
        const lrl::StoquasticModel& m = model->model;
        Options opts(options_json, "fk",
                     {"s0", "T", "n_traj", "seed", "rates", "sign", "energy", "terminal", "sector"});
        const auto s0_text = opts.maybe<std::string>("s0");
        const double T = opts.get("T", 1.0);
        const auto n_traj = opts.get<std::uint64_t>("n_traj", 10000);
        const auto seed = opts.get<std::uint64_t>("seed", 0);
        const std::string rates = opts.get<std::string>("rates", "passive");
        const std::string sign = opts.get<std::string>("sign", "minus");
        const std::string terminal = opts.get<std::string>("terminal", "one");
        const auto sector = opts.maybe<int>("sector");

        Json energy_spec;
        if (opts.has("energy")) {
            energy_spec = opts.raw("energy");
            if (!energy_spec.is_number() && !energy_spec.is_string()) {
                wrong_type(opts.where("energy"), "a number, \"oracle\" or \"checkpoint\"");
            }
        } else {
            energy_spec = enumerable(m) ? Json("oracle") : qnet ? Json("checkpoint") : Json(nullptr);
        }
        opts.resolved["energy"] = energy_spec;

        if (rates != "passive" && rates != "optimal" && rates != "checkpoint") {
            fail(ErrorCode::InvalidArgument, "fk.rates: expected \"passive\", \"optimal\" or \"checkpoint\"");
        }
        if (terminal != "one" && terminal != "oracle" && terminal != "checkpoint") {
            fail(ErrorCode::InvalidArgument, "fk.terminal: expected \"one\", \"oracle\" or \"checkpoint\"");
        }
        if (sign != "minus" && sign != "plus") fail(ErrorCode::InvalidArgument, "fk.sign: expected \"minus\" or \"plus\"");
        if (energy_spec.is_string() && energy_spec != "oracle" && energy_spec != "checkpoint") {
            fail(ErrorCode::InvalidArgument, "fk.energy: expected a number, \"oracle\" or \"checkpoint\"");
        }
        const bool wants_net = rates == "checkpoint" || terminal == "checkpoint" || energy_spec == "checkpoint";
        if (wants_net && !qnet) fail(ErrorCode::InvalidArgument, "fk: a checkpoint is required");
        if (n_traj == 0) fail(ErrorCode::InvalidArgument, "fk.n_traj: must be positive");

        lrl::SpinConfig s0 = parse_state(s0_text, m.n_sites(), opts.where("s0"))
                                 .value_or(lrl::SpinConfig::all_up(m.n_sites()));
        opts.resolved["s0"] = s0.to_string();

        std::shared_ptr<const lrl::GroundState> gs;
        const bool wants_oracle = rates == "optimal" || terminal == "oracle" || energy_spec == "oracle";
        if (wants_oracle || enumerable(m)) {
            gs = std::make_shared<const lrl::GroundState>(lrl::ground_state_dense(m, sector));
        }
        std::shared_ptr<const lrl::TableGuide> table;
        std::optional<lrl::NeuralQ> nq;
        lrl::Amplitude net_phi;
        if (qnet && wants_net) {
            nq.emplace(qnet->cp.net, qnet->cp.mdp());
            if (enumerable(m)) {
                table = std::make_shared<const lrl::TableGuide>(lrl::tabulate_network(*nq));
                net_phi = table_amplitude(table);
            } else {
                net_phi = [&nq](const lrl::SpinConfig& s) { return std::exp(nq->log_phi(s)); };
            }
        }

        lrl::FkOptions fo;
        fo.sign = sign == "minus" ? lrl::EnergySign::MinusE0 : lrl::EnergySign::PlusE0;
        if (energy_spec.is_number()) fo.energy = energy_spec.get<double>();
        if (energy_spec == "oracle") fo.energy = gs->energy;
        if (energy_spec == "checkpoint") fo.energy = qnet->cp.e0_estimate;

        lrl::Amplitude term = [](const lrl::SpinConfig&) { return 1.0; };
        if (terminal == "oracle") term = oracle_amplitude(gs);
        if (terminal == "checkpoint") term = net_phi;

        const std::uint64_t stream = lrl::substream_seed(seed, "fk");
        lrl::Estimate est;
        if (rates == "passive") {
            est = lrl::fk_estimate(m, s0, T, term, n_traj, stream, fo);
        } else {
            const lrl::Amplitude guide = rates == "optimal" ? oracle_amplitude(gs) : net_phi;
            est = lrl::fk_importance_estimate(lrl::RateMap::doob(m, guide), s0, T, term, n_traj, stream, fo);
        }
        Json result = {{"options", opts.resolved},
                       {"estimate", est.mean},
                       {"std_error", est.std_error},
                       {"variance", est.variance},
                       {"n_jumps_mean", est.n_jumps_mean},
                       {"n_traj", est.n},
                       {"energy", fo.energy ? Json(*fo.energy) : Json(nullptr)}};
        if (gs && gs->space->find(s0)) result["oracle_phi"] = gs->amplitude(s0);
        emit(result, result_json);
    });
}

lrl_status lrl_train(const lrl_model* model, const char* config_json, lrl_train_callback callback,
                     void* user, lrl_qnet** out, char** result_json) {
    return guard([&] {
        require_pointer(model, "model");
        require_pointer(out, "out");
        *out = nullptr;
        const lrl::StoquasticModel& m = model->model;
        Options opts(config_json, "train",
                     {"formulation", "learning_rate", "lr_decay", "lr_decay_every", "batch_size",
                      "buffer_size", "walkers", "target_update", "episodes", "seed",
                      "validation_interval", "validation_samples", "exact_validation_max_sites",
                      "network", "initial_energy", "divergence_checkpoint", "oracle"});
        lrl::TrainConfig c;
        c.formulation = read_formulation(opts, "formulation", c.formulation);
        c.learning_rate = opts.get("learning_rate", c.learning_rate);
        c.lr_decay = opts.get("lr_decay", c.lr_decay);
        c.lr_decay_every = opts.get("lr_decay_every", c.lr_decay_every);
        c.batch_size = opts.get("batch_size", c.batch_size);
        c.buffer_size = opts.get("buffer_size", c.buffer_size);
        c.walkers = opts.get("walkers", c.batch_size);
        c.target_update = opts.get("target_update", c.target_update);
        c.episodes = opts.get("episodes", c.episodes);
        const auto seed = opts.get<std::uint64_t>("seed", 0);
        c.seed = lrl::substream_seed(seed, "train");
        c.validation_interval = opts.get("validation_interval", c.validation_interval);
        c.validation_samples = opts.get("validation_samples", c.validation_samples);
        c.exact_validation_max_sites = opts.get("exact_validation_max_sites", c.exact_validation_max_sites);
        c.network = opts.has("network") ? lrl::network_from_json(opts.raw("network")) : c.network;
        opts.resolved["network"] = lrl::network_to_json(c.network);
        c.initial_energy = opts.maybe<double>("initial_energy");
        if (const auto path = opts.maybe<std::string>("divergence_checkpoint")) c.divergence_checkpoint = *path;
        const bool oracle = opts.get("oracle", true);
        try {
            c.validate(m);
        } catch (const lrl::Error& e) {
            if (e.code() != ErrorCode::InvalidArgument) throw;
            fail(e.code(), std::string("train.") + e.what());
        }

        lrl::TrainCallback cb;
        if (callback) {
            cb = [&](const lrl::TrainLogEntry& e) {
                const lrl_train_entry entry{e.episode, e.loss, e.e_var ? 1 : 0, e.e_var.value_or(0.0),
                                            e.e0_estimate, e.lr};
                callback(&entry, user);
            };
        }
        lrl::TrainResult trained = lrl::train_soft_q(m, c, cb);
        auto handle = std::make_unique<lrl_qnet>(
            lrl_qnet{{m, trained.formulation, std::move(trained.net), trained.e0_estimate, c.episodes}});
        if (result_json) {
            Json result = {{"options", opts.resolved},
                           {"final_energy", trained.final_energy},
                           {"e0_estimate", trained.e0_estimate},
                           {"episodes", c.episodes},
                           {"n_params", handle->cp.net.n_params()}};
            if (oracle && enumerable(m)) {
                const double e0 = lrl::ground_state_dense(m, std::nullopt).energy;
                result["oracle_E0"] = e0;
                result["relative_error"] = std::abs(trained.final_energy - e0) / std::abs(e0);
            }
            emit(result, result_json);
        }
        *out = handle.release();
    });
}

lrl_status lrl_qnet_save(const lrl_qnet* qnet, const char* path) {
    return guard([&] {
        require_pointer(qnet, "qnet");
        require_pointer(path, "path");
        lrl::save_checkpoint(path, qnet->cp);
    });
}

lrl_status lrl_qnet_load(const char* path, lrl_qnet** out) {
    return guard([&] {
        require_pointer(out, "out");
        *out = nullptr;
        require_pointer(path, "path");
        *out = new lrl_qnet{lrl::load_checkpoint(path)};
    });
}

void lrl_qnet_destroy(lrl_qnet* qnet) {
    delete qnet;
}

lrl_status lrl_qnet_info(const lrl_qnet* qnet, char** out_json) {
    return guard([&] {
        require_pointer(qnet, "qnet");
        require_pointer(out_json, "out_json");
        const lrl::Checkpoint& cp = qnet->cp;
        emit({{"model", lrl::model_to_json(cp.model)},
              {"formulation", lrl::formulation_to_json(cp.formulation)},
              {"network", lrl::network_to_json(cp.net.config())},
              {"n_params", cp.net.n_params()},
              {"e0_estimate", cp.e0_estimate},
              {"episode", cp.episode}},
             out_json);
    });
}

lrl_status lrl_qnet_model(const lrl_qnet* qnet, lrl_model** out) {
    return guard([&] {
        require_pointer(out, "out");
        *out = nullptr;
        require_pointer(qnet, "qnet");
        *out = new lrl_model{qnet->cp.model};
    });
}

lrl_status lrl_qnet_log_phi(const lrl_qnet* qnet, const char* const* states, size_t n, double* out) {
    return guard([&] {
        require_pointer(qnet, "qnet");
        if (n == 0) return;
        require_pointer(states, "states");
        require_pointer(out, "out");
        std::vector<lrl::SpinConfig> batch;
        batch.reserve(n);
        const int sites = qnet->cp.model.n_sites();
        for (size_t i = 0; i < n; ++i) {
            require_pointer(states[i], "state");
            batch.push_back(*parse_state(std::string(states[i]), sites, "states[" + std::to_string(i) + "]"));
        }
        const lrl::NeuralQ q(qnet->cp.net, qnet->cp.mdp());
        const std::vector<double> values = q.log_phi(batch);
        std::copy(values.begin(), values.end(), out);
    });
}

lrl_status lrl_sample(const lrl_model* model, const lrl_qnet* qnet, const char* options_json,
                      char** result_json) {
    return guard([&] {
        require_pointer(model, "model");
        require_pointer(result_json, "result_json");
        check_match(model->model, qnet);
        const lrl::StoquasticModel& m = model->model;
        Options opts(options_json, "sample",
                     {"proposal", "steps", "burn_in", "seed", "guide", "tabulate", "series"});
        const std::string proposal_text = opts.get<std::string>("proposal", "q1");
        const lrl::Proposal proposal = lrl::Proposal::parse(proposal_text);
        lrl::McOptions mo;
        mo.steps = opts.get("steps", mo.steps);
        mo.burn_in = opts.get("burn_in", mo.burn_in.value_or(10L * m.n_sites()));
        const auto seed = opts.get<std::uint64_t>("seed", 0);
        const std::string guide_kind = opts.get<std::string>("guide", qnet ? "network" : "exact");
        const bool tabulate = opts.get("tabulate", enumerable(m));
        mo.keep_series = opts.get("series", false);
        if (guide_kind != "network" && guide_kind != "exact") {
            fail(ErrorCode::InvalidArgument, "sample.guide: expected \"network\" or \"exact\"");
        }
        if (guide_kind == "network" && !qnet) fail(ErrorCode::InvalidArgument, "sample: a checkpoint is required");
        if (mo.steps <= 0) fail(ErrorCode::InvalidArgument, "sample.steps: must be positive");
        if (*mo.burn_in < 0) fail(ErrorCode::InvalidArgument, "sample.burn_in: must be non-negative");
        mo.steps += *mo.burn_in;

        std::unique_ptr<lrl::Guide> guide;
        if (guide_kind == "exact") {
            const lrl::GroundState gs = lrl::ground_state_dense(m, std::nullopt);
            std::vector<double> log_phi(gs.amplitudes.size());
            std::transform(gs.amplitudes.begin(), gs.amplitudes.end(), log_phi.begin(),
                           [](double a) { return std::log(a); });
            guide = std::make_unique<lrl::TableGuide>(gs.space, std::move(log_phi));
        } else {
            lrl::NeuralQ q(qnet->cp.net, qnet->cp.mdp());
            if (tabulate) {
                guide = std::make_unique<lrl::TableGuide>(lrl::tabulate_network(q));
            } else {
                guide = std::make_unique<lrl::NeuralGuide>(std::move(q));
            }
        }
        lrl::Rng rng(lrl::substream_seed(seed, "sample"));
        const lrl::McResult mc = lrl::variational_energy_mc(m, *guide, proposal, mo, rng);
        const lrl::Autocorrelation& ac = mc.stats.autocorrelation;
        Json result = {{"options", opts.resolved},
                       {"proposal", proposal.name()},
                       {"guide", guide_kind},
                       {"energy", mc.energy},
                       {"std_error", mc.std_error},
                       {"samples", mc.stats.samples},
                       {"acceptance", mc.stats.acceptance},
                       {"tau", ac.tau},
                       {"tau_integrated", ac.tau_integrated},
                       {"lags_used", ac.lags_used},
                       {"flagged", ac.flagged}};
        if (mo.keep_series) {
            result["series"] = {{"local_energy", mc.local_energies}, {"diagonal_energy", mc.diagonal_energies}};
        }
        emit(result, result_json);
    });
}

} // extern "C"
