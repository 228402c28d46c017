// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

// lattice-rl: command-line front end over the C API.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lattice_rl/lattice_rl.h"

namespace {

using Json = nlohmann::json;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ApiError : std::runtime_error {
    lrl_status status;
    ApiError(lrl_status s, const std::string& what) : std::runtime_error(what), status(s) {}
};

void check(lrl_status status) {
    if (status != LRL_OK) throw ApiError(status, lrl_last_error());
}

std::string take(char* text) {
    std::string out = text ? text : "";
    lrl_string_free(text);
    return out;
}

template <class T, void (*Destroy)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(Handle&& other) noexcept : p(std::exchange(other.p, nullptr)) {}
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    Handle& operator=(Handle&&) = delete;
    ~Handle() { Destroy(p); }
};

using ModelHandle = Handle<lrl_model, lrl_model_destroy>;
using NetHandle = Handle<lrl_qnet, lrl_qnet_destroy>;

// ---------------------------------------------------------------------------
// Run configuration

enum class Type { Number, Integer, Unsigned, Bool, String, StringList, Dims, Periodic, Object, NumberOrString };

struct Field {
    const char* key;
    Type type;
};

const std::vector<Field> kTopLevel = {
    {"model", Type::String},          {"J", Type::Number},
    {"h", Type::Number},              {"J_perp", Type::Number},
    {"dims", Type::Dims},             {"periodic", Type::Periodic},
    {"sector", Type::Integer},        {"seed", Type::Unsigned},
    {"formulation", Type::String},    {"dt", Type::Number},
    {"shift", Type::Number},          {"energy", Type::Number},
    {"terminals", Type::String},      {"terminal_states", Type::StringList},
    {"terminal_translates", Type::Bool}, {"checkpoint", Type::String},
    {"validate", Type::Object},       {"solve", Type::Object},
    {"train", Type::Object},          {"sample", Type::Object},
    {"fk", Type::Object},             {"output", Type::Object},
};

const std::vector<const char*> kOutputKeys = {"json", "csv", "log", "checkpoint", "series", "metadata"};
const std::vector<const char*> kFormulationKeys = {"dt", "shift", "energy", "terminals", "terminal_states",
                                                   "terminal_translates"};

bool has(const Json& j, const std::string& key) {
    return j.is_object() && j.contains(key) && !j[key].is_null();
}

const char* type_name(Type t) {
    switch (t) {
    case Type::Number: return "a number";
    case Type::Integer: return "an integer";
    case Type::Unsigned: return "a non-negative integer";
    case Type::Bool: return "a boolean";
    case Type::String: return "a string";
    case Type::StringList: return "a list of strings";
    case Type::Dims: return "a positive integer or a list of one or two";
    case Type::Periodic: return "a boolean or a list of booleans";
    case Type::Object: return "an object";
    case Type::NumberOrString: return "a number or a string";
    }
    return "";
}

bool type_ok(const Json& v, Type t) {
    switch (t) {
    case Type::Number: return v.is_number();
    case Type::Integer: return v.is_number_integer();
    case Type::Unsigned: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Type::Bool: return v.is_boolean();
    case Type::String: return v.is_string();
    case Type::StringList:
        return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_string(); });
    case Type::Dims: {
        auto positive = [](const Json& x) { return x.is_number_integer() && x.get<std::int64_t>() > 0; };
        return positive(v) || (v.is_array() && !v.empty() && v.size() <= 2 && std::all_of(v.begin(), v.end(), positive));
    }
    case Type::Periodic:
        return v.is_boolean() ||
               (v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_boolean(); }));
    case Type::Object: return v.is_object();
    case Type::NumberOrString: return v.is_number() || v.is_string();
    }
    return false;
}

// Structural checks of the run config. Section contents are checked by the
// library when the section runs.
void check_config(Json& cfg) {
    if (!cfg.is_object()) throw ConfigError("config: expected a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        const auto it = std::find_if(kTopLevel.begin(), kTopLevel.end(),
                                     [&](const Field& f) { return key == f.key; });
        if (it == kTopLevel.end()) throw ConfigError("config: unknown key '" + key + "'");
        if (!value.is_null() && !type_ok(value, it->type)) {
            throw ConfigError(key + ": expected " + type_name(it->type));
        }
    }
    if (has(cfg, "dims") && cfg["dims"].is_number()) cfg["dims"] = Json::array({cfg["dims"]});
    if (has(cfg, "output")) {
        for (const auto& [key, value] : cfg["output"].items()) {
            if (std::find(kOutputKeys.begin(), kOutputKeys.end(), key) == kOutputKeys.end()) {
                throw ConfigError("output: unknown key '" + key + "'");
            }
            if (!value.is_null() && !value.is_string()) throw ConfigError("output." + key + ": expected a string");
        }
    }
}

Json model_spec(const Json& cfg) {
    const std::string kind = has(cfg, "model") ? cfg["model"].get<std::string>() : "ising";
    if (kind != "ising" && kind != "xxz") throw ConfigError("model: expected \"ising\" or \"xxz\"");
    if (!has(cfg, "dims")) throw ConfigError("dims: required (for example --dims 8 or --dims 4x4)");
    Json spec = {{"kind", kind},
                 {"J", has(cfg, "J") ? cfg["J"] : Json(1.0)},
                 {"lattice", {{"dims", cfg["dims"]}, {"periodic", has(cfg, "periodic") ? cfg["periodic"] : Json(true)}}}};
    if (kind == "ising") {
        if (has(cfg, "J_perp")) throw ConfigError("J_perp: only applies to xxz models");
        spec["h"] = has(cfg, "h") ? cfg["h"] : Json(1.0);
    } else {
        if (has(cfg, "h")) throw ConfigError("h: only applies to ising models");
        spec["J_perp"] = has(cfg, "J_perp") ? cfg["J_perp"] : Json(1.0);
    }
    return spec;
}

// Flat model keys of the resolved config.
Json flat_model(const Json& spec) {
    Json out = {{"model", spec["kind"]},
                {"J", spec["J"]},
                {"dims", spec["lattice"]["dims"]},
                {"periodic", spec["lattice"]["periodic"]}};
    if (spec.contains("h")) out["h"] = spec["h"];
    if (spec.contains("J_perp")) out["J_perp"] = spec["J_perp"];
    return out;
}

Json formulation_object(const Json& cfg) {
    Json f = Json::object();
    if (has(cfg, "formulation")) f["kind"] = cfg["formulation"];
    for (const char* key : kFormulationKeys) {
        if (has(cfg, key)) f[key] = cfg[key];
    }
    return f;
}

void put_flat_formulation(Json& resolved, const Json& f) {
    resolved["formulation"] = f["kind"];
    for (const char* key : kFormulationKeys) resolved[key] = f[key];
}

Json section(const Json& cfg, const char* name) {
    return has(cfg, name) ? cfg[name] : Json::object();
}

std::optional<std::string> output_path(const Json& cfg, const char* key) {
    if (has(cfg, "output") && has(cfg["output"], key)) return cfg["output"][key].get<std::string>();
    return std::nullopt;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ApiError(LRL_IO_ERROR, "cannot open " + path + " for writing");
    return out;
}

void write_states_csv(const std::string& path, const Json& states, const char* column) {
    std::ofstream out = open_output(path);
    out << "state," << column << "\n";
    for (const Json& row : states) out << row["state"].get<std::string>() << "," << format_double(row[column].get<double>()) << "\n";
}

// ---------------------------------------------------------------------------
// Flags

struct Flag {
    std::string name;
    std::vector<std::string> path;
    Type type;
    std::string help;
    bool is_switch = false;
    bool switch_value = true;
};

struct BoundFlag {
    Flag flag;
    CLI::Option* option = nullptr;
    std::vector<std::string> values;
    bool switched = false;
};

std::vector<Flag> common_flags() {
    return {{"--model", {"model"}, Type::String, "ising or xxz"},
            {"--J", {"J"}, Type::Number, "coupling J"},
            {"--h", {"h"}, Type::Number, "transverse field h (ising)"},
            {"--J-perp", {"J_perp"}, Type::Number, "exchange J_perp (xxz)"},
            {"--dims", {"dims"}, Type::Dims, "lattice size: L, LxL or L M"},
            {"--periodic", {"periodic"}, Type::Periodic, "periodic boundaries: true, false or one per axis"},
            {"--sector", {"sector"}, Type::Integer, "magnetization sector (xxz)"},
            {"--seed", {"seed"}, Type::Unsigned, "root seed"},
            {"--out", {"output", "json"}, Type::String, "JSON result path (default stdout)"},
            {"--metadata", {"output", "metadata"}, Type::String, "run metadata path"}};
}

std::vector<Flag> formulation_flags() {
    return {{"--formulation", {"formulation"}, Type::String, "fk, infinite or terminal"},
            {"--dt", {"dt"}, Type::Number, "time step of the fk formulation"},
            {"--shift", {"shift"}, Type::Number, "shift C of the infinite-horizon formulation"},
            {"--energy", {"energy"}, Type::Number, "E0 in the terminal reward"},
            {"--terminals", {"terminals"}, Type::String, "magnetized, classical_ground or explicit"},
            {"--terminal-state", {"terminal_states"}, Type::StringList, "explicit terminal state (repeatable)"},
            {"--terminal-translates", {"terminal_translates"}, Type::Bool, "also use translated terminals", true}};
}

Json parse_flag_value(const BoundFlag& b) {
    const Flag& f = b.flag;
    if (f.is_switch) return f.switch_value;
    const auto bad = [&] { return ConfigError(f.name + ": expected " + type_name(f.type)); };
    const std::string& text = b.values.empty() ? std::string() : b.values.front();
    try {
        std::size_t used = 0;
        switch (f.type) {
        case Type::Number: {
            const double v = std::stod(text, &used);
            if (used != text.size()) throw bad();
            return v;
        }
        case Type::Integer: {
            const long long v = std::stoll(text, &used);
            if (used != text.size()) throw bad();
            return v;
        }
        case Type::Unsigned: {
            if (text.empty() || text[0] == '-') throw bad();
            const unsigned long long v = std::stoull(text, &used);
            if (used != text.size()) throw bad();
            return v;
        }
        case Type::Bool:
            if (text == "true") return true;
            if (text == "false") return false;
            throw bad();
        case Type::String: return text;
        case Type::StringList: return b.values;
        case Type::NumberOrString: {
            try {
                const double v = std::stod(text, &used);
                if (used == text.size()) return v;
            } catch (const std::exception&) {
            }
            return text;
        }
        case Type::Dims:
        case Type::Periodic: {
            Json out = Json::array();
            for (const std::string& token : b.values) {
                std::string part;
                std::stringstream ss(token);
                while (std::getline(ss, part, token.find('x') != std::string::npos ? 'x' : ',')) {
                    if (f.type == Type::Dims) {
                        const long long v = std::stoll(part, &used);
                        if (used != part.size() || v <= 0) throw bad();
                        out.push_back(v);
                    } else if (part == "true" || part == "false") {
                        out.push_back(part == "true");
                    } else {
                        throw bad();
                    }
                }
            }
            if (out.empty() || (f.type == Type::Dims && out.size() > 2)) throw bad();
            return out;
        }
        case Type::Object: break;
        }
    } catch (const std::invalid_argument&) {
        throw bad();
    } catch (const std::out_of_range&) {
        throw bad();
    }
    throw bad();
}

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    std::string config_path;
    std::vector<std::unique_ptr<BoundFlag>> flags;

    void bind(const Flag& f) {
        auto b = std::make_unique<BoundFlag>();
        b->flag = f;
        if (f.is_switch) {
            b->option = app->add_flag(f.name, b->switched, f.help);
        } else {
            b->option = app->add_option(f.name, b->values, f.help);
            const bool multi = f.type == Type::StringList || f.type == Type::Dims;
            b->option->expected(1, multi ? CLI::detail::expected_max_vector_size : 1);
            if (f.type == Type::StringList) b->option->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
        }
        flags.push_back(std::move(b));
    }

    void apply_overrides(Json& cfg) const {
        for (const auto& b : flags) {
            if (b->option->count() == 0) continue;
            Json* node = &cfg;
            for (std::size_t i = 0; i + 1 < b->flag.path.size(); ++i) {
                Json& child = (*node)[b->flag.path[i]];
                if (child.is_null()) child = Json::object();
                if (!child.is_object()) throw ConfigError(b->flag.path[i] + ": expected an object");
                node = &child;
            }
            (*node)[b->flag.path.back()] = parse_flag_value(*b);
        }
    }
};

Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    // A result document re-runs from its resolved config.
    if (j.is_object() && j.contains("schema") && j.contains("config") && j.contains("result")) {
        return j["config"];
    }
    return j;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Outcome {
    Json config;
    Json result;
};

// Moves the library's echo of its options into the resolved config.
Json take_options(Json& result) {
    Json options = result["options"];
    result.erase("options");
    return options;
}

ModelHandle create_model(const Json& spec) {
    ModelHandle m;
    check(lrl_model_create(spec.dump().c_str(), &m.p));
    return m;
}

Json model_json(const lrl_model* m) {
    char* out = nullptr;
    check(lrl_model_to_json(m, &out));
    return Json::parse(take(out));
}

Outcome run_validate(const Json& cfg) {
    const Json spec = model_spec(cfg);
    ModelHandle m = create_model(spec);
    Json options = section(cfg, "validate");
    const auto csv = output_path(cfg, "csv");
    if (csv) options["dump_states"] = true;
    if (has(cfg, "sector")) options["sector"] = cfg["sector"];
    char* out = nullptr;
    check(lrl_ground_state(m.p, options.dump().c_str(), &out));
    Json result = Json::parse(take(out));
    Json resolved = take_options(result);
    Json config = flat_model(model_json(m.p));
    config["sector"] = resolved["sector"];
    resolved.erase("sector");
    config["validate"] = resolved;
    if (csv) {
        write_states_csv(*csv, result["states"], "phi");
        result.erase("states");
    }
    return {config, result};
}

Outcome run_solve(const Json& cfg) {
    ModelHandle m = create_model(model_spec(cfg));
    Json options = section(cfg, "solve");
    Json f = formulation_object(cfg);
    if (!f.contains("kind")) f["kind"] = "infinite";
    options["formulation"] = f;
    if (has(cfg, "sector")) options["sector"] = cfg["sector"];
    const auto csv = output_path(cfg, "csv");
    if (csv) options["dump_states"] = true;
    char* out = nullptr;
    check(lrl_solve(m.p, options.dump().c_str(), &out));
    Json result = Json::parse(take(out));
    Json resolved = take_options(result);
    Json config = flat_model(model_json(m.p));
    put_flat_formulation(config, result["formulation"]);
    config["sector"] = resolved["sector"];
    resolved.erase("formulation");
    resolved.erase("sector");
    config["solve"] = resolved;
    if (csv) {
        write_states_csv(*csv, result["states"], "U");
        result.erase("states");
    }
    return {config, result};
}

struct TrainLog {
    std::vector<lrl_train_entry> entries;
};

void on_train_entry(const lrl_train_entry* e, void* user) {
    static_cast<TrainLog*>(user)->entries.push_back(*e);
    if (e->has_e_var) {
        std::fprintf(stderr, "episode %d  loss %.4e  E_var %.8f  E0_est %.8f  lr %.3e\n", e->episode, e->loss, e->e_var,
                     e->e0_estimate, e->lr);
    }
}

Outcome run_train(const Json& cfg) {
    ModelHandle m = create_model(model_spec(cfg));
    Json options = section(cfg, "train");
    options["formulation"] = formulation_object(cfg);
    if (!options["formulation"].contains("kind")) options["formulation"]["kind"] = "terminal";
    options["seed"] = has(cfg, "seed") ? cfg["seed"] : Json(0);
    const std::string checkpoint = output_path(cfg, "checkpoint").value_or("checkpoint.lrlq");
    const std::string log_path = output_path(cfg, "log").value_or("train_log.csv");

    TrainLog log;
    NetHandle net;
    char* out = nullptr;
    check(lrl_train(m.p, options.dump().c_str(), on_train_entry, &log, &net.p, &out));
    check(lrl_qnet_save(net.p, checkpoint.c_str()));
    std::ofstream csv = open_output(log_path);
    csv << "episode,loss,E_var,E0_est,lr\n";
    for (const lrl_train_entry& e : log.entries) {
        csv << e.episode << "," << format_double(e.loss) << "," << (e.has_e_var ? format_double(e.e_var) : "") << ","
            << format_double(e.e0_estimate) << "," << format_double(e.lr) << "\n";
    }

    Json result = Json::parse(take(out));
    Json resolved = take_options(result);
    Json config = flat_model(model_json(m.p));
    put_flat_formulation(config, resolved["formulation"]);
    config["seed"] = resolved["seed"];
    resolved.erase("formulation");
    resolved.erase("seed");
    config["train"] = resolved;
    config["output"] = {{"checkpoint", checkpoint}, {"log", log_path}};
    return {config, result};
}

// Model for sample/fk: the checkpoint's unless lattice keys are given, in
// which case the two must agree.
ModelHandle model_for(const Json& cfg, const NetHandle& net) {
    if (net.p && !has(cfg, "dims")) {
        ModelHandle m;
        check(lrl_qnet_model(net.p, &m.p));
        return m;
    }
    return create_model(model_spec(cfg));
}

NetHandle load_net(const Json& cfg) {
    NetHandle net;
    if (has(cfg, "checkpoint")) check(lrl_qnet_load(cfg["checkpoint"].get<std::string>().c_str(), &net.p));
    return net;
}

Outcome run_sample(const Json& cfg) {
    NetHandle net = load_net(cfg);
    ModelHandle m = model_for(cfg, net);
    Json options = section(cfg, "sample");
    options["seed"] = has(cfg, "seed") ? cfg["seed"] : Json(0);
    const auto series = output_path(cfg, "series");
    if (series) options["series"] = true;
    char* out = nullptr;
    check(lrl_sample(m.p, net.p, options.dump().c_str(), &out));
    Json result = Json::parse(take(out));
    Json resolved = take_options(result);
    Json config = flat_model(model_json(m.p));
    config["checkpoint"] = has(cfg, "checkpoint") ? cfg["checkpoint"] : Json(nullptr);
    config["seed"] = resolved["seed"];
    resolved.erase("seed");
    config["sample"] = resolved;
    if (series) {
        std::ofstream csv = open_output(*series);
        csv << "step,local_energy,diagonal_energy\n";
        const Json& local = result["series"]["local_energy"];
        const Json& diagonal = result["series"]["diagonal_energy"];
        for (std::size_t i = 0; i < local.size(); ++i) {
            csv << i << "," << format_double(local[i].get<double>()) << "," << format_double(diagonal[i].get<double>())
                << "\n";
        }
        result.erase("series");
        config["output"] = {{"series", *series}};
    }
    return {config, result};
}

Outcome run_fk(const Json& cfg) {
    NetHandle net = load_net(cfg);
    ModelHandle m = model_for(cfg, net);
    Json options = section(cfg, "fk");
    options["seed"] = has(cfg, "seed") ? cfg["seed"] : Json(0);
    if (has(cfg, "sector")) options["sector"] = cfg["sector"];
    char* out = nullptr;
    check(lrl_fk_estimate(m.p, net.p, options.dump().c_str(), &out));
    Json result = Json::parse(take(out));
    Json resolved = take_options(result);
    Json config = flat_model(model_json(m.p));
    config["checkpoint"] = has(cfg, "checkpoint") ? cfg["checkpoint"] : Json(nullptr);
    config["seed"] = resolved["seed"];
    config["sector"] = resolved["sector"];
    resolved.erase("seed");
    resolved.erase("sector");
    config["fk"] = resolved;
    return {config, result};
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool is_config_status(lrl_status s) {
    switch (s) {
    case LRL_INVALID_ARGUMENT:
    case LRL_INVALID_LATTICE:
    case LRL_INVALID_MODEL:
    case LRL_INVALID_SHIFT:
    case LRL_TIMESTEP_TOO_LARGE:
    case LRL_SYMMETRY_UNAVAILABLE:
    case LRL_STATE_SPACE_TOO_LARGE:
        return true;
    default:
        return false;
    }
}

int report(const std::string& status, const std::string& message, int code) {
    const Json error = {{"schema", 1}, {"error", {{"status", status}, {"message", message}, {"exit_code", code}}}};
    std::cerr << error.dump() << "\n";
    return code;
}

int execute(const Command& cmd, Outcome (*body)(const Json&)) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    Json cfg;
    try {
        cfg = load_config(cmd.config_path);
        check_config(cfg);
        cmd.apply_overrides(cfg);
        check_config(cfg);
        Outcome outcome = body(cfg);

        const auto json_path = output_path(cfg, "json");
        auto metadata_path = output_path(cfg, "metadata");
        if (json_path) outcome.config["output"]["json"] = *json_path;
        if (metadata_path) outcome.config["output"]["metadata"] = *metadata_path;
        if (!metadata_path && json_path) metadata_path = *json_path + ".meta.json";

        const Json doc = {{"schema", 1}, {"command", cmd.name}, {"config", outcome.config}, {"result", outcome.result}};
        const std::string text = doc.dump(2) + "\n";
        if (json_path) {
            open_output(*json_path) << text;
        } else {
            std::cout << text;
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const Json meta = {{"schema", 1},
                           {"command", cmd.name},
                           {"version", lrl_version()},
                           {"started", started},
                           {"finished", utc_now()},
                           {"elapsed_seconds", elapsed}};
        if (metadata_path) {
            open_output(*metadata_path) << meta.dump(2) << "\n";
        } else {
            std::cerr << meta.dump() << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        return report("InvalidConfig", e.what(), kExitConfig);
    } catch (const ApiError& e) {
        return report(lrl_status_name(e.status), e.what(), is_config_status(e.status) ? kExitConfig : kExitRuntime);
    } catch (const std::exception& e) {
        return report("Internal", e.what(), kExitRuntime);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ground states of stoquastic spin Hamiltonians by reinforcement learning", "lattice-rl"};
    app.require_subcommand(1);

    std::vector<std::unique_ptr<Command>> commands;
    auto add = [&](const std::string& name, const std::string& help, std::vector<Flag> extra, bool formulation) {
        auto cmd = std::make_unique<Command>();
        cmd->name = name;
        cmd->app = app.add_subcommand(name, help);
        cmd->app->set_help_flag("--help", "Print this help message and exit");
        cmd->app->add_option("--config", cmd->config_path, "JSON run config; flags override it");
        for (const Flag& f : common_flags()) cmd->bind(f);
        if (formulation) {
            for (const Flag& f : formulation_flags()) cmd->bind(f);
        }
        for (const Flag& f : extra) cmd->bind(f);
        commands.push_back(std::move(cmd));
    };

    add("validate", "exact ground state by power iteration",
        {{"--energy-tol", {"validate", "energy_tol"}, Type::Number, "energy convergence tolerance"},
         {"--residual-tol", {"validate", "residual_tol"}, Type::Number, "eigen-residual tolerance"},
         {"--max-iterations", {"validate", "max_iterations"}, Type::Integer, "iteration limit"},
         {"--dump-states", {"validate", "dump_states"}, Type::Bool, "include amplitudes per state", true},
         {"--csv", {"output", "csv"}, Type::String, "write amplitudes as CSV"}},
        false);
    add("solve", "tabular solution of an RL formulation",
        {{"--method", {"solve", "method"}, Type::String, "value_iteration or power_iteration"},
         {"--tol", {"solve", "tol"}, Type::Number, "convergence tolerance"},
         {"--max-iterations", {"solve", "max_iterations"}, Type::Integer, "iteration limit"},
         {"--dump-states", {"solve", "dump_states"}, Type::Bool, "include U per state", true},
         {"--no-oracle", {"solve", "oracle"}, Type::Bool, "skip the exact comparison", true, false},
         {"--csv", {"output", "csv"}, Type::String, "write U per state as CSV"}},
        true);
    add("train", "soft Q-learning of a convolutional network",
        {{"--learning-rate", {"train", "learning_rate"}, Type::Number, "Adam learning rate"},
         {"--lr-decay", {"train", "lr_decay"}, Type::Number, "learning-rate decay factor"},
         {"--lr-decay-every", {"train", "lr_decay_every"}, Type::Integer, "episodes per decay step"},
         {"--batch-size", {"train", "batch_size"}, Type::Integer, "experiences per update"},
         {"--buffer-size", {"train", "buffer_size"}, Type::Integer, "replay buffer capacity"},
         {"--walkers", {"train", "walkers"}, Type::Integer, "parallel walkers"},
         {"--target-update", {"train", "target_update"}, Type::Integer, "episodes between target syncs"},
         {"--episodes", {"train", "episodes"}, Type::Integer, "training episodes"},
         {"--validation-interval", {"train", "validation_interval"}, Type::Integer, "episodes between validations"},
         {"--validation-samples", {"train", "validation_samples"}, Type::Integer, "Monte Carlo validation steps"},
         {"--exact-validation-max-sites", {"train", "exact_validation_max_sites"}, Type::Integer,
          "largest lattice validated exactly"},
         {"--channels", {"train", "network", "channels"}, Type::Integer, "hidden channels"},
         {"--hidden-layers", {"train", "network", "hidden_layers"}, Type::Integer, "hidden layers"},
         {"--kernel", {"train", "network", "kernel"}, Type::Integer, "odd kernel size"},
         {"--initial-energy", {"train", "initial_energy"}, Type::Number, "energy estimate before validation"},
         {"--divergence-checkpoint", {"train", "divergence_checkpoint"}, Type::String,
          "where to save the last finite network on divergence"},
         {"--checkpoint", {"output", "checkpoint"}, Type::String, "checkpoint path (default checkpoint.lrlq)"},
         {"--log", {"output", "log"}, Type::String, "training log CSV (default train_log.csv)"}},
        true);
    add("sample", "Metropolis-Hastings sampling of phi^2",
        {{"--checkpoint", {"checkpoint"}, Type::String, "trained network"},
         {"--proposal", {"sample", "proposal"}, Type::String, "uniform, q1 or qk:<k>"},
         {"--steps", {"sample", "steps"}, Type::Integer, "recorded steps"},
         {"--burn-in", {"sample", "burn_in"}, Type::Integer, "discarded steps"},
         {"--guide", {"sample", "guide"}, Type::String, "network or exact"},
         {"--tabulate", {"sample", "tabulate"}, Type::Bool, "tabulate the network first: true or false"},
         {"--series", {"output", "series"}, Type::String, "write the energy series as CSV"}},
        false);
    add("fk", "Feynman-Kac estimate of phi(s0)",
        {{"--checkpoint", {"checkpoint"}, Type::String, "trained network"},
         {"--T", {"fk", "T"}, Type::Number, "horizon"},
         {"--n-traj", {"fk", "n_traj"}, Type::Unsigned, "trajectories"},
         {"--rates", {"fk", "rates"}, Type::String, "passive, optimal or checkpoint"},
         {"--sign", {"fk", "sign"}, Type::String, "minus or plus"},
         {"--energy", {"fk", "energy"}, Type::NumberOrString, "E0: a number, oracle or checkpoint"},
         {"--terminal", {"fk", "terminal"}, Type::String, "one, oracle or checkpoint"},
         {"--s0", {"fk", "s0"}, Type::String, "initial state as +/- string"}},
        false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* failed = &app;
        for (const auto& cmd : commands) {
            if (cmd->app->parsed()) failed = cmd->app;
        }
        std::cerr << failed->help();
        return kExitConfig;
    }

    static const std::map<std::string, Outcome (*)(const Json&)> bodies = {
        {"validate", run_validate}, {"solve", run_solve}, {"train", run_train}, {"sample", run_sample},
        {"fk", run_fk}};
    for (const auto& cmd : commands) {
        if (cmd->app->parsed()) return execute(*cmd, bodies.at(cmd->name));
    }
    return kExitConfig;
}
