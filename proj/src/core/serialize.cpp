// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/serialize.hpp"

#include <algorithm>
#include <string>

#include "lattice_rl/error.hpp"

namespace lrl {

namespace {

template <class T>
T get(const Json& j, const char* key, std::string_view context) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(ErrorCode::InvalidArgument,
             std::string(context) + ": missing or malformed '" + key + "'");
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, std::string_view context) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return get<T>(j, key, context);
}

std::optional<double> get_optional(const Json& j, const char* key, std::string_view context) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get<double>(j, key, context);
}

void require_object(const Json& j, std::string_view context) {
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, std::string(context) + " must be an object");
}

std::string_view terminal_name(TerminalChoice c) {
    switch (c) {
    case TerminalChoice::Magnetized: return "magnetized";
    case TerminalChoice::ClassicalGround: return "classical_ground";
    case TerminalChoice::Explicit: return "explicit";
    }
    return "?";
}

TerminalChoice parse_terminal(const std::string& name) {
    if (name == "magnetized") return TerminalChoice::Magnetized;
    if (name == "classical_ground") return TerminalChoice::ClassicalGround;
    if (name == "explicit") return TerminalChoice::Explicit;
    fail(ErrorCode::InvalidArgument, "unknown terminal choice '" + name + "'");
}

} // namespace

void require_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view context) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            fail(ErrorCode::InvalidArgument, std::string(context) + ": unknown key '" + key + "'");
        }
    }
}

Json lattice_to_json(const Lattice& lattice) {
    Json periodic = Json::array();
    for (bool p : lattice.periodic()) periodic.push_back(p);
    return {{"dims", lattice.dims()}, {"periodic", periodic}};
}

Lattice lattice_from_json(const Json& j) {
    require_object(j, "lattice");
    require_keys(j, {"dims", "periodic"}, "lattice");
    auto dims = get<std::vector<int>>(j, "dims", "lattice");
    std::vector<bool> periodic;
    if (j.contains("periodic")) {
        const Json& p = j.at("periodic");
        if (p.is_boolean()) {
            periodic.assign(dims.size(), p.get<bool>());
        } else {
            periodic = get<std::vector<bool>>(j, "periodic", "lattice");
        }
    } else {
        periodic.assign(dims.size(), true);
    }
    return Lattice(std::move(dims), std::move(periodic));
}

Json model_to_json(const StoquasticModel& model) {
    if (model.kind() == ModelKind::Ising) {
        return {{"kind", "ising"},
                {"J", model.J()},
                {"h", model.h()},
                {"lattice", lattice_to_json(model.lattice())}};
    }
    return {{"kind", "xxz"},
            {"J", model.J()},
            {"J_perp", model.J_perp()},
            {"lattice", lattice_to_json(model.lattice())}};
}

StoquasticModel model_from_json(const Json& j) {
    require_object(j, "model");
    const auto kind = get<std::string>(j, "kind", "model");
    if (kind == "ising") {
        require_keys(j, {"kind", "J", "h", "lattice"}, "model");
        return StoquasticModel::ising(lattice_from_json(j.at("lattice")), get<double>(j, "J", "model"),
                                      get<double>(j, "h", "model"));
    }
    if (kind == "xxz") {
        require_keys(j, {"kind", "J", "J_perp", "lattice"}, "model");
        return StoquasticModel::xxz(lattice_from_json(j.at("lattice")), get<double>(j, "J", "model"),
                                    get<double>(j, "J_perp", "model"));
    }
    fail(ErrorCode::InvalidArgument, "unknown model kind '" + kind + "'");
}

Json formulation_to_json(const Formulation& f) {
    Json states = Json::array();
    for (const SpinConfig& s : f.terminal_states) states.push_back(s.to_string());
    Json j = {{"kind", formulation_name(f.kind)},
              {"dt", f.dt},
              {"shift", nullptr},
              {"energy", nullptr},
              {"terminals", terminal_name(f.terminals)},
              {"terminal_states", states},
              {"terminal_translates", f.terminal_translates}};
    if (f.shift) j["shift"] = *f.shift;
    if (f.energy) j["energy"] = *f.energy;
    return j;
}

Formulation formulation_from_json(const Json& j) {
    require_object(j, "formulation");
    require_keys(j, {"kind", "dt", "shift", "energy", "terminals", "terminal_states", "terminal_translates"},
                 "formulation");
    Formulation f;
    f.kind = parse_formulation(get<std::string>(j, "kind", "formulation"));
    f.dt = get_or<double>(j, "dt", f.dt, "formulation");
    f.shift = get_optional(j, "shift", "formulation");
    f.energy = get_optional(j, "energy", "formulation");
    f.terminals = parse_terminal(get_or<std::string>(j, "terminals", "magnetized", "formulation"));
    for (const auto& s : get_or<std::vector<std::string>>(j, "terminal_states", {}, "formulation")) {
        f.terminal_states.push_back(SpinConfig::from_string(s));
    }
    if (!f.terminal_states.empty() && !j.contains("terminals")) f.terminals = TerminalChoice::Explicit;
    f.terminal_translates = get_or<bool>(j, "terminal_translates", false, "formulation");
    return f;
}

Json network_to_json(const NetConfig& cfg) {
    return {{"channels", cfg.channels}, {"hidden_layers", cfg.hidden_layers}, {"kernel", cfg.kernel}};
}

NetConfig network_from_json(const Json& j) {
    require_object(j, "network");
    require_keys(j, {"channels", "hidden_layers", "kernel"}, "network");
    NetConfig cfg;
    cfg.channels = get_or<int>(j, "channels", cfg.channels, "network");
    cfg.hidden_layers = get_or<int>(j, "hidden_layers", cfg.hidden_layers, "network");
    cfg.kernel = get_or<int>(j, "kernel", cfg.kernel, "network");
    return cfg;
}

} // namespace lrl
