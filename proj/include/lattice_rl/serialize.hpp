// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <string_view>

#include "json.hpp"
#include "lattice_rl/hamiltonian.hpp"
#include "lattice_rl/mdp.hpp"
#include "lattice_rl/qnetwork.hpp"

namespace lrl {

using Json = nlohmann::json;

// JSON forms shared by checkpoints, the C API and the CLI. Readers reject
// unknown keys and wrong types with InvalidArgument.
//
//   lattice      {"dims": [Lx] | [Lx, Ly], "periodic": [bool...]}
//   model        {"kind": "ising", "J", "h", "lattice"} or
//                {"kind": "xxz", "J", "J_perp", "lattice"}
//   formulation  {"kind": "fk"|"infinite"|"terminal", "dt", "shift",
//                 "energy", "terminals": "magnetized"|"classical_ground"|
//                 "explicit", "terminal_states": ["+-+-", ...],
//                 "terminal_translates"}
//   network      {"channels", "hidden_layers", "kernel"}

Json lattice_to_json(const Lattice& lattice);
Lattice lattice_from_json(const Json& j);

Json model_to_json(const StoquasticModel& model);
StoquasticModel model_from_json(const Json& j);

Json formulation_to_json(const Formulation& f);
Formulation formulation_from_json(const Json& j);

Json network_to_json(const NetConfig& cfg);
NetConfig network_from_json(const Json& j);

/// Throws InvalidArgument naming the first key of `j` not in `allowed`.
void require_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view context);

} // namespace lrl
