// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "lattice_rl/lattice_rl.h"

extern "C" int lrl_c_smoke(void);

using nlohmann::json;

namespace {

std::string take(char* text) {
    std::string out = text ? text : "";
    lrl_string_free(text);
    return out;
}

lrl_model* make_model(const json& spec) {
    lrl_model* m = nullptr;
    REQUIRE(lrl_model_create(spec.dump().c_str(), &m) == LRL_OK);
    return m;
}

json ising(int n, bool periodic, double J = 1.0, double h = 1.0) {
    return {{"kind", "ising"}, {"J", J}, {"h", h}, {"lattice", {{"dims", {n}}, {"periodic", {periodic}}}}};
}

json call_solve(lrl_model* m, const json& options) {
    char* out = nullptr;
    const lrl_status st = lrl_solve(m, options.dump().c_str(), &out);
    INFO(lrl_last_error());
    REQUIRE(st == LRL_OK);
    return json::parse(take(out));
}

// Dense 2^n transverse-field Ising Hamiltonian on an open or periodic chain,
// lowest eigenvalue by shifted power iteration on a plain matrix.
double ising_chain_e0(int n, bool periodic, double J, double h) {
    const int dim = 1 << n;
    std::vector<double> H(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int s = 0; s < dim; ++s) {
        double d = 0.0;
        for (int i = 0; i + 1 < n || (periodic && i < n); ++i) {
            const int j = (i + 1) % n;
            d -= J * ((((s >> i) ^ (s >> j)) & 1) ? -1.0 : 1.0);
        }
        H[static_cast<std::size_t>(s) * dim + s] = d;
        for (int i = 0; i < n; ++i) H[static_cast<std::size_t>(s) * dim + (s ^ (1 << i))] -= h;
    }
    const double c = 2.0 * n * (std::abs(J) + h);
    std::vector<double> v(dim, 1.0);
    std::vector<double> w(dim);
    double e = 0.0;
    for (int it = 0; it < 20000; ++it) {
        double norm = 0.0;
        for (int r = 0; r < dim; ++r) {
            double acc = c * v[r];
            for (int k = 0; k < dim; ++k) acc -= H[static_cast<std::size_t>(r) * dim + k] * v[k];
            w[r] = acc;
            norm += acc * acc;
        }
        norm = std::sqrt(norm);
        double vv = 0.0;
        double vw = 0.0;
        for (int r = 0; r < dim; ++r) {
            vv += v[r] * v[r];
            vw += v[r] * w[r];
            v[r] = w[r] / norm;
        }
        e = c - vw / vv;
    }
    return e;
}

int callback_calls = 0;
void count_entries(const lrl_train_entry* entry, void* user) {
    ++callback_calls;
    auto* log = static_cast<std::vector<double>*>(user);
    log->push_back(entry->loss);
}

} // namespace

TEST_CASE("header compiles as C and basic handles work") {
    CHECK(lrl_c_smoke() == 0);
    CHECK(std::string(lrl_status_name(LRL_OK)) == "OK");
    CHECK(std::string(lrl_status_name(LRL_INVALID_ARGUMENT)) == "InvalidArgument");
    CHECK(std::string(lrl_status_name(LRL_FORMAT_ERROR)) == "FormatError");
    CHECK(std::string(lrl_status_name(LRL_INTERNAL)) == "INTERNAL");
    CHECK(std::string(lrl_version()).size() > 0);
}

TEST_CASE("invalid inputs map to status codes") {
    lrl_model* m = nullptr;
    CHECK(lrl_model_create(ising(4, true, 1.0, -1.0).dump().c_str(), &m) == LRL_INVALID_MODEL);
    CHECK(m == nullptr);
    json extra = ising(4, true);
    extra["colour"] = "red";
    CHECK(lrl_model_create(extra.dump().c_str(), &m) == LRL_INVALID_ARGUMENT);
    CHECK(std::string(lrl_last_error()).find("colour") != std::string::npos);
    CHECK(lrl_model_create(nullptr, &m) == LRL_INVALID_ARGUMENT);

    m = make_model(ising(4, true));
    char* out = nullptr;
    CHECK(lrl_solve(m, R"({"tol": "small"})", &out) == LRL_INVALID_ARGUMENT);
    CHECK(std::string(lrl_last_error()).find("solve.tol") != std::string::npos);
    CHECK(lrl_solve(m, R"({"sector": 0})", &out) == LRL_INVALID_ARGUMENT);
    CHECK(lrl_solve(m, R"({"bogus": 1})", &out) == LRL_INVALID_ARGUMENT);
    CHECK(lrl_solve(nullptr, "{}", &out) == LRL_INVALID_ARGUMENT);
    CHECK(lrl_ground_state(m, "{}", &out) == LRL_OK);
    CHECK(std::string(lrl_last_error()).empty());
    lrl_string_free(out);
    lrl_qnet* q = nullptr;
    CHECK(lrl_qnet_load("/nonexistent/net.lrlq", &q) == LRL_IO_ERROR);
    CHECK(lrl_train(m, R"({"batch_size": 0})", nullptr, nullptr, &q, nullptr) == LRL_INVALID_ARGUMENT);
    lrl_model_destroy(m);
}

TEST_CASE("ground state and tabular solvers agree with a dense oracle") {
    for (auto [n, periodic] : {std::pair{2, false}, std::pair{6, true}}) {
        lrl_model* m = make_model(ising(n, periodic, 1.0, 0.7));
        const double e0 = ising_chain_e0(n, periodic, 1.0, 0.7);
        char* out = nullptr;
        REQUIRE(lrl_ground_state(m, "{}", &out) == LRL_OK);
        const json gs = json::parse(take(out));
        CHECK(gs["E0"].get<double>() == doctest::Approx(e0).epsilon(1e-9));
        CHECK(gs["n_states"] == (1 << n));

        for (const char* method : {"value_iteration", "power_iteration"}) {
            for (const char* kind : {"infinite", "terminal"}) {
                const json r = call_solve(m, {{"formulation", {{"kind", kind}}}, {"method", method}});
                CAPTURE(method);
                CAPTURE(kind);
                CHECK(std::abs(r["E0"].get<double>() - e0) < 1e-8);
                CHECK(r["oracle"]["amplitude_error"].get<double>() < 1e-6);
                CHECK(r["residual"].get<double>() < 1e-8);
            }
        }
        lrl_model_destroy(m);
    }
}

TEST_CASE("resolved options reproduce the result") {
    lrl_model* m = make_model(ising(4, true, 0.5, 1.0));
    const json first = call_solve(m, {{"formulation", {{"kind", "terminal"}}}, {"dump_states", true}});
    CHECK(first["states"].size() == 16);
    CHECK(first["options"]["formulation"].contains("terminals"));
    const json second = call_solve(m, first["options"]);
    CHECK(first.dump() == second.dump());

    const json with_energy = call_solve(m, {{"formulation", first["formulation"]}, {"dump_states", true}});
    CHECK(with_energy["E0"] == first["E0"]);
    lrl_model_destroy(m);
}

TEST_CASE("Feynman-Kac estimate with oracle terminal values") {
    lrl_model* m = make_model(ising(4, true));
    char* out = nullptr;
    const json options = {{"T", 1.0}, {"n_traj", 20000}, {"seed", 3}, {"terminal", "oracle"}, {"s0", "+-++"}};
    REQUIRE(lrl_fk_estimate(m, nullptr, options.dump().c_str(), &out) == LRL_OK);
    const json r = json::parse(take(out));
    CHECK(std::abs(r["estimate"].get<double>() - r["oracle_phi"].get<double>()) <
          4.0 * r["std_error"].get<double>());
    CHECK(r["options"]["energy"] == "oracle");

    REQUIRE(lrl_fk_estimate(m, nullptr, R"({"rates": "optimal", "terminal": "oracle", "n_traj": 500})", &out) == LRL_OK);
    const json zero_var = json::parse(take(out));
    CHECK(zero_var["estimate"].get<double>() == doctest::Approx(zero_var["oracle_phi"].get<double>()).epsilon(1e-9));
    CHECK(zero_var["std_error"].get<double>() < 1e-9);

    CHECK(lrl_fk_estimate(m, nullptr, R"({"rates": "checkpoint"})", &out) == LRL_INVALID_ARGUMENT);
    lrl_model_destroy(m);
}

TEST_CASE("exact-guide sampling has zero-variance local energy") {
    lrl_model* m = make_model(ising(6, true, 1.0, 0.8));
    char* out = nullptr;
    REQUIRE(lrl_sample(m, nullptr, R"({"proposal": "uniform", "steps": 20000, "seed": 1, "series": true})", &out) ==
            LRL_OK);
    const json r = json::parse(take(out));
    CHECK(r["energy"].get<double>() == doctest::Approx(ising_chain_e0(6, true, 1.0, 0.8)).epsilon(1e-8));
    CHECK(r["series"]["local_energy"].size() == 20000);
    CHECK(r["acceptance"].get<double>() > 0.0);
    CHECK(r["options"]["burn_in"] == 60);
    lrl_model_destroy(m);
}

TEST_CASE("training, checkpoints and network queries") {
    lrl_model* m = make_model(ising(6, true, 1.0, 1.0));
    const json config = {{"formulation", {{"kind", "infinite"}}},
                         {"episodes", 30},
                         {"batch_size", 64},
                         {"buffer_size", 512},
                         {"validation_interval", 10},
                         {"network", {{"channels", 8}, {"hidden_layers", 1}, {"kernel", 3}}},
                         {"seed", 5}};
    std::vector<double> losses;
    callback_calls = 0;
    lrl_qnet* q = nullptr;
    char* out = nullptr;
    REQUIRE(lrl_train(m, config.dump().c_str(), count_entries, &losses, &q, &out) == LRL_OK);
    const json r = json::parse(take(out));
    CHECK(callback_calls == 30);
    CHECK(losses.size() == 30);
    CHECK(r["final_energy"].get<double>() >= r["oracle_E0"].get<double>() - 1e-9);
    CHECK(r["options"]["walkers"] == 64);

    const auto path = std::filesystem::temp_directory_path() / "lrl_capi_test.lrlq";
    REQUIRE(lrl_qnet_save(q, path.c_str()) == LRL_OK);
    lrl_qnet* loaded = nullptr;
    REQUIRE(lrl_qnet_load(path.c_str(), &loaded) == LRL_OK);
    REQUIRE(lrl_qnet_info(loaded, &out) == LRL_OK);
    const json info = json::parse(take(out));
    CHECK(info["episode"] == 30);
    CHECK(info["e0_estimate"] == r["e0_estimate"]);

    const char* states[] = {"++++++", "+-+-+-", "++--+-"};
    double a[3];
    double b[3];
    REQUIRE(lrl_qnet_log_phi(q, states, 3, a) == LRL_OK);
    REQUIRE(lrl_qnet_log_phi(loaded, states, 3, b) == LRL_OK);
    for (int i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
    const char* bad[] = {"+++"};
    CHECK(lrl_qnet_log_phi(q, bad, 1, a) == LRL_INVALID_ARGUMENT);

    lrl_model* from_net = nullptr;
    REQUIRE(lrl_qnet_model(loaded, &from_net) == LRL_OK);
    char* m1 = nullptr;
    char* m2 = nullptr;
    lrl_model_to_json(m, &m1);
    lrl_model_to_json(from_net, &m2);
    CHECK(take(m1) == take(m2));

    // The network's own variational energy, estimated by sampling it.
    REQUIRE(lrl_sample(from_net, loaded, R"({"steps": 40000, "seed": 2})", &out) == LRL_OK);
    const json s = json::parse(take(out));
    CHECK(std::abs(s["energy"].get<double>() - r["final_energy"].get<double>()) < 5.0 * s["std_error"].get<double>() + 1e-9);
    CHECK(s["guide"] == "network");

    lrl_model* other = make_model(ising(6, true, 1.0, 2.0));
    CHECK(lrl_sample(other, loaded, "{}", &out) == LRL_INVALID_ARGUMENT);
    lrl_model_destroy(other);
    lrl_model_destroy(from_net);
    lrl_qnet_destroy(loaded);
    lrl_qnet_destroy(q);
    lrl_model_destroy(m);
    std::filesystem::remove(path);
}
