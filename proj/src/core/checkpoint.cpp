// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "lattice_rl/error.hpp"
#include "lattice_rl/exact.hpp"
#include "lattice_rl/neural.hpp"
#include "lattice_rl/serialize.hpp"

namespace lrl {

namespace {

constexpr std::array<char, 8> kMagic{'L', 'R', 'L', 'Q', 'N', 'E', 'T', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
    }
}

template <class T>
T get_le(std::istream& in) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = in.get();
        if (c == EOF) fail(ErrorCode::FormatError, "checkpoint is truncated");
        value |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return value;
}

Json shapes_json(const QNetwork& net) {
    Json groups = Json::array();
    for (const ParamGroup& g : net.parameter_groups()) groups.push_back({{"name", g.name}, {"shape", g.shape}});
    return groups;
}

} // namespace

Mdp Checkpoint::mdp() const {
    // Training resolves the shift and terminals against the enumerated space
    // when there is one.
    SharedSpace space;
    if (model.n_sites() <= kDefaultEnumerationCap) space = make_space(model, std::nullopt);
    return Mdp(model, formulation, space.get()).with_energy(e0_estimate);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const QNetwork& net = checkpoint.net;
    const Json header = {{"model", model_to_json(checkpoint.model)},
                         {"formulation", formulation_to_json(checkpoint.formulation)},
                         {"network", network_to_json(net.config())},
                         {"parameters", shapes_json(net)},
                         {"n_params", net.n_params()},
                         {"e0_estimate", checkpoint.e0_estimate},
                         {"episode", checkpoint.episode}};
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double p : net.params()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p));
    out.flush();
    if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) fail(ErrorCode::FormatError, path.string() + " is not a network checkpoint");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        fail(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto length = get_le<std::uint64_t>(in);
    if (length > (std::uint64_t{1} << 26)) fail(ErrorCode::FormatError, "checkpoint header is too large");
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) fail(ErrorCode::FormatError, "checkpoint is truncated");

    Json header;
    try {
        header = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::FormatError, std::string("checkpoint header: ") + e.what());
    }
    try {
        Checkpoint cp{model_from_json(header.at("model")),
                      formulation_from_json(header.at("formulation")),
                      QNetwork(lattice_from_json(header.at("model").at("lattice")),
                               network_from_json(header.at("network"))),
                      header.at("e0_estimate").get<double>(),
                      header.at("episode").get<int>()};
        if (header.at("n_params").get<std::size_t>() != cp.net.n_params() ||
            header.at("parameters") != shapes_json(cp.net)) {
            fail(ErrorCode::FormatError, "checkpoint parameter shapes do not match its network");
        }
        for (double& p : cp.net.params()) p = std::bit_cast<double>(get_le<std::uint64_t>(in));
        if (in.peek() != EOF) fail(ErrorCode::FormatError, "checkpoint has trailing bytes");
        return cp;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::FormatError, std::string("checkpoint header: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::FormatError) throw;
        fail(ErrorCode::FormatError, std::string("checkpoint header: ") + e.what());
    }
}

} // namespace lrl
