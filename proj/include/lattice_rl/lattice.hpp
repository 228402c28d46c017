// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lrl {

/// Tabular solvers refuse state spaces with more sites than this unless the
/// caller raises the cap explicitly.
inline constexpr int kDefaultEnumerationCap = 20;
inline constexpr int kMaxSites = 64;

struct Bond {
    int a = 0;
    int b = 0;

    friend bool operator==(const Bond&, const Bond&) = default;
};

/// 1D chain or 2D square lattice. Sites are numbered row-major,
/// site = y * Lx + x, where Lx = dims()[0].
class Lattice {
public:
    Lattice(std::vector<int> dims, std::vector<bool> periodic);

    static Lattice chain(int length, bool periodic = true);
    static Lattice square(int side, bool periodic = true);

    int n_sites() const noexcept { return n_sites_; }
    int dimension() const noexcept { return static_cast<int>(dims_.size()); }
    const std::vector<int>& dims() const noexcept { return dims_; }
    const std::vector<bool>& periodic() const noexcept { return periodic_; }
    bool fully_periodic() const noexcept;

    /// Extent along x (the fastest index) and y (1 for chains).
    int width() const noexcept { return dims_[0]; }
    int height() const noexcept { return dimension() == 2 ? dims_[1] : 1; }

    std::span<const Bond> bonds() const noexcept { return bonds_; }
    std::span<const int> neighbors(int site) const;

    std::array<int, 2> coords(int site) const;
    int site_at(int x, int y = 0) const;

    /// Site reached from `site` by the displacement (dx, dy); wraps along
    /// periodic dimensions, returns -1 when the move leaves an open boundary.
    int displaced(int site, int dx, int dy = 0) const;

    std::string describe() const;

    friend bool operator==(const Lattice& l, const Lattice& r) {
        return l.dims_ == r.dims_ && l.periodic_ == r.periodic_;
    }

private:
    std::vector<int> dims_;
    std::vector<bool> periodic_;
    int n_sites_ = 0;
    std::vector<Bond> bonds_;
    std::vector<int> neighbor_offsets_;
    std::vector<int> neighbor_list_;
};

/// One Z-basis state of up to 64 spins. Bit i set means spin i is up.
class SpinConfig {
public:
    constexpr SpinConfig() noexcept = default;
    SpinConfig(int n_sites, std::uint64_t bits);

    static SpinConfig all_up(int n_sites);
    static SpinConfig all_down(int n_sites);
    /// Parses '+'/'-' characters, site 0 leftmost.
    static SpinConfig from_string(std::string_view text);

    std::uint64_t bits() const noexcept { return bits_; }
    int n_sites() const noexcept { return n_sites_; }

    bool up(int site) const noexcept { return (bits_ >> site) & 1U; }
    /// +1 for up, -1 for down.
    int spin(int site) const noexcept { return up(site) ? 1 : -1; }
    int n_up() const noexcept;
    int magnetization() const noexcept { return 2 * n_up() - n_sites_; }

    SpinConfig flipped(int site) const noexcept {
        SpinConfig out = *this;
        out.bits_ ^= (std::uint64_t{1} << site);
        return out;
    }

    std::string to_string() const;

    friend bool operator==(const SpinConfig&, const SpinConfig&) = default;
    friend auto operator<=>(const SpinConfig& l, const SpinConfig& r) {
        return l.bits_ <=> r.bits_;
    }

private:
    std::uint64_t bits_ = 0;
    int n_sites_ = 0;
};

/// Elementary move on a configuration. `index` is a site for Flip and a bond
/// index (into Lattice::bonds()) for Exchange. Stay is the trivial action.
struct Action {
    enum class Kind : std::uint8_t { Stay, Flip, Exchange };

    Kind kind = Kind::Stay;
    int index = -1;

    static constexpr Action stay() noexcept { return {Kind::Stay, -1}; }
    static constexpr Action flip(int site) noexcept { return {Kind::Flip, site}; }
    static constexpr Action exchange(int bond) noexcept { return {Kind::Exchange, bond}; }

    bool is_stay() const noexcept { return kind == Kind::Stay; }

    friend bool operator==(const Action&, const Action&) = default;
};

std::string to_string(const Action& action);

SpinConfig apply_action(const Lattice& lattice, const SpinConfig& s, const Action& action);

/// All 2^N configurations, or the C(N, N_up) configurations of the given
/// magnetization, in ascending bit-pattern order.
std::vector<SpinConfig> enumerate_states(const Lattice& lattice,
                                         std::optional<int> magnetization = std::nullopt,
                                         int max_sites = kDefaultEnumerationCap);

/// Cyclic translation: the spin at site r moves to site r + shift.
SpinConfig translate_config(const SpinConfig& s, const Lattice& lattice, std::array<int, 2> shift);

/// Bond energy sum over <ij> of s_i s_j.
int bond_sum(const Lattice& lattice, const SpinConfig& s) noexcept;

} // namespace lrl
