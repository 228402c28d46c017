// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/lattice.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "lattice_rl/error.hpp"

namespace lrl {

namespace {

std::uint64_t site_mask(int n_sites) {
    return n_sites >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_sites) - 1;
}

int wrap(int v, int extent) {
    int r = v % extent;
    return r < 0 ? r + extent : r;
}

} // namespace

Lattice::Lattice(std::vector<int> dims, std::vector<bool> periodic)
    : dims_(std::move(dims)), periodic_(std::move(periodic)) {
    if (dims_.empty() || dims_.size() > 2) {
        fail(ErrorCode::InvalidLattice, "lattice must have 1 or 2 dimensions");
    }
    if (periodic_.size() == 1 && dims_.size() == 2) {
        periodic_.push_back(periodic_[0]);
    }
    if (periodic_.size() != dims_.size()) {
        fail(ErrorCode::InvalidLattice, "periodic flags do not match dimension count");
    }
    n_sites_ = 1;
    for (int extent : dims_) {
        if (extent < 2) {
            fail(ErrorCode::InvalidLattice,
                 "lattice extent must be at least 2, got " + std::to_string(extent));
        }
        n_sites_ *= extent;
        if (n_sites_ > kMaxSites) {
            fail(ErrorCode::InvalidLattice, "lattice exceeds 64 sites");
        }
    }

    // Positive-direction bonds only, so each pair is produced once except on
    // periodic extent-2 dimensions where both directions reach the same site.
    std::vector<std::vector<int>> adjacency(n_sites_);
    for (int site = 0; site < n_sites_; ++site) {
        for (int d = 0; d < dimension(); ++d) {
            int other = d == 0 ? displaced(site, 1, 0) : displaced(site, 0, 1);
            if (other < 0 || other == site) continue;
            Bond bond{std::min(site, other), std::max(site, other)};
            if (std::find(bonds_.begin(), bonds_.end(), bond) != bonds_.end()) continue;
            bonds_.push_back(bond);
            adjacency[site].push_back(other);
            adjacency[other].push_back(site);
        }
    }
    neighbor_offsets_.reserve(n_sites_ + 1);
    neighbor_offsets_.push_back(0);
    for (auto& list : adjacency) {
        std::sort(list.begin(), list.end());
        neighbor_list_.insert(neighbor_list_.end(), list.begin(), list.end());
        neighbor_offsets_.push_back(static_cast<int>(neighbor_list_.size()));
    }
}

Lattice Lattice::chain(int length, bool periodic) { return Lattice({length}, {periodic}); }

Lattice Lattice::square(int side, bool periodic) {
    return Lattice({side, side}, {periodic, periodic});
}

bool Lattice::fully_periodic() const noexcept {
    return std::all_of(periodic_.begin(), periodic_.end(), [](bool p) { return p; });
}

std::span<const int> Lattice::neighbors(int site) const {
    if (site < 0 || site >= n_sites_) {
        fail(ErrorCode::InvalidArgument, "site index out of range");
    }
    auto begin = neighbor_list_.begin() + neighbor_offsets_[site];
    auto end = neighbor_list_.begin() + neighbor_offsets_[site + 1];
    return {&*begin, static_cast<std::size_t>(end - begin)};
}

std::array<int, 2> Lattice::coords(int site) const {
    return {site % width(), site / width()};
}

int Lattice::site_at(int x, int y) const { return y * width() + x; }

int Lattice::displaced(int site, int dx, int dy) const {
    auto [x, y] = coords(site);
    x += dx;
    y += dy;
    if (x < 0 || x >= width()) {
        if (!periodic_[0]) return -1;
        x = wrap(x, width());
    }
    if (y < 0 || y >= height()) {
        if (dimension() < 2 || !periodic_[1]) return -1;
        y = wrap(y, height());
    }
    return site_at(x, y);
}

std::string Lattice::describe() const {
    std::ostringstream out;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        if (d) out << 'x';
        out << dims_[d];
    }
    out << (fully_periodic() ? " periodic" : " open");
    return out.str();
}

SpinConfig::SpinConfig(int n_sites, std::uint64_t bits) : bits_(bits), n_sites_(n_sites) {
    if (n_sites < 1 || n_sites > kMaxSites) {
        fail(ErrorCode::InvalidArgument, "spin configuration must have 1..64 sites");
    }
    if ((bits & ~site_mask(n_sites)) != 0) {
        fail(ErrorCode::InvalidArgument, "bits set beyond n_sites");
    }
}

SpinConfig SpinConfig::all_up(int n_sites) { return {n_sites, site_mask(n_sites)}; }

SpinConfig SpinConfig::all_down(int n_sites) { return {n_sites, 0}; }

SpinConfig SpinConfig::from_string(std::string_view text) {
    if (text.empty() || text.size() > kMaxSites) {
        fail(ErrorCode::FormatError, "spin string must have 1..64 characters");
    }
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '+') {
            bits |= std::uint64_t{1} << i;
        } else if (text[i] != '-') {
            fail(ErrorCode::FormatError, "spin string may only contain '+' and '-'");
        }
    }
    return {static_cast<int>(text.size()), bits};
}

int SpinConfig::n_up() const noexcept { return std::popcount(bits_); }

std::string SpinConfig::to_string() const {
    std::string out(static_cast<std::size_t>(n_sites_), '-');
    for (int i = 0; i < n_sites_; ++i) {
        if (up(i)) out[i] = '+';
    }
    return out;
}

std::string to_string(const Action& action) {
    switch (action.kind) {
    case Action::Kind::Stay: return "stay";
    case Action::Kind::Flip: return "flip(" + std::to_string(action.index) + ")";
    case Action::Kind::Exchange: return "exchange(" + std::to_string(action.index) + ")";
    }
    return "?";
}

SpinConfig apply_action(const Lattice& lattice, const SpinConfig& s, const Action& action) {
    if (s.n_sites() != lattice.n_sites()) {
        fail(ErrorCode::InvalidAction, "configuration does not match lattice");
    }
    switch (action.kind) {
    case Action::Kind::Stay: return s;
    case Action::Kind::Flip:
        if (action.index < 0 || action.index >= lattice.n_sites()) {
            fail(ErrorCode::InvalidAction, "flip site out of range");
        }
        return s.flipped(action.index);
    case Action::Kind::Exchange: {
        auto bonds = lattice.bonds();
        if (action.index < 0 || action.index >= static_cast<int>(bonds.size())) {
            fail(ErrorCode::InvalidAction, "exchange bond out of range");
        }
        const Bond& bond = bonds[action.index];
        if (s.up(bond.a) == s.up(bond.b)) {
            fail(ErrorCode::InvalidAction, "exchange requires opposite spins on the bond");
        }
        return s.flipped(bond.a).flipped(bond.b);
    }
    }
    fail(ErrorCode::InvalidAction, "unknown action kind");
}

std::vector<SpinConfig> enumerate_states(const Lattice& lattice, std::optional<int> magnetization,
                                         int max_sites) {
    const int n = lattice.n_sites();
    if (n > max_sites || n > 40) {
        fail(ErrorCode::StateSpaceTooLarge,
             std::to_string(n) + " sites exceeds enumeration cap " + std::to_string(max_sites));
    }
    std::vector<SpinConfig> out;
    if (!magnetization) {
        const std::uint64_t count = std::uint64_t{1} << n;
        out.reserve(count);
        for (std::uint64_t bits = 0; bits < count; ++bits) out.emplace_back(n, bits);
        return out;
    }
    const int m = *magnetization;
    if (m < -n || m > n || ((m + n) % 2) != 0) {
        fail(ErrorCode::InvalidArgument,
             "magnetization " + std::to_string(m) + " impossible for " + std::to_string(n) +
                 " sites");
    }
    const int k = (m + n) / 2;
    if (k == 0) return {SpinConfig(n, 0)};
    // Gosper's hack walks k-subsets in increasing numeric order.
    const std::uint64_t limit = std::uint64_t{1} << n;
    for (std::uint64_t bits = (std::uint64_t{1} << k) - 1; bits < limit;) {
        out.emplace_back(n, bits);
        const std::uint64_t low = bits & (~bits + 1);
        const std::uint64_t ripple = bits + low;
        bits = (((ripple ^ bits) >> 2) / low) | ripple;
    }
    return out;
}

SpinConfig translate_config(const SpinConfig& s, const Lattice& lattice, std::array<int, 2> shift) {
    if (s.n_sites() != lattice.n_sites()) {
        fail(ErrorCode::InvalidArgument, "configuration does not match lattice");
    }
    if (!lattice.periodic()[0] || (lattice.dimension() == 2 && !lattice.periodic()[1])) {
        fail(ErrorCode::SymmetryUnavailable, "translations need a periodic lattice");
    }
    const int dy = lattice.dimension() == 2 ? shift[1] : 0;
    std::uint64_t bits = 0;
    for (int site = 0; site < lattice.n_sites(); ++site) {
        if (s.up(site)) bits |= std::uint64_t{1} << lattice.displaced(site, shift[0], dy);
    }
    return {s.n_sites(), bits};
}

int bond_sum(const Lattice& lattice, const SpinConfig& s) noexcept {
    int total = 0;
    for (const Bond& bond : lattice.bonds()) total += s.spin(bond.a) * s.spin(bond.b);
    return total;
}

} // namespace lrl
