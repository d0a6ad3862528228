#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace masys {

/// Integer lattice direction. Components are coprime.
struct LatticeDirection {
    int dx = 0;
    int dy = 0;

    double length() const { return std::hypot(static_cast<double>(dx), static_cast<double>(dy)); }
    LatticeDirection perpendicular() const { return {-dy, dx}; }
    friend bool operator==(const LatticeDirection&, const LatticeDirection&) = default;
};

struct DirectionPair {
    LatticeDirection first;
    LatticeDirection second;
};

/// Ordered set of K >= 2 orthogonal direction pairs used by the wide-stencil
/// Monge-Ampere discretization. Pair 0 is always the coordinate axes, pair 1
/// the diagonals; further pairs add primitive directions by increasing length.
///
/// Directions are addressed by a flat index: direction 2k is pair k's first
/// member, 2k+1 its second. Signed rays double that again (see Grid).
class StencilSet {
public:
    /// Throws InvalidInput for K < 2 or K beyond the generated table.
    explicit StencilSet(int pair_count = 2);

    int pair_count() const { return static_cast<int>(pairs_.size()); }
    int direction_count() const { return 2 * pair_count(); }
    const std::vector<DirectionPair>& pairs() const { return pairs_; }
    const DirectionPair& pair(int k) const { return pairs_[static_cast<std::size_t>(k)]; }
    LatticeDirection direction(int d) const {
        const auto& p = pairs_[static_cast<std::size_t>(d / 2)];
        return d % 2 == 0 ? p.first : p.second;
    }

    static constexpr int kMaxPairs = 8;

private:
    std::vector<DirectionPair> pairs_;
};

}  // namespace masys
