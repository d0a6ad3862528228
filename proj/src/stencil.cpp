#include "masys/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "masys/errors.hpp"

namespace masys {

namespace {

// Primitive lattice vectors (a, b) with a >= 1, b >= 0, ordered by length and
// then by angle, with the 45-degree diagonal kept second.
std::vector<LatticeDirection> primitive_directions(int count) {
    std::vector<LatticeDirection> dirs;
    for (int a = 1; a <= 4; ++a) {
        for (int b = 0; b <= 4; ++b) {
            if (std::gcd(a, b) == 1) dirs.push_back({a, b});
        }
    }
    // (a,b) and (b,a) give distinct pairs except on the diagonal, and (0,1)
    // appears only as the perpendicular of (1,0).
    std::sort(dirs.begin(), dirs.end(), [](LatticeDirection l, LatticeDirection r) {
        const int nl = l.dx * l.dx + l.dy * l.dy;
        const int nr = r.dx * r.dx + r.dy * r.dy;
        if (nl != nr) return nl < nr;
        return std::atan2(l.dy, l.dx) < std::atan2(r.dy, r.dx);
    });
    dirs.resize(static_cast<std::size_t>(count));
    return dirs;
}

}  // namespace

StencilSet::StencilSet(int pair_count) {
    if (pair_count < 2 || pair_count > kMaxPairs) {
        throw InvalidInput("stencil pair count must be in [2, " + std::to_string(kMaxPairs) + "], got " +
                           std::to_string(pair_count));
    }
    for (const auto& e : primitive_directions(pair_count)) {
        pairs_.push_back({e, e.perpendicular()});
    }
}

}  // namespace masys
