#pragma once

// Shared generators for randomized checks.

#include "gmch/grid.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace gmch::testing {

struct Bump {
    double amp, center, width;
};

inline std::vector<Bump> random_bumps(std::mt19937_64& rng, bool nonnegative, int count = 3) {
    std::uniform_real_distribution<double> amp(nonnegative ? 0.05 : -1.0, 1.0), ctr(-4.0, 4.0), wid(0.7, 2.0);
    std::vector<Bump> b;
    for (int i = 0; i < count; ++i) b.push_back({amp(rng), ctr(rng), wid(rng)});
    return b;
}

inline double eval_bumps(const std::vector<Bump>& bs, double x) {
    double s = 0.0;
    for (const auto& b : bs) s += b.amp * std::exp(-((x - b.center) / b.width) * ((x - b.center) / b.width));
    return s;
}

inline double eval_bumps_dx(const std::vector<Bump>& bs, double x) {
    double s = 0.0;
    for (const auto& b : bs) {
        const double z = (x - b.center) / b.width;
        s += -2.0 * z / b.width * b.amp * std::exp(-z * z);
    }
    return s;
}

/// Smooth, decaying, sign-indefinite profile. Evolution tests pass scale < 1:
/// at unit amplitude some draws concentrate momentum before t = 1.
inline GridFunction random_smooth(std::mt19937_64& rng, const GridSpec& g, double scale = 1.0) {
    const auto bs = random_bumps(rng, false);
    return sample(g, [&](double x) { return scale * eval_bumps(bs, x); });
}

/// u = (1 - d^2)^{-1} y for a random nonnegative smooth y.
inline GridFunction random_nonnegative_momentum(std::mt19937_64& rng, const GridSpec& g) {
    const auto bs = random_bumps(rng, true);
    std::vector<double> y(g.N);
    for (std::size_t j = 0; j < g.N; ++j) y[j] = eval_bumps(bs, g.x(j));
    return GridFunction::from_momentum(g, std::move(y));
}

}  // namespace gmch::testing
