#include "resopt/projection.hpp"

#include <algorithm>
#include <cmath>

#include "resopt/errors.hpp"

namespace resopt {

namespace {

constexpr int kMaxDykstraCycles = 500;

void clip_box(std::vector<double>& v, double lo, double hi) {
    for (auto& x : v) x = std::clamp(x, lo, hi);
}

// Projection onto { |v[t] - v[t-1]| <= dp }: split the excess symmetrically.
void clip_pair_band(std::vector<double>& v, std::size_t t, double dp) {
    const double d = v[t] - v[t - 1];
    if (d > dp) {
        const double excess = 0.5 * (d - dp);
        v[t - 1] += excess;
        v[t] -= excess;
    } else if (d < -dp) {
        const double excess = 0.5 * (-d - dp);
        v[t - 1] -= excess;
        v[t] += excess;
    }
}

// Exact feasibility cleanup. PAV output is non-increasing; the forward band
// pass preserves monotonicity when requested; box clamping contracts adjacent
// differences, so it preserves both earlier passes. A final ulp-level nudge
// sweep absorbs the rounding of `v[t-1] +/- dp_max`, which at field pressure
// magnitudes can exceed the strict feasibility tolerance.
void exact_finisher(std::vector<double>& v, const ConstraintSpec& spec) {
    if (spec.monotone) v = nonincreasing_projection(std::move(v));
    for (std::size_t t = 1; t < v.size(); ++t) {
        const double lo = v[t - 1] - spec.dp_max;
        const double hi = spec.monotone ? v[t - 1] : v[t - 1] + spec.dp_max;
        v[t] = std::clamp(v[t], lo, hi);
    }
    clip_box(v, spec.p_min, spec.p_max);
    for (std::size_t t = 1; t < v.size(); ++t) {
        // Walking the double lattice toward v[t-1] terminates on the exact
        // lattice point that satisfies the comparison; it cannot cross the box
        // because v[t-1] itself is inside it.
        while (v[t - 1] - v[t] > spec.dp_max) v[t] = std::nextafter(v[t], v[t - 1]);
        while (v[t] - v[t - 1] > (spec.monotone ? 0.0 : spec.dp_max))
            v[t] = std::nextafter(v[t], v[t - 1]);
    }
}

} // namespace

std::vector<double> nonincreasing_projection(std::vector<double> v) {
    const std::size_t n = v.size();
    if (n <= 1) return v;
    // Pool adjacent violators on the reversed order: blocks of equal fitted
    // value, merged while a block mean exceeds its left neighbor's.
    std::vector<double> mean(n), weight(n);
    std::vector<std::size_t> len(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean[blocks] = v[i];
        weight[blocks] = 1.0;
        len[blocks] = 1;
        ++blocks;
        while (blocks >= 2 && mean[blocks - 2] < mean[blocks - 1]) {
            const double w = weight[blocks - 2] + weight[blocks - 1];
            mean[blocks - 2] =
                (mean[blocks - 2] * weight[blocks - 2] + mean[blocks - 1] * weight[blocks - 1]) / w;
            weight[blocks - 2] = w;
            len[blocks - 2] += len[blocks - 1];
            --blocks;
        }
    }
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t b = 0; b < blocks; ++b) out.insert(out.end(), len[b], mean[b]);
    return out;
}

std::vector<double> project_feasible(std::vector<double> values, const ConstraintSpec& spec) {
    spec.validate();
    for (double x : values)
        if (!std::isfinite(x)) throw ArgumentError("project_feasible: non-finite input");
    const std::size_t n = values.size();
    if (n == 0) return values;
    if (feasibility_violation(values, spec) <= 0.0) return values; // idempotent, exact

    if (n == 1) {
        values[0] = std::clamp(values[0], spec.p_min, spec.p_max);
        return values;
    }

    // Dykstra over: box, each pairwise band, optional isotonic cone.
    const std::size_t n_sets = 1 + (n - 1) + (spec.monotone ? 1 : 0);
    std::vector<std::vector<double>> increments(n_sets, std::vector<double>(n, 0.0));
    std::vector<double> x = values;
    const double tol = 1e-9 * spec.range();

    for (int cycle = 0; cycle < kMaxDykstraCycles; ++cycle) {
        const std::vector<double> x_prev = x;
        std::size_t set = 0;

        auto apply = [&](auto&& project) {
            std::vector<double>& inc = increments[set];
            for (std::size_t i = 0; i < n; ++i) x[i] += inc[i];
            const std::vector<double> y = x;
            project(x);
            for (std::size_t i = 0; i < n; ++i) inc[i] = y[i] - x[i];
            ++set;
        };

        apply([&](std::vector<double>& v) { clip_box(v, spec.p_min, spec.p_max); });
        for (std::size_t t = 1; t < n; ++t)
            apply([&](std::vector<double>& v) { clip_pair_band(v, t, spec.dp_max); });
        if (spec.monotone)
            apply([&](std::vector<double>& v) { v = nonincreasing_projection(std::move(v)); });

        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(x[i] - x_prev[i]));
        if (change < tol) break;
    }

    exact_finisher(x, spec);
    return x;
}

} // namespace resopt
