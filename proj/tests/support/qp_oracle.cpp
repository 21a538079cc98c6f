#include "qp_oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace resopt::testsupport {

namespace {

// Dense symmetric solve via Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (a[pivot][col] == 0.0) throw std::runtime_error("qp oracle: singular Newton system");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

struct LinearConstraints {
    // a_i^T v <= b_i with sparse rows of at most two entries
    struct Row {
        int j1 = -1, j2 = -1;
        double c1 = 0.0, c2 = 0.0;
        double b = 0.0;
    };
    std::vector<Row> rows;

    double slack(const Row& r, const std::vector<double>& v) const {
        double av = r.c1 * v[r.j1];
        if (r.j2 >= 0) av += r.c2 * v[r.j2];
        return r.b - av;
    }
};

} // namespace

std::vector<double> qp_project(const std::vector<double>& x, const ConstraintSpec& spec) {
    const int n = static_cast<int>(x.size());
    if (n == 0) return {};
    const double range = spec.p_max - spec.p_min;

    // Work in normalized coordinates y = (v - p_min) / range.
    std::vector<double> target(n);
    for (int i = 0; i < n; ++i) target[i] = (x[i] - spec.p_min) / range;
    const double dp = spec.dp_max / range;

    LinearConstraints lc;
    for (int i = 0; i < n; ++i) {
        lc.rows.push_back({i, -1, 1.0, 0.0, 1.0});  // y_i <= 1
        lc.rows.push_back({i, -1, -1.0, 0.0, 0.0}); // -y_i <= 0
    }
    for (int i = 1; i < n; ++i) {
        lc.rows.push_back({i, i - 1, 1.0, -1.0, dp}); // y_i - y_{i-1} <= dp
        lc.rows.push_back({i, i - 1, -1.0, 1.0, dp}); // y_{i-1} - y_i <= dp
        if (spec.monotone) lc.rows.push_back({i, i - 1, 1.0, -1.0, 0.0});
    }
    const int m = static_cast<int>(lc.rows.size());

    // Strictly feasible start: gently decreasing midline.
    std::vector<double> y(n);
    const double slope = 0.5 * std::min(dp, 0.5 / std::max(1, n));
    for (int i = 0; i < n; ++i) y[i] = 0.6 - slope * i;

    double t = 1.0;
    const double mu = 10.0;
    const double gap_target = 1e-13;

    while (m / t > gap_target) {
        // Newton minimize t*f(y) + barrier(y)
        for (int newton = 0; newton < 80; ++newton) {
            std::vector<std::vector<double>> H(n, std::vector<double>(n, 0.0));
            std::vector<double> g(n, 0.0);
            for (int i = 0; i < n; ++i) {
                H[i][i] = t;
                g[i] = t * (y[i] - target[i]);
            }
            for (const auto& row : lc.rows) {
                const double s = lc.slack(row, y);
                if (s <= 0.0) throw std::runtime_error("qp oracle: infeasible iterate");
                const double inv_s = 1.0 / s;
                const double w = inv_s * inv_s;
                g[row.j1] += row.c1 * inv_s;
                H[row.j1][row.j1] += row.c1 * row.c1 * w;
                if (row.j2 >= 0) {
                    g[row.j2] += row.c2 * inv_s;
                    H[row.j2][row.j2] += row.c2 * row.c2 * w;
                    H[row.j1][row.j2] += row.c1 * row.c2 * w;
                    H[row.j2][row.j1] += row.c1 * row.c2 * w;
                }
            }
            std::vector<double> rhs(n);
            for (int i = 0; i < n; ++i) rhs[i] = -g[i];
            const std::vector<double> step = dense_solve(H, rhs);

            double decrement = 0.0;
            for (int i = 0; i < n; ++i) decrement += -rhs[i] * step[i];
            decrement = -decrement; // lambda^2 = step^T H step = -g^T step
            if (decrement / 2.0 < 1e-16) break;

            // Backtrack to stay strictly feasible with sufficient decrease.
            double alpha = 1.0;
            auto barrier_value = [&](const std::vector<double>& v) {
                double val = 0.0;
                for (int i = 0; i < n; ++i)
                    val += 0.5 * t * (v[i] - target[i]) * (v[i] - target[i]);
                for (const auto& row : lc.rows) {
                    const double s = lc.slack(row, v);
                    if (s <= 0.0) return std::numeric_limits<double>::infinity();
                    val -= std::log(s);
                }
                return val;
            };
            const double f0 = barrier_value(y);
            double gdot = 0.0;
            for (int i = 0; i < n; ++i) gdot += g[i] * step[i];
            std::vector<double> trial(n);
            for (int ls = 0; ls < 60; ++ls) {
                for (int i = 0; i < n; ++i) trial[i] = y[i] + alpha * step[i];
                if (barrier_value(trial) <= f0 + 0.25 * alpha * gdot) break;
                alpha *= 0.5;
            }
            for (int i = 0; i < n; ++i) y[i] += alpha * step[i];
        }
        t *= mu;
    }

    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = spec.p_min + y[i] * range;
    return out;
}

} // namespace resopt::testsupport
