#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

// Reference implementations used to cross-check the statistics library.
// They share the test definitions (deviation-based two-sided p for the
// rank test, mass-based two-sided p for the exact count test) but compute
// them through a different mechanism: integer arithmetic and subset-sum
// counting instead of log-space scans and combination walks.
namespace ssp::testfix {

// C(n, k) in exact integer arithmetic; safe for the small tables used here.
inline long double choose_ld(long long n, long long k) {
    if (k < 0 || k > n) return 0.0L;
    long double r = 1.0L;
    for (long long i = 1; i <= k; ++i) {
        r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    }
    return r;
}

// Two-sided exact p for a 2x2 count table by direct hypergeometric
// enumeration: sum the probability of every table (same margins) whose
// point mass does not exceed the observed one.
inline double fisher_oracle(long long a, long long b, long long c, long long d) {
    const long long r1 = a + b, r2 = c + d, c1 = a + c, n = r1 + r2;
    const long double denom = choose_ld(n, c1);
    const long double obs = choose_ld(r1, a) * choose_ld(r2, c1 - a);
    const long long lo = std::max(0LL, c1 - r2);
    const long long hi = std::min(r1, c1);
    long double mass = 0.0L;
    for (long long k = lo; k <= hi; ++k) {
        long double m = choose_ld(r1, k) * choose_ld(r2, c1 - k);
        if (m <= obs * (1.0L + 1e-12L)) mass += m;
    }
    return static_cast<double>(mass / denom);
}

// Exact two-sided p for the rank-sum test on tie-free samples, via a
// subset-sum table over ranks 1..n: count[k][s] = subsets of size k of
// {1..n} summing to s.
inline double mann_whitney_oracle(const std::vector<double>& x,
                                  const std::vector<double>& y) {
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::sort(pooled.begin(), pooled.end());
    const int n = static_cast<int>(pooled.size());
    const int nx = static_cast<int>(x.size());
    double rank_sum = 0.0;
    for (double v : x) {
        auto it = std::lower_bound(pooled.begin(), pooled.end(), v);
        rank_sum += static_cast<double>(it - pooled.begin()) + 1.0;
    }
    const double base = 0.5 * nx * (nx + 1);
    const double u_obs = rank_sum - base;
    const double mu = 0.5 * static_cast<double>(nx) * static_cast<double>(n - nx);

    const int max_sum = n * (n + 1) / 2;
    std::vector<std::vector<double>> count(
        static_cast<size_t>(nx) + 1, std::vector<double>(static_cast<size_t>(max_sum) + 1, 0.0));
    count[0][0] = 1.0;
    for (int r = 1; r <= n; ++r) {
        for (int k = std::min(nx, r); k >= 1; --k) {
            for (int s = max_sum; s >= r; --s) {
                count[k][s] += count[k - 1][s - r];
            }
        }
    }
    double hits = 0.0, total = 0.0;
    for (int s = 0; s <= max_sum; ++s) {
        double c = count[nx][s];
        if (c == 0.0) continue;
        total += c;
        double u = static_cast<double>(s) - base;
        if (std::fabs(u - mu) >= std::fabs(u_obs - mu) - 1e-9) hits += c;
    }
    return hits / total;
}

}  // namespace ssp::testfix
