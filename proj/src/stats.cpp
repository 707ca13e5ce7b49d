#include "sspeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sspeval/errors.hpp"

namespace ssp::stats {

namespace {

constexpr double kTinyP = 1e-300;  // keeps reported p strictly positive

double clamp_p(double p) { return std::min(1.0, std::max(kTinyP, p)); }

// Lower incomplete gamma by power series, valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper incomplete gamma by modified Lentz continued fraction, x >= a + 1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (a <= 0.0) throw StatError("regularized_gamma_p: a must be positive");
    if (x < 0.0) throw StatError("regularized_gamma_p: x must be non-negative");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double regularized_gamma_q(double a, double x) {
    if (a <= 0.0) throw StatError("regularized_gamma_q: a must be positive");
    if (x < 0.0) throw StatError("regularized_gamma_q: x must be non-negative");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double chi_squared_sf(double x, int df) {
    if (df < 1) throw StatError("chi_squared_sf: df must be >= 1");
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(0.5 * df, 0.5 * x);
}

double kolmogorov_sf(double x) {
    if (x <= 0.0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        double term = std::exp(-2.0 * k * k * x * x);
        sum += sign * term;
        if (term < 1e-14) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

double log_choose(long long n, long long k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

TestResult fisher_exact_2x2(const std::array<std::array<long long, 2>, 2>& table) {
    const long long a = table[0][0], b = table[0][1];
    const long long c = table[1][0], d = table[1][1];
    if (a < 0 || b < 0 || c < 0 || d < 0) {
        throw StatError("fisher_exact_2x2: negative cell count");
    }
    const long long r1 = a + b, r2 = c + d, c1 = a + c, n = r1 + r2;
    if (n == 0) throw StatError("fisher_exact_2x2: empty table");

    auto log_mass = [&](long long aa) {
        return log_choose(r1, aa) + log_choose(r2, c1 - aa) - log_choose(n, c1);
    };
    const double log_obs = log_mass(a);
    const long long lo = std::max(0LL, c1 - r2);
    const long long hi = std::min(r1, c1);
    double p = 0.0;
    for (long long aa = lo; aa <= hi; ++aa) {
        double lm = log_mass(aa);
        if (lm <= log_obs + 1e-12) p += std::exp(lm);
    }

    TestResult out;
    out.method = "fisher-exact";
    out.p_value = clamp_p(p);
    // Sample odds ratio, second row's odds over the first row's; IEEE
    // inf/nan carries the zero-cell cases through to formatting.
    out.statistic = (static_cast<double>(c) * static_cast<double>(b)) /
                    (static_cast<double>(d) * static_cast<double>(a));
    return out;
}

TestResult chi_squared_independence(const std::vector<std::vector<long long>>& table) {
    const size_t r = table.size();
    if (r < 2) throw StatError("chi_squared_independence: need >= 2 rows");
    const size_t c = table[0].size();
    if (c < 2) throw StatError("chi_squared_independence: need >= 2 columns");
    for (const auto& row : table) {
        if (row.size() != c) throw StatError("chi_squared_independence: ragged table");
        for (long long v : row) {
            if (v < 0) throw StatError("chi_squared_independence: negative count");
        }
    }
    std::vector<long long> rm(r, 0), cm(c, 0);
    long long n = 0;
    for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) {
            rm[i] += table[i][j];
            cm[j] += table[i][j];
            n += table[i][j];
        }
    }
    for (size_t i = 0; i < r; ++i) {
        if (rm[i] == 0) {
            throw StatError("chi_squared_independence: zero row margin at row " +
                            std::to_string(i));
        }
    }
    for (size_t j = 0; j < c; ++j) {
        if (cm[j] == 0) {
            throw StatError("chi_squared_independence: zero column margin at column " +
                            std::to_string(j));
        }
    }
    double stat = 0.0;
    for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) {
            double expected = static_cast<double>(rm[i]) * cm[j] / n;
            double diff = table[i][j] - expected;
            stat += diff * diff / expected;
        }
    }
    TestResult out;
    out.method = "chi-squared";
    out.statistic = stat;
    out.df = static_cast<int>((r - 1) * (c - 1));
    out.p_value = clamp_p(chi_squared_sf(stat, *out.df));
    return out;
}

namespace {

// Midranks of the pooled sample; also reports the tie-group sizes.
std::vector<double> midranks(const std::vector<double>& pooled_sorted,
                             std::vector<long long>* tie_sizes) {
    const size_t n = pooled_sorted.size();
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && pooled_sorted[j + 1] == pooled_sorted[i]) ++j;
        double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) ranks[k] = avg;
        if (tie_sizes) tie_sizes->push_back(static_cast<long long>(j - i + 1));
        i = j + 1;
    }
    return ranks;
}

// Walks every C(n, nx) assignment of pooled ranks to the first group and
// counts those at least as far from the null mean as the observed U.
double exact_two_sided_p(const std::vector<double>& ranks, size_t nx, double u_obs) {
    const size_t n = ranks.size();
    const double mu = 0.5 * static_cast<double>(nx) * static_cast<double>(n - nx);
    const double obs_dev = std::fabs(u_obs - mu) - 1e-9;
    std::vector<size_t> comb(nx);
    for (size_t i = 0; i < nx; ++i) comb[i] = i;
    const double base = 0.5 * nx * (nx + 1);
    long long hits = 0, total = 0;
    while (true) {
        double rank_sum = 0.0;
        for (size_t i : comb) rank_sum += ranks[i];
        double u = rank_sum - base;
        if (std::fabs(u - mu) >= obs_dev) ++hits;
        ++total;
        // advance to the next combination in lexicographic order
        size_t k = nx;
        while (k > 0 && comb[k - 1] == (k - 1) + (n - nx)) --k;
        if (k == 0) break;
        ++comb[k - 1];
        for (size_t j = k; j < nx; ++j) comb[j] = comb[j - 1] + 1;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TestResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y,
                          MwMode mode) {
    const size_t nx = x.size(), ny = y.size();
    if (nx == 0 || ny == 0) throw StatError("mann_whitney_u: empty sample");
    const size_t n = nx + ny;

    // pool with group tags, sort by value keeping tags
    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(n);
    for (double v : x) pooled.emplace_back(v, 0);
    for (double v : y) pooled.emplace_back(v, 1);
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> values(n);
    for (size_t i = 0; i < n; ++i) values[i] = pooled[i].first;
    std::vector<long long> tie_sizes;
    std::vector<double> ranks = midranks(values, &tie_sizes);

    double rank_sum_x = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (pooled[i].second == 0) rank_sum_x += ranks[i];
    }
    const double u_x = rank_sum_x - 0.5 * nx * (nx + 1);
    const bool has_ties =
        std::any_of(tie_sizes.begin(), tie_sizes.end(), [](long long t) { return t > 1; });

    bool exact;
    switch (mode) {
        case MwMode::Exact: exact = true; break;
        case MwMode::NormalApprox: exact = false; break;
        case MwMode::Auto: exact = (n <= 12 && !has_ties); break;
        default: exact = false; break;
    }

    TestResult out;
    out.statistic = u_x;
    if (exact) {
        out.method = "mann-whitney-u (exact)";
        out.p_value = clamp_p(exact_two_sided_p(ranks, nx, u_x));
        return out;
    }

    out.method = "mann-whitney-u (normal-approx)";
    const double mu = 0.5 * static_cast<double>(nx) * static_cast<double>(ny);
    double tie_term = 0.0;
    for (long long t : tie_sizes) {
        tie_term += static_cast<double>(t) * t * t - t;
    }
    const double dn = static_cast<double>(n);
    double var = (static_cast<double>(nx) * ny / 12.0) *
                 ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
        // every pooled value identical: no rank information
        out.p_value = 1.0;
        return out;
    }
    double dev = std::fabs(u_x - mu) - 0.5;  // continuity correction
    if (dev < 0.0) dev = 0.0;
    double z = dev / std::sqrt(var);
    out.p_value = clamp_p(2.0 * (1.0 - normal_cdf(z)));
    return out;
}

std::vector<double> bonferroni(const std::vector<double>& p_values,
                               std::optional<int> m) {
    const int mm = m.value_or(static_cast<int>(p_values.size()));
    if (mm < static_cast<int>(p_values.size())) {
        throw StatError("bonferroni: m smaller than the number of tests");
    }
    std::vector<double> out;
    out.reserve(p_values.size());
    for (double p : p_values) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw StatError("bonferroni: p-value outside (0, 1]");
        }
        out.push_back(std::min(1.0, p * mm));
    }
    return out;
}

TestResult ks_normality(const std::vector<double>& data) {
    const size_t n = data.size();
    if (n < 5) throw StatError("ks_normality: need at least 5 observations");
    double mean = 0.0;
    for (double v : data) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : data) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw StatError("ks_normality: zero variance sample");

    std::vector<double> sorted = data;
    std::sort(sorted.begin(), sorted.end());
    double d = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double cdf = normal_cdf((sorted[i] - mean) / sd);
        double upper = static_cast<double>(i + 1) / n - cdf;
        double lower = cdf - static_cast<double>(i) / n;
        d = std::max(d, std::max(upper, lower));
    }
    TestResult out;
    out.method = "kolmogorov-smirnov (normal, estimated params)";
    out.statistic = d;
    out.p_value = clamp_p(kolmogorov_sf(std::sqrt(static_cast<double>(n)) * d));
    out.estimated_params_caveat = true;
    return out;
}

std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

}  // namespace ssp::stats
