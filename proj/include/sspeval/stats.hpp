#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ssp::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::optional<int> df;
    std::string method;
    std::optional<double> corrected_p;
    // Set when the reference distribution was fit with parameters estimated
    // from the same sample, so the nominal p overstates evidence of fit.
    bool estimated_params_caveat = false;
};

// --- special functions ---------------------------------------------------
// Series / continued-fraction evaluation of the regularized incomplete
// gamma functions P(a,x) and Q(a,x) = 1 - P(a,x); relative accuracy is
// driven to ~1e-14, comfortably under the 1e-10 contract.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

double normal_cdf(double z);
// Upper tail of the chi-squared distribution: Q(df/2, x/2).
double chi_squared_sf(double x, int df);
// Asymptotic Kolmogorov survival function Q(x) = 2 sum_k (-1)^{k-1} e^{-2 k^2 x^2}.
double kolmogorov_sf(double x);
double log_choose(long long n, long long k);

// --- tests ----------------------------------------------------------------

// Two-sided exact test on a 2x2 count table, summing hypergeometric mass
// over same-margin tables whose point probability does not exceed the
// observed one (1e-12 relative slack). statistic = sample odds ratio
// (row2 odds over row1 odds); may be inf or nan when cells are zero.
TestResult fisher_exact_2x2(const std::array<std::array<long long, 2>, 2>& table);

// Pearson chi-squared independence test on an r x c table, no continuity
// correction. All row and column margins must be positive.
TestResult chi_squared_independence(const std::vector<std::vector<long long>>& table);

enum class MwMode { Auto, Exact, NormalApprox };

// Two-sided Mann-Whitney U with midranks. Exact mode enumerates group
// assignments (Auto picks it when n_x + n_y <= 12 and there are no ties);
// otherwise a normal approximation with tie-corrected variance and 0.5
// continuity correction. statistic = U of the first sample. A pooled
// sample with zero rank variance yields p = 1.
TestResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y,
                          MwMode mode = MwMode::Auto);

// Bonferroni adjustment: min(1, p * m); m defaults to p.size().
std::vector<double> bonferroni(const std::vector<double>& p_values,
                               std::optional<int> m = std::nullopt);

// One-sample Kolmogorov-Smirnov distance against Normal(mean, sd) with both
// parameters estimated from the data (sample sd), p from the asymptotic
// Kolmogorov distribution at sqrt(n) * D. estimated_params_caveat is set.
TestResult ks_normality(const std::vector<double>& data);

// "***" p < 0.001, "**" p < 0.01, "*" p < 0.05, "" otherwise.
std::string significance_stars(double p);

}  // namespace ssp::stats
