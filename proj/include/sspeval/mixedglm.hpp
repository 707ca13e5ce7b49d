#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ssp::glmm {

struct IrlsOptions {
    int max_iter = 100;
    double tol = 1e-8;          // max absolute coefficient step
    double divergence_cap = 30.0;  // |beta_j| beyond this means separation
};

// Newton/IRLS maximum-likelihood logistic regression. y in {0,1}; optional
// per-observation weights. Throws DivergenceError naming the runaway
// column when a coefficient escapes the cap (perfect separation).
Eigen::VectorXd logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* weights = nullptr,
                              const IrlsOptions& options = {});

// Observation table with named categorical columns; level labels are
// interned per column in first-appearance order.
class GlmmData {
  public:
    explicit GlmmData(std::vector<std::string> factor_names);

    void add(bool outcome, const std::vector<std::string>& factor_values);

    int n() const { return static_cast<int>(outcomes_.size()); }
    const std::vector<std::string>& factor_names() const { return factor_names_; }
    int factor_index(const std::string& name) const;  // throws ConfigError
    const std::vector<std::string>& levels(int factor) const { return levels_[factor]; }
    const std::vector<int>& codes(int factor) const { return codes_[factor]; }
    const std::vector<unsigned char>& outcomes() const { return outcomes_; }

  private:
    std::vector<std::string> factor_names_;
    std::vector<std::vector<std::string>> levels_;  // per factor
    std::vector<std::vector<int>> codes_;           // per factor, per observation
    std::vector<unsigned char> outcomes_;
};

struct GlmmOptions {
    int max_outer_cycles = 8;
    double outer_tol = 1e-3;       // max |log-variance| move per cycle
    int golden_iters = 32;
    int max_inner_iter = 100;
    double inner_tol = 1e-8;
    double variance_floor = 1e-8;  // reported as 0 when pinned here
    double variance_cap = 25.0;
    double divergence_cap = 30.0;
    // Skips the outer variance search; entries at or under the floor
    // deactivate their factor entirely (the reduction-to-IRLS route).
    std::optional<std::vector<double>> fixed_variances;
    bool track_objective = false;  // records accepted inner objective values
};

// Fixed-effect coding: with a reference level the design is intercept plus
// dummies and the reference row reports the intercept; without one every
// level gets its own mean (cell-means coding).
struct GlmmSpec {
    std::string fixed_factor;
    std::optional<std::string> reference_level;
    std::vector<std::string> random_factors;
    GlmmOptions options;
};

struct FixedEffect {
    std::string level;
    double coef = 0.0;
    double odds_ratio = 1.0;  // exp(coef)
    bool is_reference = false;
};

struct RandomVariance {
    std::string factor;
    double variance = 0.0;  // 0 when the optimum sat on the floor
};

struct GlmmFit {
    std::vector<FixedEffect> fixed;
    std::vector<RandomVariance> random_variances;
    // fitted intercepts per random factor, indexed like that factor's levels;
    // all zero for a dropped factor
    std::vector<std::vector<double>> random_effects;
    double log_likelihood = 0.0;  // Laplace-approximate marginal
    bool converged = false;
    int outer_evaluations = 0;
    int inner_iterations = 0;
    std::vector<double> objective_trace;  // with options.track_objective
};

// Laplace-approximated ML for a Bernoulli GLMM with crossed Gaussian
// random intercepts: the inner penalized Newton solves the joint (beta, u)
// mode, the outer loop optimizes each log-variance by golden section.
GlmmFit fit_binomial_glmm(const GlmmData& data, const GlmmSpec& spec);

struct OddsRow {
    std::string label;
    double coef = 0.0;
    double odds_ratio = 1.0;
    double abs_one_minus_or = 0.0;
    bool easier_band = false;  // odds ratio >= 1
    bool is_reference = false;
};

enum class OrSort { None, AscendingOr };

std::vector<OddsRow> odds_ratio_table(const GlmmFit& fit, OrSort sort = OrSort::None);

}  // namespace ssp::glmm
