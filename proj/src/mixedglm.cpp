#include "sspeval/mixedglm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include <Eigen/Cholesky>

#include "sspeval/errors.hpp"

namespace ssp::glmm {

namespace {

double log1pexp(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Eigen::VectorXd logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* weights, const IrlsOptions& options) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n == 0 || p == 0) throw StatError("logistic regression needs a nonempty design");
    if (y.size() != n) throw StatError("logistic regression: outcome length does not match design rows");
    Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(n);
    if (w.size() != n) throw StatError("logistic regression: weight length does not match design rows");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw StatError("logistic regression: outcomes must be 0 or 1");
        if (w[i] < 0.0) throw StatError("logistic regression: negative observation weight");
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (int iter = 0; iter < options.max_iter; ++iter) {
        Eigen::VectorXd eta = X * beta;
        Eigen::VectorXd mu(n), wvar(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = sigmoid(eta[i]);
            wvar[i] = w[i] * mu[i] * (1.0 - mu[i]);
        }
        Eigen::VectorXd g = X.transpose() * (w.array() * (y - mu).array()).matrix();
        Eigen::MatrixXd H = X.transpose() * wvar.asDiagonal() * X;
        Eigen::VectorXd step = H.ldlt().solve(g);
        if (!step.allFinite()) throw StatError("logistic regression: singular working Hessian");
        beta += step;

        Eigen::Index worst = 0;
        double biggest = beta.cwiseAbs().maxCoeff(&worst);
        if (biggest > options.divergence_cap) {
            throw DivergenceError("coefficient for design column " + std::to_string(worst) +
                                  " exceeded " + std::to_string(options.divergence_cap) +
                                  "; the classes are likely separable");
        }
        if (step.cwiseAbs().maxCoeff() < options.tol) return beta;
    }
    throw StatError("logistic regression did not converge within the iteration limit");
}

GlmmData::GlmmData(std::vector<std::string> factor_names)
    : factor_names_(std::move(factor_names)) {
    if (factor_names_.empty()) throw ConfigError("observation table needs at least one factor column");
    levels_.resize(factor_names_.size());
    codes_.resize(factor_names_.size());
}

void GlmmData::add(bool outcome, const std::vector<std::string>& factor_values) {
    if (factor_values.size() != factor_names_.size()) {
        throw ValidationError("observation has " + std::to_string(factor_values.size()) +
                              " factor values, expected " + std::to_string(factor_names_.size()));
    }
    for (std::size_t f = 0; f < factor_values.size(); ++f) {
        const std::string& v = factor_values[f];
        if (v.empty()) throw ValidationError("empty level in factor '" + factor_names_[f] + "'");
        auto& lv = levels_[f];
        int code = -1;
        for (std::size_t k = 0; k < lv.size(); ++k) {
            if (lv[k] == v) { code = static_cast<int>(k); break; }
        }
        if (code < 0) {
            code = static_cast<int>(lv.size());
            lv.push_back(v);
        }
        codes_[f].push_back(code);
    }
    outcomes_.push_back(outcome ? 1 : 0);
}

int GlmmData::factor_index(const std::string& name) const {
    for (std::size_t f = 0; f < factor_names_.size(); ++f) {
        if (factor_names_[f] == name) return static_cast<int>(f);
    }
    throw ConfigError("unknown factor '" + name + "'");
}

namespace {

// Flattened design; every nonzero entry is 1, so observations are just
// lists of active columns.
struct Design {
    int n = 0;
    int p = 0;  // fixed columns
    int q = 0;  // random columns
    std::vector<std::array<int, 2>> fixed_cols;  // per obs; second may be -1
    std::vector<std::string> fixed_col_labels;
    std::vector<int> rand_factors;   // indices into spec.random_factors
    std::vector<int> rand_offsets;   // column offset past p, per active factor
    std::vector<int> rand_sizes;     // level counts, per active factor
    std::vector<const std::vector<int>*> rand_codes;
};

Design build_design(const GlmmData& data, const GlmmSpec& spec,
                    const std::vector<int>& active_random) {
    Design d;
    d.n = data.n();
    int ff = data.factor_index(spec.fixed_factor);
    const auto& levels = data.levels(ff);
    const auto& codes = data.codes(ff);
    if (levels.size() < 2) {
        throw ValidationError("fixed factor '" + spec.fixed_factor + "' has fewer than 2 levels");
    }

    int ref_idx = -1;
    if (spec.reference_level) {
        for (std::size_t k = 0; k < levels.size(); ++k) {
            if (levels[k] == *spec.reference_level) { ref_idx = static_cast<int>(k); break; }
        }
        if (ref_idx < 0) {
            throw ConfigError("reference level '" + *spec.reference_level +
                              "' not present in factor '" + spec.fixed_factor + "'");
        }
        d.p = static_cast<int>(levels.size());
        d.fixed_col_labels.assign(d.p, "");
        d.fixed_col_labels[0] = levels[ref_idx] + " (intercept)";
        for (int k = 0, col = 1; k < static_cast<int>(levels.size()); ++k) {
            if (k == ref_idx) continue;
            d.fixed_col_labels[col++] = levels[k];
        }
        d.fixed_cols.reserve(d.n);
        for (int i = 0; i < d.n; ++i) {
            int li = codes[i];
            int dummy = (li == ref_idx) ? -1 : 1 + (li < ref_idx ? li : li - 1);
            d.fixed_cols.push_back({0, dummy});
        }
    } else {
        d.p = static_cast<int>(levels.size());
        d.fixed_col_labels = levels;
        d.fixed_cols.reserve(d.n);
        for (int i = 0; i < d.n; ++i) d.fixed_cols.push_back({codes[i], -1});
    }

    int off = 0;
    for (int rf : active_random) {
        int fi = data.factor_index(spec.random_factors[rf]);
        d.rand_factors.push_back(rf);
        d.rand_offsets.push_back(off);
        d.rand_sizes.push_back(static_cast<int>(data.levels(fi).size()));
        d.rand_codes.push_back(&data.codes(fi));
        off += static_cast<int>(data.levels(fi).size());
    }
    d.q = off;
    return d;
}

// Penalized Newton over (beta, u) with a warm-started mode, plus the
// Laplace correction terms evaluated at that mode.
class LaplaceEvaluator {
  public:
    LaplaceEvaluator(const Design& design, const std::vector<unsigned char>& y,
                     const GlmmOptions& options)
        : d_(design), y_(y), opt_(options), theta_(Eigen::VectorXd::Zero(design.p + design.q)) {}

    // sigma2 is indexed like d_.rand_factors
    double objective(const std::vector<double>& sigma2) {
        ++evaluations_;
        solve_mode(sigma2);
        double obj = lpen_;
        if (d_.q > 0) {
            for (std::size_t a = 0; a < sigma2.size(); ++a) {
                obj -= 0.5 * d_.rand_sizes[a] * std::log(sigma2[a]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt(hess_.bottomRightCorner(d_.q, d_.q));
            if (llt.info() != Eigen::Success) {
                throw StatError("random-effect curvature block is not positive definite");
            }
            double logdet = 0.0;
            auto L = llt.matrixLLT();
            for (int j = 0; j < d_.q; ++j) logdet += 2.0 * std::log(L(j, j));
            obj -= 0.5 * logdet;
        }
        return obj;
    }

    const Eigen::VectorXd& theta() const { return theta_; }
    int evaluations() const { return evaluations_; }
    int inner_iterations() const { return inner_iterations_; }
    bool last_converged() const { return last_converged_; }
    const std::vector<double>& trace() const { return trace_; }

  private:
    double penalized_loglik(const Eigen::VectorXd& theta, const std::vector<double>& inv_sigma2) const {
        double ll = 0.0;
        for (int i = 0; i < d_.n; ++i) {
            double eta = theta[d_.fixed_cols[i][0]];
            if (d_.fixed_cols[i][1] >= 0) eta += theta[d_.fixed_cols[i][1]];
            for (std::size_t a = 0; a < d_.rand_codes.size(); ++a) {
                eta += theta[d_.p + d_.rand_offsets[a] + (*d_.rand_codes[a])[i]];
            }
            ll += (y_[i] ? eta : 0.0) - log1pexp(eta);
        }
        for (std::size_t a = 0; a < d_.rand_codes.size(); ++a) {
            int base = d_.p + d_.rand_offsets[a];
            for (int j = 0; j < d_.rand_sizes[a]; ++j) {
                ll -= 0.5 * theta[base + j] * theta[base + j] * inv_sigma2[a];
            }
        }
        return ll;
    }

    void solve_mode(const std::vector<double>& sigma2) {
        const int dim = d_.p + d_.q;
        std::vector<double> inv_sigma2(sigma2.size());
        for (std::size_t a = 0; a < sigma2.size(); ++a) inv_sigma2[a] = 1.0 / sigma2[a];

        Eigen::VectorXd g(dim);
        hess_.resize(dim, dim);
        double lcur = penalized_loglik(theta_, inv_sigma2);
        last_converged_ = false;

        std::vector<int> cols;
        cols.reserve(2 + d_.rand_codes.size());
        for (int iter = 0; iter < opt_.max_inner_iter; ++iter) {
            g.setZero();
            hess_.setZero();
            for (int i = 0; i < d_.n; ++i) {
                cols.clear();
                cols.push_back(d_.fixed_cols[i][0]);
                if (d_.fixed_cols[i][1] >= 0) cols.push_back(d_.fixed_cols[i][1]);
                for (std::size_t a = 0; a < d_.rand_codes.size(); ++a) {
                    cols.push_back(d_.p + d_.rand_offsets[a] + (*d_.rand_codes[a])[i]);
                }
                double eta = 0.0;
                for (int c : cols) eta += theta_[c];
                double mu = sigmoid(eta);
                double wi = mu * (1.0 - mu);
                double resid = (y_[i] ? 1.0 : 0.0) - mu;
                for (int ca : cols) {
                    g[ca] += resid;
                    for (int cb : cols) hess_(ca, cb) += wi;
                }
            }
            for (std::size_t a = 0; a < d_.rand_codes.size(); ++a) {
                int base = d_.p + d_.rand_offsets[a];
                for (int j = 0; j < d_.rand_sizes[a]; ++j) {
                    hess_(base + j, base + j) += inv_sigma2[a];
                    g[base + j] -= theta_[base + j] * inv_sigma2[a];
                }
            }

            Eigen::VectorXd step = hess_.ldlt().solve(g);
            if (!step.allFinite()) throw StatError("singular curvature in mixed-model inner solve");

            double scale = 1.0;
            Eigen::VectorXd cand = theta_ + step;
            double lcand = penalized_loglik(cand, inv_sigma2);
            int halvings = 0;
            while (!(lcand >= lcur - 1e-12) && halvings < 40) {
                scale *= 0.5;
                cand = theta_ + scale * step;
                lcand = penalized_loglik(cand, inv_sigma2);
                ++halvings;
            }
            if (halvings == 40) break;

            theta_ = cand;
            lcur = lcand;
            ++inner_iterations_;
            if (opt_.track_objective) trace_.push_back(lcur);

            for (int j = 0; j < d_.p; ++j) {
                if (std::abs(theta_[j]) > opt_.divergence_cap) {
                    throw DivergenceError("fixed effect '" + d_.fixed_col_labels[j] +
                                          "' diverged; the outcome may be separable on it");
                }
            }
            if ((scale * step).cwiseAbs().maxCoeff() < opt_.inner_tol) {
                last_converged_ = true;
                break;
            }
        }
        lpen_ = lcur;

        // refresh curvature at the accepted mode for the determinant term
        hess_.setZero();
        for (int i = 0; i < d_.n; ++i) {
            cols.clear();
            cols.push_back(d_.fixed_cols[i][0]);
            if (d_.fixed_cols[i][1] >= 0) cols.push_back(d_.fixed_cols[i][1]);
            for (std::size_t a = 0; a < d_.rand_codes.size(); ++a) {
                cols.push_back(d_.p + d_.rand_offsets[a] + (*d_.rand_codes[a])[i]);
            }
            double eta = 0.0;
            for (int c : cols) eta += theta_[c];
            double mu = sigmoid(eta);
            double wi = mu * (1.0 - mu);
            for (int ca : cols) {
                for (int cb : cols) hess_(ca, cb) += wi;
            }
        }
        for (std::size_t a = 0; a < d_.rand_codes.size(); ++a) {
            int base = d_.p + d_.rand_offsets[a];
            for (int j = 0; j < d_.rand_sizes[a]; ++j) hess_(base + j, base + j) += inv_sigma2[a];
        }
    }

    const Design& d_;
    const std::vector<unsigned char>& y_;
    const GlmmOptions& opt_;
    Eigen::VectorXd theta_;
    Eigen::MatrixXd hess_;
    double lpen_ = 0.0;
    int evaluations_ = 0;
    int inner_iterations_ = 0;
    bool last_converged_ = false;
    std::vector<double> trace_;
};

void validate_counts(const GlmmData& data, const std::string& factor) {
    int fi = data.factor_index(factor);
    const auto& levels = data.levels(fi);
    std::vector<int> counts(levels.size(), 0);
    for (int code : data.codes(fi)) ++counts[code];
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (counts[k] < 2) {
            throw ValidationError("factor '" + factor + "' level '" + levels[k] +
                                  "' has fewer than 2 observations");
        }
    }
}

}  // namespace

GlmmFit fit_binomial_glmm(const GlmmData& data, const GlmmSpec& spec) {
    if (data.n() == 0) throw ValidationError("mixed model needs at least one observation");
    const GlmmOptions& opt = spec.options;

    validate_counts(data, spec.fixed_factor);
    for (std::size_t a = 0; a < spec.random_factors.size(); ++a) {
        const std::string& rf = spec.random_factors[a];
        if (rf == spec.fixed_factor) {
            throw ConfigError("factor '" + rf + "' cannot be both fixed and random");
        }
        for (std::size_t b = 0; b < a; ++b) {
            if (spec.random_factors[b] == rf) throw ConfigError("duplicate random factor '" + rf + "'");
        }
        validate_counts(data, rf);
    }
    if (opt.fixed_variances && opt.fixed_variances->size() != spec.random_factors.size()) {
        throw ConfigError("fixed_variances must list one value per random factor");
    }

    std::vector<int> active;
    std::vector<double> sigma2;
    if (opt.fixed_variances) {
        for (std::size_t a = 0; a < spec.random_factors.size(); ++a) {
            double v = (*opt.fixed_variances)[a];
            if (v < 0.0 || v > opt.variance_cap) {
                throw ConfigError("pinned variance for '" + spec.random_factors[a] +
                                  "' is outside [0, " + std::to_string(opt.variance_cap) + "]");
            }
            if (v > opt.variance_floor) {
                active.push_back(static_cast<int>(a));
                sigma2.push_back(v);
            }
        }
    } else {
        for (std::size_t a = 0; a < spec.random_factors.size(); ++a) {
            active.push_back(static_cast<int>(a));
            sigma2.push_back(1.0);
        }
    }

    Design design = build_design(data, spec, active);
    LaplaceEvaluator ev(design, data.outcomes(), opt);

    bool outer_converged = true;
    if (!opt.fixed_variances && !active.empty()) {
        outer_converged = false;
        const double lo = std::log(opt.variance_floor);
        const double hi = std::log(opt.variance_cap);
        const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int cycle = 0; cycle < opt.max_outer_cycles; ++cycle) {
            double max_move = 0.0;
            for (std::size_t a = 0; a < active.size(); ++a) {
                double old_t = std::log(sigma2[a]);
                auto phi = [&](double t) {
                    std::vector<double> trial = sigma2;
                    trial[a] = std::exp(t);
                    return -ev.objective(trial);
                };
                double x1 = lo, x2 = hi;
                double c = x2 - invphi * (x2 - x1);
                double d = x1 + invphi * (x2 - x1);
                double fc = phi(c), fd = phi(d);
                for (int it = 0; it < opt.golden_iters; ++it) {
                    if (fc < fd) {
                        x2 = d; d = c; fd = fc;
                        c = x2 - invphi * (x2 - x1);
                        fc = phi(c);
                    } else {
                        x1 = c; c = d; fc = fd;
                        d = x1 + invphi * (x2 - x1);
                        fd = phi(d);
                    }
                }
                double t_best = 0.5 * (x1 + x2);
                sigma2[a] = std::exp(t_best);
                max_move = std::max(max_move, std::abs(t_best - old_t));
            }
            if (max_move < opt.outer_tol) { outer_converged = true; break; }
        }
    }

    // levels whose variance sat on the floor drop out of the final solve
    std::vector<int> kept;
    std::vector<double> kept_sigma2;
    for (std::size_t a = 0; a < active.size(); ++a) {
        if (sigma2[a] > opt.variance_floor * 1.0000001) {
            kept.push_back(active[a]);
            kept_sigma2.push_back(sigma2[a]);
        }
    }
    Design final_design = build_design(data, spec, kept);
    LaplaceEvaluator final_ev(final_design, data.outcomes(), opt);
    double lla = final_ev.objective(kept_sigma2);

    GlmmFit fit;
    fit.log_likelihood = lla;
    fit.converged = outer_converged && final_ev.last_converged();
    fit.outer_evaluations = ev.evaluations() + final_ev.evaluations();
    fit.inner_iterations = ev.inner_iterations() + final_ev.inner_iterations();
    if (opt.track_objective) {
        fit.objective_trace = ev.trace();
        fit.objective_trace.insert(fit.objective_trace.end(), final_ev.trace().begin(),
                                   final_ev.trace().end());
    }

    const Eigen::VectorXd& theta = final_ev.theta();
    int ff = data.factor_index(spec.fixed_factor);
    const auto& levels = data.levels(ff);
    if (spec.reference_level) {
        int ref_idx = -1;
        for (std::size_t k = 0; k < levels.size(); ++k) {
            if (levels[k] == *spec.reference_level) { ref_idx = static_cast<int>(k); break; }
        }
        for (int k = 0; k < static_cast<int>(levels.size()); ++k) {
            FixedEffect fe;
            fe.level = levels[k];
            if (k == ref_idx) {
                fe.coef = theta[0];
                fe.is_reference = true;
            } else {
                fe.coef = theta[1 + (k < ref_idx ? k : k - 1)];
            }
            fe.odds_ratio = std::exp(fe.coef);
            fit.fixed.push_back(fe);
        }
    } else {
        for (int k = 0; k < static_cast<int>(levels.size()); ++k) {
            FixedEffect fe;
            fe.level = levels[k];
            fe.coef = theta[k];
            fe.odds_ratio = std::exp(fe.coef);
            fit.fixed.push_back(fe);
        }
    }

    for (std::size_t a = 0; a < spec.random_factors.size(); ++a) {
        RandomVariance rv;
        rv.factor = spec.random_factors[a];
        rv.variance = 0.0;
        int fi = data.factor_index(spec.random_factors[a]);
        std::vector<double> u(data.levels(fi).size(), 0.0);
        for (std::size_t ka = 0; ka < kept.size(); ++ka) {
            if (kept[ka] == static_cast<int>(a)) {
                rv.variance = kept_sigma2[ka];
                int base = final_design.p + final_design.rand_offsets[ka];
                for (std::size_t j = 0; j < u.size(); ++j) u[j] = theta[base + static_cast<int>(j)];
                break;
            }
        }
        fit.random_variances.push_back(rv);
        fit.random_effects.push_back(std::move(u));
    }
    return fit;
}

std::vector<OddsRow> odds_ratio_table(const GlmmFit& fit, OrSort sort) {
    std::vector<OddsRow> rows;
    rows.reserve(fit.fixed.size());
    for (const auto& fe : fit.fixed) {
        OddsRow row;
        row.label = fe.level;
        row.coef = fe.coef;
        row.odds_ratio = fe.odds_ratio;
        row.abs_one_minus_or = std::abs(1.0 - fe.odds_ratio);
        row.easier_band = fe.odds_ratio >= 1.0;
        row.is_reference = fe.is_reference;
        rows.push_back(row);
    }
    if (sort == OrSort::AscendingOr) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const OddsRow& a, const OddsRow& b) { return a.odds_ratio < b.odds_ratio; });
    }
    return rows;
}

}  // namespace ssp::glmm
