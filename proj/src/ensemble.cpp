#include "sspeval/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "sspeval/errors.hpp"
#include "sspeval/metrics.hpp"
#include "sspeval/mixedglm.hpp"
#include "sspeval/util.hpp"

namespace ssp::ens {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

}  // namespace

LinearModel penalized_logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const PenaltyOptions& options) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n == 0) throw StatError("penalized fit needs at least one observation");
    if (y.size() != n) throw StatError("penalized fit: outcome length does not match design rows");
    if (options.lambda < 0.0) throw ConfigError("penalty strength must be nonnegative");

    if (options.lambda == 0.0) {
        Eigen::MatrixXd full(n, p + 1);
        full.col(0).setOnes();
        full.rightCols(p) = X;
        Eigen::VectorXd beta = glmm::logistic_irls(full, y);
        LinearModel m;
        m.intercept = beta[0];
        m.weights = beta.tail(p);
        return m;
    }

    LinearModel m;
    m.intercept = 0.0;
    m.weights = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    const double inv_n = 1.0 / static_cast<double>(n);

    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
        double max_move = 0.0;

        double g0 = 0.0, h0 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double mu = sigmoid(eta[i]);
            g0 += (mu - y[i]) * inv_n;
            h0 += mu * (1.0 - mu) * inv_n;
        }
        h0 = std::max(h0, 1e-10);
        double new_b = std::clamp(m.intercept - g0 / h0, -30.0, 30.0);
        double db = new_b - m.intercept;
        if (db != 0.0) {
            m.intercept = new_b;
            eta.array() += db;
            max_move = std::max(max_move, std::abs(db));
        }

        for (Eigen::Index j = 0; j < p; ++j) {
            double g = 0.0, h = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                double xij = X(i, j);
                if (xij == 0.0) continue;
                double mu = sigmoid(eta[i]);
                g += (mu - y[i]) * xij * inv_n;
                h += mu * (1.0 - mu) * xij * xij * inv_n;
            }
            h = std::max(h, 1e-10);
            double wj = m.weights[j];
            double next;
            if (options.ridge) {
                next = wj - (g + options.lambda * wj) / (h + options.lambda);
            } else {
                next = soft_threshold(wj - g / h, options.lambda / h);
            }
            double dw = next - wj;
            if (dw != 0.0) {
                m.weights[j] = next;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (X(i, j) != 0.0) eta[i] += dw * X(i, j);
                }
                max_move = std::max(max_move, std::abs(dw));
            }
        }

        if (max_move < options.tol) break;
    }
    return m;
}

double predict_probability(const LinearModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.weights.size()) {
        throw StatError("feature vector length does not match model weights");
    }
    return sigmoid(model.intercept + model.weights.dot(x));
}

EnsembleResult evaluate_ensemble(const std::vector<StackedExample>& examples,
                                 const std::vector<std::string>& feature_names,
                                 const PenaltyOptions& options) {
    if (examples.empty()) throw ValidationError("no stacked examples to evaluate");
    const std::size_t k = feature_names.size();
    if (k == 0) throw ValidationError("ensemble needs at least one input configuration");
    for (const auto& ex : examples) {
        if (ex.inputs.size() != k) {
            throw ValidationError("stacked row for " + ex.visit_id + "/" +
                                  std::to_string(ex.slice_index) + "/" + ex.signal_id +
                                  " has " + std::to_string(ex.inputs.size()) +
                                  " inputs, expected " + std::to_string(k));
        }
        if (ex.label != 0 && ex.label != 1) {
            throw ValidationError("stacked row label must be 0 or 1");
        }
    }

    std::set<std::string> group_set;
    for (const auto& ex : examples) group_set.insert(ex.group);
    if (group_set.size() < 2) {
        throw ValidationError("leave-one-group-out needs at least 2 provider groups");
    }
    std::vector<std::string> groups(group_set.begin(), group_set.end());

    auto feature_row = [&](const StackedExample& ex) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < k; ++j) {
            x[static_cast<Eigen::Index>(j)] = ex.inputs[j].value_or(0.5);
        }
        return x;
    };

    EnsembleResult result;
    result.feature_names = feature_names;

    std::map<std::string, std::vector<double>> task_fold_ba;
    std::vector<double> fold_bas;

    for (const auto& held : groups) {
        std::vector<const StackedExample*> train, test;
        for (const auto& ex : examples) {
            (ex.group == held ? test : train).push_back(&ex);
        }

        FoldReport fold;
        fold.held_out_group = held;
        fold.train_n = static_cast<int>(train.size());
        fold.test_n = static_cast<int>(test.size());
        if (test.empty() || train.empty()) {
            fold.skipped = true;
            result.folds.push_back(std::move(fold));
            continue;
        }

        Eigen::MatrixXd X(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(k));
        Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
        for (std::size_t i = 0; i < train.size(); ++i) {
            X.row(static_cast<Eigen::Index>(i)) = feature_row(*train[i]).transpose();
            y[static_cast<Eigen::Index>(i)] = train[i]->label;
        }
        fold.model = penalized_logistic_fit(X, y, options);

        metrics::Confusion pooled;
        std::map<std::string, metrics::Confusion> by_task;
        for (const auto* ex : test) {
            double prob = predict_probability(fold.model, feature_row(*ex));
            int predicted = prob >= 0.5 ? 1 : 0;
            pooled.add(predicted, ex->label);
            by_task[ex->signal_id].add(predicted, ex->label);
        }
        auto ba = metrics::balanced_accuracy(pooled);
        fold.balanced_accuracy = ba.value;
        fold.degenerate = ba.degenerate;
        fold_bas.push_back(ba.value);
        for (const auto& [task, confusion] : by_task) {
            task_fold_ba[task].push_back(metrics::balanced_accuracy(confusion).value);
        }
        result.folds.push_back(std::move(fold));
    }

    if (fold_bas.empty()) throw ValidationError("every fold was skipped; nothing to aggregate");
    auto overall = util::mean_population_sd(fold_bas);
    result.mean_balanced_accuracy = overall.mean;
    result.sd_balanced_accuracy = overall.sd;
    for (const auto& [task, values] : task_fold_ba) {
        auto ms = util::mean_population_sd(values);
        TaskSummary ts;
        ts.signal_id = task;
        ts.mean = ms.mean;
        ts.sd = ms.sd;
        ts.folds = static_cast<int>(values.size());
        result.per_task.push_back(ts);
    }
    return result;
}

}  // namespace ssp::ens
