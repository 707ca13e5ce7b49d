#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ssp::ens {

struct PenaltyOptions {
    double lambda = 0.1;
    bool ridge = false;    // quadratic penalty instead of the default lasso
    double tol = 1e-7;     // max coordinate move per sweep
    int max_sweeps = 10000;
};

struct LinearModel {
    double intercept = 0.0;
    Eigen::VectorXd weights;
};

// Penalized logistic regression by cyclic coordinate descent with
// soft-thresholding. The intercept is never penalized; lambda == 0
// delegates to the unpenalized Newton solver.
LinearModel penalized_logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const PenaltyOptions& options = {});

double predict_probability(const LinearModel& model, const Eigen::VectorXd& x);

// One stacked row: the per-configuration scores for a (slice, signal) pair.
struct StackedExample {
    std::string group;  // provider group, the leave-out unit
    std::string visit_id;
    int slice_index = 0;
    std::string signal_id;
    std::vector<std::optional<double>> inputs;  // per configuration; nullopt = abstain
    int label = 0;
};

struct FoldReport {
    std::string held_out_group;
    int train_n = 0;
    int test_n = 0;
    double balanced_accuracy = 0.0;
    bool degenerate = false;  // one-class test fold
    bool skipped = false;     // no usable test rows
    LinearModel model;
};

struct TaskSummary {
    std::string signal_id;
    double mean = 0.0;
    double sd = 0.0;  // population, across folds
    int folds = 0;
};

struct EnsembleResult {
    std::vector<std::string> feature_names;
    std::vector<FoldReport> folds;  // sorted by held-out group
    double mean_balanced_accuracy = 0.0;
    double sd_balanced_accuracy = 0.0;
    std::vector<TaskSummary> per_task;
};

// Leave-one-group-out cross-validation of the stacked combiner. Abstained
// inputs impute 0.5; the decision threshold is 0.5.
EnsembleResult evaluate_ensemble(const std::vector<StackedExample>& examples,
                                 const std::vector<std::string>& feature_names,
                                 const PenaltyOptions& options = {});

}  // namespace ssp::ens
