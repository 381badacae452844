#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netside/features.hpp"
#include "netside/trace.hpp"

namespace netside {

struct SvmParams {
    double C = 256.0;
    double gamma = 9.54e-7;   // RBF width; tuned for raw byte-scale features, sweepable
    double tolerance = 1e-4;  // KKT violation threshold for convergence
    long max_iter = 2'000'000;
};

// Trained soft-margin RBF classifier. alphas_signed[i] = alpha_i * y_i, so the
// decision value is sum_i alphas_signed[i] * K(sv_i, x) + bias.
struct SvmModel {
    SvmParams params;
    double bias = 0.0;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> alphas_signed;
    std::string label_pos;  // url bound to +1
    std::string label_neg;  // url bound to -1
    long iterations = 0;

    double decision_value(std::span<const double> x) const;
    // +1 / -1; a decision value of exactly 0 goes to +1
    int predict(std::span<const double> x) const;
    const std::string& predict_label(std::span<const double> x) const;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

std::vector<std::vector<double>> gram_matrix(const std::vector<std::vector<double>>& x,
                                             double gamma);

// Two-variable SMO ascent on the dual with maximal-violating-pair selection.
// y entries must be +1/-1 with both classes present. Throws NumericalError if
// the pair tolerance is not reached within max_iter updates.
SvmModel train_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                   const SvmParams& params);

// dual objective value sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij of a
// trained model (non-support vectors contribute nothing)
double dual_objective(const SvmModel& model);

// Stratified k-fold cross validation over labeled frames; the transform (and,
// for tf_cosine, its vocabulary) is fitted on each training split. Returns the
// mean correct-classification rate across folds. Throws InsufficientDataError
// if either class has fewer than k frames.
double cross_validate(std::span<const Frame> frames, std::span<const int> labels, int k,
                      const SvmParams& params, const TransformSpec& transform, uint64_t seed);

void save_model_json(const SvmModel& model, const std::string& path);
SvmModel load_model_json(const std::string& path);

} // namespace netside
