#include "netside/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "netside/errors.hpp"
#include "netside/rng.hpp"

namespace netside {

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    if (a.size() != b.size()) throw UsageError("kernel operands have different dimensions");
    double d2 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

std::vector<std::vector<double>> gram_matrix(const std::vector<std::vector<double>>& x,
                                             double gamma) {
    size_t n = x.size();
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i) {
        k[i][i] = 1.0;
        for (size_t j = i + 1; j < n; ++j) {
            double v = rbf_kernel(x[i], x[j], gamma);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    return k;
}

SvmModel train_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                   const SvmParams& params) {
    size_t n = x.size();
    if (n != y.size()) throw UsageError("svm: sample/label count mismatch");
    if (n < 2) throw InsufficientDataError("svm: need at least 2 training samples");
    if (params.C <= 0.0 || params.gamma < 0.0 || params.tolerance <= 0.0)
        throw UsageError("svm: C and tolerance must be positive, gamma non-negative");

    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == +1) has_pos = true;
        else if (v == -1) has_neg = true;
        else throw UsageError("svm: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg)
        throw InsufficientDataError("svm: training set contains a single class");
    for (const auto& row : x)
        if (row.size() != x.front().size())
            throw UsageError("svm: inconsistent feature dimensions");

    std::vector<std::vector<double>> k = gram_matrix(x, params.gamma);

    // Dual: maximize sum(a) - 1/2 a' (yy' o K) a  s.t.  0 <= a <= C, y'a = 0.
    // grad[i] holds d/da_i of the negated (minimization) objective: (Qa)_i - 1.
    const double C = params.C;
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    std::vector<double> yd(n);
    for (size_t i = 0; i < n; ++i) yd[i] = static_cast<double>(y[i]);

    long iter = 0;
    bool converged = false;
    double m_up = 0, m_low = 0;
    while (iter < params.max_iter) {
        // maximal violating pair: i from the "can increase along y" set with the
        // largest -y*grad, j from the "can decrease" set with the smallest
        m_up = -std::numeric_limits<double>::infinity();
        m_low = std::numeric_limits<double>::infinity();
        long i = -1, j = -1;
        for (size_t t = 0; t < n; ++t) {
            double v = -yd[t] * grad[t];
            bool in_up = yd[t] > 0 ? alpha[t] < C : alpha[t] > 0;
            bool in_low = yd[t] > 0 ? alpha[t] > 0 : alpha[t] < C;
            if (in_up && v > m_up) {
                m_up = v;
                i = static_cast<long>(t);
            }
            if (in_low && v < m_low) {
                m_low = v;
                j = static_cast<long>(t);
            }
        }
        if (i < 0 || j < 0 || m_up - m_low <= params.tolerance) {
            converged = true;
            break;
        }

        // optimal unclipped step along (+y_i e_i, -y_j e_j)
        double quad = k[i][i] + k[j][j] - 2.0 * k[i][j];
        if (quad < 1e-12) quad = 1e-12;
        double d = (m_up - m_low) / quad;

        // box limits for both coordinates
        double d_max_i = yd[i] > 0 ? C - alpha[i] : alpha[i];
        double d_max_j = yd[j] > 0 ? alpha[j] : C - alpha[j];
        d = std::min(d, std::min(d_max_i, d_max_j));

        alpha[i] += yd[i] * d;
        alpha[j] -= yd[j] * d;
        // keep the iterate exactly inside the box against rounding drift
        alpha[i] = std::clamp(alpha[i], 0.0, C);
        alpha[j] = std::clamp(alpha[j], 0.0, C);

        const std::vector<double>& ki = k[i];
        const std::vector<double>& kj = k[j];
        for (size_t t = 0; t < n; ++t) grad[t] += yd[t] * d * (ki[t] - kj[t]);
        ++iter;
    }
    if (!converged)
        throw NumericalError("svm: no convergence after " + std::to_string(iter) +
                             " iterations (pair violation " +
                             std::to_string(m_up - m_low) + ")");

    // bias: average -y*grad over free support vectors, else midpoint of the
    // violating-pair bounds
    double b = 0.0;
    long free_count = 0;
    const double edge = 1e-8 * C;
    for (size_t t = 0; t < n; ++t) {
        if (alpha[t] > edge && alpha[t] < C - edge) {
            b += -yd[t] * grad[t];
            ++free_count;
        }
    }
    b = free_count > 0 ? b / static_cast<double>(free_count) : 0.5 * (m_up + m_low);

    SvmModel model;
    model.params = params;
    model.bias = b;
    model.iterations = iter;
    for (size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            model.support_vectors.push_back(x[t]);
            model.alphas_signed.push_back(alpha[t] * yd[t]);
        }
    }
    return model;
}

double SvmModel::decision_value(std::span<const double> x) const {
    double v = bias;
    for (size_t i = 0; i < support_vectors.size(); ++i)
        v += alphas_signed[i] * rbf_kernel(support_vectors[i], x, params.gamma);
    return v;
}

int SvmModel::predict(std::span<const double> x) const {
    return decision_value(x) >= 0.0 ? +1 : -1;
}

const std::string& SvmModel::predict_label(std::span<const double> x) const {
    return predict(x) > 0 ? label_pos : label_neg;
}

double dual_objective(const SvmModel& model) {
    double sum_alpha = 0.0;
    for (double a : model.alphas_signed) sum_alpha += std::fabs(a);
    double quad = 0.0;
    size_t n = model.support_vectors.size();
    for (size_t i = 0; i < n; ++i) {
        quad += model.alphas_signed[i] * model.alphas_signed[i];
        for (size_t j = i + 1; j < n; ++j)
            quad += 2.0 * model.alphas_signed[i] * model.alphas_signed[j] *
                    rbf_kernel(model.support_vectors[i], model.support_vectors[j],
                               model.params.gamma);
    }
    return sum_alpha - 0.5 * quad;
}

namespace {

// stratified fold ids per sample: each class is shuffled and dealt into k folds
std::vector<int> stratified_folds(std::span<const int> labels, int k, uint64_t seed) {
    std::vector<size_t> pos, neg;
    for (size_t i = 0; i < labels.size(); ++i)
        (labels[i] > 0 ? pos : neg).push_back(i);
    if (pos.size() < static_cast<size_t>(k) || neg.size() < static_cast<size_t>(k))
        throw InsufficientDataError("cross_validate: a class has fewer samples than folds");
    std::vector<int> fold(labels.size(), 0);
    Rng rng_pos(mix_seed(seed, 0x706f73));
    Rng rng_neg(mix_seed(seed, 0x6e6567));
    rng_pos.shuffle(pos);
    rng_neg.shuffle(neg);
    for (size_t i = 0; i < pos.size(); ++i) fold[pos[i]] = static_cast<int>(i % k);
    for (size_t i = 0; i < neg.size(); ++i) fold[neg[i]] = static_cast<int>(i % k);
    return fold;
}

} // namespace

double cross_validate(std::span<const Frame> frames, std::span<const int> labels, int k,
                      const SvmParams& params, const TransformSpec& transform, uint64_t seed) {
    if (frames.size() != labels.size())
        throw UsageError("cross_validate: frame/label count mismatch");
    if (k < 2) throw UsageError("cross_validate: need k >= 2 folds");
    std::vector<int> fold = stratified_folds(labels, k, seed);

    double ccr_sum = 0.0;
    for (int f = 0; f < k; ++f) {
        std::vector<Frame> train_frames;
        std::vector<int> train_y;
        std::vector<size_t> test_idx;
        for (size_t i = 0; i < frames.size(); ++i) {
            if (fold[i] == f) {
                test_idx.push_back(i);
            } else {
                train_frames.push_back(frames[i]);
                train_y.push_back(labels[i]);
            }
        }
        FeaturePipeline pipeline(transform, train_frames);
        std::vector<std::vector<double>> train_x;
        train_x.reserve(train_frames.size());
        for (const Frame& fr : train_frames) train_x.push_back(pipeline(fr).values);
        SvmModel model = train_svm(train_x, train_y, params);

        long correct = 0;
        for (size_t i : test_idx)
            if (model.predict(pipeline(frames[i]).values) == labels[i]) ++correct;
        ccr_sum += static_cast<double>(correct) / static_cast<double>(test_idx.size());
    }
    return ccr_sum / static_cast<double>(k);
}

void save_model_json(const SvmModel& model, const std::string& path) {
    nlohmann::json j;
    j["params"] = {{"C", model.params.C},
                   {"gamma", model.params.gamma},
                   {"tolerance", model.params.tolerance},
                   {"max_iter", model.params.max_iter}};
    j["bias"] = model.bias;
    j["label_map"] = {{"pos", model.label_pos}, {"neg", model.label_neg}};
    j["support_vectors"] = model.support_vectors;
    j["alphas_signed"] = model.alphas_signed;
    j["iterations"] = model.iterations;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

SvmModel load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("bad model file '" + path + "': " + e.what());
    }
    SvmModel model;
    try {
        model.params.C = j.at("params").at("C").get<double>();
        model.params.gamma = j.at("params").at("gamma").get<double>();
        model.params.tolerance = j.at("params").at("tolerance").get<double>();
        model.params.max_iter = j.at("params").at("max_iter").get<long>();
        model.bias = j.at("bias").get<double>();
        model.label_pos = j.at("label_map").at("pos").get<std::string>();
        model.label_neg = j.at("label_map").at("neg").get<std::string>();
        model.support_vectors = j.at("support_vectors").get<std::vector<std::vector<double>>>();
        model.alphas_signed = j.at("alphas_signed").get<std::vector<double>>();
        model.iterations = j.value("iterations", 0L);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("bad model file '" + path + "': " + e.what());
    }
    if (model.support_vectors.size() != model.alphas_signed.size())
        throw SchemaError("bad model file '" + path + "': alpha/vector count mismatch");
    return model;
}

} // namespace netside
