// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force reference implementations used to cross-check the library.
// Everything here is written with explicit scalar loops and plain vectors,
// deliberately sharing no code with the graph-based forward passes it
// verifies. Slow is fine; independent is the point.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "stagescore/tensor.hpp"

namespace oracle {

using stagescore::Tensor;
using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

inline Tensor to_tensor(const Mat& m) {
    Tensor t({static_cast<int>(m.size()), static_cast<int>(m.front().size())});
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[i].size(); ++j)
            t.at(static_cast<int>(i), static_cast<int>(j)) = m[i][j];
    return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat out(a.size(), std::vector<double>(b.front().size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b.front().size(); ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
}

inline double leaky(double x, double slope) { return x >= 0.0 ? x : slope * x; }
inline double elu(double x) { return x >= 0.0 ? x : std::exp(x) - 1.0; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Row-wise softmax; entries where masked[i][j] is true become exactly 0.
inline Mat softmax_rows(const Mat& logits, const std::vector<std::vector<bool>>& masked) {
    Mat out(logits.size(), std::vector<double>(logits.front().size(), 0.0));
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double hi = -1e300;
        for (std::size_t j = 0; j < logits[i].size(); ++j)
            if (!masked[i][j]) hi = std::max(hi, logits[i][j]);
        double z = 0.0;
        for (std::size_t j = 0; j < logits[i].size(); ++j)
            if (!masked[i][j]) z += std::exp(logits[i][j] - hi);
        for (std::size_t j = 0; j < logits[i].size(); ++j)
            if (!masked[i][j]) out[i][j] = std::exp(logits[i][j] - hi) / z;
    }
    return out;
}

inline Mat softmax_rows(const Mat& logits) {
    return softmax_rows(logits, std::vector<std::vector<bool>>(
                                    logits.size(),
                                    std::vector<bool>(logits.front().size(), false)));
}

// Graph-attention coefficients over the four stream nodes: logit(i, j) is
// the attention vector dotted with the leaky-rectified sum of the source
// transform of node i and the target transform of node j.
inline Mat gat_attention(const Mat& nodes, const Mat& theta_s, const Mat& theta_t,
                         const std::vector<double>& a, double slope) {
    const std::size_t n = nodes.size();
    const std::size_t h_dim = a.size();
    Mat src = matmul(nodes, theta_s);
    Mat dst = matmul(nodes, theta_t);
    Mat logits(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t h = 0; h < h_dim; ++h)
                logits[i][j] += a[h] * leaky(src[i][h] + dst[j][h], slope);
    return softmax_rows(logits);
}

inline Mat gat_layer(const Mat& nodes, const Mat& theta, const Mat& theta_s, const Mat& theta_t,
                     const std::vector<double>& a, double slope) {
    Mat alpha = gat_attention(nodes, theta_s, theta_t, a, slope);
    Mat transformed = matmul(nodes, theta);
    Mat out = matmul(alpha, transformed);
    for (auto& row : out)
        for (double& v : row) v = elu(v);
    return out;
}

struct GatLayerWeights {
    Mat theta, theta_s, theta_t;
    std::vector<double> a;
};

struct DeconfoundOut {
    Mat query, exemplar;      // T rows each
    Mat attention_summary;    // 4 x 4 mean of first-layer attention
};

// Whole two-layer intervention, one snippet at a time: refine, re-attend
// with the second layer's weights, add the lambda-scaled residual, read the
// two fused rows.
inline DeconfoundOut deconfound(const Mat& qo, const Mat& qf, const Mat& eo, const Mat& ef,
                                const GatLayerWeights& l1, const GatLayerWeights& l2,
                                double lambda, double slope) {
    const std::size_t T = qo.size();
    DeconfoundOut out;
    out.attention_summary.assign(4, std::vector<double>(4, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        Mat nodes = {qo[t], qf[t], eo[t], ef[t]};
        Mat alpha1 = gat_attention(nodes, l1.theta_s, l1.theta_t, l1.a, slope);
        Mat f1 = matmul(alpha1, matmul(nodes, l1.theta));
        for (auto& row : f1)
            for (double& v : row) v = elu(v);

        Mat f2 = gat_layer(f1, l2.theta, l2.theta_s, l2.theta_t, l2.a, slope);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t d = 0; d < f1[i].size(); ++d) f2[i][d] += lambda * f1[i][d];

        out.query.push_back(f2[1]);
        out.exemplar.push_back(f2[3]);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                out.attention_summary[i][j] += alpha1[i][j] / static_cast<double>(T);
    }
    return out;
}

inline Mat pool_stages(const Mat& features, int t1, int t2) {
    const int T = static_cast<int>(features.size());
    const int D = static_cast<int>(features.front().size());
    Mat stages(3, std::vector<double>(D, 0.0));
    const std::array<std::pair<int, int>, 3> spans = {{{0, t1}, {t1, t2}, {t2, T}}};
    for (int s = 0; s < 3; ++s) {
        for (int t = spans[s].first; t < spans[s].second; ++t)
            for (int d = 0; d < D; ++d) stages[s][d] += features[t][d];
        for (int d = 0; d < D; ++d) stages[s][d] /= spans[s].second - spans[s].first;
    }
    return stages;
}

inline std::vector<double> layer_norm_row(const std::vector<double>& x,
                                          const std::vector<double>& gain,
                                          const std::vector<double>& bias, double eps = 1e-5) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (x[i] - mean) / std::sqrt(var + eps) * gain[i] + bias[i];
    return out;
}

// Stage-attention matrix of one head: scaled dot-product logits with future
// positions masked out.
inline Mat tca_scores(const Mat& stages, const Mat& wq, const Mat& wk, int d_h) {
    Mat q = matmul(stages, wq);
    Mat k = matmul(stages, wk);
    const std::size_t n = stages.size();
    Mat logits(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<bool>> masked(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t h = 0; h < q.front().size(); ++h) logits[i][j] += q[i][h] * k[j][h];
            logits[i][j] /= std::sqrt(static_cast<double>(d_h));
            masked[i][j] = j > i;
        }
    }
    return softmax_rows(logits, masked);
}

struct TcaHeadWeights {
    Mat wq, wk, wv;
};

inline Mat tca_forward(const Mat& stages, const std::vector<TcaHeadWeights>& heads, const Mat& wo,
                       const std::vector<double>& gain, const std::vector<double>& bias,
                       int d_h) {
    Mat concat(stages.size());
    for (const TcaHeadWeights& h : heads) {
        Mat a = tca_scores(stages, h.wq, h.wk, d_h);
        Mat head_out = matmul(a, matmul(stages, h.wv));
        for (std::size_t i = 0; i < stages.size(); ++i)
            concat[i].insert(concat[i].end(), head_out[i].begin(), head_out[i].end());
    }
    Mat projected = matmul(concat, wo);
    Mat out;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        std::vector<double> row(stages[i].size());
        for (std::size_t d = 0; d < row.size(); ++d) row[d] = stages[i][d] + projected[i][d];
        out.push_back(layer_norm_row(row, gain, bias));
    }
    return out;
}

inline double clamp_prob(double p) { return std::min(std::max(p, 1e-7), 1.0 - 1e-7); }

inline double focal(const Mat& logits, const Mat& targets, double alpha, double gamma) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        for (std::size_t j = 0; j < logits[i].size(); ++j) {
            const double p = sigmoid(logits[i][j]);
            const double t = targets[i][j];
            const double p_t = clamp_prob(t * p + (1.0 - t) * (1.0 - p));
            const double a_t = t == 1.0 ? alpha : 1.0 - alpha;
            total += -a_t * std::pow(1.0 - p_t, gamma) * std::log(p_t);
            ++n;
        }
    }
    return total / static_cast<double>(n);
}

inline double bce(const Mat& probs, const Mat& targets) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        for (std::size_t j = 0; j < probs[i].size(); ++j) {
            const double p = clamp_prob(probs[i][j]);
            const double t = targets[i][j];
            total += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
            ++n;
        }
    }
    return total / static_cast<double>(n);
}

inline double mse(const std::vector<double>& pred, const std::vector<double>& target) {
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        total += (pred[i] - target[i]) * (pred[i] - target[i]);
    return total / static_cast<double>(pred.size());
}

inline double uncertainty_total(const std::array<double, 3>& l, const std::array<double, 3>& s) {
    double total = 0.0;
    for (int i = 0; i < 3; ++i) total += std::exp(-s[i]) * l[i] + s[i];
    return total;
}

// Average rank of each value: one plus the count of strictly smaller values,
// plus half the count of equal ones (ties share the mean of their positions).
inline std::vector<double> ranks(const std::vector<double>& values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        int smaller = 0, equal = 0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (values[j] < values[i]) ++smaller;
            if (values[j] == values[i]) ++equal;
        }
        out[i] = 1.0 + smaller + (equal - 1) / 2.0;
    }
    return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(ranks(a), ranks(b));
}

inline double relative_l2(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    double lo = y_true.front(), hi = y_true.front();
    for (double v : y_true) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = (y_true[i] - y_pred[i]) / (hi - lo);
        total += e * e;
    }
    return 100.0 * total / static_cast<double>(y_true.size());
}

// Linear map plus optional sigmoid, the reference for both prediction heads.
inline Mat linear(const Mat& x, const Mat& w, const std::vector<double>& b, bool squash) {
    Mat out = matmul(x, w);
    for (auto& row : out)
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] += b[j];
            if (squash) row[j] = sigmoid(row[j]);
        }
    return out;
}

// Two-layer regression head over weighted stage differences.
inline double regress_delta(const Mat& sq, const Mat& se, const std::array<double, 3>& weights,
                            const Mat& w1, const std::vector<double>& b1, const Mat& w2,
                            const std::vector<double>& b2) {
    std::vector<double> flat;
    for (int s = 0; s < 3; ++s)
        for (std::size_t d = 0; d < sq[s].size(); ++d)
            flat.push_back(weights[s] * (sq[s][d] - se[s][d]));
    Mat hidden = matmul({flat}, w1);
    for (std::size_t j = 0; j < hidden[0].size(); ++j) hidden[0][j] = elu(hidden[0][j] + b1[j]);
    double delta = b2[0];
    for (std::size_t j = 0; j < hidden[0].size(); ++j) delta += hidden[0][j] * w2[j][0];
    return delta;
}

inline double max_abs_diff(const Mat& a, const Tensor& b) {
    double worst = 0.0;
    for (int i = 0; i < b.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j)
            worst = std::max(worst, std::abs(a[i][j] - b.at(i, j)));
    return worst;
}

}  // namespace oracle
