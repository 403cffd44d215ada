// Symmetric Multi-Similarity training objective.
//
// Pair weights come from the soft relevance matrix as w_ij = R_ii - R_ij:
// positive weight means the diagonal (annotated) pair is more relevant than
// candidate j and must beat it by a relevance-scaled margin; negative weight
// means candidate j is *more* relevant and must score higher; weights inside
// the deadband are neutral pairs held near score parity. The loss is made
// symmetric by averaging the row-direction term with the same term applied
// to the transposed matrices.
//
// Subgradient convention at every kink: 0. This keeps the analytic gradient
// deterministic and lets finite-difference checks exclude kink neighborhoods.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tempret/errors.hpp"
#include "tempret/matrix.hpp"

namespace tempret {

struct SmsConfig {
    double margin = 0.2;    // m
    double tau = 0.1;       // neutral-pair threshold
    double epsilon = 0.01;  // weight deadband

    void validate() const {
        if (margin <= 0.0) throw ConfigError("SmsConfig: margin must be > 0");
        if (tau < 0.0) throw ConfigError("SmsConfig: tau must be >= 0");
        if (epsilon < 0.0) throw ConfigError("SmsConfig: epsilon must be >= 0");
    }
};

/// w_ij = R_ii - R_ij (so the diagonal weight is exactly 0).
inline Matrix weights_from_relevance(const RelevanceMatrix& r) {
    if (r.rows() != r.cols()) {
        throw DimensionError("weights_from_relevance: relevance matrix must be square");
    }
    Matrix w(r.rows(), r.cols());
    for (std::size_t i = 0; i < r.rows(); ++i) {
        const double diag = r(i, i);
        for (std::size_t j = 0; j < r.cols(); ++j) w(i, j) = diag - r(i, j);
    }
    return w;
}

/// Three-case piecewise pair loss; delta = s_ii - s_ij.
inline double sms_pair_loss(double w, double delta, const SmsConfig& cfg) {
    const double g = w * cfg.margin - delta;
    if (w > cfg.epsilon) {
        return g > 0.0 ? g : 0.0;
    }
    if (w < -cfg.epsilon) {
        return -g > 0.0 ? -g : 0.0;
    }
    const double a = std::fabs(g) - cfg.tau;
    return a > 0.0 ? a : 0.0;
}

/// d(sms_pair_loss)/d(delta); 0 at every kink.
inline double sms_pair_loss_ddelta(double w, double delta, const SmsConfig& cfg) {
    const double g = w * cfg.margin - delta;
    if (w > cfg.epsilon) {
        return g > 0.0 ? -1.0 : 0.0;
    }
    if (w < -cfg.epsilon) {
        return -g > 0.0 ? 1.0 : 0.0;
    }
    if (std::fabs(g) - cfg.tau <= 0.0 || g == 0.0) return 0.0;
    return g > 0.0 ? -1.0 : 1.0;
}

namespace detail {

/// Row-direction term: mean pair loss over all off-diagonal (i, j) with
/// delta_ij = s_ii - s_ij.
inline double sms_loss_one_direction(const Matrix& s, const RelevanceMatrix& r,
                                     const SmsConfig& cfg) {
    const std::size_t n = s.rows();
    if (n < 2) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sii = s(i, i);
        const double rii = r(i, i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            total += sms_pair_loss(rii - r(i, j), sii - s(i, j), cfg);
        }
    }
    return total / static_cast<double>(n * (n - 1));
}

/// Gradient of the row-direction term w.r.t. s.
inline Matrix sms_grad_one_direction(const Matrix& s, const RelevanceMatrix& r,
                                     const SmsConfig& cfg) {
    const std::size_t n = s.rows();
    Matrix g(n, n);
    if (n < 2) return g;
    const double norm = 1.0 / static_cast<double>(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        const double sii = s(i, i);
        const double rii = r(i, i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dd = sms_pair_loss_ddelta(rii - r(i, j), sii - s(i, j), cfg) * norm;
            if (dd == 0.0) continue;
            g(i, i) += dd;   // d(delta)/d(s_ii) = +1
            g(i, j) -= dd;   // d(delta)/d(s_ij) = -1
        }
    }
    return g;
}

inline void require_square_aligned(const Matrix& s, const Matrix& r, const char* op) {
    if (s.rows() != s.cols()) {
        throw DimensionError(std::string(op) + ": score matrix must be square, got " +
                             shape_string(s));
    }
    if (!s.same_shape(r)) {
        throw DimensionError(std::string(op) + ": score and relevance shapes differ");
    }
}

} // namespace detail

/// Batch loss, averaged over the text->video and video->text directions.
inline double sms_loss(const ScoreMatrix& s, const RelevanceMatrix& r, const SmsConfig& cfg) {
    detail::require_square_aligned(s, r, "sms_loss");
    const double forward = detail::sms_loss_one_direction(s, r, cfg);
    const double backward = detail::sms_loss_one_direction(transpose(s), transpose(r), cfg);
    return 0.5 * (forward + backward);
}

/// Analytic d(sms_loss)/dS.
inline Matrix sms_loss_grad(const ScoreMatrix& s, const RelevanceMatrix& r,
                            const SmsConfig& cfg) {
    detail::require_square_aligned(s, r, "sms_loss_grad");
    Matrix g = detail::sms_grad_one_direction(s, r, cfg);
    Matrix gt = transpose(detail::sms_grad_one_direction(transpose(s), transpose(r), cfg));
    add_in_place(g, gt);
    return scale(g, 0.5);
}

// ---------------------------------------------------------------------------
// optimizer and schedule
// ---------------------------------------------------------------------------

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// One decoupled-weight-decay Adam update on a single tensor. `step` is the
/// 1-based step count used for bias correction; `lr` already includes any
/// per-group multiplier.
inline void adamw_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                         std::size_t step, double lr, const AdamWConfig& cfg) {
    require_same_shape(param, grad, "adamw_update");
    require_same_shape(param, m, "adamw_update (m)");
    require_same_shape(param, v, "adamw_update (v)");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data()[i];
        double& mi = m.data()[i];
        double& vi = v.data()[i];
        mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * g;
        vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * g * g;
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        double& p = param.data()[i];
        p -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p);
    }
}

/// Cosine decay from `base` to 0 over `total` steps; steps past the end
/// clamp to the final value.
inline double cosine_lr(std::size_t step, std::size_t total, double base) {
    if (total == 0) throw ConfigError("cosine_lr: total must be >= 1");
    if (step > total) step = total;
    const double frac = static_cast<double>(step) / static_cast<double>(total);
    return base * 0.5 * (1.0 + std::cos(3.141592653589793 * frac));
}

} // namespace tempret
