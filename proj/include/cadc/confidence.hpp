#pragma once

// Frame confidence from codec statistics: a QP term and a bit term,
// combined, then smoothed by an exponential moving average that serves as
// the reference level for threshold modulation.

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "cadc/codec_log.hpp"

namespace cadc {

enum class ScoringVariant { Linear, Sigmoid };
enum class EmaInit { FirstValue, Zero };

struct ScoringConfig {
  double lambda_q = 1.0;
  double lambda_b = 0.5;
  double epsilon = 1e-6;
  double beta = 0.95;
  ScoringVariant variant = ScoringVariant::Linear;
  EmaInit ema_init = EmaInit::FirstValue;
  /// Sigmoid variant only; both must be set when it is selected.
  std::optional<double> tau;
  std::optional<double> rho;
};

/// Throws Error(InvalidConfig / NonPositiveTau) on a violated invariant.
void check(const ScoringConfig& cfg);

/// Per-frame scores in display order.
struct ConfidenceSeries {
  Eigen::VectorXd q_qp;
  Eigen::VectorXd q_bit;
  Eigen::VectorXd q;
  Eigen::VectorXd q_bar;

  Eigen::Index size() const noexcept { return q.size(); }
};

// ---------------------------------------------------------------------------
// Scalar kernels
// ---------------------------------------------------------------------------

/// lambda * (max - value) / (max - min + eps)
template <typename Scalar>
Scalar qp_score(Scalar qp, Scalar qp_min, Scalar qp_max, Scalar lambda, Scalar eps) {
  return lambda * (qp_max - qp) / (qp_max - qp_min + eps);
}

/// lambda * (value - min) / (max - min + eps)
template <typename Scalar>
Scalar bit_score(Scalar bits, Scalar bits_min, Scalar bits_max, Scalar lambda, Scalar eps) {
  return lambda * (bits - bits_min) / (bits_max - bits_min + eps);
}

template <typename Scalar>
Scalar ema_step(Scalar previous, Scalar current, Scalar beta) {
  return beta * previous + (Scalar(1) - beta) * current;
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Unit min-max normalisation without epsilon; 0.5 when the extrema coincide.
template <typename Scalar>
Scalar unit_normalize(Scalar value, Scalar lo, Scalar hi) {
  if (!(hi > lo)) return Scalar(0.5);
  return (value - lo) / (hi - lo);
}

// ---------------------------------------------------------------------------
// Sequence operations
// ---------------------------------------------------------------------------

Eigen::VectorXd qp_values(const FrameLogSeries& series);
Eigen::VectorXd bit_values(const FrameLogSeries& series);

/// Linear QP confidence with sequence-wide extrema. Throws EmptySeries.
Eigen::VectorXd qp_confidence(const FrameLogSeries& series, const ScoringConfig& cfg);

/// Linear bit confidence with sequence-wide extrema. Throws EmptySeries.
Eigen::VectorXd bit_confidence(const FrameLogSeries& series, const ScoringConfig& cfg);

/// Elementwise sum. Throws LengthMismatch.
Eigen::VectorXd combine(const Eigen::Ref<const Eigen::VectorXd>& q_qp,
                        const Eigen::Ref<const Eigen::VectorXd>& q_bit);

/// Recurrence q_bar[t] = beta * q_bar[t-1] + (1 - beta) * q[t] in order.
/// FirstValue starts from q_bar[0] = q[0]; Zero starts from q_bar[-1] = 0.
Eigen::VectorXd ema_smooth(const Eigen::Ref<const Eigen::VectorXd>& q, double beta,
                           EmaInit init = EmaInit::FirstValue);

/// Sigmoid-shaped alternative. Returns the combined score; the individual
/// terms are written to `qp_term` / `bit_term` when non-null.
Eigen::VectorXd sigmoid_score(const FrameLogSeries& series, const ScoringConfig& cfg,
                              Eigen::VectorXd* qp_term = nullptr,
                              Eigen::VectorXd* bit_term = nullptr);

ConfidenceSeries score_sequence(const FrameLogSeries& series, const ScoringConfig& cfg);

/// Online scorer that only knows the frames seen so far. The extrema are
/// running values, so early scores differ from score_sequence; it does not
/// reproduce the sequence-wide normalisation and exists for experimentation.
class StreamingScorer {
 public:
  explicit StreamingScorer(ScoringConfig cfg);

  struct Row {
    double q_qp;
    double q_bit;
    double q;
    double q_bar;
  };

  Row push(const FrameRecord& frame);
  std::size_t frames_seen() const noexcept { return count_; }

 private:
  ScoringConfig cfg_;
  std::size_t count_ = 0;
  double qp_min_ = 0, qp_max_ = 0, bits_min_ = 0, bits_max_ = 0;
  double q_bar_ = 0;
};

/// CSV with header `t,q_qp,q_bit,q,q_bar`.
std::string to_csv(const ConfidenceSeries& conf);

}  // namespace cadc
