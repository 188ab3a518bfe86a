#include "cadc/confidence.hpp"

#include <algorithm>
#include <sstream>

#include "cadc/error.hpp"
#include "cadc/format.hpp"

namespace cadc {

void check(const ScoringConfig& cfg) {
  if (!(cfg.lambda_q >= 0.0) || !(cfg.lambda_b >= 0.0)) {
    throw Error(Errc::InvalidConfig, "lambda_q and lambda_b must be non-negative");
  }
  if (!(cfg.epsilon > 0.0)) throw Error(Errc::InvalidConfig, "epsilon must be positive");
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) {
    throw Error(Errc::InvalidConfig, "beta must lie in (0, 1)");
  }
  if (cfg.variant == ScoringVariant::Sigmoid) {
    if (!cfg.tau || !(*cfg.tau > 0.0)) {
      throw Error(Errc::NonPositiveTau, "sigmoid scoring requires tau > 0");
    }
    if (!cfg.rho || !(*cfg.rho >= 0.0)) {
      throw Error(Errc::InvalidConfig, "sigmoid scoring requires rho >= 0");
    }
  }
}

Eigen::VectorXd qp_values(const FrameLogSeries& series) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(series.size()));
  for (std::size_t t = 0; t < series.size(); ++t) v[static_cast<Eigen::Index>(t)] = series.records[t].qp;
  return v;
}

Eigen::VectorXd bit_values(const FrameLogSeries& series) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(series.size()));
  for (std::size_t t = 0; t < series.size(); ++t) v[static_cast<Eigen::Index>(t)] = series.records[t].bits;
  return v;
}

namespace {

void require_frames(const FrameLogSeries& series) {
  if (series.empty()) throw Error(Errc::EmptySeries, "frame log series is empty");
}

}  // namespace

Eigen::VectorXd qp_confidence(const FrameLogSeries& series, const ScoringConfig& cfg) {
  require_frames(series);
  const Eigen::VectorXd qp = qp_values(series);
  const double lo = qp.minCoeff();
  const double hi = qp.maxCoeff();
  return qp.unaryExpr([&](double v) { return qp_score(v, lo, hi, cfg.lambda_q, cfg.epsilon); });
}

Eigen::VectorXd bit_confidence(const FrameLogSeries& series, const ScoringConfig& cfg) {
  require_frames(series);
  const Eigen::VectorXd bits = bit_values(series);
  const double lo = bits.minCoeff();
  const double hi = bits.maxCoeff();
  return bits.unaryExpr([&](double v) { return bit_score(v, lo, hi, cfg.lambda_b, cfg.epsilon); });
}

Eigen::VectorXd combine(const Eigen::Ref<const Eigen::VectorXd>& q_qp,
                        const Eigen::Ref<const Eigen::VectorXd>& q_bit) {
  if (q_qp.size() != q_bit.size()) {
    throw Error(Errc::LengthMismatch, "cannot combine " + std::to_string(q_qp.size()) +
                                          " QP scores with " + std::to_string(q_bit.size()) +
                                          " bit scores");
  }
  return q_qp + q_bit;
}

Eigen::VectorXd ema_smooth(const Eigen::Ref<const Eigen::VectorXd>& q, double beta, EmaInit init) {
  if (q.size() == 0) throw Error(Errc::EmptySeries, "cannot smooth an empty series");
  if (!(beta > 0.0 && beta < 1.0)) throw Error(Errc::InvalidConfig, "beta must lie in (0, 1)");
  Eigen::VectorXd out(q.size());
  // FirstValue assigns q_bar[0] = q[0] directly; the blend would round.
  const bool seeded = init == EmaInit::FirstValue;
  double prev = seeded ? q[0] : ema_step(0.0, q[0], beta);
  out[0] = prev;
  for (Eigen::Index t = 1; t < q.size(); ++t) {
    prev = ema_step(prev, q[t], beta);
    out[t] = prev;
  }
  return out;
}

Eigen::VectorXd sigmoid_score(const FrameLogSeries& series, const ScoringConfig& cfg,
                              Eigen::VectorXd* qp_term, Eigen::VectorXd* bit_term) {
  require_frames(series);
  if (!cfg.tau || !(*cfg.tau > 0.0)) {
    throw Error(Errc::NonPositiveTau, "sigmoid scoring requires tau > 0");
  }
  const double tau = *cfg.tau;
  const double rho = cfg.rho.value_or(0.0);
  const Eigen::VectorXd qp = qp_values(series);
  const Eigen::VectorXd bits = bit_values(series);
  const double qp_lo = qp.minCoeff(), qp_hi = qp.maxCoeff();
  const double b_lo = bits.minCoeff(), b_hi = bits.maxCoeff();

  // Lower QP maps towards 1, more bits map towards 1.
  const Eigen::VectorXd qt = qp.unaryExpr([&](double v) {
    const double unit = 1.0 - unit_normalize(v, qp_lo, qp_hi);
    return cfg.lambda_q * logistic((unit - 0.5) / tau);
  });
  const Eigen::VectorXd bt = bits.unaryExpr([&](double v) {
    return cfg.lambda_b * rho * logistic((unit_normalize(v, b_lo, b_hi) - 0.5) / tau);
  });
  if (qp_term) *qp_term = qt;
  if (bit_term) *bit_term = bt;
  return qt + bt;
}

ConfidenceSeries score_sequence(const FrameLogSeries& series, const ScoringConfig& cfg) {
  check(cfg);
  require_frames(series);
  ConfidenceSeries out;
  if (cfg.variant == ScoringVariant::Linear) {
    out.q_qp = qp_confidence(series, cfg);
    out.q_bit = bit_confidence(series, cfg);
    out.q = combine(out.q_qp, out.q_bit);
  } else {
    out.q = sigmoid_score(series, cfg, &out.q_qp, &out.q_bit);
  }
  out.q_bar = ema_smooth(out.q, cfg.beta, cfg.ema_init);
  return out;
}

// ---------------------------------------------------------------------------
// Streaming
// ---------------------------------------------------------------------------

StreamingScorer::StreamingScorer(ScoringConfig cfg) : cfg_(cfg) { check(cfg_); }

StreamingScorer::Row StreamingScorer::push(const FrameRecord& frame) {
  if (count_ == 0) {
    qp_min_ = qp_max_ = frame.qp;
    bits_min_ = bits_max_ = frame.bits;
  } else {
    qp_min_ = std::min(qp_min_, frame.qp);
    qp_max_ = std::max(qp_max_, frame.qp);
    bits_min_ = std::min(bits_min_, frame.bits);
    bits_max_ = std::max(bits_max_, frame.bits);
  }
  Row row{};
  if (cfg_.variant == ScoringVariant::Linear) {
    row.q_qp = qp_score(frame.qp, qp_min_, qp_max_, cfg_.lambda_q, cfg_.epsilon);
    row.q_bit = bit_score(frame.bits, bits_min_, bits_max_, cfg_.lambda_b, cfg_.epsilon);
  } else {
    const double tau = *cfg_.tau;
    row.q_qp = cfg_.lambda_q * logistic((0.5 - unit_normalize(frame.qp, qp_min_, qp_max_)) / tau);
    row.q_bit = cfg_.lambda_b * *cfg_.rho *
                logistic((unit_normalize(frame.bits, bits_min_, bits_max_) - 0.5) / tau);
  }
  row.q = row.q_qp + row.q_bit;
  if (count_ == 0) {
    q_bar_ = cfg_.ema_init == EmaInit::FirstValue ? row.q : ema_step(0.0, row.q, cfg_.beta);
  } else {
    q_bar_ = ema_step(q_bar_, row.q, cfg_.beta);
  }
  row.q_bar = q_bar_;
  ++count_;
  return row;
}

std::string to_csv(const ConfidenceSeries& conf) {
  std::ostringstream os;
  os << "t,q_qp,q_bit,q,q_bar\n";
  for (Eigen::Index t = 0; t < conf.size(); ++t) {
    os << t << ',' << format_double(conf.q_qp[t]) << ',' << format_double(conf.q_bit[t]) << ','
       << format_double(conf.q[t]) << ',' << format_double(conf.q_bar[t]) << '\n';
  }
  return os.str();
}

}  // namespace cadc
