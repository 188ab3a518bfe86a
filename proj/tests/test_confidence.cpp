#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cadc/confidence.hpp"
#include "cadc/error.hpp"
#include "cadc/splat_sim.hpp"

using namespace cadc;

namespace {

FrameLogSeries make_series(const std::vector<double>& qp, const std::vector<double>& bits) {
  FrameLogSeries s;
  for (std::size_t t = 0; t < qp.size(); ++t) {
    FrameRecord r;
    r.display_index = t;
    r.encode_order = t;
    r.frame_type = t == 0 ? FrameType::I : FrameType::B;
    r.qp = qp[t];
    r.bits = bits[t];
    s.records.push_back(r);
  }
  return s;
}

// Reference scoring written from the formulas with plain loops.
struct Oracle {
  static std::vector<double> linear(const std::vector<double>& v, double lambda, double eps, bool invert) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
      lo = x < lo ? x : lo;
      hi = x > hi ? x : hi;
    }
    std::vector<double> out;
    for (double x : v) out.push_back(lambda * (invert ? hi - x : x - lo) / (hi - lo + eps));
    return out;
  }
  static std::vector<double> ema(const std::vector<double>& q, double beta) {
    std::vector<double> out(q.size());
    out[0] = q[0];
    for (std::size_t t = 1; t < q.size(); ++t) out[t] = beta * out[t - 1] + (1 - beta) * q[t];
    return out;
  }
  static double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }
};

ScoringConfig sigmoid_cfg(double tau, double rho) {
  ScoringConfig cfg;
  cfg.variant = ScoringVariant::Sigmoid;
  cfg.tau = tau;
  cfg.rho = rho;
  return cfg;
}

std::vector<double> ranks(const Eigen::VectorXd& v) {
  std::vector<double> r(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double below = 0;
    for (Eigen::Index j = 0; j < v.size(); ++j) below += v[j] < v[i] ? 1 : 0;
    r[static_cast<std::size_t>(i)] = below;
  }
  return r;
}

}  // namespace

TEST_CASE("QP confidence examples") {
  ScoringConfig cfg;
  const auto s = make_series({27, 37, 47}, {1, 1, 1});
  const Eigen::VectorXd q = qp_confidence(s, cfg);
  CHECK(q[1] == doctest::Approx(10.0 / 20.000001).epsilon(1e-15));
  CHECK(q[1] < 0.5);
  CHECK(q[1] > 0.49999997);
  CHECK(q[2] == 0.0);
  CHECK(q[0] == doctest::Approx(20.0 / 20.000001).epsilon(1e-15));

  const Eigen::VectorXd flat = qp_confidence(make_series({33, 33, 33}, {1, 2, 3}), cfg);
  CHECK(flat.isZero(0.0));
}

TEST_CASE("bit confidence examples") {
  ScoringConfig cfg;
  const auto s = make_series({1, 1, 1}, {1000, 3000, 5000});
  const Eigen::VectorXd b = bit_confidence(s, cfg);
  CHECK(b[1] == doctest::Approx(0.5 * 2000.0 / 4000.000001).epsilon(1e-15));
  CHECK(b[1] < 0.25);
  CHECK(b[1] > 0.2499999);
  CHECK(b[0] == 0.0);
  cfg.lambda_b = 0.0;
  CHECK(bit_confidence(s, cfg).isZero(0.0));
}

TEST_CASE("combine") {
  Eigen::VectorXd a(1), b(1);
  a << 0.5;
  b << 0.25;
  CHECK(combine(a, b)[0] == 0.75);
  CHECK(combine(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)).isZero(0.0));
  CHECK_THROWS_AS(combine(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), Error);

  ScoringConfig cfg;
  const auto s = make_series({27, 37, 47}, {5000, 3000, 1000});
  const auto qq = Oracle::linear({27, 37, 47}, 1.0, 1e-6, true);
  const auto qb = Oracle::linear({5000, 3000, 1000}, 0.5, 1e-6, false);
  const Eigen::VectorXd q = combine(qp_confidence(s, cfg), bit_confidence(s, cfg));
  for (int t = 0; t < 3; ++t) CHECK(q[t] == doctest::Approx(qq[t] + qb[t]).epsilon(1e-14));
}

TEST_CASE("EMA examples") {
  Eigen::VectorXd c = Eigen::VectorXd::Constant(6, 0.37);
  CHECK(ema_smooth(c, 0.95) == c);
  CHECK(ema_smooth(c, 0.5, EmaInit::FirstValue) == c);

  Eigen::VectorXd q(2);
  q << 1.0, 0.0;
  const Eigen::VectorXd s = ema_smooth(q, 0.95);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == doctest::Approx(0.95).epsilon(1e-15));

  const Eigen::VectorXd z = ema_smooth(q, 0.95, EmaInit::Zero);
  CHECK(z[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(0.0475).epsilon(1e-14));

  CHECK_THROWS_AS(ema_smooth(Eigen::VectorXd(), 0.9), Error);
  CHECK_THROWS_AS(ema_smooth(q, 1.0), Error);
}

TEST_CASE("larger beta responds more slowly") {
  Eigen::VectorXd q(10);
  q << 0.2, 1.4, 0.1, 0.0, 0.9, 1.5, 0.3, 0.3, 0.05, 1.2;
  const double lag_slow = (ema_smooth(q, 0.99) - q).cwiseAbs().maxCoeff();
  const double lag_fast = (ema_smooth(q, 0.9) - q).cwiseAbs().maxCoeff();
  CHECK(lag_slow > lag_fast);
}

TEST_CASE("EMA stays between the previous average and the new value") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd q(20);
    for (auto& v : q) v = u(rng);
    const double beta = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    const Eigen::VectorXd s = ema_smooth(q, beta);
    for (Eigen::Index t = 1; t < q.size(); ++t) {
      CHECK(s[t] >= std::min(s[t - 1], q[t]));
      CHECK(s[t] <= std::max(s[t - 1], q[t]));
      CHECK(s[t] >= q.head(t + 1).minCoeff());
      CHECK(s[t] <= q.head(t + 1).maxCoeff());
    }
  }
}

TEST_CASE("sigmoid variant examples") {
  const auto s = make_series({27, 37, 47}, {1, 2, 3});
  Eigen::VectorXd qt, bt;
  sigmoid_score(s, sigmoid_cfg(0.2, 1.0), &qt, &bt);
  CHECK(qt[1] == 0.5);
  CHECK(bt[1] == 0.25);

  // Normalised QP of the middle frame: 1 - (26 - 10) / 40 = 0.6 = 0.5 + tau.
  const auto s2 = make_series({10, 26, 50}, {1, 2, 3});
  sigmoid_score(s2, sigmoid_cfg(0.1, 1.0), &qt, &bt);
  CHECK(qt[1] == doctest::Approx(0.7310585786300049).epsilon(1e-12));

  const Eigen::VectorXd flat = sigmoid_score(s2, sigmoid_cfg(1e9, 0.4), &qt, &bt);
  CHECK(qt.isApproxToConstant(0.5, 1e-8));
  CHECK(bt.isApproxToConstant(0.5 * 0.5 * 0.4, 1e-8));
  (void)flat;

  // Coincident extrema normalise to the midpoint.
  sigmoid_score(make_series({30, 30}, {5, 5}), sigmoid_cfg(0.3, 1.0), &qt, &bt);
  CHECK(qt[0] == 0.5);
  CHECK(bt[1] == 0.25);
}

TEST_CASE("sigmoid terms are bounded and monotone") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> qp(20, 50), bits(100, 1e5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> q(12), b(12);
    for (auto& v : q) v = qp(rng);
    for (auto& v : b) v = bits(rng);
    Eigen::VectorXd qt, bt;
    const auto cfg = sigmoid_cfg(0.25, 0.8);
    sigmoid_score(make_series(q, b), cfg, &qt, &bt);
    for (int t = 0; t < 12; ++t) {
      CHECK(qt[t] > 0.0);
      CHECK(qt[t] < cfg.lambda_q);
      CHECK(bt[t] > 0.0);
      CHECK(bt[t] < cfg.lambda_b * 0.8);
      for (int u = 0; u < 12; ++u) {
        if (q[t] < q[u]) CHECK(qt[t] >= qt[u]);
        if (b[t] > b[u]) CHECK(bt[t] >= bt[u]);
      }
    }
  }
}

TEST_CASE("sigmoid configuration errors") {
  const auto s = make_series({27, 37}, {1, 2});
  ScoringConfig cfg = sigmoid_cfg(0.0, 1.0);
  try {
    score_sequence(s, cfg);
    FAIL("expected NonPositiveTau");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositiveTau);
  }
  cfg.tau.reset();
  CHECK_THROWS_AS(score_sequence(s, cfg), Error);
  cfg = sigmoid_cfg(0.2, 1.0);
  cfg.rho.reset();
  CHECK_THROWS_AS(score_sequence(s, cfg), Error);
  CHECK_THROWS_AS(score_sequence(FrameLogSeries{}, ScoringConfig{}), Error);
}

TEST_CASE("single frame scores zero") {
  const auto c = score_sequence(make_series({32}, {4000}), ScoringConfig{});
  CHECK(c.q_qp[0] == 0.0);
  CHECK(c.q_bit[0] == 0.0);
  CHECK(c.q[0] == 0.0);
  CHECK(c.q_bar[0] == 0.0);
}

TEST_CASE("GOP-32 sawtooth log peaks on I-frames") {
  const auto qp = sawtooth_qp_schedule(96, 32, 27, 37, 10);
  std::vector<double> bits;
  for (std::size_t t = 0; t < qp.size(); ++t) bits.push_back(200000.0 * std::exp2(-(qp[t] - 27) / 6.0));
  const auto c = score_sequence(make_series(qp, bits), ScoringConfig{});

  const auto qq = Oracle::linear(qp, 1.0, 1e-6, true);
  const auto qb = Oracle::linear(bits, 0.5, 1e-6, false);
  for (std::size_t gop = 0; gop < 3; ++gop) {
    std::size_t best = gop * 32;
    for (std::size_t t = gop * 32; t < gop * 32 + 32; ++t) {
      if (qq[t] + qb[t] > qq[best] + qb[best]) best = t;
    }
    CHECK(best == gop * 32);
    Eigen::Index argmax;
    c.q.segment(static_cast<Eigen::Index>(gop * 32), 32).maxCoeff(&argmax);
    CHECK(argmax == 0);
  }
}

TEST_CASE("linear scores match the reference on random series") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> qp(0, 63), bits(1, 1e6), lam(0, 2), beta(0.01, 0.99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> q(n), b(n);
    for (auto& v : q) v = qp(rng);
    for (auto& v : b) v = bits(rng);
    ScoringConfig cfg;
    cfg.lambda_q = lam(rng);
    cfg.lambda_b = lam(rng);
    cfg.beta = beta(rng);
    const auto c = score_sequence(make_series(q, b), cfg);
    const auto qq = Oracle::linear(q, cfg.lambda_q, cfg.epsilon, true);
    const auto qb = Oracle::linear(b, cfg.lambda_b, cfg.epsilon, false);
    std::vector<double> sum(n);
    for (std::size_t t = 0; t < n; ++t) sum[t] = qq[t] + qb[t];
    const auto bar = Oracle::ema(sum, cfg.beta);
    for (std::size_t t = 0; t < n; ++t) {
      const auto i = static_cast<Eigen::Index>(t);
      CHECK(c.q_qp[i] == doctest::Approx(qq[t]).epsilon(1e-12));
      CHECK(c.q_bit[i] == doctest::Approx(qb[t]).epsilon(1e-12));
      CHECK(c.q_bar[i] == doctest::Approx(bar[t]).epsilon(1e-12));
      CHECK(c.q[i] >= 0.0);
      CHECK(c.q[i] <= cfg.lambda_q + cfg.lambda_b);
    }
  }
}

TEST_CASE("lowering a frame's QP or raising its bits never lowers its score") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> qp(20, 50), bits(100, 1e5), step(0.01, 10);
  for (const auto& cfg : {ScoringConfig{}, sigmoid_cfg(0.3, 0.7)}) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> q(8), b(8);
      for (auto& v : q) v = qp(rng);
      for (auto& v : b) v = bits(rng);
      const auto t = static_cast<Eigen::Index>(rng() % 8);
      const auto before = score_sequence(make_series(q, b), cfg);
      auto q2 = q;
      q2[static_cast<std::size_t>(t)] -= step(rng);
      CHECK(score_sequence(make_series(q2, b), cfg).q_qp[t] >= before.q_qp[t]);
      auto b2 = b;
      b2[static_cast<std::size_t>(t)] += 100 * step(rng);
      CHECK(score_sequence(make_series(q, b2), cfg).q_bit[t] >= before.q_bit[t]);
    }
  }
}

TEST_CASE("QP score is shift invariant and bit ranking is scale invariant") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> qp(20, 40), bits(100, 1e5), shift(-15, 15), scale(0.01, 100);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> q(10), b(10);
    for (auto& v : q) v = qp(rng);
    for (auto& v : b) v = bits(rng);
    const double c = shift(rng), k = scale(rng);
    std::vector<double> qs = q, bs = b;
    for (auto& v : qs) v += c;
    for (auto& v : bs) v *= k;
    const auto a = score_sequence(make_series(q, b), ScoringConfig{});
    const auto s = score_sequence(make_series(qs, bs), ScoringConfig{});
    CHECK((a.q_qp - s.q_qp).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ranks(a.q_bit) == ranks(s.q_bit));
  }
}

TEST_CASE("sigmoid variant preserves the ranking of comonotone inputs") {
  // Frames whose QP order and bit order agree, so both terms rank alike.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> level(10);
    for (auto& v : level) v = u(rng);
    std::vector<double> q, b;
    for (double v : level) {
      q.push_back(47 - 20 * v);
      b.push_back(1000 + 1e5 * v * v);
    }
    const auto lin = score_sequence(make_series(q, b), ScoringConfig{});
    const auto sig = score_sequence(make_series(q, b), sigmoid_cfg(0.2, 1.0));
    CHECK(ranks(lin.q) == ranks(sig.q));
  }
}

TEST_CASE("scoring is a pure function of its inputs") {
  const auto s = make_series({27, 40, 33, 47}, {9000, 1000, 4000, 800});
  CHECK(to_csv(score_sequence(s, ScoringConfig{})) == to_csv(score_sequence(s, ScoringConfig{})));
  CHECK(to_csv(score_sequence(s, ScoringConfig{})).rfind("t,q_qp,q_bit,q,q_bar\n0,", 0) == 0);
}

TEST_CASE("streaming scorer uses running extrema") {
  const auto s = make_series({37, 27, 47}, {1000, 5000, 500});
  StreamingScorer scorer(ScoringConfig{});
  const auto r0 = scorer.push(s.records[0]);
  CHECK(r0.q == 0.0);
  CHECK(r0.q_bar == 0.0);
  const auto r1 = scorer.push(s.records[1]);
  CHECK(r1.q_qp == doctest::Approx(10.0 / 10.000001).epsilon(1e-15));
  CHECK(r1.q_bar == doctest::Approx(0.05 * r1.q).epsilon(1e-14));
  const auto r2 = scorer.push(s.records[2]);
  const auto batch = score_sequence(s, ScoringConfig{});
  CHECK(r2.q == doctest::Approx(batch.q[2]).epsilon(1e-14));  // last frame sees every extreme
  CHECK(scorer.frames_seen() == 3);
}
