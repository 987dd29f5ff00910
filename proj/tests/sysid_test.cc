#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "invctl/error.h"
#include "invctl/sysid.h"

using namespace invctl;

namespace {

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

PendulumParams noisy_target() {
  PendulumParams p;
  p.sigma_theta = 0.05;
  p.sigma_omega = 0.1;
  return p;
}

// Four state cells and two action cells, for hand-made chains.
GridSpec two_cell_grid() {
  GridSpec g;
  g.theta = {-1.0, 1.0, 2, false};
  g.omega = {-1.0, 1.0, 2, false};
  g.action = {-1.0, 1.0, 2, false};
  return g;
}

}  // namespace

TEST(EstimateTransition, SingleRecordIsPointMass) {
  const GridSpec g = two_cell_grid();
  Dataset d;
  d.records.push_back({0, 1, {-0.5, -0.5}, -0.5, {0.5, 0.5}});
  TransitionEstimateOptions opts;
  opts.alpha = 0.0;
  const auto est = estimate_transition_pmf(d, g, opts);
  const std::size_t x = encode_state(-0.5, -0.5, g);
  const std::size_t xn = encode_state(0.5, 0.5, g);
  EXPECT_EQ(est.table.row(x, 0)[xn], 1.0);
  EXPECT_EQ(est.seen[x * 2 + 0], 1);
  EXPECT_EQ(est.unseen_rows(), g.num_states() * g.num_actions() - 1);
  // Unseen rows fall back to uniform when no analytic model is configured.
  EXPECT_DOUBLE_EQ(est.table.row(xn, 1)[0], 0.25);
}

TEST(EstimateTransition, LargeAlphaTendsToUniform) {
  const GridSpec g = two_cell_grid();
  Dataset d;
  d.records.push_back({0, 1, {-0.5, -0.5}, -0.5, {0.5, 0.5}});
  TransitionEstimateOptions opts;
  opts.alpha = 1e9;
  const auto est = estimate_transition_pmf(d, g, opts);
  for (double p : est.table.row(encode_state(-0.5, -0.5, g), 0)) EXPECT_NEAR(p, 0.25, 1e-9);
}

TEST(EstimateTransition, SmoothedHistogramFormula) {
  const GridSpec g = two_cell_grid();
  Dataset d;
  d.records.push_back({0, 1, {-0.5, -0.5}, -0.5, {0.5, 0.5}});
  d.records.push_back({1, 1, {-0.5, -0.5}, -0.5, {0.5, 0.5}});
  d.records.push_back({2, 1, {-0.5, -0.5}, -0.5, {-0.5, 0.5}});
  TransitionEstimateOptions opts;
  opts.alpha = 0.5;
  const auto est = estimate_transition_pmf(d, g, opts);
  const auto row = est.table.row(encode_state(-0.5, -0.5, g), 0);
  // (count + alpha) / (total + alpha * |X|) with total 3, |X| = 4.
  EXPECT_DOUBLE_EQ(row[encode_state(0.5, 0.5, g)], 2.5 / 5.0);
  EXPECT_DOUBLE_EQ(row[encode_state(-0.5, 0.5, g)], 1.5 / 5.0);
  EXPECT_DOUBLE_EQ(row[encode_state(0.5, -0.5, g)], 0.5 / 5.0);
}

TEST(EstimateTransition, TwoStateChainLawOfLargeNumbers) {
  const GridSpec g = two_cell_grid();
  const PendulumState a{-0.5, -0.5}, b{0.5, -0.5};
  std::mt19937_64 rng(99);
  std::bernoulli_distribution stay(0.7);
  Dataset d;
  PendulumState x = a;
  for (int k = 1; k <= 10000; ++k) {
    const PendulumState next = stay(rng) ? x : (x.theta < 0 ? b : a);
    d.records.push_back({0, k, x, -0.5, next});
    x = next;
  }
  TransitionEstimateOptions opts;
  opts.alpha = 0.0;
  const auto t = estimate_transition_pmf(d, g, opts).table;
  const auto ca = encode_state(a.theta, a.omega, g), cb = encode_state(b.theta, b.omega, g);
  EXPECT_NEAR(t.row(ca, 0)[ca], 0.7, 0.02);
  EXPECT_NEAR(t.row(ca, 0)[cb], 0.3, 0.02);
  EXPECT_NEAR(t.row(cb, 0)[cb], 0.7, 0.02);
}

TEST(EstimateTransition, InvariantToRecordOrder) {
  const GridSpec g = GridSpec::pendulum_default();
  Dataset d = collect_random_dataset(noisy_target(), 5, 40, 17);
  TransitionEstimateOptions opts;
  const auto t1 = estimate_transition_pmf(d, g, opts).table;
  std::mt19937_64 rng(1);
  std::shuffle(d.records.begin(), d.records.end(), rng);
  const auto t2 = estimate_transition_pmf(d, g, opts).table;
  EXPECT_TRUE(std::equal(t1.data().begin(), t1.data().end(), t2.data().begin()));
}

TEST(EstimateTransition, NoFallbackIsInsufficientData) {
  TransitionEstimateOptions opts;
  opts.uniform_fallback = false;
  try {
    estimate_transition_pmf(Dataset{}, two_cell_grid(), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
  opts.alpha = -1.0;
  EXPECT_THROW(estimate_transition_pmf(Dataset{}, two_cell_grid(), opts), Error);
}

TEST(EstimateTransition, AnalyticFallbackFillsUnseenRows) {
  const GridSpec g = GridSpec::pendulum_default();
  TransitionEstimateOptions opts;
  opts.analytic_fallback = noisy_target();
  const auto est = estimate_transition_pmf(Dataset{}, g, opts);
  std::vector<double> row(g.num_states());
  discretize_row(noisy_target(), g, 100, 3, row);
  const auto got = est.table.row(100, 3);
  EXPECT_TRUE(std::equal(row.begin(), row.end(), got.begin()));
}

TEST(DiscretizeDynamics, ZeroNoiseIsPointMassOnSuccessor) {
  const GridSpec g = GridSpec::pendulum_default();
  const PendulumParams p;  // zero noise
  const auto t = discretize_dynamics(p, g);
  for (std::size_t x = 0; x < g.num_states(); x += 37) {
    for (std::size_t u = 0; u < g.num_actions(); u += 4) {
      const auto c = decode_state(x, g);
      const auto next = step({c.theta, c.omega}, decode_action(u, g), {}, p);
      EXPECT_EQ(t.row(x, u)[encode_state(next.theta, next.omega, g)], 1.0);
    }
  }
}

TEST(DiscretizeDynamics, EquilibriumRowIsModalAtOrigin) {
  const GridSpec g = GridSpec::pendulum_default();
  const auto origin = encode_state(0.0, 0.0, g);
  const auto zero_u = encode_action(0.0, g);
  for (double scale : {0.05, 0.2, 1.0}) {
    PendulumParams p;
    p.sigma_theta = scale;
    p.sigma_omega = 2 * scale;
    std::vector<double> row(g.num_states());
    discretize_row(p, g, origin, zero_u, row);
    EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(),
              static_cast<std::ptrdiff_t>(origin));
  }
}

TEST(DiscretizeDynamics, NoiseRaisesEntropy) {
  const GridSpec g = GridSpec::pendulum_default();
  const auto noisy = discretize_dynamics(noisy_target(), g);
  const auto exact = discretize_dynamics(PendulumParams{}, g);
  for (std::size_t x = 0; x < g.num_states(); x += 53) {
    for (std::size_t u = 0; u < g.num_actions(); u += 5) {
      EXPECT_GT(entropy(noisy.row(x, u)), entropy(exact.row(x, u)));
    }
  }
}

TEST(DiscretizeDynamics, RowsConserveMassIncludingFolding) {
  const GridSpec g = GridSpec::pendulum_default();
  PendulumParams p;
  p.sigma_theta = 2.0;  // wraps several times around the circle
  p.sigma_omega = 3.0;  // pushes a lot of mass into the omega edge bins
  const auto t = discretize_dynamics(p, g);
  for (std::size_t x = 0; x < g.num_states(); ++x) {
    for (std::size_t u = 0; u < g.num_actions(); ++u) {
      const auto row = t.row(x, u);
      double total = 0.0;
      for (double v : row) {
        ASSERT_GT(v, 0.0);
        total += v;
      }
      ASSERT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(DiscretizeDynamics, RejectsBadParameters) {
  PendulumParams p;
  p.mass = 0.0;
  EXPECT_THROW(discretize_dynamics(p, GridSpec::pendulum_default()), Error);
  p = PendulumParams{};
  p.sigma_theta = -1.0;
  EXPECT_THROW(discretize_dynamics(p, GridSpec::pendulum_default()), Error);
}

TEST(GaussianBinMasses, WrappedMassMatchesDirectImageSum) {
  // Oracle: integrate the wrapped density numerically with Simpson's rule.
  const AxisSpec axis{-M_PI, M_PI, 31, true};
  const double mean = 3.0, sigma = 0.7;
  const auto mass = gaussian_bin_masses(axis, mean, sigma);
  for (std::size_t b = 0; b < mass.size(); b += 5) {
    const double lo = axis.lower_edge(b), hi = lo + axis.width();
    const int n = 400;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double t = lo + (hi - lo) * i / n;
      double dens = 0.0;
      for (int k = -10; k <= 10; ++k) {
        const double z = (t + 2 * M_PI * k - mean) / sigma;
        dens += std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * M_PI));
      }
      integral += dens * ((i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2));
    }
    integral *= (hi - lo) / n / 3.0;
    EXPECT_NEAR(mass[b], integral, 1e-10);
  }
}

TEST(ReferencePolicy, SymmetricAboutMiddleBin) {
  const GridSpec g = GridSpec::pendulum_default();
  const std::vector<double> means(g.num_states(), 0.0);
  const auto pol = estimate_reference_policy(means, 0.2, g);
  const auto row = pol.row(0);
  for (std::size_t i = 0; i < row.size(); ++i) {
    EXPECT_NEAR(row[i], row[row.size() - 1 - i], 1e-15);
  }
  EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(), 10);
}

TEST(ReferencePolicy, EdgeBinAbsorbsTail) {
  const GridSpec g = GridSpec::pendulum_default();
  const std::vector<double> means(g.num_states(), 2.4);
  const auto row = estimate_reference_policy(means, 0.2, g).row(0);
  // Upper bin starts at 2.5 - 5/21; it holds P(Z > (2.5 - 5/21 - 2.4)/0.2).
  const double lo = 2.5 - 5.0 / 21.0;
  const double expected = 0.5 * std::erfc((lo - 2.4) / 0.2 / std::sqrt(2.0));
  EXPECT_NEAR(row[20], expected, 1e-12);
  double total = 0.0;
  for (double v : row) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ReferencePolicy, SmallSigmaApproachesPointMass) {
  const GridSpec g = GridSpec::pendulum_default();
  const std::vector<double> means(g.num_states(), 1.0);
  const auto row = estimate_reference_policy(means, 1e-6, g).row(7);
  EXPECT_NEAR(row[encode_action(1.0, g)], 1.0, 1e-12);
  EXPECT_THROW(estimate_reference_policy(means, 0.0, g), Error);
}

TEST(Dataset, RandomCollectionShape) {
  const auto d = collect_random_dataset(noisy_target(), 3, 7, 5);
  ASSERT_EQ(d.records.size(), 21u);
  EXPECT_EQ(d.records[0].step, 1);
  EXPECT_EQ(d.records[6].step, 7);
  EXPECT_EQ(d.records[7].episode, 1);
  EXPECT_NO_THROW(validate_dataset(d));
  for (const auto& r : d.records) {
    EXPECT_LE(std::abs(r.u), 2.5);
    EXPECT_LE(std::abs(r.x_next.omega), 5.0);
  }
}

TEST(Dataset, JsonLinesRoundTrip) {
  const auto d = collect_random_dataset(noisy_target(), 2, 5, 8);
  std::stringstream ss;
  write_dataset_jsonl(d, ss);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, 14), "{\"ep\":0,\"k\":1,");
  const auto back = read_dataset_jsonl(ss);
  ASSERT_EQ(back.records.size(), d.records.size());
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    EXPECT_EQ(back.records[i].x.theta, d.records[i].x.theta);
    EXPECT_EQ(back.records[i].x_next.omega, d.records[i].x_next.omega);
    EXPECT_EQ(back.records[i].u, d.records[i].u);
  }
}

TEST(Dataset, ParseErrorNamesTheLine) {
  std::stringstream ss("{\"ep\":0,\"k\":1,\"x\":[0,0],\"u\":0,\"xn\":[0,0]}\n{\"ep\":0,\n");
  try {
    read_dataset_jsonl(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Dataset, ContinuityViolationRejected) {
  Dataset d;
  d.records.push_back({0, 1, {0.0, 0.0}, 0.0, {0.1, 0.0}});
  d.records.push_back({0, 2, {0.2, 0.0}, 0.0, {0.3, 0.0}});
  EXPECT_THROW(validate_dataset(d), Error);
  d.records[1].episode = 1;
  EXPECT_NO_THROW(validate_dataset(d));
}
