// Copyright 2026 The zomem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zomem/zo_core.h"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>

#include "zomem/error.h"

namespace zomem {
namespace {

ParameterVector make_theta(const std::vector<double>& values) {
  ParameterVector theta;
  theta.add_segment("w", values.size());
  std::copy(values.begin(), values.end(), theta.values().begin());
  return theta;
}

ParameterVector random_lattice_theta(std::size_t n, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  ParameterVector theta;
  theta.add_segment("a", n / 2);
  theta.add_segment("b", n - n / 2);
  for (double& v : theta.values()) {
    v = snap_to_lattice(normal(rng));
  }
  return theta;
}

double sum_squares(const ParameterVector& theta) {
  double s = 0.0;
  for (double v : theta.values()) {
    s += v * v;
  }
  return s;
}

TEST(LatticeTest, SnapIsIdempotentAndBounded) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    const double s = snap_to_lattice(x);
    EXPECT_EQ(snap_to_lattice(s), s);
    EXPECT_LE(std::abs(s - x), kLatticeSpacing / 2);
  }
  ParameterVector big = make_theta({300.0});
  EXPECT_FALSE(on_lattice(big));
  ParameterVector off = make_theta({0.1});
  EXPECT_FALSE(on_lattice(off));
  ParameterVector ok = make_theta({0.5, -0.25, 256.0});
  EXPECT_TRUE(on_lattice(ok));
}

TEST(ZOConfigTest, Validation) {
  ZOConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.epsilon = 0.0;
  EXPECT_THROW(validate(cfg), Error);
  cfg.epsilon = kMaxEpsilon * 2;
  EXPECT_THROW(validate(cfg), Error);
  cfg = ZOConfig{};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(validate(cfg), Error);
  cfg = ZOConfig{};
  cfg.num_perturbations = 0;
  EXPECT_THROW(validate(cfg), Error);
}

TEST(SpsaTest, QuadraticIsExactUpToDisplacementRounding) {
  const LossFn loss = [](const ParameterVector& t) { return sum_squares(t); };
  for (double eps : {1e-6, 1e-3, 0.5, 4.0}) {
    for (std::uint64_t s = 0; s < 50; ++s) {
      ParameterVector theta = make_theta({1.0});
      const PerturbationSeed seed{s, 0};
      const double z = generate_noise(seed, 1)[0];
      const DirectionalDerivative d =
          spsa_directional_derivative(loss, theta, seed, eps);
      // (1 + d)^2 - (1 - d)^2 = 4 d with d = snap(eps z); 2 z in the limit.
      const double displacement = snap_to_lattice(eps * z);
      EXPECT_NEAR(d.projected_gradient, 2.0 * displacement / eps,
                  1e-12 * (1 + std::abs(2.0 * displacement / eps) / eps));
      EXPECT_NEAR(d.projected_gradient, 2.0 * z,
                  2 * kLatticeSpacing / eps + 1e-9 * std::abs(z));
    }
  }
}

TEST(SpsaTest, ConstantLossGivesZero) {
  std::mt19937_64 rng(2);
  ParameterVector theta = random_lattice_theta(17, rng);
  const LossFn loss = [](const ParameterVector&) { return 3.25; };
  for (double eps : {1e-5, 1e-3, 1.0}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      EXPECT_EQ(spsa_directional_derivative(loss, theta, {s, 1}, eps)
                    .projected_gradient,
                0.0);
    }
  }
}

TEST(SpsaTest, SineMatchesAnalyticDerivative) {
  const LossFn loss = [](const ParameterVector& t) {
    return std::sin(t.values()[0]);
  };
  int checked = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    ParameterVector theta = make_theta({snap_to_lattice(0.3)});
    const PerturbationSeed seed{s, 0};
    const double z = generate_noise(seed, 1)[0];
    // Displacement rounding is 2^-45 absolute; below |z| = 1e-2 it alone
    // exceeds the tolerance, so those draws carry no information.
    if (std::abs(z) < 1e-2) {
      continue;
    }
    const double g = spsa_directional_derivative(loss, theta, seed, 1e-4)
                         .projected_gradient;
    const double expected = std::cos(theta.values()[0]) * z * z;
    EXPECT_LT(std::abs(g * z - expected) / std::abs(expected), 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 190);
}

TEST(SpsaTest, RestoresThetaBitwise) {
  std::mt19937_64 rng(3);
  const LossFn loss = [](const ParameterVector& t) {
    double s = 0.0;
    for (double v : t.values()) {
      s += std::log(std::cosh(v)) + 0.1 * v * v * v;
    }
    return s;
  };
  for (std::uint64_t s = 0; s < 1000; ++s) {
    ParameterVector theta = random_lattice_theta(64, rng, 3.0);
    const ParameterVector before = theta;
    const double eps = std::array{1e-3, 1e-6, 0.1, 7.9}[s % 4];
    spsa_directional_derivative(loss, theta, {rng(), s}, eps);
    ASSERT_EQ(theta, before) << "seed " << s;
  }
}

TEST(SpsaTest, RejectsOffLatticeTheta) {
  ParameterVector theta = make_theta({0.1});
  const LossFn loss = [](const ParameterVector&) { return 0.0; };
  EXPECT_THROW(spsa_directional_derivative(loss, theta, {0, 0}, 1e-3), Error);
}

TEST(SpsaTest, NonFiniteLossRestoresTheta) {
  std::mt19937_64 rng(4);
  ParameterVector theta = random_lattice_theta(9, rng);
  const ParameterVector before = theta;
  int calls = 0;
  // Finite at theta + eps z, NaN at theta - eps z.
  const LossFn loss = [&](const ParameterVector&) {
    return ++calls == 2 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
  };
  try {
    spsa_directional_derivative(loss, theta, {5, 0}, 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
  EXPECT_EQ(theta, before);
}

// E_z[g z] = Q theta for loss 1/2 theta^T Q theta. The per-coordinate
// standard error of the mean over M directions is about |Q theta|
// sqrt((d + 2) / M), so M = 10^6 keeps it near 0.3% at d = 8.
TEST(SpsaTest, UnbiasedOnQuadratic) {
  constexpr int kDim = 8;
  constexpr int kDirections = 1000000;
  std::mt19937_64 rng(5);
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
      kDim, kDim, [&] { return std::normal_distribution<double>()(rng); });
  const Eigen::MatrixXd q =
      a * a.transpose() / kDim + Eigen::MatrixXd::Identity(kDim, kDim);
  ParameterVector theta = random_lattice_theta(kDim, rng);
  const Eigen::Map<const Eigen::VectorXd> th(theta.values().data(), kDim);
  const Eigen::VectorXd expected = q * th;
  const LossFn loss = [&](const ParameterVector& t) {
    const Eigen::Map<const Eigen::VectorXd> v(t.values().data(), kDim);
    return 0.5 * v.dot(q * v);
  };
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kDim);
  for (int m = 0; m < kDirections; ++m) {
    const PerturbationSeed seed{77, static_cast<std::uint64_t>(m)};
    const double g =
        spsa_directional_derivative(loss, theta, seed, 1e-3).projected_gradient;
    NoiseStream z(seed);
    for (int i = 0; i < kDim; ++i) {
      mean[i] += g * z.next();
    }
  }
  mean /= kDirections;
  EXPECT_LT((mean - expected).norm() / expected.norm(), 0.02);
}

TEST(MezoStepTest, ZeroLearningRateKeepsThetaAndReportsGradients) {
  std::mt19937_64 rng(6);
  ParameterVector theta = random_lattice_theta(10, rng);
  const ParameterVector before = theta;
  ZOConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.num_perturbations = 5;
  const LossFn loss = [](const ParameterVector& t) { return sum_squares(t); };
  const StepReport r = mezo_step(loss, theta, cfg, 3);
  EXPECT_EQ(theta, before);
  ASSERT_EQ(r.projected_gradients.size(), 5u);
  ASSERT_EQ(r.seeds.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(r.seeds[i], step_seed(cfg.master_seed, 3, i));
    EXPECT_NE(r.projected_gradients[i], 0.0);
  }
}

TEST(MezoStepTest, MatchesExplicitUpdate) {
  std::mt19937_64 rng(7);
  ParameterVector theta = random_lattice_theta(33, rng);
  ParameterVector expected = theta;
  ZOConfig cfg{1e-3, 0.05, 3, 42};
  const LossFn loss = [](const ParameterVector& t) {
    double s = 0.0;
    for (double v : t.values()) {
      s += std::cos(v);
    }
    return s;
  };
  const StepReport r = mezo_step(loss, theta, cfg, 9);
  std::vector<std::vector<double>> z;
  for (const auto& seed : r.seeds) {
    z.push_back(generate_noise(seed, expected.size()));
  }
  auto e = expected.values();
  for (std::size_t j = 0; j < e.size(); ++j) {
    double dir = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      dir += r.projected_gradients[i] * z[i][j];
    }
    e[j] = snap_to_lattice(e[j] - cfg.learning_rate / 3 * dir);
  }
  EXPECT_EQ(theta, expected);
}

TEST(MezoStepTest, SingleDirectionExpectation) {
  // 1/2 |theta|^2 at theta = (1, -0.5, 0.25, 2): E[-eta (theta.z) z] =
  // -eta theta. Relative error of the mean is about sqrt((d + 1) / M).
  constexpr int kSteps = 200000;
  const std::vector<double> start{1.0, -0.5, 0.25, 2.0};
  const double eta = 1e-3;
  ZOConfig cfg{1e-3, eta, 1, 2024};
  const LossFn loss = [](const ParameterVector& t) {
    return 0.5 * sum_squares(t);
  };
  std::vector<double> mean(start.size(), 0.0);
  for (int s = 0; s < kSteps; ++s) {
    ParameterVector theta = make_theta(start);
    mezo_step(loss, theta, cfg, static_cast<std::uint64_t>(s));
    for (std::size_t i = 0; i < start.size(); ++i) {
      mean[i] += theta.values()[i] - start[i];
    }
  }
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < start.size(); ++i) {
    mean[i] /= kSteps;
    err += std::pow(mean[i] + eta * start[i], 2);
    norm += std::pow(eta * start[i], 2);
  }
  EXPECT_LT(std::sqrt(err / norm), 0.02);
}

TEST(MezoStepTest, Deterministic) {
  std::mt19937_64 rng(8);
  const ParameterVector start = random_lattice_theta(40, rng);
  ZOConfig cfg{1e-3, 0.01, 5, 99};
  const LossFn loss = [](const ParameterVector& t) {
    return std::exp(0.01 * sum_squares(t));
  };
  ParameterVector a = start, b = start, c = start;
  mezo_step(loss, a, cfg, 4);
  mezo_step(loss, b, cfg, 4);
  mezo_step(loss, c, cfg, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_TRUE(on_lattice(a));
}

TEST(MezoStepTest, NonFiniteLossLeavesTheta) {
  std::mt19937_64 rng(9);
  ParameterVector theta = random_lattice_theta(12, rng);
  const ParameterVector before = theta;
  int calls = 0;
  const LossFn loss = [&](const ParameterVector&) {
    return ++calls >= 5 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  ZOConfig cfg;
  EXPECT_THROW(mezo_step(loss, theta, cfg, 0), Error);
  EXPECT_EQ(theta, before);
}

// Cosine between the step and -grad for a smooth non-quadratic loss.
TEST(MezoStepTest, StepAlignsWithNegativeGradient) {
  constexpr int kDim = 64;
  constexpr int kTrials = 400;
  std::mt19937_64 rng(10);
  const LossFn loss = [](const ParameterVector& t) {
    double s = 0.0;
    for (double v : t.values()) {
      s += std::log(std::cosh(v)) + 0.05 * v * v * v * v;
    }
    return s;
  };
  int positive = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    ParameterVector theta = random_lattice_theta(kDim, rng);
    const ParameterVector before = theta;
    ZOConfig cfg{1e-3, 1e-2, 5, static_cast<std::uint64_t>(trial)};
    mezo_step(loss, theta, cfg, 0);
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (int i = 0; i < kDim; ++i) {
      const double x = before.values()[i];
      const double grad = std::tanh(x) + 0.2 * x * x * x;
      const double step = theta.values()[i] - x;
      dot += -grad * step;
      n1 += grad * grad;
      n2 += step * step;
    }
    if (dot / std::sqrt(n1 * n2) > 0) {
      ++positive;
    }
  }
  EXPECT_GT(static_cast<double>(positive) / kTrials, 0.95);
}

TEST(BpSgdTest, QuadraticStep) {
  ParameterVector theta = make_theta({1.0, 1.0});
  const LossAndGradFn fn = [](const ParameterVector& t, ParameterVector& g) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      g.values()[i] = t.values()[i];
    }
    return 0.5 * sum_squares(t);
  };
  EXPECT_EQ(bp_sgd_step(fn, theta, 0.1), 1.0);
  EXPECT_EQ(theta.values()[0], 0.9);
  EXPECT_EQ(theta.values()[1], 0.9);
  const ParameterVector before = theta;
  bp_sgd_step(fn, theta, 0.0);
  EXPECT_EQ(theta, before);
}

TEST(BpSgdTest, NonFiniteErrors) {
  ParameterVector theta = make_theta({1.0});
  const ParameterVector before = theta;
  const LossAndGradFn bad_loss = [](const ParameterVector&, ParameterVector&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  const LossAndGradFn bad_grad = [](const ParameterVector&,
                                    ParameterVector& g) {
    g.values()[0] = std::numeric_limits<double>::infinity();
    return 1.0;
  };
  try {
    bp_sgd_step(bad_loss, theta, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
  try {
    bp_sgd_step(bad_grad, theta, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteGrad);
  }
  EXPECT_EQ(theta, before);
}

TEST(BpSgdTest, LinearRegressionReachesLeastSquares) {
  constexpr int kRows = 50;
  constexpr int kCols = 3;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  const Eigen::MatrixXd x =
      Eigen::MatrixXd::NullaryExpr(kRows, kCols, [&] { return normal(rng); });
  const Eigen::VectorXd y =
      x * Eigen::Vector3d(1.5, -2.0, 0.5) +
      0.3 * Eigen::VectorXd::NullaryExpr(kRows, [&] { return normal(rng); });
  auto loss_of = [&](const Eigen::VectorXd& w) {
    return 0.5 * (x * w - y).squaredNorm() / kRows;
  };
  // Oracle: normal equations.
  const Eigen::VectorXd w_star = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  const LossAndGradFn fn = [&](const ParameterVector& t, ParameterVector& g) {
    const Eigen::Map<const Eigen::VectorXd> w(t.values().data(), kCols);
    Eigen::Map<Eigen::VectorXd> gw(g.values().data(), kCols);
    gw = x.transpose() * (x * w - y) / kRows;
    return loss_of(w);
  };
  ParameterVector theta = make_theta({0.0, 0.0, 0.0});
  for (int step = 0; step < 100; ++step) {
    bp_sgd_step(fn, theta, 0.5);
  }
  const Eigen::Map<const Eigen::VectorXd> w(theta.values().data(), kCols);
  EXPECT_LT(std::abs(loss_of(w) - loss_of(w_star)), 1e-6);
}

}  // namespace
}  // namespace zomem
