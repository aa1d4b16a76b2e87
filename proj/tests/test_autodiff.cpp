#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ballot/autodiff.hpp"
#include "ballot/error.hpp"
#include "ballot/model.hpp"
#include "ballot/random.hpp"
#include "support/oracles.hpp"

using namespace ballot;
using ad::Tape;

namespace {

Tensor affine_value(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tape t;
  return t.value(t.affine(t.constant(x), t.parameter(w), t.parameter(b)));
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), ConfigError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ConfigError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  t(1, 2) = NAN;
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, BitEqualSeparatesSignedZero) {
  EXPECT_TRUE(Tensor::vector({0.0}).bit_equal(Tensor::vector({0.0})));
  EXPECT_FALSE(Tensor::vector({0.0}).bit_equal(Tensor::vector({-0.0})));
}

TEST(Affine, IdentityWeights) {
  const Tensor out = affine_value(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}),
                                  Tensor::vector({0, 0}));
  EXPECT_EQ(out, Tensor::matrix({{1, 2}}));
}

TEST(Affine, HandProduct) {
  const Tensor out = affine_value(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::matrix({{3}, {5}}),
                                  Tensor::vector({1}));
  EXPECT_EQ(out, Tensor::matrix({{4}, {6}}));
}

TEST(Affine, ZeroInputPassesBias) {
  const Tensor out = affine_value(Tensor::matrix({{0, 0}}), Tensor::matrix({{0.3, -2}, {9, 4}}),
                                  Tensor::vector({7, 7}));
  EXPECT_EQ(out, Tensor::matrix({{7, 7}}));
}

TEST(Affine, ShapeMismatchIsConfigError) {
  Tape t;
  const auto x = t.constant(Tensor::matrix({{1, 2, 3}}));
  const auto w = t.parameter(Tensor::matrix({{1}, {2}}));
  const auto b = t.parameter(Tensor::vector({0}));
  EXPECT_THROW(t.affine(x, w, b), ConfigError);
  const auto w2 = t.parameter(Tensor::matrix({{1}, {2}, {3}}));
  const auto b2 = t.parameter(Tensor::vector({0, 0}));
  EXPECT_THROW(t.affine(x, w2, b2), ConfigError);
}

TEST(Relu, Forward) {
  Tape t;
  EXPECT_EQ(t.value(t.relu(t.constant(Tensor::vector({-1, 0, 2})))), Tensor::vector({0, 0, 2}));
  EXPECT_EQ(t.value(t.relu(t.constant(Tensor::vector({-3, -0.5})))), Tensor::vector({0, 0}));
}

TEST(Relu, GradientMasksNegatives) {
  Tape t;
  const auto x = t.parameter(Tensor::matrix({{-1, 2}}));
  const auto r = t.relu(x);
  // summing through a 2->1 affine gives upstream [1, 1]
  const auto w = t.parameter(Tensor::matrix({{1}, {1}}));
  const auto b = t.parameter(Tensor::vector({0}));
  const auto s = t.affine(r, w, b);
  const auto g = t.backward(s);
  EXPECT_EQ(g[x], Tensor::matrix({{0, 1}}));
}

TEST(Relu, SubgradientAtZeroIsZero) {
  Tape t;
  const auto x = t.parameter(Tensor::matrix({{0.0}}));
  const auto w = t.parameter(Tensor::matrix({{1}}));
  const auto b = t.parameter(Tensor::vector({0}));
  const auto g = t.backward(t.affine(t.relu(x), w, b));
  EXPECT_EQ(g[x][0], 0.0);
}

TEST(Backward, LinearCase) {
  // loss = w * x with x = 3, w = 2
  Tape t;
  const auto x = t.constant(Tensor::matrix({{3}}));
  const auto w = t.parameter(Tensor::matrix({{2}}));
  const auto b = t.parameter(Tensor::vector({0}));
  const auto loss = t.affine(x, w, b);
  EXPECT_EQ(t.value(loss)[0], 6.0);
  const auto g = t.backward(loss);
  EXPECT_EQ(g[w][0], 3.0);
  EXPECT_EQ(g[b][0], 1.0);
  EXPECT_TRUE(g[x].empty());
}

TEST(Backward, EmptyTapeOrNonScalarIsUsageError) {
  Tape t;
  EXPECT_THROW(t.backward(ad::NodeId{0}), UsageError);
  const auto v = t.parameter(Tensor::vector({1, 2}));
  EXPECT_THROW(t.backward(v), UsageError);
}

TEST(CrossEntropy, HandValues) {
  const Tensor target = Tensor::matrix({{1, 0}});
  {
    Tape t;
    const auto z = t.constant(Tensor::matrix({{0, 0}}));
    EXPECT_NEAR(t.value(t.softmax_cross_entropy(z, target))[0], std::log(2.0), 1e-15);
  }
  {
    Tape t;
    const auto z = t.constant(Tensor::matrix({{0, 0}}));
    const double w[] = {2, 1};
    EXPECT_NEAR(t.value(t.weighted_softmax_cross_entropy(z, target, w))[0], 2 * std::log(2.0), 1e-15);
  }
  {
    Tape t;
    const auto z = t.constant(Tensor::matrix({{1000, 0}}));
    const double loss = t.value(t.softmax_cross_entropy(z, target))[0];
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_NEAR(loss, 0.0, 1e-300);
  }
}

TEST(CrossEntropy, NotOneHotIsDataError) {
  Tape t;
  const auto z = t.constant(Tensor::matrix({{0, 0}}));
  EXPECT_THROW(t.softmax_cross_entropy(z, Tensor::matrix({{0.5, 0.5}})), DataError);
  EXPECT_THROW(t.softmax_cross_entropy(z, Tensor::matrix({{1, 1}})), DataError);
  EXPECT_THROW(t.softmax_cross_entropy(z, Tensor::matrix({{0, 0}})), DataError);
}

TEST(CrossEntropy, NonFiniteLogitsAreNumericalError) {
  const Tensor target = Tensor::matrix({{1, 0}});
  EXPECT_THROW(
      {
        Tape t;
        t.softmax_cross_entropy(t.constant(Tensor::matrix({{NAN, 0}})), target);
      },
      NumericalError);
  // logits that overflow inside the forward pass
  EXPECT_THROW(
      {
        Tape t;
        const auto z = t.affine(t.constant(Tensor::matrix({{1e308}})), t.parameter(Tensor::matrix({{10, 1}})),
                                t.parameter(Tensor::vector({0, 0})));
        t.softmax_cross_entropy(z, target);
      },
      NumericalError);
}

TEST(CrossEntropy, NonPositiveWeightIsConfigError) {
  Tape t;
  const auto z = t.constant(Tensor::matrix({{0, 0}}));
  const double w[] = {1, 0};
  EXPECT_THROW(t.weighted_softmax_cross_entropy(z, Tensor::matrix({{1, 0}}), w), ConfigError);
}

TEST(CrossEntropy, UniformWeightsBitExact) {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    auto net = oracle::random_net(rng, 3, 8);
    const std::size_t n = 1 + rng.below(8);
    Tensor x({n, net.input_dim()});
    for (double& v : x.values()) v = rng.normal();
    Tensor y({n, net.class_count()});
    for (std::size_t i = 0; i < n; ++i) y(i, rng.below(net.class_count())) = 1.0;
    const std::vector<double> ones(net.class_count(), 1.0);

    ForwardTrace trace = trace_forward(net, nullptr, x);
    const auto la = trace.tape.softmax_cross_entropy(trace.logits, y);
    const auto lw = trace.tape.weighted_softmax_cross_entropy(trace.logits, y, ones);
    EXPECT_TRUE(trace.tape.value(la).bit_equal(trace.tape.value(lw)));
    const auto ga = collect_grads(trace, trace.tape.backward(la));
    const auto gw = collect_grads(trace, trace.tape.backward(lw));
    for (std::size_t l = 0; l < ga.layers.size(); ++l) {
      EXPECT_TRUE(ga.layers[l].weight.bit_equal(gw.layers[l].weight));
      EXPECT_TRUE(ga.layers[l].bias.bit_equal(gw.layers[l].bias));
    }
  }
}

// Analytic gradients of both losses against the scalar finite-difference
// oracle, for every parameter.
TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (int rep = 0; rep < 10; ++rep) {
    auto net = oracle::random_net(rng, 3, 6);
    const std::size_t n = 1 + rng.below(6);
    std::vector<std::vector<double>> xs(n, std::vector<double>(net.input_dim()));
    std::vector<std::size_t> ys(n);
    Tensor x({n, net.input_dim()});
    Tensor y({n, net.class_count()});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < net.input_dim(); ++j) x(i, j) = xs[i][j] = rng.normal();
      ys[i] = rng.below(net.class_count());
      y(i, ys[i]) = 1.0;
    }
    std::vector<double> w(net.class_count());
    for (double& v : w) v = rng.uniform(0.5, 3.0);
    const std::vector<double> ones(net.class_count(), 1.0);

    ForwardTrace trace = trace_forward(net, nullptr, x);
    for (const std::vector<double>* weights : {&ones, static_cast<const std::vector<double>*>(&w)}) {
      const auto loss = trace.tape.weighted_softmax_cross_entropy(trace.logits, y, *weights);
      const auto g = collect_grads(trace, trace.tape.backward(loss));
      std::vector<double> flat;
      for (const auto& l : g.layers) {
        flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
        flat.insert(flat.end(), l.bias.values().begin(), l.bias.values().end());
      }
      const auto fd = oracle::fd_gradient(oracle::flat_net(net), xs, ys, *weights, 1e-5);
      ASSERT_EQ(flat.size(), fd.size());
      for (std::size_t i = 0; i < fd.size(); ++i) {
        EXPECT_LE(std::abs(flat[i] - fd[i]) / std::max(1.0, std::abs(fd[i])), 1e-5) << "entry " << i;
      }
    }
  }
}

TEST(Backward, PreactGradIsBatchMeanOfBiasGrad) {
  Rng rng(5);
  auto net = oracle::random_net(rng, 3, 8);
  const std::size_t n = 7;
  Tensor x({n, net.input_dim()});
  for (double& v : x.values()) v = rng.normal();
  Tensor y({n, net.class_count()});
  for (std::size_t i = 0; i < n; ++i) y(i, i % net.class_count()) = 1.0;
  ForwardTrace trace = trace_forward(net, nullptr, x);
  const auto g = collect_grads(trace, trace.tape.backward(trace.tape.softmax_cross_entropy(trace.logits, y)));
  ASSERT_EQ(g.preact.size(), net.layers.size() - 1);
  for (std::size_t l = 0; l < g.preact.size(); ++l) {
    for (std::size_t u = 0; u < g.preact[l].size(); ++u) {
      EXPECT_NEAR(g.preact[l][u] * static_cast<double>(n), g.layers[l].bias[u], 1e-14);
    }
  }
}

TEST(Backward, TwoPassesDoNotAccumulate) {
  Rng rng(3);
  auto net = oracle::random_net(rng, 3, 5);
  Tensor x({4, net.input_dim()});
  for (double& v : x.values()) v = rng.normal();
  Tensor y({4, net.class_count()});
  for (std::size_t i = 0; i < 4; ++i) y(i, 0) = 1.0;
  std::vector<double> w(net.class_count(), 2.5);

  ForwardTrace trace = trace_forward(net, nullptr, x);
  const auto la = trace.tape.softmax_cross_entropy(trace.logits, y);
  const auto first = collect_grads(trace, trace.tape.backward(la));
  const auto lf = trace.tape.weighted_softmax_cross_entropy(trace.logits, y, w);
  const auto fair = collect_grads(trace, trace.tape.backward(lf));
  const auto again = collect_grads(trace, trace.tape.backward(la));
  for (std::size_t l = 0; l < first.layers.size(); ++l) {
    EXPECT_TRUE(first.layers[l].weight.bit_equal(again.layers[l].weight));
    // every class weighted 2.5 scales the loss, and so the gradient, by 2.5
    for (std::size_t i = 0; i < first.layers[l].weight.size(); ++i) {
      EXPECT_NEAR(fair.layers[l].weight[i], 2.5 * first.layers[l].weight[i], 1e-13);
    }
  }
}

TEST(Backward, ScalingLossScalesGradients) {
  Rng rng(8);
  auto net = oracle::random_net(rng, 3, 6);
  Tensor x({5, net.input_dim()});
  for (double& v : x.values()) v = rng.normal();
  Tensor y({5, net.class_count()});
  for (std::size_t i = 0; i < 5; ++i) y(i, rng.below(net.class_count())) = 1.0;
  ForwardTrace trace = trace_forward(net, nullptr, x);
  const auto loss = trace.tape.softmax_cross_entropy(trace.logits, y);
  const auto g1 = collect_grads(trace, trace.tape.backward(loss));
  // power of two: every intermediate scales exactly
  const auto g4 = collect_grads(trace, trace.tape.backward(trace.tape.scale(loss, -4.0)));
  const auto g37 = collect_grads(trace, trace.tape.backward(trace.tape.scale(loss, -3.7)));
  const double tol = 64 * std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < g1.layers.size(); ++l) {
    for (std::size_t i = 0; i < g1.layers[l].weight.size(); ++i) {
      EXPECT_EQ(g4.layers[l].weight[i], -4.0 * g1.layers[l].weight[i]);
      const double expect = -3.7 * g1.layers[l].weight[i];
      EXPECT_NEAR(g37.layers[l].weight[i], expect, tol * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST(Backward, Deterministic) {
  Rng rng(13);
  auto net = oracle::random_net(rng, 3, 10);
  Tensor x({6, net.input_dim()});
  for (double& v : x.values()) v = rng.normal();
  Tensor y({6, net.class_count()});
  for (std::size_t i = 0; i < 6; ++i) y(i, rng.below(net.class_count())) = 1.0;
  auto run = [&] {
    ForwardTrace trace = trace_forward(net, nullptr, x);
    return collect_grads(trace, trace.tape.backward(trace.tape.softmax_cross_entropy(trace.logits, y)));
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_TRUE(a.layers[l].weight.bit_equal(b.layers[l].weight));
    EXPECT_TRUE(a.layers[l].bias.bit_equal(b.layers[l].bias));
  }
}
