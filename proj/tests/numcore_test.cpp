#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "synkbqa/error.hpp"
#include "synkbqa/numcore/init.hpp"
#include "synkbqa/numcore/kernels.hpp"
#include "synkbqa/numcore/optim.hpp"
#include "synkbqa/numcore/params.hpp"
#include "synkbqa/numcore/tape.hpp"

using namespace synkbqa;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

std::vector<double> random_values(std::size_t n, num::Rng& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<const num::kernels::Table*> simd_tables() {
  std::vector<const num::kernels::Table*> out;
  if (auto* t = num::kernels::avx2()) out.push_back(t);
  if (auto* t = num::kernels::neon()) out.push_back(t);
  return out;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], tol * std::max(1.0, std::abs(b[i]))) << "entry " << i;
  }
}

}  // namespace

TEST(Kernels, SimdMatchesScalar) {
  const auto tables = simd_tables();
  if (tables.empty()) GTEST_SKIP() << "no SIMD variant on this CPU";
  const auto& ref = num::kernels::scalar();
  num::Rng rng(3);
  for (const auto* simd : tables) {
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 33u, 100u, 301u}) {
      const auto a = random_values(n, rng);
      const auto b = random_values(n, rng);
      EXPECT_NEAR(simd->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), 1e-12 * (1 + n));

      auto y1 = random_values(n, rng);
      auto y2 = y1;
      simd->axpy(0.37, a.data(), y1.data(), n);
      ref.axpy(0.37, a.data(), y2.data(), n);
      expect_close(y1, y2, 1e-14);

      for (std::size_t rows : {1u, 3u, 9u}) {
        const auto m = random_values(rows * n, rng);
        const auto x = random_values(n, rng);
        std::vector<double> g1(rows), g2(rows);
        simd->gemv(m.data(), rows, n, x.data(), g1.data());
        ref.gemv(m.data(), rows, n, x.data(), g2.data());
        expect_close(g1, g2, 1e-12);

        const auto u = random_values(rows, rng);
        auto t1 = random_values(n, rng);
        auto t2 = t1;
        simd->gemv_t_acc(m.data(), rows, n, u.data(), t1.data());
        ref.gemv_t_acc(m.data(), rows, n, u.data(), t2.data());
        expect_close(t1, t2, 1e-12);

        auto a1 = m;
        auto a2 = m;
        simd->ger_acc(a1.data(), rows, n, u.data(), x.data());
        ref.ger_acc(a2.data(), rows, n, u.data(), x.data());
        expect_close(a1, a2, 1e-14);
      }
    }
  }
}

TEST(Kernels, ActiveIsAKnownVariant) {
  const auto name = num::kernels::active().name;
  EXPECT_TRUE(name == "scalar" || name == "avx2" || name == "neon") << name;
}

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor({2, 0}), Error);
  EXPECT_THROW(Tensor(num::Shape{}), Error);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), Error);
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_FALSE(t.has_grad());
  t.enable_grad();
  EXPECT_EQ(t.grad().size(), 6u);
}

TEST(Tape, Cosine) {
  Tape tape;
  EXPECT_DOUBLE_EQ(tape.scalar(tape.cosine(tape.constant({1, 0}), tape.constant({1, 0}))), 1.0);
  EXPECT_DOUBLE_EQ(tape.scalar(tape.cosine(tape.constant({1, 0}), tape.constant({0, 1}))), 0.0);
  EXPECT_DOUBLE_EQ(tape.scalar(tape.cosine(tape.constant({0, 0}), tape.constant({3, 1}))), 0.0);
}

TEST(Tape, CosineBounds) {
  num::Rng rng(11);
  Tape tape;
  for (int k = 0; k < 200; ++k) {
    const auto a = random_values(5, rng);
    const auto b = random_values(5, rng);
    Var va = tape.constant(a);
    const double c = tape.scalar(tape.cosine(va, tape.constant(b)));
    EXPECT_LE(std::abs(c), 1.0 + 1e-15);
    EXPECT_NEAR(tape.scalar(tape.cosine(va, va)), 1.0, 1e-15);
  }
}

TEST(Tape, MaxPool) {
  Tape tape;
  const Var terms[] = {tape.constant({1, 5}), tape.constant({3, 2})};
  const auto v = tape.value(tape.maxpool(terms));
  EXPECT_EQ(std::vector<double>(v.begin(), v.end()), (std::vector<double>{3, 5}));
}

TEST(Tape, MaxPoolPermutationInvariant) {
  num::Rng rng(5);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 6; ++i) rows.push_back(random_values(4, rng));
  Tape tape;
  std::vector<Var> vars;
  for (const auto& r : rows) vars.push_back(tape.constant(r));
  const auto ref = tape.value(tape.maxpool(vars));
  const std::vector<double> expected(ref.begin(), ref.end());
  for (int k = 0; k < 50; ++k) {
    std::shuffle(vars.begin(), vars.end(), rng);
    const auto got = tape.value(tape.maxpool(vars));
    EXPECT_EQ(std::vector<double>(got.begin(), got.end()), expected);
  }
}

TEST(Tape, ShapeMismatchNamesOpAndShapes) {
  Tape tape;
  try {
    tape.add(tape.constant({1, 2}), tape.constant({1, 2, 3}));
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3]"), std::string::npos) << msg;
  }
}

TEST(Tape, BackwardDotSelf) {
  Tensor x = Tensor::vector({1, 2});
  Tape tape;
  Var v = tape.param(x);
  tape.backward(tape.dot(v, v));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
}

TEST(Tape, BackwardSigmoidAtZero) {
  Tensor x = Tensor::vector({0.0});
  Tape tape;
  tape.backward(tape.sigmoid(tape.param(x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Tape, BackwardRejectsNonScalar) {
  Tensor x = Tensor::vector({1, 2});
  Tape tape;
  EXPECT_THROW(tape.backward(tape.param(x)), Error);
}

TEST(Tape, UnreachableParamsKeepZeroGradient) {
  num::ParamStore ps;
  Tensor& a = ps.add("a", Tensor::vector({1, 2}));
  Tensor& b = ps.add("b", Tensor::vector({3, 4}));
  a.enable_grad();
  b.enable_grad();
  Tape tape;
  tape.param(b);
  tape.backward(tape.dot(tape.param(a), tape.param(a)));
  EXPECT_EQ(b.grad()[0], 0.0);
  EXPECT_EQ(b.grad()[1], 0.0);
}

TEST(Tape, ConstantsGetNoGradient) {
  Tape tape;
  Var c = tape.constant({1, 2});
  Tensor x = Tensor::vector({3, 4});
  tape.backward(tape.dot(c, tape.param(x)));
  EXPECT_TRUE(tape.grad(c).empty());
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

// Every primitive, composed, against central differences.
TEST(Tape, PrimitiveGradientsMatchFiniteDifferences) {
  num::Rng rng(21);
  num::ParamStore ps;
  ps.add("m", Tensor::matrix(3, 4, random_values(12, rng)));
  ps.add("x", Tensor::vector(random_values(4, rng)));
  ps.add("y", Tensor::vector(random_values(3, rng)));
  ps.add("t", Tensor::matrix(5, 3, random_values(15, rng)));
  for (auto& [name, p] : ps) p.enable_grad();
  auto loss = [&](bool backward) {
    Tape tape;
    Var h = tape.matmul(tape.param(ps.at("m")), tape.param(ps.at("x")));
    Var a = tape.tanh(tape.add(h, tape.param(ps.at("y"))));
    Var b = tape.sigmoid(tape.sub(h, tape.row(ps.at("t"), 2)));
    Var c = tape.mul(a, tape.one_minus(b));
    Var d = tape.relu(tape.scale(tape.add(c, tape.row(ps.at("t"), 4)), 1.7));
    const Var list[] = {a, c, d, tape.row(ps.at("t"), 0)};
    Var pooled = tape.maxpool(list);
    Var summed = tape.sum(list);
    Var averaged = tape.mean(list);
    const Var parts[] = {pooled, summed};
    Var cat = tape.concat(parts);
    const Var parts2[] = {averaged, a};
    Var cat2 = tape.concat(parts2);
    Var out = tape.add(tape.cosine(cat, cat2), tape.scale(tape.dot(pooled, averaged), 0.3));
    const double value = tape.scalar(out);
    if (backward) tape.backward(out);
    return value;
  };
  const auto r = fixture::check_gradients(ps, loss);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Tape, MatrixMatmulGradient) {
  num::Rng rng(8);
  num::ParamStore ps;
  ps.add("a", Tensor::matrix(2, 3, random_values(6, rng)));
  ps.add("b", Tensor::matrix(3, 2, random_values(6, rng)));
  ps.add("c", Tensor::vector(random_values(2, rng)));
  for (auto& [name, p] : ps) p.enable_grad();
  auto loss = [&](bool backward) {
    Tape tape;
    Var ab = tape.matmul(tape.param(ps.at("a")), tape.param(ps.at("b")));
    Var v = tape.matmul(ab, tape.param(ps.at("c")));
    Var out = tape.dot(v, v);
    const double value = tape.scalar(out);
    if (backward) tape.backward(out);
    return value;
  };
  const auto r = fixture::check_gradients(ps, loss);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Tape, Determinism) {
  auto run = [] {
    num::Rng rng(99);
    Tensor w = num::xavier_uniform({4, 4}, rng);
    Tensor x = Tensor::vector({0.1, -0.2, 0.3, 0.4});
    Tape tape;
    Var h = tape.dropout(tape.tanh(tape.matmul(tape.param(w), tape.param(x))), 0.3, rng, true);
    Var out = tape.dot(h, h);
    tape.backward(out);
    std::vector<double> all(w.grad().begin(), w.grad().end());
    all.push_back(tape.scalar(out));
    return all;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, FirstStepIsSignUpdate) {
  num::ParamStore ps;
  Tensor& p = ps.add("p", Tensor::vector({0.5}));
  p.enable_grad();
  p.grad()[0] = 0.1;
  num::Adam adam(num::AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  adam.step(ps);
  EXPECT_NEAR(p[0] - 0.5, -1e-3, 1e-6);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  num::ParamStore ps;
  Tensor& p = ps.add("p", Tensor::vector({0.5, -2.0}));
  p.enable_grad();
  num::Adam adam;
  adam.step(ps);
  adam.step(ps);
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], -2.0);
}

TEST(Adam, TwoStepsMatchClosedForm) {
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double g1 = 0.1, g2 = 0.1;
  num::ParamStore ps;
  Tensor& p = ps.add("p", Tensor::vector({0.0}));
  p.enable_grad();
  num::Adam adam(num::AdamConfig{lr, b1, b2, eps});
  p.grad()[0] = g1;
  adam.step(ps);
  const double d1 = p[0];
  p.grad()[0] = g2;
  adam.step(ps);
  const double d2 = p[0] - d1;

  const double m1 = (1 - b1) * g1, v1 = (1 - b2) * g1 * g1;
  const double e1 = -lr * (m1 / (1 - b1)) / (std::sqrt(v1 / (1 - b2)) + eps);
  const double m2 = b1 * m1 + (1 - b1) * g2, v2 = b2 * v1 + (1 - b2) * g2 * g2;
  const double e2 = -lr * (m2 / (1 - b1 * b1)) / (std::sqrt(v2 / (1 - b2 * b2)) + eps);
  EXPECT_NEAR(d1, e1, 1e-15);
  EXPECT_NEAR(d2, e2, 1e-15);
  // With a repeated gradient the bias-corrected moments are unchanged, so the
  // second step has the same size as the first.
  EXPECT_NEAR(std::abs(d2), std::abs(d1), 1e-12);
}

TEST(Adam, NonFiniteGradientAbortsAndNamesParameter) {
  num::ParamStore ps;
  Tensor& a = ps.add("alpha", Tensor::vector({1.0}));
  Tensor& b = ps.add("beta", Tensor::vector({1.0}));
  a.enable_grad();
  b.enable_grad();
  a.grad()[0] = 0.5;
  b.grad()[0] = std::nan("");
  num::Adam adam;
  try {
    adam.step(ps);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
  }
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(Xavier, DeterministicForSeed) {
  EXPECT_EQ(num::xavier_uniform({4, 4}, 42), num::xavier_uniform({4, 4}, 42));
  EXPECT_FALSE(num::xavier_uniform({4, 4}, 42) == num::xavier_uniform({4, 4}, 43));
}

TEST(Xavier, WithinBound) {
  const Tensor t = num::xavier_uniform({300, 300}, 1);
  for (double v : t.data()) EXPECT_LE(std::abs(v), 0.1);
}

TEST(Xavier, MeanNearZero) {
  const Tensor t = num::xavier_uniform({1000, 100}, 7);
  double sum = 0;
  for (double v : t.data()) sum += v;
  EXPECT_LT(std::abs(sum / t.size()), 0.01);
}

TEST(Xavier, RejectsZeroDimension) {
  EXPECT_THROW(num::xavier_uniform({0, 3}, 1), Error);
  EXPECT_THROW(num::xavier_uniform(num::Shape{}, 1), Error);
}

TEST(Dropout, IdentityCases) {
  num::Rng rng(1);
  const Tensor x = Tensor::vector({1, 2, 3, 4});
  EXPECT_EQ(num::dropout(x, 0.0, rng, true), x);
  EXPECT_EQ(num::dropout(x, 0.1, rng, false), x);
}

TEST(Dropout, ZeroedFraction) {
  num::Rng rng(2);
  const Tensor x(num::Shape{100000}, std::vector<double>(100000, 1.0));
  const Tensor y = num::dropout(x, 0.1, rng, true);
  std::size_t zeros = 0;
  for (double v : y.data()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.9);
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 100000, 0.1, 0.01);
}

TEST(Dropout, RejectsRateOne) {
  num::Rng rng(1);
  EXPECT_THROW(num::dropout(Tensor::vector({1}), 1.0, rng, true), Error);
  Tape tape;
  EXPECT_THROW(tape.dropout(tape.constant({1.0}), 1.0, rng, true), Error);
}

TEST(Matrices, RoundTripIsExact) {
  num::Rng rng(4);
  num::ParamStore ps;
  ps.add("w", num::xavier_uniform({3, 5}, rng));
  ps.add("b", Tensor::vector({1.0 / 3.0, -2e-300, 12345.678901234567}));
  std::stringstream s;
  num::write_matrices(s, ps);
  const num::ParamStore back = num::read_matrices(s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("w"), ps.at("w"));
  const auto b = back.at("b").data();
  EXPECT_EQ(std::vector<double>(b.begin(), b.end()),
            (std::vector<double>{1.0 / 3.0, -2e-300, 12345.678901234567}));
  EXPECT_EQ(back.at("b").shape(), (num::Shape{3, 1}));
}

TEST(Matrices, ShortRowIsAnError) {
  std::stringstream s("w 2 2\n1 2\n3\n");
  EXPECT_THROW(num::read_matrices(s), ParseError);
}

TEST(Matrices, ParseDoubleIsStrict) {
  EXPECT_EQ(num::parse_double("0.25"), 0.25);
  EXPECT_THROW(num::parse_double("0.25x"), Error);
  EXPECT_EQ(num::format_double(0.1), "0.10000000000000001");
}
