#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "hybo/ad/gradcheck.hpp"
#include "hybo/ad/tensor.hpp"

using namespace hybo::ad;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor<double>(std::move(shape), std::move(v));
}

// Independent central-difference derivative of a scalar function.
double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST(TensorTest, ShapeInvariantEnforced) {
  EXPECT_THROW(Tensor<double>({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor<double>({0}, {}), ShapeError);
  Tensor<double> t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_FALSE(t.requires_grad());
}

TEST(TensorTest, ForwardExamples) {
  EXPECT_DOUBLE_EQ(square(Tensor<double>::scalar(3.0)).item(), 9.0);

  const auto sm = softmax_last(Tensor<double>({2}, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(sm[0], 0.5);
  EXPECT_DOUBLE_EQ(sm[1], 0.5);

  const auto prod = matmul(Tensor<double>::full({2, 3}, 1.0), Tensor<double>::full({3, 1}, 1.0));
  ASSERT_EQ(prod.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(prod.at(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(prod.at(1, 0), 3.0);
}

TEST(TensorTest, ShapeMismatchNamesOperationAndShapes) {
  try {
    (void)add(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({3, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[3x2]"), std::string::npos);
  }
  EXPECT_THROW((void)matmul(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2, 3})), ShapeError);
}

TEST(TensorTest, ArcoshBelowOneIsDomainError) {
  EXPECT_THROW((void)arcosh(Tensor<double>::scalar(0.5)), DomainError);
  // Exactly 1 is evaluated at the clamp rather than producing an infinite slope.
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::scalar(1.0));
  auto y = arcosh(x);
  EXPECT_NEAR(y.item(), 0.0, 1e-5);
  tape.backward(y);
  EXPECT_TRUE(std::isfinite(tape.grad(x)[0]));
}

TEST(BackwardTest, PowerRule) {
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::scalar(3.0));
  tape.backward(square(x));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 6.0);
}

TEST(BackwardTest, SigmoidSlopeAtZero) {
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::zeros({4}));
  tape.backward(sum(sigmoid(x)));
  for (double g : tape.grad(x)) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(BackwardTest, ArcoshMatchesCentralDifference) {
  const double fd = central_difference([](double v) { return std::acosh(v); }, 2.0, 1e-6);
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::scalar(2.0));
  tape.backward(arcosh(x));
  const double g = tape.grad(x)[0];
  EXPECT_NEAR(g, 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(g, fd, 1e-8);
}

TEST(BackwardTest, NonScalarRootRejected) {
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::zeros({3}));
  EXPECT_THROW(tape.backward(square(x)), ShapeError);
}

TEST(BackwardTest, NonParticipatingLeavesAreZeroFilled) {
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::full({2}, 1.0));
  auto unused = tape.watch(Tensor<double>::full({3}, 5.0));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(unused), std::vector<double>(3, 0.0));
}

TEST(BackwardTest, ConstantsNeverAllocateGradientSlots) {
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::full({2}, 1.0));
  const auto c = Tensor<double>::full({2}, 2.0);
  auto y = sum(x * c);
  tape.backward(y);
  // One slot each for the root, the product and the leaf; none for c.
  EXPECT_EQ(tape.allocated_grad_slots(), 3u);
  EXPECT_EQ(tape.grad(c), std::vector<double>(2, 0.0));
}

TEST(BackwardTest, TopologicalOrderIsCreationOrder) {
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::scalar(2.0));
  auto y = exp(x) * x;
  for (NodeId id = 0; id < static_cast<NodeId>(tape.size()); ++id) {
    for (NodeId in : tape.inputs_of(id)) EXPECT_LT(in, id);
  }
  tape.backward(y);
  EXPECT_NEAR(tape.grad(x)[0], std::exp(2.0) * 3.0, 1e-12);
}

TEST(BackwardTest, ClampMinPassesGradientAboveThresholdOnly) {
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>({3}, {-1.0, 0.5, 2.0}));
  tape.backward(sum(clamp_min(x, 0.7)));
  EXPECT_EQ(tape.grad(x), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(BackwardTest, DropoutUsesRecordedMask) {
  std::mt19937_64 rng(3);
  Tape<double> tape;
  auto x = tape.watch(Tensor<double>::full({64}, 1.0));
  auto y = dropout(x, 0.5, rng);
  tape.backward(sum(y));
  const auto g = tape.grad(x);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_DOUBLE_EQ(g[i], y[i]);  // mask value equals output for unit input
    EXPECT_TRUE(y[i] == 0.0 || y[i] == 2.0);
  }
}

TEST(SoftmaxTest, NormalizedAndShiftInvariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto logits = random_tensor({3, 7}, rng, -20.0, 20.0);
    const auto p = softmax_last(logits);
    const auto q = softmax_last(logits + 123.25);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      std::size_t arg_p = 0, arg_q = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        s += p.at(r, c);
        EXPECT_NEAR(p.at(r, c), q.at(r, c), 1e-12);
        if (p.at(r, c) > p.at(r, arg_p)) arg_p = c;
        if (q.at(r, c) > q.at(r, arg_q)) arg_q = c;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
      EXPECT_EQ(arg_p, arg_q);
    }
  }
}

TEST(GradCheckTest, SumOfSquares) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor({10}, rng);
  const auto report = finite_difference_check<double>(
      [](const Tensor<double>& v) { return sum(square(v)); }, x, 1e-6, 1e-6);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-6);
  EXPECT_EQ(report.checked, 10u);
}

TEST(GradCheckTest, KinkWithinMarginIsSkipped) {
  // Element 1 sits 2h from the clamp threshold; element 0 is far away.
  const double h = 1e-6;
  const Tensor<double> x({2}, {0.5, 2.0 * h});
  const auto report = finite_difference_check<double>(
      [](const Tensor<double>& v) { return sum(clamp_min(v, 0.0)); }, x, h, 1e-6);
  EXPECT_EQ(report.skipped, 1u);
  EXPECT_EQ(report.checked, 1u);
  EXPECT_TRUE(report.passed);
}

TEST(GradCheckTest, ConstantFunctionPasses) {
  const auto report = finite_difference_check<double>(
      [](const Tensor<double>& v) { return sum(v * 0.0) + 4.0; }, Tensor<double>::full({3}, 1.0), 1e-6, 1e-6);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.max_rel_error, 0.0);
}

TEST(GradCheckTest, NanIsReportedAsFailure) {
  const auto report = finite_difference_check<double>(
      [](const Tensor<double>& v) { return sum(sqrt(v)); }, Tensor<double>::full({2}, -1.0), 1e-6, 1e-6);
  EXPECT_FALSE(report.passed);
  EXPECT_TRUE(report.has_nan);
}

TEST(GradCheckTest, RejectsOversizedStep) {
  EXPECT_THROW((void)finite_difference_check<double>([](const Tensor<double>& v) { return sum(v); },
                                                     Tensor<double>::scalar(1.0), 1e-2, 1e-6),
               std::invalid_argument);
}

// Every primitive with a smooth domain, checked on 100 random inputs.
TEST(GradCheckTest, PrimitivesMatchFiniteDifferences) {
  using Fn = std::function<Tensor<double>(const Tensor<double>&)>;
  std::mt19937_64 rng(17);
  const auto w = random_tensor({4, 3}, rng);
  const auto c = random_tensor({3, 4}, rng, 0.5, 1.5);
  const std::vector<std::pair<std::string, Fn>> cases = {
      {"add", [&](const auto& v) { return sum(square(v + c)); }},
      {"sub", [&](const auto& v) { return sum(square(c - v)); }},
      {"mul", [&](const auto& v) { return sum(v * v * c); }},
      {"div", [&](const auto& v) { return sum(v / c) + sum(c / (square(v) + 1.0)); }},
      {"neg", [&](const auto& v) { return sum(square(-v)); }},
      {"matmul", [&](const auto& v) { return sum(square(matmul(v, w))); }},
      {"transpose", [&](const auto& v) { return sum(transpose(v) * transpose(c)); }},
      {"mean", [&](const auto& v) { return mean(square(v)); }},
      {"sum_last", [&](const auto& v) { return sum(square(sum_last(v))); }},
      {"norm2_last", [&](const auto& v) { return sum(norm2_last(v + 2.0)); }},
      {"concat_last", [&](const auto& v) { return sum(square(concat_last<double>({v, c, v}))); }},
      {"slice_last", [&](const auto& v) { return sum(square(slice_last(v, 1, 3))); }},
      {"broadcast_last", [&](const auto& v) { return sum(broadcast_last(sum_last(v), 5) * broadcast_last(sum_last(c), 5)); }},
      {"gather_rows", [&](const auto& v) {
         const std::vector<std::size_t> idx{2, 0, 2};
         return sum(square(gather_rows(v, std::span<const std::size_t>(idx))));
       }},
      {"sqrt", [&](const auto& v) { return sum(sqrt(square(v) + 1.0)); }},
      {"exp", [&](const auto& v) { return sum(exp(v)); }},
      {"log", [&](const auto& v) { return sum(log(square(v) + 0.5)); }},
      {"cosh", [&](const auto& v) { return sum(cosh(v)); }},
      {"sinh", [&](const auto& v) { return sum(sinh(v) * c); }},
      {"arcosh", [&](const auto& v) { return sum(arcosh(square(v) + 1.5)); }},
      {"sigmoid", [&](const auto& v) { return sum(sigmoid(v * 3.0)); }},
      {"log_sigmoid", [&](const auto& v) { return sum(log_sigmoid(v * 4.0)); }},
      {"softmax_last", [&](const auto& v) { return sum(softmax_last(v) * c); }},
      {"log_softmax_last", [&](const auto& v) { return sum(log_softmax_last(v) * c); }},
      {"clamp_min", [&](const auto& v) { return sum(square(clamp_min(v, 0.1))); }},
  };
  for (const auto& [name, f] : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = random_tensor({3, 4}, rng);
      const auto report = finite_difference_check<double>(f, x, 1e-6, 1e-5);
      worst = std::max(worst, report.max_rel_error);
      ASSERT_TRUE(report.passed) << name << " trial " << trial << " err " << report.max_rel_error;
    }
    EXPECT_LT(worst, 1e-5) << name;
  }
}

TEST(DeterminismTest, ReplayWithSameSeedIsBitIdentical) {
  auto run = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::mt19937_64 data_rng(99);
    const auto x0 = random_tensor({5, 6}, data_rng);
    const auto w0 = random_tensor({6, 2}, data_rng);
    Tape<double> tape;
    auto x = tape.watch(x0);
    auto w = tape.watch(w0);
    auto y = sum(log_sigmoid(matmul(dropout(x, 0.3, rng), w)));
    tape.backward(y);
    auto gx = tape.grad(x);
    auto gw = tape.grad(w);
    gx.insert(gx.end(), gw.begin(), gw.end());
    return gx;
  };
  EXPECT_EQ(run(7), run(7));
  EXPECT_NE(run(7), run(8));
}

TEST(FloatModeTest, ThirtyTwoBitPrimitivesWork) {
  Tape<float> tape;
  auto x = tape.watch(Tensor<float>::scalar(2.0f));
  tape.backward(arcosh(x));
  EXPECT_NEAR(tape.grad(x)[0], 1.0f / std::sqrt(3.0f), 1e-6f);
}
