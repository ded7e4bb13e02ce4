#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hybo/ad/gradcheck.hpp"
#include "hybo/nn/layers.hpp"

using namespace hybo;
using namespace hybo::nn;
using ad::Tensor;

namespace {

Tensor<double> random_points(std::size_t rows, std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::vector<double> v;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto p = lorentz::random_point<double>(static_cast<Eigen::Index>(n), Curvature(), scale, rng);
    v.insert(v.end(), p.data(), p.data() + p.size());
  }
  return Tensor<double>({rows, n + 1}, std::move(v));
}

Tensor<double> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> g(0.0, s);
  std::vector<double> v(r * c);
  for (auto& x : v) x = g(rng);
  return Tensor<double>({r, c}, std::move(v));
}

std::vector<double> vals(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

double row_norm(const Tensor<double>& t, std::size_t r, std::size_t from) {
  double s = 0.0;
  for (std::size_t c = from; c < t.cols(); ++c) s += t.at(r, c) * t.at(r, c);
  return std::sqrt(s);
}

}  // namespace

TEST(LorentzLinearTest, TimeCoordinateAtZeroArgument) {
  Rng rng(1);
  ParameterStore<double> store;
  auto layer = LorentzLinear<double>::create(store, "l", 4, 3, LinearOptions{}, rng);
  store.value(layer.v()) = Tensor<double>::zeros({4, 1});
  Bound<double> params(store);
  const auto y = layer.forward(params, random_points(5, 3, rng));
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_NEAR(y.at(r, 0), 2.35, 1e-14);
    EXPECT_NEAR(row_norm(y, r, 1), 2.12661703181367398, 1e-13);
  }
  EXPECT_TRUE(check_points(y, Curvature()).ok(1e-12));
}

TEST(LorentzLinearTest, SingleRowKeepsDirection) {
  Rng rng(2);
  ParameterStore<double> store;
  auto layer = LorentzLinear<double>::create(store, "l", 3, 2, LinearOptions{}, rng);
  store.value(layer.weight()) = Tensor<double>({2, 3}, {0.0, 0.0, 0.0, 0.3, -1.0, 2.0});
  Bound<double> params(store);
  const auto x = random_points(10, 2, rng);
  const auto y = layer.forward(params, x);
  for (std::size_t r = 0; r < 10; ++r) {
    EXPECT_EQ(y.at(r, 1), 0.0);
    const double resp = 0.3 * x.at(r, 0) - x.at(r, 1) + 2.0 * x.at(r, 2);
    EXPECT_EQ(std::signbit(y.at(r, 2)), std::signbit(resp));
  }
}

TEST(LorentzLinearTest, InvalidOptionsRejected) {
  Rng rng(3);
  ParameterStore<double> store;
  LinearOptions bad;
  bad.epsilon = 1.0;
  EXPECT_THROW(LorentzLinear<double>::create(store, "a", 3, 2, bad, rng), std::invalid_argument);
  bad = LinearOptions{};
  bad.lambda = 0.0;
  EXPECT_THROW(LorentzLinear<double>::create(store, "b", 3, 2, bad, rng), std::invalid_argument);
  bad = LinearOptions{};
  bad.dropout = 1.0;
  EXPECT_THROW(LorentzLinear<double>::create(store, "c", 3, 2, bad, rng), std::invalid_argument);
  auto ok = LorentzLinear<double>::create(store, "d", 3, 2, LinearOptions{}, rng);
  EXPECT_THROW(LorentzLinear<double>::create(store, "d", 3, 2, LinearOptions{}, rng), std::invalid_argument);
  Bound<double> params(store);
  EXPECT_THROW(ok.forward(params, random_points(2, 3, rng)), ad::ShapeError);
}

TEST(LorentzLinearTest, DegenerateDirectionFallsBackToOrigin) {
  Rng rng(4);
  ParameterStore<double> store;
  auto layer = LorentzLinear<double>::create(store, "l", 3, 2, LinearOptions{}, rng);
  store.value(layer.weight()) = Tensor<double>::zeros({2, 3});
  const auto before = degenerate_row_count();
  Bound<double> params(store);
  const auto y = layer.forward(params, random_points(3, 2, rng));
  EXPECT_EQ(degenerate_row_count(), before + 3);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(y.at(r, 0), 1.0);
    EXPECT_EQ(row_norm(y, r, 1), 0.0);
  }
}

TEST(LorentzLinearTest, ClosureWithReluAndDropout) {
  Rng rng(5);
  ParameterStore<double> store;
  LinearOptions opts;
  opts.activation = Activation::relu;
  opts.dropout = 0.2;
  opts.spatial_bias = true;
  opts.init_range = 1.0;
  auto layer = LorentzLinear<double>::create(store, "l", 6, 4, opts, rng);
  Bound<double> params(store);
  Rng drop(6);
  for (int i = 0; i < 50; ++i) {
    const auto y = layer.forward(params, random_points(20, 5, rng, 2.0), &drop);
    EXPECT_TRUE(check_points(y, Curvature()).ok(1e-9));
  }
}

TEST(LorentzLinearTest, WeightGradientMatchesFiniteDifferences) {
  Rng rng(7);
  ParameterStore<double> store;
  LinearOptions opts;
  opts.init_range = 0.5;
  opts.spatial_bias = true;
  auto layer = LorentzLinear<double>::create(store, "l", 4, 3, opts, rng);
  const auto x = random_points(6, 3, rng);
  for (std::size_t p = 0; p < store.size(); ++p) {
    const ParamId id{p};
    auto f = [&](const Tensor<double>& w) {
      Bound<double> params(store, w.tape());
      params.bind(id, w);
      return ad::mean(layer.forward(params, x));
    };
    const auto report = ad::finite_difference_check<double>(f, store.value(id), 1e-6, 1e-5);
    EXPECT_TRUE(report.passed) << store.entry(p).name << " " << report.max_rel_error;
  }
}

TEST(ResidualTest, ClosureAndGradients) {
  Rng rng(8);
  ParameterStore<double> store;
  LinearOptions opts;
  opts.init_range = 0.5;
  opts.activation = Activation::relu;
  auto layer = LorentzLinear<double>::create(store, "r", 5, 4, opts, rng);
  Bound<double> params(store);
  for (int i = 0; i < 100; ++i) {
    const auto y = layer.residual(params, random_points(10, 4, rng, 2.0), random_points(10, 4, rng, 2.0));
    EXPECT_TRUE(check_points(y, Curvature()).ok(1e-9));
  }
  const auto o = random_points(4, 4, rng);
  const auto x = random_points(4, 4, rng);
  auto via_o = [&](const Tensor<double>& t) {
    Bound<double> b(store, t.tape());
    return ad::sum(ad::square(layer.residual(b, t, x)));
  };
  auto via_x = [&](const Tensor<double>& t) {
    Bound<double> b(store, t.tape());
    return ad::sum(ad::square(layer.residual(b, o, t)));
  };
  const auto ro = ad::finite_difference_check<double>(via_o, o, 1e-6, 1e-5);
  const auto rx = ad::finite_difference_check<double>(via_x, x, 1e-6, 1e-5);
  EXPECT_TRUE(ro.passed) << ro.max_rel_error;
  EXPECT_TRUE(rx.passed) << rx.max_rel_error;
}

TEST(ResidualTest, PureSkipAndDegenerate) {
  Rng rng(9);
  ParameterStore<double> store;
  LinearOptions opts;
  opts.learn_lambda = false;
  auto layer = LorentzLinear<double>::create(store, "r", 3, 2, opts, rng);
  store.value(layer.weight()) = Tensor<double>::zeros({2, 3});
  Bound<double> params(store);
  const auto o = random_points(5, 2, rng);
  const auto x = random_points(5, 2, rng);
  const auto y = layer.residual(params, o, x);
  for (std::size_t r = 0; r < 5; ++r) {
    const double cosine = (y.at(r, 1) * x.at(r, 1) + y.at(r, 2) * x.at(r, 2)) / (row_norm(y, r, 1) * row_norm(x, r, 1));
    EXPECT_NEAR(cosine, 1.0, 1e-12);
  }
  // Zero weight and zero spatial bias leave the block input in place.
  const auto origin_rows = Tensor<double>({2, 3}, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  const auto z = layer.residual(params, random_points(2, 2, rng), origin_rows);
  EXPECT_EQ(vals(z), vals(origin_rows));
}

TEST(PositionEncodeTest, DistinctPositionsAndSharedMatrix) {
  Rng rng(10);
  ParameterStore<double> store;
  LinearOptions opts;
  opts.init_range = 0.3;
  auto enc = LorentzLinear<double>::create(store, "pos", 5, 4, opts, rng);
  Bound<double> params(store);
  const auto word = random_points(1, 4, rng);
  const auto positions = random_points(3, 4, rng);
  const auto words = ad::gather_rows(word, std::vector<std::size_t>{0, 0, 0});
  const auto y = enc.residual(params, words, positions);
  EXPECT_TRUE(check_points(y, Curvature()).ok(1e-9));
  EXPECT_GT(std::abs(y.at(0, 1) - y.at(1, 1)) + std::abs(y.at(0, 2) - y.at(1, 2)), 1e-6);
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto y_perm = enc.residual(params, words, ad::gather_rows(positions, perm));
  EXPECT_EQ(vals(y_perm), vals(ad::gather_rows(y, perm)));
}

TEST(AttentionTest, SingleKeyReturnsValue) {
  Rng rng(11);
  const auto q = random_points(4, 3, rng);
  const auto k = random_points(1, 3, rng);
  const auto v = random_points(1, 3, rng);
  const auto out = lorentz_attention(q, k, v, 3, Curvature());
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.at(r, c), v.at(0, c), 1e-13);
  EXPECT_THROW(lorentz_attention(q, k, random_points(2, 3, rng), 3, Curvature()), ad::ShapeError);
}

TEST(AttentionTest, EquidistantKeysAndMonotonicity) {
  const double c1 = std::cosh(1.0), s1 = std::sinh(1.0);
  const Tensor<double> q({1, 3}, {1.0, 0.0, 0.0});
  const Tensor<double> keys({2, 3}, {c1, s1, 0.0, c1, 0.0, -s1});
  const auto w = attention_weights(q, keys, 2, Curvature());
  EXPECT_NEAR(w.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(w.at(0, 1), 0.5, 1e-15);
  const double c2 = std::cosh(0.5), s2 = std::sinh(0.5);
  const Tensor<double> closer({2, 3}, {c2, s2, 0.0, c1, 0.0, -s1});
  const auto w2 = attention_weights(q, closer, 2, Curvature());
  EXPECT_GT(w2.at(0, 0), 0.5);
}

TEST(AttentionTest, NormalizedAndPermutationEquivariant) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = random_points(3, 4, rng);
    const auto k = random_points(5, 4, rng);
    const auto v = random_points(5, 4, rng);
    const auto w = attention_weights(q, k, 4, Curvature());
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 5; ++c) s += w.at(r, c);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    const std::vector<std::size_t> perm{3, 1, 4, 0, 2};
    const auto a = lorentz_attention(q, k, v, 4, Curvature());
    const auto b = lorentz_attention(q, ad::gather_rows(k, perm), ad::gather_rows(v, perm), 4, Curvature());
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * std::max(1.0, std::abs(a[i])));
    EXPECT_TRUE(check_points(a, Curvature()).ok(1e-9));
  }
}

TEST(AttentionTest, MaskExcludesKeys) {
  Rng rng(13);
  const auto q = random_points(2, 3, rng);
  const auto k = random_points(3, 3, rng);
  const auto v = random_points(3, 3, rng);
  const double m = mask_out<double>();
  const Tensor<double> mask({2, 3}, {0.0, m, m, m, m, 0.0});
  const auto out = lorentz_attention(q, k, v, 3, Curvature(), std::optional<Tensor<double>>(mask));
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(out.at(0, c), v.at(0, c), 1e-12);
    EXPECT_NEAR(out.at(1, c), v.at(2, c), 1e-12);
  }
}

TEST(CentroidTensorTest, MatchesReferenceAndScaleInvariant) {
  Rng rng(14);
  const auto pts = random_points(4, 3, rng);
  const Tensor<double> w({1, 4}, {0.1, 0.5, 0.2, 0.7});
  const auto mu = centroid(w, pts, Curvature());
  lorentz::Mat<double> m(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) m(c, r) = pts.at(r, c);
  lorentz::Vec<double> wv(4);
  wv << 0.1, 0.5, 0.2, 0.7;
  const auto ref = lorentz::centroid(wv, m);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(mu.at(0, c), ref(c), 1e-14);
  const auto scaled = centroid(w * 10.0, pts, Curvature());
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(scaled.at(0, c), mu.at(0, c), 1e-12);
}

TEST(MultiHeadAttentionTest, ClosureAndGradient) {
  Rng rng(15);
  ParameterStore<double> store;
  AttentionConfig cfg;
  cfg.heads = 4;
  cfg.in_features = 5;
  cfg.head_spatial = 3;
  cfg.out_spatial = 4;
  cfg.projection.init_range = 0.5;
  cfg.output.init_range = 0.5;
  auto mha = MultiHeadAttention<double>::create(store, "mha", cfg, rng);
  Bound<double> params(store);
  const auto q = random_points(8, 4, rng);
  const auto kv = random_points(8, 4, rng);
  const auto out = mha.forward(params, q, kv, kv);
  ASSERT_EQ(out.shape(), (ad::Shape{8, 5}));
  EXPECT_TRUE(check_points(out, Curvature()).ok(1e-9));

  for (const char* name : {"mha.head0.query.weight", "mha.head3.value.weight", "mha.head2.key.v", "mha.output.weight"}) {
    const ParamId id = *store.find(name);
    auto f = [&](const Tensor<double>& w) {
      Bound<double> b(store, w.tape());
      b.bind(id, w);
      return ad::mean(mha.forward(b, q, kv, kv));
    };
    const auto report = ad::finite_difference_check<double>(f, store.value(id), 1e-6, 1e-5);
    EXPECT_TRUE(report.passed) << name << " " << report.max_rel_error;
  }
}

TEST(FxTensorTest, MatchesEigenReference) {
  Rng rng(16);
  const auto x = random_points(6, 4, rng);
  const auto w = random_matrix(3, 5, rng);
  const auto y = fx_transform(w, x, Curvature());
  for (std::size_t r = 0; r < 6; ++r) {
    lorentz::Mat<double> m(4, 5);
    m.row(0).setOnes();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) m(i + 1, j) = w.at(i, j);
    lorentz::Vec<double> xv(5);
    for (std::size_t j = 0; j < 5; ++j) xv(j) = x.at(r, j);
    const auto ref = lorentz::fx_transform(m, xv);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(y.at(r, c), ref(c), 1e-12 * std::max(1.0, std::abs(ref(c))));
  }
}
