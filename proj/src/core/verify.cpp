#include "hybo/verify/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "hybo/ad/gradcheck.hpp"
#include "hybo/lorentz/manifold.hpp"
#include "hybo/models/gcn.hpp"
#include "hybo/models/kg.hpp"
#include "hybo/models/transformer.hpp"
#include "hybo/nn/layers.hpp"

namespace hybo::verify {

namespace {

using lorentz::Curvature;
using Vec = lorentz::Vec<double>;
using Mat = lorentz::Mat<double>;
using Rng = std::mt19937_64;
using ad::Tensor;

constexpr double kManifoldTol = 1e-9;
constexpr double kRoundtripTol = 1e-8;
constexpr double kGradTol = 1e-5;
constexpr double kGradStep = 1e-6;

// Accumulates the worst error of one named check.
class Tracker {
 public:
  Tracker(std::string name, double tolerance) {
    check_.name = std::move(name);
    check_.tolerance = tolerance;
  }
  void observe(double error, const std::string& context = {}) {
    ++check_.trials;
    if (std::isnan(error) || error > check_.max_error) {
      check_.max_error = std::isnan(error) ? std::numeric_limits<double>::infinity() : error;
      if (!context.empty()) check_.detail = context;
    }
  }
  void fail(const std::string& why) {
    ++check_.trials;
    check_.max_error = std::numeric_limits<double>::infinity();
    check_.detail = why;
  }
  Check done() {
    check_.passed = check_.max_error < check_.tolerance;
    return check_;
  }

 private:
  Check check_;
};

Eigen::Index pick_dim(Rng& rng, Eigen::Index lo = 2, Eigen::Index hi = 8) {
  return std::uniform_int_distribution<Eigen::Index>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Mat gaussian_matrix(Eigen::Index r, Eigen::Index c, double scale, Rng& rng) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

// Manifold violation of a point, infinite when the time coordinate is not positive.
double point_error(const Vec& y, Curvature K) {
  if (!(y(0) > 0.0)) return std::numeric_limits<double>::infinity();
  return lorentz::manifold_error<double>(y, K);
}

double rows_error(const Tensor<double>& t, Curvature K) {
  const auto c = nn::check_points(t, K);
  return c.time_positive ? c.max_error : std::numeric_limits<double>::infinity();
}

double rel_error(const Vec& a, const Vec& b) {
  const double scale = b.norm();
  return (a - b).norm() / (scale > 0.0 ? scale : 1.0);
}

Tensor<double> to_rows(const std::vector<Vec>& points) {
  const std::size_t cols = static_cast<std::size_t>(points.front().size());
  std::vector<double> v;
  v.reserve(points.size() * cols);
  for (const auto& p : points) v.insert(v.end(), p.data(), p.data() + p.size());
  return Tensor<double>({points.size(), cols}, std::move(v));
}

Tensor<double> random_rows(std::size_t rows, Eigen::Index n, Curvature K, Rng& rng, double scale = 1.0) {
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < rows; ++i) pts.push_back(lorentz::random_point<double>(n, K, scale, rng));
  return to_rows(pts);
}

nn::LinearOptions random_options(Rng& rng) {
  nn::LinearOptions o;
  o.init_range = uniform(rng, 0.05, 1.0);
  o.lambda = uniform(rng, 0.5, 4.0);
  o.activation = rng() % 2 == 0 ? nn::Activation::identity : nn::Activation::relu;
  o.spatial_bias = rng() % 2 == 0;
  return o;
}

// ---- manifold -------------------------------------------------------------

std::vector<Check> manifold_suite(std::size_t trials, Rng& rng) {
  const Curvature K;
  Tracker exp_t("exp_map", kManifoldTol), log_t("log_map", kManifoldTol), fx_t("fx_transform", kManifoldTol),
      lin_t("lorentz_linear", kManifoldTol), cen_t("centroid", kManifoldTol), att_t("attention", kManifoldTol),
      res_t("residual", kManifoldTol), pos_t("position_encode", kManifoldTol),
      exp_log("exp_log_roundtrip", kRoundtripTol), log_exp("log_exp_roundtrip", kRoundtripTol);

  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::Index n = pick_dim(rng);
    const Vec x = lorentz::random_point<double>(n, K, 1.0, rng);

    // A tangent vector of Lorentzian norm in (0, 5], so d(x, exp_x z) <= 5.
    Vec z = lorentz::random_tangent<double>(x, K, 1.0, rng);
    z *= uniform(rng, 1e-3, 5.0) / lorentz::lorentz_norm<double>(z);
    const Vec y = lorentz::exp_map<double>(x, z, K);
    exp_t.observe(point_error(y, K));

    const Vec w = lorentz::random_point<double>(n, K, 1.0, rng);
    const Vec u = lorentz::log_map<double>(x, w, K);
    // log_map yields a tangent vector: report its normal component, and the
    // manifold error of mapping it back.
    log_t.observe(std::max(std::abs(lorentz::lorentz_inner<double>(x, u)) / std::max(1.0, u.norm()),
                           point_error(lorentz::exp_map<double>(x, u, K), K)));

    log_exp.observe(rel_error(lorentz::log_map<double>(x, y, K), z));
    exp_log.observe(rel_error(lorentz::exp_map<double>(x, u, K), w));

    const Eigen::Index m = pick_dim(rng);
    fx_t.observe(point_error(lorentz::fx_transform<double>(gaussian_matrix(m + 1, n + 1, 1.0, rng), x, K), K));

    // Tensor-level layers on small random batches.
    const std::size_t rows = 1 + rng() % 4;
    const auto xs = random_rows(rows, n, K, rng);
    {
      nn::ParameterStore<double> store;
      auto layer = nn::LorentzLinear<double>::create(store, "l", static_cast<std::size_t>(n + 1),
                                                     static_cast<std::size_t>(m), random_options(rng), rng, K);
      nn::Bound<double> params(store);
      lin_t.observe(rows_error(layer.forward(params, xs), K));
    }
    {
      nn::ParameterStore<double> store;
      auto layer = nn::LorentzLinear<double>::create(store, "r", static_cast<std::size_t>(n + 1),
                                                     static_cast<std::size_t>(n), random_options(rng), rng, K);
      nn::Bound<double> params(store);
      res_t.observe(rows_error(layer.residual(params, random_rows(rows, n, K, rng), xs), K));
    }
    {
      const std::size_t k = 1 + rng() % 6;
      std::vector<double> wv(rows * k);
      for (auto& v : wv) v = uniform(rng, 0.0, 1.0);
      wv[0] += 1e-3;
      cen_t.observe(rows_error(nn::centroid(Tensor<double>({rows, k}, wv), random_rows(k, n, K, rng, 2.0), K), K));
      const auto keys = random_rows(k, n, K, rng, 2.0);
      att_t.observe(rows_error(
          nn::lorentz_attention(xs, keys, random_rows(k, n, K, rng, 2.0), static_cast<std::size_t>(n), K), K));
    }
    {
      models::TransformerConfig tc;
      tc.vocab = 5;
      tc.max_len = 6;
      tc.dim = static_cast<std::size_t>(n);
      tc.layers = 0;
      tc.embed_scale = uniform(rng, 0.1, 2.0);
      nn::ParameterStore<double> store;
      auto model = models::ToyTransformer<double>::create(store, tc, rng, K);
      std::vector<std::uint32_t> seq(1 + rng() % tc.max_len);
      for (auto& s : seq) s = static_cast<std::uint32_t>(rng() % tc.vocab);
      nn::Bound<double> params(store);
      std::vector<Tensor<double>> trace;
      model.forward(params, {seq}, nullptr, &trace);
      pos_t.observe(rows_error(trace.at(2), K));
    }
  }
  return {exp_t.done(), log_t.done(), fx_t.done(), lin_t.done(), cen_t.done(), att_t.done(),
          res_t.done(), pos_t.done(), exp_log.done(), log_exp.done()};
}

// ---- theorem1 -------------------------------------------------------------

std::vector<Check> theorem1_suite(std::size_t trials, Rng& rng) {
  const Curvature K;
  Tracker composed("fx_transform_on_manifold", kManifoldTol), matrix("fx_matrix_times_x_on_manifold", kManifoldTol),
      agree("fx_matrix_matches_transform", kRoundtripTol);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::Index n = pick_dim(rng), m = pick_dim(rng);
    const Mat M = gaussian_matrix(m + 1, n + 1, uniform(rng, 0.1, 3.0), rng);
    const Vec x = lorentz::random_point<double>(n, K, uniform(rng, 0.1, 2.0), rng);
    const Vec y = lorentz::fx_transform<double>(M, x, K);
    composed.observe(point_error(y, K));
    if (std::abs(M.row(0).dot(x)) < lorentz::kConstructionTol) continue;
    const Vec ym = lorentz::fx_matrix<double>(M, x, K) * x;
    matrix.observe(point_error(ym, K));
    agree.observe(rel_error(ym, y));
  }
  return {composed.done(), matrix.done(), agree.done()};
}

// ---- lemma1 ---------------------------------------------------------------

std::vector<Check> lemma1_suite(std::size_t trials, Rng& rng) {
  const Curvature K;
  constexpr int kPointsPerMatrix = 50;
  Tracker boosts("boost_fixed_point", kManifoldTol), rotations("rotation_fixed_point", kManifoldTol);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::Index n = pick_dim(rng);
    const Mat B = lorentz::boost_matrix<double>(lorentz::random_velocity<double>(n, 0.9, rng));
    const Mat R = lorentz::rotation_matrix<double>(lorentz::random_rotation<double>(n, rng));
    for (int i = 0; i < kPointsPerMatrix; ++i) {
      const Vec x = lorentz::random_point<double>(n, K, 1.0, rng);
      boosts.observe((lorentz::fx_matrix<double>(B, x, K) - B).cwiseAbs().maxCoeff());
      rotations.observe((lorentz::fx_matrix<double>(R, x, K) - R).cwiseAbs().maxCoeff());
    }
  }
  return {boosts.done(), rotations.done()};
}

// ---- lemma2 ---------------------------------------------------------------

std::vector<Check> lemma2_suite(std::size_t trials, Rng& rng) {
  const Curvature K;
  Tracker closed_vs_composite("closed_form_vs_composite", kRoundtripTol),
      closed_vs_fx("closed_form_vs_fx_of_block_matrix", kRoundtripTol),
      composite_vs_fx("composite_vs_fx_of_block_matrix", kRoundtripTol),
      zero_block("block_matrix_zero_time_space_blocks", 0.5), boost_block("boost_nonzero_time_space_block", 0.5),
      identity("only_boost_in_family_is_identity", kRoundtripTol);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::Index n = pick_dim(rng);
    const Mat W = gaussian_matrix(n, n, uniform(rng, 0.2, 1.5), rng);
    const Vec x = lorentz::random_point<double>(n, K, uniform(rng, 0.1, 2.0), rng);
    const Vec closed = lorentz::pseudo_rotation<double>(W, x, K);
    const Vec composite = lorentz::pseudo_rotation_composite<double>(W, x, K);
    const Mat H = lorentz::pseudo_rotation_matrix<double>(W, x, K);
    // f_x of the induced block matrix; its time row is rescaled away.
    const Vec via_fx = lorentz::fx_transform<double>(H, x, K);
    closed_vs_composite.observe(rel_error(closed, composite));
    closed_vs_fx.observe(rel_error(closed, via_fx));
    composite_vs_fx.observe(rel_error(composite, via_fx));

    const bool zero = H.block(0, 1, 1, n).cwiseAbs().maxCoeff() == 0.0 && H.block(1, 0, n, 1).cwiseAbs().maxCoeff() == 0.0;
    zero_block.observe(zero ? 0.0 : 1.0, zero ? "" : "non-zero time/space block in pseudo-rotation matrix");
    const Vec v = lorentz::random_velocity<double>(n, 0.9, rng);
    if (v.norm() > 1e-6) {
      const bool nonzero = lorentz::boost_matrix<double>(v).block(0, 1, 1, n).cwiseAbs().maxCoeff() > 0.0;
      boost_block.observe(nonzero ? 0.0 : 1.0, nonzero ? "" : "boost with v != 0 has a zero time/space block");
    }
    // With W = I the family member is a boost, and then it must be I.
    const Mat HI = lorentz::pseudo_rotation_matrix<double>(Mat::Identity(n, n), x, K);
    identity.observe((HI - lorentz::boost_matrix<double>(Vec::Zero(n))).cwiseAbs().maxCoeff());
  }
  return {closed_vs_composite.done(), closed_vs_fx.done(), composite_vs_fx.done(),
          zero_block.done(), boost_block.done(), identity.done()};
}

// ---- centroid -------------------------------------------------------------

double centroid_objective(const Vec& c, const Vec& weights, const Mat& points, Curvature K) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    total += weights(i) * lorentz::squared_distance<double>(c, points.col(i), K);
  }
  return total;
}

std::vector<Check> centroid_suite(std::size_t trials, Rng& rng) {
  const Curvature K;
  constexpr int kConfigurations = 20;
  Tracker optimal("objective_not_above_candidates", 1e-12), scale("weight_scale_invariance", 1e-12),
      closure("on_manifold", kManifoldTol);
  for (int cfg = 0; cfg < kConfigurations; ++cfg) {
    const Eigen::Index n = pick_dim(rng);
    const Eigen::Index k = pick_dim(rng, 2, 10);
    Mat pts(n + 1, k);
    for (Eigen::Index i = 0; i < k; ++i) pts.col(i) = lorentz::random_point<double>(n, K, uniform(rng, 0.2, 2.0), rng);
    Vec w(k);
    for (Eigen::Index i = 0; i < k; ++i) w(i) = uniform(rng, 0.05, 1.0);
    const Vec c = lorentz::centroid<double>(w, pts, K);
    closure.observe(point_error(c, K));
    const double best = centroid_objective(c, w, pts, K);
    for (std::size_t t = 0; t < trials; ++t) {
      // Half the candidates near the centroid, half anywhere.
      Vec cand;
      if (t % 2 == 0) {
        Vec z = lorentz::random_tangent<double>(c, K, 1.0, rng);
        z *= uniform(rng, 1e-4, 0.5) / std::max(lorentz::lorentz_norm<double>(z), 1e-300);
        cand = lorentz::exp_map<double>(c, z, K);
      } else {
        cand = lorentz::random_point<double>(n, K, uniform(rng, 0.2, 3.0), rng);
      }
      // Positive when the candidate beats the centroid, relative to the objective.
      optimal.observe(std::max(0.0, (best - centroid_objective(cand, w, pts, K)) / std::max(1.0, best)));
    }
    for (double s : {0.1, 10.0}) scale.observe((lorentz::centroid<double>(Vec(s * w), pts, K) - c).cwiseAbs().maxCoeff());
  }
  return {optimal.done(), scale.done(), closure.done()};
}

// ---- gradients ------------------------------------------------------------

using Fn = std::function<Tensor<double>(const Tensor<double>&)>;

void grad_check(Tracker& tr, const Fn& f, const Tensor<double>& at, const std::string& what) {
  try {
    const auto r = ad::finite_difference_check<double>(f, at, kGradStep, kGradTol);
    if (r.has_nan) {
      tr.fail(what + ": NaN in gradient");
    } else {
      tr.observe(r.max_rel_error, what);
    }
  } catch (const std::exception& e) {
    tr.fail(what + ": " + e.what());
  }
}

// Moves every parameter off its initial value; zero-initialized biases can
// sit exactly on a degenerate point of the layer.
void jitter(nn::ParameterStore<double>& store, Rng& rng) {
  for (std::size_t p = 0; p < store.size(); ++p)
    for (auto& v : store.entry(p).value.mutable_values()) v += uniform(rng, -0.1, 0.1);
}

// Finite-difference checks of every parameter of `store` through `loss`.
void check_params(Tracker& tr, nn::ParameterStore<double>& store,
                  const std::function<Tensor<double>(nn::Bound<double>&)>& loss) {
  for (std::size_t p = 0; p < store.size(); ++p) {
    const nn::ParamId id{p};
    auto f = [&](const Tensor<double>& w) {
      nn::Bound<double> params(store, w.tape());
      params.bind(id, w);
      return loss(params);
    };
    grad_check(tr, f, store.value(id), store.entry(p).name);
  }
}

std::vector<Check> gradients_suite(std::size_t trials, Rng& rng) {
  const Curvature K;
  Rng jitter_rng(rng());
  const std::size_t instances = std::min<std::size_t>(trials, 3);
  Tracker fx("fx_transform", kGradTol), linear("lorentz_linear", kGradTol), residual("residual", kGradTol),
      cen("centroid", kGradTol), att("attention", kGradTol), mha("multi_head_attention", kGradTol),
      gcn("gcn_layer", kGradTol), kg("kg_loss", kGradTol), link("link_loss", kGradTol),
      cls("classification_loss", kGradTol);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t n = 3 + inst;
    const std::uint64_t dseed = rng();
    const auto x = random_rows(4, static_cast<Eigen::Index>(n), K, rng);
    const auto x2 = random_rows(4, static_cast<Eigen::Index>(n), K, rng);

    {
      const Tensor<double> w({n - 1, n + 1}, [&] {
        std::vector<double> v((n - 1) * (n + 1));
        for (auto& e : v) e = uniform(rng, -1.0, 1.0);
        return v;
      }());
      grad_check(fx, [&](const Tensor<double>& t) { return ad::mean(nn::fx_transform(t, x, K)); }, w, "weight");
      grad_check(fx, [&](const Tensor<double>& t) { return ad::mean(nn::fx_transform(w, t, K)); }, x, "points");
    }
    {
      nn::ParameterStore<double> store;
      nn::LinearOptions o = random_options(rng);
      o.spatial_bias = true;
      o.dropout = 0.2;
      auto layer = nn::LorentzLinear<double>::create(store, "linear", n + 1, n - 1, o, rng, K);
      // Dropout masks are frozen by reseeding on every evaluation.
      auto loss = [&](nn::Bound<double>& b, const Tensor<double>& in) {
        Rng drop(dseed);
        return ad::mean(layer.forward(b, in, &drop));
      };
      jitter(store, jitter_rng);
      check_params(linear, store, [&](nn::Bound<double>& b) { return loss(b, x); });
      grad_check(linear, [&](const Tensor<double>& t) {
        nn::Bound<double> b(store, t.tape());
        return loss(b, t);
      }, x, "input");
    }
    {
      nn::ParameterStore<double> store;
      auto layer = nn::LorentzLinear<double>::create(store, "residual", n + 1, n, random_options(rng), rng, K);
      jitter(store, jitter_rng);
      check_params(residual, store, [&](nn::Bound<double>& b) { return ad::mean(layer.residual(b, x, x2)); });
      grad_check(residual, [&](const Tensor<double>& t) {
        nn::Bound<double> b(store, t.tape());
        return ad::mean(layer.residual(b, t, x2));
      }, x, "block output");
      grad_check(residual, [&](const Tensor<double>& t) {
        nn::Bound<double> b(store, t.tape());
        return ad::mean(layer.residual(b, x, t));
      }, x2, "block input");
    }
    {
      std::vector<double> wv(3 * 4);
      for (auto& e : wv) e = uniform(rng, 0.1, 1.0);
      const Tensor<double> w({3, 4}, wv);
      grad_check(cen, [&](const Tensor<double>& t) { return ad::mean(nn::centroid(t, x, K)); }, w, "weights");
      grad_check(cen, [&](const Tensor<double>& t) { return ad::mean(nn::centroid(w, t, K)); }, x, "points");
    }
    {
      const auto q = random_rows(3, static_cast<Eigen::Index>(n), K, rng);
      grad_check(att, [&](const Tensor<double>& t) { return ad::mean(nn::lorentz_attention(t, x, x2, n, K)); }, q, "queries");
      grad_check(att, [&](const Tensor<double>& t) { return ad::mean(nn::lorentz_attention(q, t, x2, n, K)); }, x, "keys");
      grad_check(att, [&](const Tensor<double>& t) { return ad::mean(nn::lorentz_attention(q, x, t, n, K)); }, x2, "values");
    }
    {
      nn::ParameterStore<double> store;
      nn::AttentionConfig ac;
      ac.heads = 2;
      ac.in_features = n + 1;
      ac.head_spatial = 2;
      ac.out_spatial = n;
      ac.projection.init_range = 0.5;
      ac.output.init_range = 0.5;
      auto layer = nn::MultiHeadAttention<double>::create(store, "mha", ac, rng, K);
      jitter(store, jitter_rng);
      check_params(mha, store, [&](nn::Bound<double>& b) { return ad::mean(layer.forward(b, x, x2, x2)); });
    }
    {
      nn::ParameterStore<double> store;
      nn::LinearOptions o;
      o.init_range = 0.5;
      auto layer = models::GcnLayer<double>::create(store, "gcn", n + 1, n, o, rng, K);
      const auto mask = models::neighbourhood_mask<double>(4, {{0, 1}, {1, 2}, {2, 3}}, true);
      jitter(store, jitter_rng);
      check_params(gcn, store, [&](nn::Bound<double>& b) { return ad::mean(layer.forward(b, x, mask, nullptr)); });
      grad_check(gcn, [&](const Tensor<double>& t) {
        nn::Bound<double> b(store, t.tape());
        return ad::mean(layer.forward(b, t, mask, nullptr));
      }, x, "input");
    }
    {
      // KG loss with a fixed negative set.
      for (auto transform : {models::RelationTransform::fx, models::RelationTransform::linear}) {
        nn::ParameterStore<double> store;
        models::KgConfig kc;
        kc.dim = n;
        kc.init_scale = 0.5;
        kc.transform = transform;
        auto model = models::KgModel<double>::create(store, 6, 2, kc, rng, K);
        const std::vector<data::Triplet> pos{{0, 0, 1}, {1, 1, 0}, {2, 0, 3}, {4, 1, 5}};
        const auto neg = models::corrupt(pos, 3, 6, rng);
        jitter(store, jitter_rng);
        check_params(kg, store, [&](nn::Bound<double>& b) { return model.loss(b, pos, neg); });
      }
    }
    {
      nn::ParameterStore<double> store;
      models::GcnConfig gc;
      gc.in_features = 3;
      gc.dim = n;
      gc.layers = 2;
      gc.num_classes = 3;
      gc.task = models::GcnTask::node_classification;
      auto model = models::GcnModel<double>::create(store, gc, rng, K);
      std::vector<double> fv(5 * 3);
      for (auto& e : fv) e = uniform(rng, -1.0, 1.0);
      const Tensor<double> feats({5, 3}, fv);
      const auto mask = models::neighbourhood_mask<double>(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, true);
      const std::vector<data::Edge> pos{{0, 1}, {2, 3}}, neg{{0, 4}, {1, 3}};
      jitter(store, jitter_rng);
      check_params(link, store, [&](nn::Bound<double>& b) { return model.link_loss(model.forward(b, feats, mask), pos, neg); });
      const std::vector<std::uint32_t> labels{0, 1, 2, 1, 0};
      check_params(cls, store, [&](nn::Bound<double>& b) {
        return model.class_loss(b, model.forward(b, feats, mask), {0, 1, 2, 4}, labels);
      });
    }
  }
  return {fx.done(), linear.done(), residual.done(), cen.done(), att.done(),
          mha.done(), gcn.done(), kg.done(), link.done(), cls.done()};
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json j;
  j["suite"] = suite;
  j["trials"] = trials;
  j["passed"] = passed();
  j["seconds"] = seconds;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json cj{{"name", c.name}, {"max_error", c.max_error}, {"tolerance", c.tolerance},
                      {"trials", c.trials}, {"passed", c.passed}};
    if (!c.detail.empty() && !c.passed) cj["detail"] = c.detail;
    j["checks"].push_back(cj);
  }
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"manifold", "theorem1", "lemma1", "lemma2", "centroid", "gradients"};
  return names;
}

bool is_suite(const std::string& name) {
  const auto& n = suite_names();
  return name == "all" || std::find(n.begin(), n.end(), name) != n.end();
}

SuiteReport run_suite(const std::string& name, std::uint64_t seed, std::size_t trials) {
  if (name == "all" || !is_suite(name)) throw std::invalid_argument("unknown verification suite '" + name + "'");
  SuiteReport report;
  report.suite = name;
  report.trials = trials;
  if (trials == 0) {
    report.warnings.push_back("zero trials: suite '" + name + "' passes vacuously");
    return report;
  }
  // Each suite draws from its own stream so suites do not depend on each other.
  const auto& names = suite_names();
  const auto index = static_cast<std::uint64_t>(std::find(names.begin(), names.end(), name) - names.begin());
  std::seed_seq seq{seed, index};
  Rng rng(seq);
  const auto start = std::chrono::steady_clock::now();
  if (name == "manifold") {
    report.checks = manifold_suite(trials, rng);
  } else if (name == "theorem1") {
    report.checks = theorem1_suite(trials, rng);
  } else if (name == "lemma1") {
    report.checks = lemma1_suite(trials, rng);
  } else if (name == "lemma2") {
    report.checks = lemma2_suite(trials, rng);
  } else if (name == "centroid") {
    report.checks = centroid_suite(trials, rng);
  } else {
    report.checks = gradients_suite(trials, rng);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<SuiteReport> run_suites(const std::string& name, std::uint64_t seed, std::size_t trials) {
  if (name != "all") return {run_suite(name, seed, trials)};
  std::vector<SuiteReport> out;
  for (const auto& s : suite_names()) out.push_back(run_suite(s, seed, trials));
  return out;
}

}  // namespace hybo::verify
