#include <doctest.h>

#include "minitad/core/interval.hpp"
#include "minitad/stage2/proposal_head.hpp"
#include "support/gradcheck.hpp"

#include <cmath>
#include <random>

using namespace minitad;
using namespace minitad::stage2;
using testing::gradient_check;
using testing::project_to_scalar;
using testing::random_matrix;

namespace {

// Row i holds the value of its own center position, i + 0.5.
Tensor ramp(Index t, Index d = 1) {
  Matrix m(t, d);
  for (Index i = 0; i < t; ++i) m.row(i).setConstant(static_cast<double>(i) + 0.5);
  return Tensor::constant(m);
}

Stage2Config config_with(RoiMethod method, int cascade = 1) {
  Stage2Config cfg;
  cfg.enabled = true;
  cfg.roi.method = method;
  cfg.roi.samples = 4;
  cfg.hidden = 16;
  cfg.cascade = cascade;
  return cfg;
}

std::vector<ActionInstance> random_proposals(std::mt19937_64& rng, int n, double length) {
  std::uniform_real_distribution<double> pos(0.0, length), u(0.05, 0.95);
  std::vector<ActionInstance> out;
  for (int i = 0; i < n; ++i) {
    double a = pos(rng), b = pos(rng);
    if (a > b) std::swap(a, b);
    out.push_back({{a, b}, i % 3, u(rng)});
  }
  return out;
}

}  // namespace

TEST_CASE("roi align on simple features") {
  const Tensor constant = Tensor::constant(Matrix::Constant(12, 3, 2.5));
  const Matrix bins = roi_align(constant, 12, {1.3, 9.7}, 6).value();
  CHECK(bins.rows() == 6);
  CHECK((bins.array() == 2.5).all());

  std::mt19937_64 rng(1);
  const Tensor x = Tensor::constant(random_matrix(rng, 9, 4));
  CHECK(roi_align(x, 9, {0, 9}, 9).value().isApprox(x.value(), 1e-12));

  const Matrix r = roi_align(ramp(12), 12, {0, 10}, 5).value();
  for (int k = 0; k < 5; ++k) CHECK(r(k, 0) == doctest::Approx(2 * k + 1).epsilon(1e-12));

  const Matrix point = roi_align(ramp(12), 12, {4, 4}, 5).value();
  CHECK((point.array() == 4.0).all());
}

TEST_CASE("sampling clamps to the valid prefix") {
  const auto below = interpolation_tap(-3.0, 10);
  CHECK(below.lo == 0);
  CHECK(below.w_lo == 1.0);
  const auto above = interpolation_tap(20.0, 10);
  CHECK(above.lo == 9);
  CHECK(above.w_lo + above.w_hi == 1.0);
  const auto mid = interpolation_tap(3.75, 10);
  CHECK(mid.lo == 3);
  CHECK(mid.hi == 4);
  CHECK(mid.w_hi == doctest::Approx(0.25));
  CHECK(bin_centers({0, 10}, 5) == std::vector<double>{1, 3, 5, 7, 9});
}

TEST_CASE("roi keypoint samples start, center and end") {
  const Matrix k = roi_keypoint(ramp(12), 12, {2, 8}).value();
  REQUIRE(k.rows() == 3);
  CHECK(k(0, 0) == doctest::Approx(2.0));
  CHECK(k(1, 0) == doctest::Approx(5.0));
  CHECK(k(2, 0) == doctest::Approx(8.0));
  const Matrix deg = roi_keypoint(ramp(12), 12, {4, 4}).value();
  CHECK(deg(0, 0) == deg(1, 0));
  CHECK(deg(1, 0) == deg(2, 0));
  // Roi align with three bins samples 3, 5, 7 instead.
  const Matrix three = roi_align(ramp(12), 12, {2, 8}, 3).value();
  CHECK(three(0, 0) == doctest::Approx(3.0));
  CHECK(three(0, 0) != doctest::Approx(k(0, 0)));
}

TEST_CASE("sg align") {
  nn::ParameterSet params;
  nn::Initializer init(2);
  neck::GraphAggregation graph(params, "g", 3, 4, init);
  std::mt19937_64 rng(2);
  const Tensor x = Tensor::constant(random_matrix(rng, 15, 3));
  CHECK(sg_align(x, 15, {2, 13}, 5, graph).rows() == 5);
  CHECK(sg_align(x, 15, {2, 2.5}, 5, graph).rows() == 5);

  graph.self_weight.mutable_value() = Matrix::Identity(3, 3);
  graph.neighbor_weight.mutable_value().setZero();
  graph.bias.mutable_value().setZero();
  CHECK(sg_align(x, 15, {2, 13}, 5, graph).value() == roi_align(x, 15, {2, 13}, 5).value());

  graph.neighbor_weight.mutable_value() = Matrix::Identity(3, 3);
  graph.self_weight.mutable_value().setZero();
  const Tensor c = Tensor::constant(Matrix::Constant(15, 3, -1.5));
  CHECK(sg_align(c, 15, {3, 9}, 5, graph).value().isApprox(Matrix::Constant(5, 3, -1.5), 1e-12));
}

TEST_CASE("boundary matching map") {
  std::mt19937_64 rng(3);
  const Tensor x = Tensor::constant(random_matrix(rng, 100, 2));
  const BoundaryMatchingMap map = boundary_matching(x, 100, 3);
  CHECK(map.valid_pairs() == 5050);
  Index checked = 0;
  for (Index d = 1; d <= 100; ++d) {
    for (Index s = 0; s < 100; ++s) {
      if (!map.valid(s, d)) {
        REQUIRE(s + d > 100);
        REQUIRE(map.entry(s, d).isZero(0.0));
        continue;
      }
      const TimeInterval iv{static_cast<double>(s), static_cast<double>(s + d)};
      REQUIRE(map.entry(s, d) == roi_align(x, 100, iv, 3).value());
      ++checked;
    }
  }
  CHECK(checked == 5050);

  const BoundaryMatchingMap capped = boundary_matching(x, 100, 3, 10);
  CHECK(capped.max_duration == 10);
  CHECK(capped.valid_pairs() == 955);
}

TEST_CASE("boundary matching rejects multi-scale input") {
  neck::FeaturePyramid one;
  one.levels.emplace_back(Matrix::Ones(8, 2), 1.0, 1.0);
  one.strides = {1};
  RoIConfig cfg;
  cfg.method = RoiMethod::kBoundaryMatching;
  cfg.samples = 2;
  CHECK(boundary_matching(one, cfg).valid_pairs() == 36);
  neck::FeaturePyramid two = one;
  two.levels.emplace_back(Matrix::Ones(4, 2), 2.0, 1.0);
  two.strides = {1, 2};
  CHECK_THROWS_AS(boundary_matching(two, cfg), UnsupportedConfiguration);
}

TEST_CASE("extract_rois matches the single-proposal extractors") {
  std::mt19937_64 rng(4);
  const Tensor x = Tensor::constant(random_matrix(rng, 20, 3));
  RoIConfig cfg;
  cfg.samples = 4;
  cfg.extension_ratio = 0.25;
  const TimeInterval p{4, 12};
  const Matrix rows = extract_rois(x, 20, {p}, cfg).value();
  const Matrix direct = roi_align(x, 20, {2, 14}, 4).value();
  for (Index k = 0; k < 4; ++k) CHECK(rows.block(0, k * 3, 1, 3) == direct.row(k));

  cfg.method = RoiMethod::kBoundaryMatching;
  const Matrix snapped = extract_rois(x, 20, {{4.2, 11.9}}, cfg).value();
  const Matrix entry = boundary_matching(x, 20, 4).entry(4, 8);
  for (Index k = 0; k < 4; ++k) CHECK(snapped.block(0, k * 3, 1, 3) == entry.row(k));
}

TEST_CASE("roi extraction is differentiable for every method") {
  std::mt19937_64 rng(5);
  nn::ParameterSet params;
  nn::Initializer init(5);
  neck::GraphAggregation graph(params, "g", 3, 3, init);
  const std::vector<TimeInterval> proposals{{1.2, 6.7}, {0.0, 11.0}, {5.5, 5.5}, {8.1, 10.4}};
  for (RoiMethod m : all_roi_methods()) {
    const std::string method = to_string(m);
    CAPTURE(method);
    RoIConfig cfg;
    cfg.method = m;
    cfg.samples = 3;
    const Matrix x = random_matrix(rng, 11, 3);
    const double err = gradient_check(
        [&](const auto& in) { return project_to_scalar(extract_rois(in[0], 10, proposals, cfg, &graph)); }, {x});
    CHECK(err <= 1e-4);
    Tensor leaf = Tensor::parameter(x);
    ag::backward(project_to_scalar(extract_rois(leaf, 10, proposals, cfg, &graph)));
    CHECK(leaf.grad().norm() > 0.0);
  }
}

TEST_CASE("refinement and score fusion arithmetic") {
  const TimeInterval r = refine_interval({10, 20}, -0.1, 0.0, 100);
  CHECK(r.start == doctest::Approx(9.0));
  CHECK(r.end == 20.0);
  CHECK(refine_interval({10, 20}, 0.0, 0.0, 100) == TimeInterval{10, 20});
  CHECK(fuse_scores({0.81, 0.49}) == doctest::Approx(0.63).epsilon(1e-12));
  CHECK(fuse_scores({0.37, 0.37}) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(refine_interval({90, 98}, 0.0, 2.0, 100).end == 100.0);
  const TimeInterval flipped = refine_interval({10, 20}, 0.8, -0.8, 100);
  CHECK(flipped.start == flipped.end);
  CHECK(flipped.start == doctest::Approx(15.0));
}

TEST_CASE("refined intervals stay inside the sequence") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> delta(-5.0, 5.0), pos(0.0, 40.0);
  for (int i = 0; i < 2000; ++i) {
    double a = pos(rng), b = pos(rng);
    if (a > b) std::swap(a, b);
    const TimeInterval r = refine_interval({a, b}, delta(rng), delta(rng), 40.0);
    REQUIRE(r.start >= 0.0);
    REQUIRE(r.end <= 40.0);
    REQUIRE(r.start <= r.end);
  }

  Stage2 s2(config_with(RoiMethod::kRoiAlign, 2), 3, 3, 7);
  for (const auto& head : s2.heads()) head->out.weight.mutable_value() *= 200.0;
  const Tensor x = Tensor::constant(random_matrix(rng, 40, 3));
  const auto out = s2.run(x, 32, random_proposals(rng, 50, 32.0));
  for (const auto& stage : out.per_stage) {
    for (const auto& iv : stage) {
      CHECK(iv.start >= 0.0);
      CHECK(iv.end <= 32.0);
      CHECK(iv.start <= iv.end);
    }
  }
}

TEST_CASE("one-head cascade equals a direct proposal-head pass") {
  std::mt19937_64 rng(8);
  Stage2 s2(config_with(RoiMethod::kRoiAlign, 1), 3, 3, 9);
  const Tensor x = Tensor::constant(random_matrix(rng, 30, 3));
  const auto proposals = random_proposals(rng, 6, 30.0);
  const auto out = s2.run(x, 30, proposals);

  std::vector<TimeInterval> ivs;
  for (const auto& p : proposals) ivs.push_back(p.interval);
  ag::NoGradGuard guard;
  const auto head = s2.heads()[0]->forward(extract_rois(x, 30, ivs, s2.config().roi));
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto r = static_cast<Index>(i);
    const TimeInterval expected =
        refine_interval(ivs[i], head.deltas.value()(r, 0), head.deltas.value()(r, 1), 30.0);
    CHECK(out.refined[i].interval == expected);
    const double prob = 1.0 / (1.0 + std::exp(-head.class_logits.value()(r, proposals[i].label)));
    CHECK(*out.refined[i].score == doctest::Approx(std::sqrt(*proposals[i].score * prob)).epsilon(1e-12));
  }
}

TEST_CASE("cascade depth") {
  std::mt19937_64 rng(10);
  const Tensor x = Tensor::constant(random_matrix(rng, 30, 3));
  const auto proposals = random_proposals(rng, 8, 30.0);

  Stage2 still(config_with(RoiMethod::kRoiAlign, 3), 3, 3, 11);
  for (const auto& head : still.heads()) {
    head->out.weight.mutable_value().leftCols(2).setZero();
    head->out.bias.mutable_value().leftCols(2).setZero();
  }
  const auto fixed = still.run(x, 30, proposals);
  REQUIRE(fixed.per_stage.size() == 3);
  for (const auto& stage : fixed.per_stage) {
    for (std::size_t i = 0; i < proposals.size(); ++i) CHECK(stage[i] == proposals[i].interval);
  }

  Stage2 one(config_with(RoiMethod::kRoiAlign, 1), 3, 3, 12);
  Stage2 two(config_with(RoiMethod::kRoiAlign, 2), 3, 3, 12);
  const auto a = one.run(x, 30, proposals);
  const auto b = two.run(x, 30, proposals);
  CHECK(a.per_stage[0] == b.per_stage[0]);
  bool differs = false;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    differs = differs || !(a.refined[i].interval == b.refined[i].interval) || a.refined[i].score != b.refined[i].score;
  }
  CHECK(differs);
}

TEST_CASE("stage-2 label assignment") {
  const std::vector<ActionInstance> gt{{{0, 10}, 2, {}}, {{5, 15}, 1, {}}};
  const auto t = assign_stage2_labels({{{0, 10}, 0, 0.5}, {{20, 30}, 0, 0.5}, {{0, 7}, 0, 0.5}}, {gt[0]});
  CHECK(t.label[0] == 2);
  CHECK(t.best_tiou[0] == 1.0);
  CHECK(t.box[0] == TimeInterval{0, 10});
  CHECK(t.label[1] == -1);
  CHECK(t.best_tiou[2] == 0.7);
  CHECK(t.label[2] == -1);
  const auto third = assign_stage2_labels({{{0, 10}, 0, 0.5}}, {gt[1]});
  CHECK(third.best_tiou[0] == doctest::Approx(1.0 / 3.0));
  CHECK(third.label[0] == -1);
  CHECK(assign_stage2_labels({{{0, 7.01}, 0, 0.5}}, {gt[0]}).label[0] == 2);
}

TEST_CASE("proposal selection") {
  std::vector<ActionInstance> stage1{{{0, 10}, 0, 0.9}, {{0, 10.1}, 0, 0.8}, {{0, 10.1}, 1, 0.7}, {{20, 30}, 0, 0.1}};
  const auto kept = select_proposals(stage1, 0.9, 10);
  CHECK(kept.size() == 3);
  CHECK(select_proposals(stage1, 0.9, 2).size() == 2);
  CHECK(*select_proposals(stage1, 0.9, 1)[0].score == 0.9);
}

TEST_CASE("stage-2 loss produces gradients for every method") {
  std::mt19937_64 rng(13);
  const std::vector<ActionInstance> gt{{{3, 11}, 1, {}}, {{14, 20}, 0, {}}};
  std::vector<ActionInstance> proposals{{{3, 11}, 1, 0.9}, {{2.5, 11}, 1, 0.6}, {{13.5, 20}, 0, 0.6}, {{0, 2}, 0, 0.2}};
  for (RoiMethod m : all_roi_methods()) {
    const std::string method = to_string(m);
    CAPTURE(method);
    Stage2Config cfg = config_with(m, 1);
    cfg.aux_channels = 1;
    Stage2 s2(cfg, 3, 2, 14);
    const Tensor x = Tensor::constant(random_matrix(rng, 24, 3));
    const auto loss = s2.loss(x, 24, proposals, gt);
    CHECK(std::isfinite(loss.total.item()));
    CHECK(loss.num_positive == 3);
    s2.parameters().zero_grad();
    ag::backward(loss.total);
    double norm = 0.0;
    for (const auto& [name, p] : s2.parameters().items()) norm += p.grad().squaredNorm();
    CHECK(norm > 0.0);
  }
}

TEST_CASE("stage-2 config validation") {
  Stage2Config cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.cascade = 0;
  CHECK_THROWS(cfg.validate());
  cfg = Stage2Config{};
  cfg.aux_channels = 2;
  CHECK_THROWS(cfg.validate());
  CHECK_THROWS((void)parse_roi_method("pooling"));
  for (RoiMethod m : all_roi_methods()) CHECK(parse_roi_method(to_string(m)) == m);
}
