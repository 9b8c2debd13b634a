#include <doctest.h>

#include "minitad/postproc/io.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace minitad;
using namespace minitad::postproc;

namespace {

ActionInstance det(double s, double e, double score, int label = 0) { return {{s, e}, label, score}; }

ProposalSet make_set(std::vector<ActionInstance> p) {
  ProposalSet s;
  s.video_id = "v";
  s.proposals = std::move(p);
  return s;
}

ProposalSet random_set(std::mt19937_64& rng, int n, int classes = 2) {
  std::uniform_real_distribution<double> pos(0.0, 50.0), len(0.5, 15.0), score(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::vector<ActionInstance> p;
  for (int i = 0; i < n; ++i) {
    const double s = pos(rng);
    p.push_back(det(s, s + len(rng), score(rng), cls(rng)));
  }
  return make_set(p);
}

}  // namespace

TEST_CASE("nms examples") {
  CHECK(nms(make_set({det(1, 4, 0.3)}), 0.5).proposals.size() == 1);
  const auto dup = nms(make_set({det(0, 10, 0.8), det(0, 10, 0.9)}), 0.5);
  REQUIRE(dup.proposals.size() == 1);
  CHECK(*dup.proposals[0].score == 0.9);
  // tiou([0,10],[2,12]) = 8/12 > 0.5.
  const auto ab = nms(make_set({det(0, 10, 0.9), det(2, 12, 0.8)}), 0.5);
  REQUIRE(ab.proposals.size() == 1);
  CHECK(ab.proposals[0].interval.start == 0.0);
  CHECK(nms(make_set({det(0, 10, 0.9), det(2, 12, 0.8, 1)}), 0.5, true).proposals.size() == 2);
  CHECK(nms(make_set({det(0, 10, 0.9), det(2, 12, 0.8, 1)}), 0.5, false).proposals.size() == 1);
}

TEST_CASE("nms is idempotent") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const ProposalSet s = random_set(rng, 1 + i % 30);
    const ProposalSet once = nms(s, 0.4);
    const ProposalSet twice = nms(once, 0.4);
    REQUIRE(once.proposals == twice.proposals);
  }
}

TEST_CASE("soft-nms decay fixtures") {
  SoftNmsConfig linear;
  linear.method = SoftNmsMethod::kLinear;
  linear.iou_threshold = 0.3;
  linear.score_floor = 0.0;
  const auto l = soft_nms(make_set({det(0, 10, 0.9), det(2, 12, 0.8)}), linear);
  REQUIRE(l.proposals.size() == 2);
  CHECK(std::abs(*l.proposals[1].score - 0.8 * (1.0 - 2.0 / 3.0)) < 1e-12);
  CHECK(std::abs(*l.proposals[1].score - 0.2667) < 1e-4);

  SoftNmsConfig gauss;
  gauss.sigma = 0.5;
  gauss.score_floor = 0.0;
  // tiou([0,10],[5,10]) = 0.5.
  const auto g = soft_nms(make_set({det(0, 10, 1.0), det(5, 10, 1.0 - 1e-9)}), gauss);
  CHECK(std::abs(*g.proposals[1].score / (1.0 - 1e-9) - std::exp(-0.5)) < 1e-12);
  CHECK(std::abs(std::exp(-0.5) - 0.6065) < 1e-4);

  const auto disjoint = soft_nms(make_set({det(0, 1, 0.4), det(5, 6, 0.7), det(9, 12, 0.1)}), linear);
  CHECK(*disjoint.proposals[0].score == 0.7);
  CHECK(*disjoint.proposals[1].score == 0.4);
  CHECK(*disjoint.proposals[2].score == 0.1);
}

TEST_CASE("soft-nms drops decayed proposals below the floor and breaks ties deterministically") {
  SoftNmsConfig cfg;
  cfg.method = SoftNmsMethod::kLinear;
  cfg.iou_threshold = 0.1;
  cfg.score_floor = 0.05;
  const auto out = soft_nms(make_set({det(0, 10, 0.9), det(0, 10, 0.5)}), cfg);
  CHECK(out.proposals.size() == 1);

  const auto ties = soft_nms(make_set({det(20, 22, 0.5), det(3, 5, 0.5), det(3, 5, 0.5, 1)}), SoftNmsConfig{});
  CHECK(ties.proposals[0].interval.start == 3.0);
  CHECK(ties.proposals[0].label == 0);
}

TEST_CASE("gaussian soft-nms keeps the order of non-overlapping proposals") {
  std::mt19937_64 rng(2);
  SoftNmsConfig cfg;
  cfg.score_floor = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const ProposalSet s = random_set(rng, 25, 1);
    const ProposalSet out = soft_nms(s, cfg);
    std::vector<ActionInstance> isolated;
    for (const auto& p : s.proposals) {
      bool alone = true;
      for (const auto& q : s.proposals) {
        if (&p != &q && p.interval.end > q.interval.start && q.interval.end > p.interval.start) alone = false;
      }
      if (alone) isolated.push_back(p);
    }
    for (const auto& a : isolated) {
      for (const auto& b : isolated) {
        if (*a.score <= *b.score) continue;
        auto find = [&](const ActionInstance& x) {
          for (std::size_t i = 0; i < out.proposals.size(); ++i) {
            if (out.proposals[i].interval == x.interval) return i;
          }
          return out.proposals.size();
        };
        REQUIRE(find(a) < find(b));
      }
    }
  }
}

TEST_CASE("window aggregation") {
  ProposalSet w;
  w.video_id = "v";
  w.window_offset = 0;
  w.proposals = {det(10, 20, 0.5)};
  const auto id = aggregate_windows({w});
  CHECK(id.unit == TimeUnit::kSeconds);
  CHECK(id.proposals[0].interval == TimeInterval{10, 20});

  w.window_offset = 50;
  const auto shifted = aggregate_windows({w});
  CHECK(shifted.proposals[0].interval == TimeInterval{60, 70});

  ProposalSet other = w;
  other.window_offset = 40;
  other.proposals = {det(20, 30, 0.5)};
  CHECK(aggregate_windows({w, other}).proposals.size() == 2);

  w.feature_stride = 5;
  w.frame_rate = 25;
  CHECK(aggregate_windows({w}).proposals[0].interval == TimeInterval{12, 14});

  other.video_id = "u";
  CHECK_THROWS_AS(aggregate_windows({w, other}), std::invalid_argument);
}

TEST_CASE("external classifier fusion") {
  ExternalScores scores{{"v", {{0, 0.25}, {2, 0.5}, {1, 0.1}}}};
  const auto one = fuse_external_classifier(make_set({det(0, 1, 0.8)}), {{"v", {{3, 1.0}}}}, 1);
  CHECK(*one.proposals[0].score == 0.8);
  CHECK(one.proposals[0].label == 3);

  const auto two = fuse_external_classifier(make_set({det(0, 1, 0.8)}), scores, 2);
  REQUIRE(two.proposals.size() == 2);
  CHECK(two.proposals[0].label == 2);
  CHECK(*two.proposals[0].score == doctest::Approx(0.4));
  CHECK(*two.proposals[1].score == doctest::Approx(0.2));

  std::vector<ActionInstance> ten(10, det(0, 1, 0.5));
  CHECK(fuse_external_classifier(make_set(ten), scores, 2).proposals.size() == 20);

  ProposalSet missing = make_set({det(0, 1, 0.5)});
  missing.video_id = "nope";
  try {
    (void)fuse_external_classifier(missing, scores, 1);
    FAIL("expected an error");
  } catch (const MissingExternalScores& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
}

TEST_CASE("average precision fixtures") {
  const std::map<std::string, std::vector<TimeInterval>> gt{{"a", {{0, 10}, {20, 30}}}};
  CHECK(average_precision({{"a", {0, 10}, 0.9}, {"a", {20, 30}, 0.8}}, gt, 0.95) == 1.0);
  CHECK(average_precision({}, gt, 0.5) == 0.0);
  // Ranks 1 and 3 are hits: precision 1 at recall 1/2, 2/3 at recall 1.
  const double ap = average_precision({{"a", {0, 10}, 0.9}, {"a", {40, 50}, 0.8}, {"a", {20, 30}, 0.7}}, gt, 0.5);
  CHECK(ap == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(ap == doctest::Approx(testing::brute_force_ap({true, false, true}, 2)).epsilon(1e-12));
  // A duplicate of a matched detection is a false positive.
  CHECK(average_precision({{"a", {0, 10}, 0.9}, {"a", {0, 10}, 0.8}}, {{"a", {{0, 10}}}}, 0.5) == 1.0);
}

TEST_CASE("average precision equals the brute-force oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.0, 30.0), len(1.0, 10.0), score(0.0, 1.0);
  std::uniform_int_distribution<int> npred(0, 20), ngt(1, 5), vid(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    std::map<std::string, std::vector<TimeInterval>> gt;
    std::map<std::string, std::vector<std::pair<double, double>>> gt_pairs;
    const int g = ngt(rng);
    for (int k = 0; k < g; ++k) {
      const std::string v = "v" + std::to_string(vid(rng));
      const double s = pos(rng), e = s + len(rng);
      gt[v].push_back({s, e});
      gt_pairs[v].push_back({s, e});
    }
    std::vector<Detection> dets;
    std::vector<testing::OracleDetection> odets;
    const int n = npred(rng);
    for (int k = 0; k < n; ++k) {
      const std::string v = "v" + std::to_string(vid(rng));
      const double s = pos(rng), e = s + len(rng), sc = score(rng);
      dets.push_back({v, {s, e}, sc});
      odets.push_back({v, s, e, sc});
    }
    for (double thr : {0.3, 0.5, 0.7}) {
      const double expected = testing::brute_force_ap(testing::oracle_match(odets, gt_pairs, thr), g);
      REQUIRE(std::abs(average_precision(dets, gt, thr) - expected) <= 1e-9);
    }
  }
}

TEST_CASE("mean average precision") {
  data::AnnotationDatabase db;
  db.label_space.class_names = {"a", "b", "c"};
  VideoRecord v1{"v1", 100.0, {}, 0, {{{10, 20}, 0, {}}, {{30, 50}, 1, {}}}, Subset::kValidation};
  VideoRecord v2{"v2", 100.0, {}, 0, {{{5, 25}, 0, {}}}, Subset::kValidation};
  db.videos = {{"v1", v1}, {"v2", v2}};

  auto perfect = [&](const VideoRecord& v) {
    ProposalSet s;
    s.video_id = v.video_id;
    s.unit = TimeUnit::kSeconds;
    for (auto a : v.annotations) {
      a.score = 1.0;
      s.proposals.push_back(a);
    }
    return s;
  };
  EvalConfig cfg;
  const auto r = mean_average_precision({perfect(v1), perfect(v2)}, db, {"v1", "v2"}, cfg);
  CHECK(r.average == 1.0);
  CHECK(r.classes == std::vector<int>{0, 1});
  for (double m : r.map) CHECK(m == 1.0);

  ProposalSet feature_units = perfect(v1);
  feature_units.unit = TimeUnit::kFeature;
  CHECK_THROWS_AS(mean_average_precision({feature_units}, db, {"v1"}, cfg), UnitMismatch);

  // The cap keeps only the best prediction per video.
  ProposalSet noisy = perfect(v2);
  noisy.proposals.insert(noisy.proposals.begin(), det(60, 70, 2.0, 0));
  cfg.max_predictions_per_video = 1;
  const auto capped = mean_average_precision({noisy}, db, {"v2"}, cfg);
  CHECK(capped.average == 0.0);
}

TEST_CASE("mAP is invariant to monotone score transforms") {
  std::mt19937_64 rng(4);
  data::AnnotationDatabase db;
  db.label_space.class_names = {"a", "b"};
  std::uniform_real_distribution<double> pos(0.0, 80.0), len(2.0, 15.0);
  std::vector<std::string> ids;
  for (int v = 0; v < 4; ++v) {
    VideoRecord rec;
    rec.video_id = "v" + std::to_string(v);
    rec.duration = 100;
    for (int k = 0; k < 3; ++k) {
      const double s = pos(rng);
      rec.annotations.push_back({{s, s + len(rng)}, k % 2, {}});
    }
    db.videos[rec.video_id] = rec;
    ids.push_back(rec.video_id);
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ProposalSet> sets, warped;
    for (const auto& id : ids) {
      ProposalSet s = random_set(rng, 15);
      s.video_id = id;
      s.unit = TimeUnit::kSeconds;
      for (auto& p : s.proposals) p.interval = {p.interval.start * 1.6, p.interval.end * 1.6};
      ProposalSet w = s;
      for (auto& p : w.proposals) p.score = std::exp(3.0 * *p.score) - 7.0;
      sets.push_back(s);
      warped.push_back(w);
    }
    const auto a = mean_average_precision(sets, db, ids, EvalConfig{thumos_thresholds()});
    const auto b = mean_average_precision(warped, db, ids, EvalConfig{thumos_thresholds()});
    REQUIRE(a.map == b.map);
  }
}

TEST_CASE("threshold presets") {
  CHECK(thumos_thresholds() == std::vector<double>{0.3, 0.4, 0.5, 0.6, 0.7});
  const auto anet = activitynet_thresholds();
  REQUIRE(anet.size() == 10);
  CHECK(anet.front() == 0.5);
  CHECK(anet.back() == 0.95);
  CHECK(anet[3] == 0.65);
  CHECK_THROWS((void)protocol_thresholds("coco"));
  EvalConfig bad{{0.5, 0.5}};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("seed statistics") {
  CHECK(seed_statistics({0.5, 0.5, 0.5, 0.5, 0.5}).format() == "0.50±0.00");
  CHECK(seed_statistics({0.4, 0.6}).format() == "0.50±0.14");
  const auto single = seed_statistics({0.7});
  CHECK_FALSE(single.stddev.has_value());
  CHECK(single.format() == "0.70");
}

TEST_CASE("detection and report files") {
  LabelSpace labels{{"jump", "run"}, false};
  ProposalSet s;
  s.video_id = "v1";
  s.unit = TimeUnit::kFeature;
  s.feature_stride = 5;
  s.frame_rate = 25;
  s.proposals = {det(10, 20, 0.75, 1)};
  const auto dir = std::filesystem::temp_directory_path() / "minitad_postproc_test";
  std::filesystem::create_directories(dir);
  save_detections({s}, labels, dir / "det.json");
  const auto back = load_detections(dir / "det.json", labels);
  REQUIRE(back.size() == 1);
  CHECK(back[0].unit == TimeUnit::kSeconds);
  CHECK(back[0].proposals[0].interval == TimeInterval{2.0, 4.0});
  CHECK(back[0].proposals[0].label == 1);

  const auto ext = external_scores_from_json(
      nlohmann::json::parse(R"({"v1": {"labels": ["run", "jump"], "scores": [0.7, 0.3]}})"), labels);
  CHECK(ext.at("v1")[0] == std::pair<int, double>{1, 0.7});
  CHECK_THROWS(external_scores_from_json(nlohmann::json::parse(R"({"v1": {"labels": ["fly"], "scores": [1]}})"),
                                         labels));

  EvalResult r{{0.3, 0.5}, {1.0, 0.5}, 0.75, {0}};
  CHECK(report_csv(r) == "threshold,mAP\n0.30,1.000000\n0.50,0.500000\naverage,0.750000\n");
  std::filesystem::remove_all(dir);
}
