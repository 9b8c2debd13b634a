#include <doctest.h>

#include "minitad/backbone/backbone.hpp"
#include "minitad/neck/neck.hpp"
#include "support/gradcheck.hpp"

#include <filesystem>
#include <random>

using namespace minitad;
using namespace minitad::backbone;
using ag::Matrix;
using testing::random_matrix;

namespace {

BackboneConfig snippet_config(int length = 16, int stride = 8) {
  BackboneConfig cfg;
  cfg.mode = BackboneMode::kSnippet;
  cfg.snippet_length = length;
  cfg.snippet_stride = stride;
  cfg.output_dim = 6;
  cfg.hidden = 8;
  cfg.trainable = true;
  return cfg;
}

BackboneConfig frame_config(int pool = 1) {
  BackboneConfig cfg;
  cfg.mode = BackboneMode::kFrame;
  cfg.temporal_pool_factor = pool;
  cfg.output_dim = 6;
  cfg.hidden = 8;
  cfg.trainable = true;
  return cfg;
}

Matrix run(const Backbone& b, const Matrix& frames, Index valid) {
  ag::NoGradGuard guard;
  return b.encode(Tensor::constant(frames), valid, 1.0, 30.0).values.value();
}

}  // namespace

TEST_CASE("snippet counts") {
  CHECK(snippet_count(64, 16, 8) == 7);
  CHECK(snippet_count(16, 16, 8) == 1);
  CHECK(snippet_count(15, 16, 8) == 0);
  CHECK(snippet_config(16, 0).effective_snippet_stride() == 8);

  Backbone b(snippet_config(), 5, 1);
  std::mt19937_64 rng(1);
  const auto out = b.encode(Tensor::constant(random_matrix(rng, 64, 5)), 64, 2.0, 30.0);
  CHECK(out.values.rows() == 7);
  CHECK(out.values.cols() == 6);
  CHECK(out.valid == 7);
  CHECK(out.feature_stride == 16.0);
}

TEST_CASE("constant frames give identical snippet rows") {
  Backbone b(snippet_config(), 5, 2);
  Matrix frames(64, 5);
  frames.rowwise() = Eigen::RowVectorXd::LinSpaced(5, -1.0, 1.0);
  const Matrix out = run(b, frames, 64);
  for (Index j = 1; j < out.rows(); ++j) CHECK(out.row(j) == out.row(0));
}

TEST_CASE("snippet rows only see their own frames") {
  Backbone b(snippet_config(), 5, 3);
  std::mt19937_64 rng(3);
  const Matrix frames = random_matrix(rng, 64, 5);
  const Matrix base = run(b, frames, 64);
  for (Index f : {0, 13, 31, 63}) {
    Matrix poked = frames;
    poked.row(f).array() += 3.0;
    const Matrix out = run(b, poked, 64);
    for (Index j = 0; j < out.rows(); ++j) {
      const bool inside = f >= j * 8 && f < j * 8 + 16;
      if (inside) {
        CHECK(out.row(j) != base.row(j));
      } else {
        CHECK(out.row(j) == base.row(j));
      }
    }
  }
}

TEST_CASE("snippet mode keeps padding out of valid rows") {
  Backbone b(snippet_config(), 5, 4);
  std::mt19937_64 rng(4);
  Matrix frames = random_matrix(rng, 64, 5);
  const auto encoded = b.encode(Tensor::constant(frames), 40, 1.0, 30.0);
  CHECK(encoded.valid == 4);
  const Matrix out = encoded.values.value();
  CHECK(out.bottomRows(3).isZero(0.0));
  frames.bottomRows(24) = random_matrix(rng, 24, 5) * 50.0;
  const Matrix again = run(b, frames, 40);
  CHECK(again == out);
}

TEST_CASE("short snippet input is rejected with advice") {
  Backbone b(snippet_config(), 5, 5);
  try {
    (void)run(b, Matrix::Zero(10, 5), 10);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("pad") != std::string::npos);
  }
}

TEST_CASE("frame mode shapes and divisibility") {
  std::mt19937_64 rng(6);
  const Matrix frames = random_matrix(rng, 100, 5);
  CHECK(run(Backbone(frame_config(1), 5, 6), frames, 100).rows() == 100);
  const Backbone pooled(frame_config(4), 5, 6);
  const auto out = pooled.encode(Tensor::constant(frames), 50, 1.0, 30.0);
  CHECK(out.values.rows() == 25);
  CHECK(out.valid == 13);
  CHECK(out.feature_stride == 4.0);
  CHECK(out.values.value().bottomRows(12).isZero(0.0));
  CHECK_THROWS_AS((void)run(Backbone(frame_config(3), 5, 6), frames, 100), std::invalid_argument);
}

TEST_CASE("frame mode sees across the whole sequence") {
  Backbone b(frame_config(1), 5, 7);
  std::mt19937_64 rng(7);
  const Matrix frames = random_matrix(rng, 40, 5);
  const Matrix whole = run(b, frames, 40);
  Matrix halves(40, 6);
  halves.topRows(20) = run(b, frames.topRows(20), 20);
  halves.bottomRows(20) = run(b, frames.bottomRows(20), 20);
  CHECK((whole - halves).cwiseAbs().maxCoeff() > 1e-6);
  CHECK(whole.topRows(18) == halves.topRows(18));
}

TEST_CASE("frame mode padding is masked") {
  Backbone b(frame_config(1), 5, 8);
  std::mt19937_64 rng(8);
  Matrix frames = random_matrix(rng, 30, 5);
  const Matrix out = run(b, frames, 22);
  CHECK(out.bottomRows(8).isZero(0.0));
  frames.bottomRows(8).setConstant(9.0);
  CHECK(run(b, frames, 22) == out);
}

TEST_CASE("backbone gradients") {
  std::mt19937_64 rng(9);
  for (const BackboneConfig& cfg : {snippet_config(6, 3), frame_config(2)}) {
    Backbone b(cfg, 3, 9);
    const Matrix frames = random_matrix(rng, 12, 3);
    const double err = testing::gradient_check(
        [&](const auto& in) { return testing::project_to_scalar(b.encode(in[0], 12, 1.0, 1.0).values); }, {frames});
    CHECK(err < 1e-4);
    ag::backward(testing::project_to_scalar(b.encode(Tensor::constant(frames), 12, 1.0, 1.0).values));
    double norm = 0.0;
    for (const auto& [name, p] : b.parameters().items()) norm += p.grad().squaredNorm();
    CHECK(norm > 0.0);
  }
}

TEST_CASE("backbone config validation") {
  BackboneConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.trainable = true;
  CHECK_THROWS(cfg.validate());
  cfg = snippet_config();
  cfg.snippet_length = 0;
  CHECK_THROWS(cfg.validate());
  cfg = frame_config(0);
  CHECK_THROWS(cfg.validate());
  for (auto m : {BackboneMode::kSnippet, BackboneMode::kFrame, BackboneMode::kPrecomputed}) {
    CHECK(parse_backbone_mode(to_string(m)) == m);
  }
  CHECK(Backbone(BackboneConfig{}, 4, 1).parameters().items().empty());
}

TEST_CASE("stored features match the end-to-end path") {
  Backbone b(snippet_config(), 5, 10);
  std::mt19937_64 rng(10);
  FeatureSequence frames(random_matrix(rng, 160, 5), 1.0, 30.0);
  frames.valid_length = 150;
  const FeatureSequence encoded = b.encode(frames);
  CHECK(encoded.valid_length == 17);
  CHECK(encoded.feature_stride == 8.0);

  data::FeatureStore store;
  store.put("clip", encoded);
  const auto dir = std::filesystem::temp_directory_path() / "minitad_backbone_store";
  std::filesystem::remove_all(dir);
  store.save(dir);
  const auto reloaded = load_precomputed("clip", data::FeatureStore::load(dir / "index.json"));
  std::filesystem::remove_all(dir);
  CHECK(reloaded.valid_length == encoded.valid_length);
  CHECK(reloaded.feature_stride == encoded.feature_stride);
  REQUIRE(reloaded.length() == 17);
  CHECK((reloaded.values - encoded.values.topRows(17)).cwiseAbs().maxCoeff() <= 1e-6);
  Matrix padded = Matrix::Zero(encoded.length(), encoded.dim());
  padded.topRows(17) = reloaded.values;

  neck::NeckConfig ncfg;
  ncfg.width = 8;
  ncfg.pyramid_levels = 2;
  const neck::Neck n(ncfg, 6, 11);
  ag::NoGradGuard guard;
  const auto a = n.forward(Tensor::constant(encoded.values), encoded.valid_length);
  const auto c = n.forward(Tensor::constant(padded), reloaded.valid_length);
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    CHECK((a.levels[l].value() - c.levels[l].value()).cwiseAbs().maxCoeff() <= 1e-6);
  }
  CHECK_THROWS_AS((void)load_precomputed("other", store), data::FeatureLookupError);
}

TEST_CASE("encoded positions map onto input rows") {
  const Backbone snip(snippet_config(16, 8), 5, 1);
  // Snippet j spans frames [8j, 8j + 16), so its row center sits at 8j + 8.
  CHECK(snip.to_input_position(0.5) == 8.0);
  CHECK(snip.to_input_position(2.5) == 24.0);
  const Backbone pooled(frame_config(4), 5, 1);
  CHECK(pooled.to_input_position(0.5) == 2.0);
  const Backbone plain(BackboneConfig{}, 5, 1);
  CHECK(plain.to_input_position(3.25) == 3.25);
  for (double x : {0.0, 1.5, 7.25, 100.0}) {
    CHECK(snip.from_input_position(snip.to_input_position(x)) == doctest::Approx(x));
    CHECK(pooled.from_input_position(pooled.to_input_position(x)) == doctest::Approx(x));
  }
}
