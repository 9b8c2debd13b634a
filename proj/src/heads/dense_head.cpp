#include "minitad/heads/dense_head.hpp"

#include "minitad/core/interval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace minitad::heads {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Splits a T x (k*A) block into A row blocks of width k, stacked anchor-major.
Tensor anchors_to_rows(const Tensor& block, int anchors, Index width) {
  if (anchors == 1) return block;
  std::vector<Tensor> parts;
  for (int a = 0; a < anchors; ++a) parts.push_back(ag::slice_cols(block, a * width, width));
  return ag::concat_rows(parts);
}

}  // namespace

void HeadConfig::validate(std::size_t levels) const {
  anchors.validate();
  assignment.validate(levels);
  loss.validate();
  if (num_classes < 1) throw std::invalid_argument("num_classes must be positive");
  if (binary_mode && num_classes != 2) throw std::invalid_argument("binary mode uses exactly 2 classes");
  if (aux_channels != 0 && aux_channels != 3) throw std::invalid_argument("aux_channels must be 0 or 3");
  if (tower_depth < 0) throw std::invalid_argument("tower_depth must be non-negative");
  if (!(prior_probability > 0.0 && prior_probability < 1.0)) throw std::invalid_argument("prior in (0, 1)");
  if (pre_nms_topk < 1) throw std::invalid_argument("pre_nms_topk must be positive");
}

Tensor flatten_class_logits(const DenseHeadOutput& out, int anchors_per_location, int num_classes) {
  std::vector<Tensor> rows;
  for (const auto& level : out.levels) rows.push_back(anchors_to_rows(level.class_logits, anchors_per_location, num_classes));
  return ag::concat_rows(rows);
}

Tensor flatten_offsets(const DenseHeadOutput& out, int anchors_per_location) {
  std::vector<Tensor> rows;
  for (const auto& level : out.levels) rows.push_back(anchors_to_rows(level.offsets, anchors_per_location, 2));
  return ag::concat_rows(rows);
}

std::vector<ActionInstance> decode_proposals(const DenseHeadOutput& out, const AnchorSet& anchors, int num_classes,
                                             const DecodeOptions& options) {
  struct Candidate {
    double score;
    std::size_t level;
    int anchor;
    Index location;
    int cls;
  };
  std::vector<Candidate> cands;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    const LevelOutput& lo = out.levels[l];
    const Matrix& logits = lo.class_logits.value();
    for (int a = 0; a < anchors.per_location; ++a) {
      for (Index i = 0; i < lo.valid; ++i) {
        const auto row = logits.row(i).segment(a * num_classes, num_classes);
        if (options.score_kind == ClassificationLoss::kCrossEntropy) {
          const double m = std::max(0.0, row.maxCoeff());
          const double denom = std::exp(-m) + (row.array() - m).exp().sum();
          for (int c = options.binary_mode ? 1 : 0; c < num_classes; ++c) {
            const double s = std::exp(row(c) - m) / denom;
            if (s > options.score_threshold) cands.push_back({s, l, a, i, c});
          }
        } else {
          for (int c = options.binary_mode ? 1 : 0; c < num_classes; ++c) {
            const double s = sigmoid(row(c));
            if (s > options.score_threshold) cands.push_back({s, l, a, i, c});
          }
        }
      }
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
  if (cands.size() > static_cast<std::size_t>(options.topk)) cands.resize(static_cast<std::size_t>(options.topk));

  const TimeInterval bounds{0.0, options.upper_bound};
  std::vector<ActionInstance> result;
  result.reserve(cands.size());
  for (const auto& c : cands) {
    const AnchorLevel& level = anchors.levels[c.level];
    const Matrix& off = out.levels[c.level].offsets.value();
    const double d0 = off(c.location, 2 * c.anchor);
    const double d1 = off(c.location, 2 * c.anchor + 1);
    const double center = level.center(c.location);
    const TimeInterval raw =
        anchors.anchor_free
            ? decode_anchor_free(center, level.stride, d0, d1)
            : decode_anchor_based(center, level.anchor_lengths[static_cast<std::size_t>(c.anchor)], d0, d1);
    ActionInstance inst;
    inst.interval = clamp_interval(raw, bounds);
    inst.label = options.binary_mode ? 0 : c.cls;
    inst.score = c.score;
    result.push_back(inst);
  }
  return result;
}

DenseHead::DenseHead(const HeadConfig& config, Index width, std::uint64_t seed) : config_(config) {
  nn::Initializer init(seed);
  const int a = config.anchors.per_location();
  for (int d = 0; d < config.tower_depth; ++d) {
    cls_tower_.emplace_back(params_, "cls_tower." + std::to_string(d), width, width, init);
    reg_tower_.emplace_back(params_, "reg_tower." + std::to_string(d), width, width, init);
  }
  cls_out_ = nn::Conv1d(params_, "cls_out", width, static_cast<Index>(config.num_classes) * a, init);
  cls_out_.bias.mutable_value().setConstant(-std::log((1.0 - config.prior_probability) / config.prior_probability));
  reg_out_ = nn::Conv1d(params_, "reg_out", width, 2 * static_cast<Index>(a), init);
  if (config.anchors.anchor_free()) reg_out_.bias.mutable_value().setOnes();
  if (config.aux_channels > 0) aux_out_ = nn::Conv1d(params_, "aux_out", width, config.aux_channels, init);
}

DenseHeadOutput DenseHead::forward(const neck::TensorPyramid& pyramid) const {
  DenseHeadOutput out;
  for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
    const Index valid = pyramid.valid[l];
    Tensor c = pyramid.levels[l];
    Tensor r = pyramid.levels[l];
    for (const auto& conv : cls_tower_) c = ag::relu(conv(c, valid));
    for (const auto& conv : reg_tower_) r = ag::relu(conv(r, valid));
    LevelOutput lo;
    lo.valid = valid;
    lo.stride = pyramid.strides[l];
    lo.class_logits = ag::mask_rows(cls_out_(c, valid), valid);
    Tensor offsets = ag::mask_rows(reg_out_(r, valid), valid);
    lo.offsets = config_.anchors.anchor_free() ? ag::relu(offsets) : offsets;
    if (config_.aux_channels > 0) lo.aux = ag::mask_rows(aux_out_(r, valid), valid);
    out.levels.push_back(std::move(lo));
  }
  return out;
}

AnchorSet DenseHead::anchors(const DenseHeadOutput& out) const {
  std::vector<Index> lengths;
  std::vector<int> strides;
  for (const auto& l : out.levels) {
    lengths.push_back(l.class_logits.rows());
    strides.push_back(l.stride);
  }
  return generate_anchors(lengths, strides, config_.anchors);
}

LossBreakdown DenseHead::loss(const DenseHeadOutput& out, const std::vector<ActionInstance>& gt_in) const {
  std::vector<ActionInstance> gt = gt_in;
  if (config_.binary_mode) {
    for (auto& g : gt) g.label = 1;
  }
  const AnchorSet anchors = this->anchors(out);
  std::vector<Index> valid;
  for (const auto& l : out.levels) valid.push_back(l.valid);
  const Targets targets = assign_labels(anchors, valid, gt, config_.assignment);
  const int a = anchors.per_location;
  const int c = config_.num_classes;

  std::vector<Index> valid_rows, pos_rows;
  for (std::size_t i = 0; i < targets.label.size(); ++i) {
    if (!targets.valid[i]) continue;
    valid_rows.push_back(static_cast<Index>(i));
    if (targets.positive(i)) pos_rows.push_back(static_cast<Index>(i));
  }
  const auto num_pos = static_cast<double>(pos_rows.size());

  // Classification over every valid anchor.
  const Tensor logits = ag::gather_rows(flatten_class_logits(out, a, c), valid_rows);
  Matrix onehot = Matrix::Zero(static_cast<Index>(valid_rows.size()), c);
  std::vector<int> labels(valid_rows.size(), -1);
  for (std::size_t r = 0; r < valid_rows.size(); ++r) {
    const int l = targets.label[static_cast<std::size_t>(valid_rows[r])];
    labels[r] = l;
    if (l >= 0) onehot(static_cast<Index>(r), l) = 1.0;
  }
  Tensor cls_loss;
  switch (config_.loss.classification) {
    case ClassificationLoss::kFocal:
      cls_loss = focal_loss(logits, onehot, config_.loss.focal_alpha, config_.loss.focal_gamma, num_pos);
      break;
    case ClassificationLoss::kCrossEntropy: cls_loss = cross_entropy_loss(logits, labels); break;
    case ClassificationLoss::kWeightedBce: cls_loss = weighted_bce_loss(logits, onehot, config_.loss.pos_weight); break;
    case ClassificationLoss::kBlr: cls_loss = blr_loss(logits, onehot); break;
  }

  // Regression over positives only, in a per-anchor normalised frame.
  const Tensor offsets = ag::gather_rows(flatten_offsets(out, a), pos_rows);
  const auto np = static_cast<Index>(pos_rows.size());
  Matrix encoded(np, 2), target_box(np, 2);
  for (Index p = 0; p < np; ++p) {
    const auto flat = pos_rows[static_cast<std::size_t>(p)];
    std::size_t l = 0;
    while (l + 1 < anchors.levels.size() && flat >= anchors.level_offset(l + 1)) ++l;
    const AnchorLevel& level = anchors.levels[l];
    const Index local = flat - anchors.level_offset(l);
    const Index anchor = local / level.locations;
    const Index loc = local % level.locations;
    const double center = level.center(loc);
    const TimeInterval& box = targets.box[static_cast<std::size_t>(flat)];
    if (anchors.anchor_free) {
      encoded.row(p) = encode_anchor_free(box, center, level.stride).transpose();
      target_box.row(p) << -encoded(p, 0), encoded(p, 1);
    } else {
      const double len = level.anchor_lengths[static_cast<std::size_t>(anchor)];
      encoded.row(p) = encode_anchor_based(box, center, len).transpose();
      target_box.row(p) << (box.start - center) / len, (box.end - center) / len;
    }
  }
  Tensor reg_loss;
  const RegressionLoss kind = config_.loss.regression;
  if (kind == RegressionLoss::kL2) {
    reg_loss = l2_loss(offsets, encoded);
  } else if (kind == RegressionLoss::kSmoothL1) {
    reg_loss = smooth_l1_loss(offsets, encoded);
  } else if (anchors.anchor_free) {
    const Tensor start = ag::scale(ag::slice_cols(offsets, 0, 1), -1.0);
    const Tensor end = ag::slice_cols(offsets, 1, 1);
    reg_loss = interval_iou_loss(start, end, target_box, kind);
  } else {
    const Tensor dc = ag::slice_cols(offsets, 0, 1);
    const Tensor half = ag::scale(ag::exp(ag::slice_cols(offsets, 1, 1)), 0.5);
    reg_loss = interval_iou_loss(ag::sub(dc, half), ag::add(dc, half), target_box, kind);
  }

  LossBreakdown result;
  result.num_positive = np;
  result.cls = cls_loss.item();
  result.reg = reg_loss.item();
  Tensor total = ag::add(ag::scale(cls_loss, config_.loss.cls_weight), ag::scale(reg_loss, config_.loss.reg_weight));

  if (config_.aux_channels > 0) {
    std::vector<Tensor> aux_logits;
    std::vector<Matrix> aux_targets;
    Index rows = 0;
    for (const auto& level : out.levels) {
      aux_logits.push_back(ag::slice_rows(level.aux, 0, level.valid));
      aux_targets.push_back(temporal_evaluation_targets(gt, level.valid, level.stride));
      rows += level.valid;
    }
    Matrix stacked(rows, config_.aux_channels);
    Index r = 0;
    for (const auto& m : aux_targets) {
      stacked.middleRows(r, m.rows()) = m;
      r += m.rows();
    }
    const Tensor aux_all = ag::concat_rows(aux_logits);
    Tensor aux_loss = Tensor::constant(Matrix::Zero(1, 1));
    for (int ch = 0; ch < config_.aux_channels; ++ch) {
      aux_loss = ag::add(aux_loss, blr_loss(ag::slice_cols(aux_all, ch, 1), stacked.col(ch)));
    }
    aux_loss = ag::scale(aux_loss, 1.0 / config_.aux_channels);
    result.aux = aux_loss.item();
    total = ag::add(total, ag::scale(aux_loss, config_.loss.aux_weight));
  }
  result.total = total;
  return result;
}

std::vector<ActionInstance> DenseHead::decode(const DenseHeadOutput& out, double upper_bound) const {
  DecodeOptions opts;
  opts.score_kind = config_.loss.classification;
  opts.binary_mode = config_.binary_mode;
  opts.score_threshold = config_.score_threshold;
  opts.topk = config_.pre_nms_topk;
  opts.upper_bound = upper_bound;
  return decode_proposals(out, anchors(out), config_.num_classes, opts);
}

}  // namespace minitad::heads
