#include "minitad/stage2/proposal_head.hpp"

#include "minitad/core/interval.hpp"
#include "minitad/heads/losses.hpp"
#include "minitad/postproc/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minitad::stage2 {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::vector<TimeInterval> intervals_of(const std::vector<ActionInstance>& p) {
  std::vector<TimeInterval> out;
  out.reserve(p.size());
  for (const auto& a : p) out.push_back(a.interval);
  return out;
}

}  // namespace

void Stage2Config::validate() const {
  roi.validate();
  if (hidden < 1) throw std::invalid_argument("stage2 hidden width must be positive");
  if (aux_channels != 0 && aux_channels != 1) throw std::invalid_argument("stage2 aux_channels must be 0 or 1");
  if (cascade < 1) throw std::invalid_argument("stage2 cascade needs at least one head");
  if (train_proposals < 1 || test_proposals < 1) throw std::invalid_argument("stage2 proposal counts must be positive");
  if (!(positive_tiou >= 0.0 && positive_tiou < 1.0)) throw std::invalid_argument("positive_tiou in [0, 1)");
  if (loss_weight < 0.0) throw std::invalid_argument("stage2 loss_weight must be non-negative");
}

ProposalHead::ProposalHead(nn::ParameterSet& params, const std::string& name, Index in_dim, int hidden,
                           int num_classes_, int aux_channels_, nn::Initializer& init)
    : fc1(params, name + ".fc1", in_dim, hidden, init),
      fc2(params, name + ".fc2", hidden, hidden, init),
      out(params, name + ".out", hidden, 2 + num_classes_ + aux_channels_, init),
      num_classes(num_classes_),
      aux_channels(aux_channels_) {}

ProposalHeadOutput ProposalHead::forward(const Tensor& roi_features) const {
  const Tensor h = ag::relu(fc2(ag::relu(fc1(roi_features))));
  const Tensor o = out(h);
  ProposalHeadOutput r;
  r.deltas = ag::slice_cols(o, 0, 2);
  r.class_logits = ag::slice_cols(o, 2, num_classes);
  if (aux_channels > 0) r.aux = ag::slice_cols(o, 2 + num_classes, aux_channels);
  return r;
}

TimeInterval refine_interval(const TimeInterval& p, double ds, double de, double upper) {
  const double len = p.length();
  TimeInterval r{p.start + ds * len, p.end + de * len};
  r.start = std::clamp(r.start, 0.0, upper);
  r.end = std::clamp(r.end, 0.0, upper);
  if (r.start > r.end) {
    const double mid = 0.5 * (r.start + r.end);
    r = {mid, mid};
  }
  return r;
}

double fuse_scores(const std::vector<double>& probabilities) {
  if (probabilities.empty()) throw std::invalid_argument("fuse_scores needs at least one probability");
  double log_sum = 0.0;
  for (double p : probabilities) {
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  if (probabilities.size() == 2) return std::sqrt(probabilities[0] * probabilities[1]);
  return std::exp(log_sum / static_cast<double>(probabilities.size()));
}

Stage2Targets assign_stage2_labels(const std::vector<ActionInstance>& proposals, const std::vector<ActionInstance>& gt,
                                   double threshold) {
  Stage2Targets t;
  for (const auto& p : proposals) {
    double best = 0.0;
    int best_idx = -1;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double o = tiou(p.interval, gt[g].interval);
      if (o > best) {
        best = o;
        best_idx = static_cast<int>(g);
      }
    }
    const bool pos = best_idx >= 0 && best > threshold;
    t.label.push_back(pos ? gt[static_cast<std::size_t>(best_idx)].label : -1);
    t.box.push_back(pos ? gt[static_cast<std::size_t>(best_idx)].interval : TimeInterval{});
    t.best_tiou.push_back(best);
  }
  return t;
}

std::vector<ActionInstance> select_proposals(const std::vector<ActionInstance>& stage1, double nms_threshold,
                                             int limit) {
  postproc::ProposalSet set;
  set.proposals = stage1;
  auto kept = postproc::nms(set, nms_threshold, true).proposals;
  if (kept.size() > static_cast<std::size_t>(limit)) kept.resize(static_cast<std::size_t>(limit));
  return kept;
}

Stage2::Stage2(const Stage2Config& config, Index feature_dim, int num_classes, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Initializer init(seed);
  if (config_.roi.method == RoiMethod::kSgAlign) {
    graph_ = neck::GraphAggregation(params_, "graph", feature_dim, 8, init);
    has_graph_ = true;
  }
  const Index in_dim = static_cast<Index>(config_.roi.rows_per_proposal()) * feature_dim;
  for (int h = 0; h < config_.cascade; ++h) {
    heads_.push_back(std::make_unique<ProposalHead>(params_, "head" + std::to_string(h), in_dim, config_.hidden,
                                                    num_classes, config_.aux_channels, init));
  }
}

CascadeResult Stage2::run(const Tensor& features, Index valid, const std::vector<ActionInstance>& proposals) const {
  ag::NoGradGuard guard;
  CascadeResult result;
  result.refined = proposals;
  std::vector<std::vector<double>> probs(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) probs[i].push_back(proposals[i].score.value_or(0.0));
  if (proposals.empty()) return result;
  for (const auto& head : heads_) {
    const Tensor feats = extract_rois(features, valid, intervals_of(result.refined), config_.roi, graph());
    const ProposalHeadOutput out = head->forward(feats);
    const Matrix& d = out.deltas.value();
    const Matrix& logits = out.class_logits.value();
    for (std::size_t i = 0; i < result.refined.size(); ++i) {
      auto& p = result.refined[i];
      const auto r = static_cast<Index>(i);
      p.interval = refine_interval(p.interval, d(r, 0), d(r, 1), static_cast<double>(valid));
      const int col = std::clamp(p.label, 0, head->num_classes - 1);
      probs[i].push_back(sigmoid(logits(r, col)));
    }
    result.per_stage.push_back(intervals_of(result.refined));
  }
  for (std::size_t i = 0; i < result.refined.size(); ++i) result.refined[i].score = fuse_scores(probs[i]);
  return result;
}

Stage2Loss Stage2::loss(const Tensor& features, Index valid, const std::vector<ActionInstance>& proposals,
                        const std::vector<ActionInstance>& gt) const {
  Stage2Loss result;
  Tensor total = Tensor::constant(Matrix::Zero(1, 1));
  if (proposals.empty()) {
    result.total = total;
    return result;
  }
  std::vector<ActionInstance> current = proposals;
  for (const auto& head : heads_) {
    const Tensor feats = extract_rois(features, valid, intervals_of(current), config_.roi, graph());
    const ProposalHeadOutput out = head->forward(feats);
    const Stage2Targets t = assign_stage2_labels(current, gt, config_.positive_tiou);
    const auto n = static_cast<Index>(current.size());

    Matrix onehot = Matrix::Zero(n, head->num_classes);
    std::vector<Index> reg_rows;
    for (Index i = 0; i < n; ++i) {
      const int l = t.label[static_cast<std::size_t>(i)];
      if (l < 0) continue;
      onehot(i, std::clamp(l, 0, head->num_classes - 1)) = 1.0;
      if (current[static_cast<std::size_t>(i)].interval.length() > 0.0) reg_rows.push_back(i);
    }
    const Tensor cls = heads::weighted_bce_loss(out.class_logits, onehot, 1.0);
    Matrix reg_target(static_cast<Index>(reg_rows.size()), 2);
    for (std::size_t k = 0; k < reg_rows.size(); ++k) {
      const auto i = static_cast<std::size_t>(reg_rows[k]);
      const TimeInterval& p = current[i].interval;
      reg_target(static_cast<Index>(k), 0) = (t.box[i].start - p.start) / p.length();
      reg_target(static_cast<Index>(k), 1) = (t.box[i].end - p.end) / p.length();
    }
    const Tensor reg = heads::smooth_l1_loss(ag::gather_rows(out.deltas, reg_rows), reg_target);
    Tensor stage = ag::add(cls, reg);
    if (head->aux_channels > 0) {
      Matrix completeness(n, 1);
      for (Index i = 0; i < n; ++i) completeness(i, 0) = t.best_tiou[static_cast<std::size_t>(i)];
      stage = ag::add(stage, heads::weighted_bce_loss(out.aux, completeness, 1.0));
    }
    total = ag::add(total, stage);
    result.cls += cls.item();
    result.reg += reg.item();
    result.num_positive += static_cast<Index>(reg_rows.size());

    const Matrix& d = out.deltas.value();
    for (Index i = 0; i < n; ++i) {
      auto& p = current[static_cast<std::size_t>(i)];
      p.interval = refine_interval(p.interval, d(i, 0), d(i, 1), static_cast<double>(valid));
    }
  }
  result.total = ag::scale(total, config_.loss_weight);
  return result;
}

}  // namespace minitad::stage2
