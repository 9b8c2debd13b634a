#include "minitad/runner/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace minitad::runner {

std::uint64_t derive_seed(std::uint64_t seed, const std::string& stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finaliser
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Detector::Detector(const ExperimentConfig& config, Index input_dim, int num_classes, std::uint64_t seed)
    : config_(config) {
  config_.heads.num_classes = config_.heads.binary_mode ? 2 : num_classes;
  backbone_ = std::make_unique<backbone::Backbone>(config_.backbone, input_dim, derive_seed(seed, "backbone"));
  const Index encoded_dim =
      config_.backbone.mode == backbone::BackboneMode::kPrecomputed ? input_dim : config_.backbone.output_dim;
  neck_ = std::make_unique<neck::Neck>(config_.neck, encoded_dim, derive_seed(seed, "neck"));
  head_ = std::make_unique<heads::DenseHead>(config_.heads, config_.neck.width, derive_seed(seed, "heads"));
  if (config_.stage2.enabled) {
    const int classes = config_.heads.binary_mode ? 1 : config_.heads.num_classes;
    stage2_ = std::make_unique<stage2::Stage2>(config_.stage2, config_.neck.width, classes, derive_seed(seed, "stage2"));
  }
  all_params_.extend("backbone.", backbone_->parameters());
  all_params_.extend("", neck_->parameters());
  all_params_.extend("head.", head_->parameters());
  if (stage2_) all_params_.extend("stage2.", stage2_->parameters());
}

Detector::Encoded Detector::run(const Tensor& input, Index valid) const {
  const backbone::EncodedSequence enc = backbone_->encode(input, valid, 1.0, 1.0);
  Tensor x = enc.values;
  const Index min_len = Index{1} << (config_.neck.pyramid_levels - 1);
  if (x.rows() < min_len) {
    x = ag::concat_rows({x, Tensor::constant(ag::Matrix::Zero(min_len - x.rows(), x.cols()))});
  }
  Encoded e;
  e.valid = enc.valid;
  e.pyramid = neck_->forward(x, enc.valid);
  e.head = head_->forward(e.pyramid);
  return e;
}

std::vector<ActionInstance> Detector::to_encoded(const std::vector<ActionInstance>& gt) const {
  std::vector<ActionInstance> out = gt;
  for (auto& g : out) {
    g.interval = {backbone_->from_input_position(g.interval.start), backbone_->from_input_position(g.interval.end)};
  }
  return out;
}

std::vector<ActionInstance> Detector::to_input(const std::vector<ActionInstance>& p, double input_valid) const {
  std::vector<ActionInstance> out = p;
  for (auto& a : out) {
    const double s = std::clamp(backbone_->to_input_position(a.interval.start), 0.0, input_valid);
    const double e = std::clamp(backbone_->to_input_position(a.interval.end), 0.0, input_valid);
    a.interval = {s, std::max(s, e)};
  }
  return out;
}

namespace {

std::vector<ActionInstance> rescale_intervals(std::vector<ActionInstance> p, double factor) {
  for (auto& a : p) a.interval = {a.interval.start * factor, a.interval.end * factor};
  return p;
}

}  // namespace

LossParts Detector::loss(const Tensor& input, Index valid, const std::vector<ActionInstance>& gt) const {
  const std::vector<ActionInstance> gt_enc = to_encoded(gt);
  const Encoded e = run(input, valid);
  const heads::LossBreakdown lb = head_->loss(e.head, gt_enc);
  LossParts parts;
  parts.total = lb.total;
  parts.cls = lb.cls;
  parts.reg = lb.reg;
  parts.aux = lb.aux;
  parts.num_positive = lb.num_positive;
  if (stage2_) {
    const auto& s2 = config_.stage2;
    const auto level = static_cast<std::size_t>(s2.roi.level);
    const double stride = e.pyramid.strides[level];
    std::vector<ActionInstance> proposals =
        stage2::select_proposals(head_->decode(e.head, static_cast<double>(e.valid)), s2.selection_nms,
                                 s2.train_proposals);
    std::vector<ActionInstance> targets = gt_enc;
    for (auto& t : targets) {
      if (config_.heads.binary_mode) t.label = 0;
      ActionInstance p = t;
      p.score = 1.0;
      proposals.push_back(p);
    }
    const stage2::Stage2Loss l2 =
        stage2_->loss(e.pyramid.levels[level], e.pyramid.valid[level], rescale_intervals(proposals, 1.0 / stride),
                      rescale_intervals(targets, 1.0 / stride));
    parts.total = ag::add(parts.total, l2.total);
    parts.stage2 = l2.total.item();
  }
  return parts;
}

std::vector<ActionInstance> Detector::predict(const FeatureSequence& input, bool use_stage2,
                                              PredictTrace* trace) const {
  ag::NoGradGuard guard;
  const Encoded e = run(Tensor::constant(input.values), input.valid_length);
  std::vector<ActionInstance> proposals = head_->decode(e.head, static_cast<double>(e.valid));
  if (trace) trace->stage1 = to_input(proposals, static_cast<double>(input.valid_length));
  if (stage2_ && use_stage2) {
    const auto& s2 = config_.stage2;
    const auto level = static_cast<std::size_t>(s2.roi.level);
    const double stride = e.pyramid.strides[level];
    const auto selected = stage2::select_proposals(proposals, s2.selection_nms, s2.test_proposals);
    const stage2::CascadeResult r =
        stage2_->run(e.pyramid.levels[level], e.pyramid.valid[level], rescale_intervals(selected, 1.0 / stride));
    if (trace) {
      trace->stage2 = r.per_stage;
      trace->stage2_valid = e.pyramid.valid[level];
    }
    proposals = rescale_intervals(r.refined, stride);
    std::stable_sort(proposals.begin(), proposals.end(), [](const ActionInstance& a, const ActionInstance& b) {
      return a.score.value_or(0.0) > b.score.value_or(0.0);
    });
  }
  return to_input(proposals, static_cast<double>(input.valid_length));
}

std::vector<Tensor> Detector::trainable_parameters() const {
  std::vector<Tensor> out;
  const bool backbone_trainable =
      config_.backbone.trainable && config_.backbone.mode != backbone::BackboneMode::kPrecomputed;
  for (const auto& [name, t] : all_params_.items()) {
    if (!backbone_trainable && name.rfind("backbone.", 0) == 0) continue;
    out.push_back(t);
  }
  return out;
}

nlohmann::json Detector::state_to_json() const {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : all_params_.items()) {
    const ag::Matrix& m = t.value();
    std::vector<double> data(m.data(), m.data() + m.size());
    params[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  }
  return params;
}

void Detector::load_state(const nlohmann::json& state) {
  for (const auto& [name, t] : all_params_.items()) {
    if (!state.contains(name)) throw std::runtime_error("checkpoint lacks parameter '" + name + "'");
    const auto& entry = state.at(name);
    Tensor handle = t;
    ag::Matrix& m = handle.mutable_value();
    if (entry.at("rows").get<Index>() != m.rows() || entry.at("cols").get<Index>() != m.cols()) {
      throw std::runtime_error("checkpoint parameter '" + name + "' has the wrong shape");
    }
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != m.size()) {
      throw std::runtime_error("checkpoint parameter '" + name + "' has the wrong size");
    }
    std::copy(data.begin(), data.end(), m.data());
  }
  if (state.size() != all_params_.items().size()) {
    throw std::runtime_error("checkpoint has parameters this model does not");
  }
}

}  // namespace minitad::runner
