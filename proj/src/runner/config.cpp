#include "minitad/runner/config.hpp"

#include "minitad/postproc/evaluation.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace minitad::runner {

using nlohmann::json;

const char* to_string(SuppressionMethod m) {
  switch (m) {
    case SuppressionMethod::kSoftNms: return "soft_nms";
    case SuppressionMethod::kNms: return "nms";
    case SuppressionMethod::kNone: return "none";
  }
  return "?";
}

SuppressionMethod parse_suppression_method(const std::string& name) {
  if (name == "soft_nms") return SuppressionMethod::kSoftNms;
  if (name == "nms") return SuppressionMethod::kNms;
  if (name == "none") return SuppressionMethod::kNone;
  throw std::invalid_argument("unknown post-processing method '" + name + "'");
}

std::vector<double> PostprocessConfig::effective_thresholds() const {
  return thresholds.empty() ? postproc::protocol_thresholds(protocol) : thresholds;
}

int TrainConfig::effective_epochs() const {
  return longer_epochs ? static_cast<int>(std::lround(epochs * longer_epochs_factor)) : epochs;
}

void ExperimentConfig::validate() const {
  const auto& d = dataset;
  if (d.synthetic.has_value() == !d.annotations.empty()) {
    throw std::invalid_argument("dataset needs exactly one of 'synthetic' or 'annotations'");
  }
  if (!d.annotations.empty() && d.features.empty()) {
    throw std::invalid_argument("dataset.features is required with dataset.annotations");
  }
  if (d.synthetic) d.synthetic->validate();
  d.mapping.validate();
  backbone.validate();
  neck.validate();
  heads.validate(static_cast<std::size_t>(neck.pyramid_levels));
  stage2.validate();
  if (stage2.enabled && stage2.roi.level >= neck.pyramid_levels) {
    throw std::invalid_argument("stage2.roi.level exceeds the pyramid depth");
  }
  postprocess.soft_nms.validate();
  postproc::EvalConfig{postprocess.effective_thresholds(), postprocess.max_predictions_per_video}.validate();
  if (postprocess.external_top_k < 1) throw std::invalid_argument("postprocess.external_top_k must be positive");
  const auto& t = train;
  if (t.epochs < 1 || t.batch_size < 1) throw std::invalid_argument("train.epochs and train.batch_size must be positive");
  if (!(t.learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be positive");
  if (t.warmup_epochs < 0 || t.weight_decay < 0.0) throw std::invalid_argument("train warmup/decay must be non-negative");
  if (t.channel_dropout < 0.0 || t.channel_dropout > 1.0) throw std::invalid_argument("channel_dropout in [0, 1]");
  if (t.longer_epochs_factor < 1.0) throw std::invalid_argument("train.longer_epochs_factor must be >= 1");
  if (t.eval_every < 1) throw std::invalid_argument("train.eval_every must be positive");
  if (t.seeds.empty()) throw std::invalid_argument("train.seeds must list at least one seed");
}

ConfigError::ConfigError(const std::string& summary, std::vector<std::string> problems)
    : std::invalid_argument([&] {
        std::string msg = summary;
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

json range_bound(double v) { return std::isinf(v) ? json("inf") : json(v); }

json pair_json(const std::pair<double, double>& p) { return json::array({p.first, p.second}); }
json pair_json(const std::pair<int, int>& p) { return json::array({p.first, p.second}); }

// Walks one object, consuming known keys and recording every problem.
class Reader {
 public:
  Reader(const json* node, std::string path, std::vector<std::string>* problems)
      : node_(node), path_(std::move(path)), problems_(problems) {
    if (node_ != nullptr && !node_->is_object()) {
      problems_->push_back(where() + ": expected a mapping");
      node_ = nullptr;
    }
  }

  ~Reader() {
    if (node_ == nullptr) return;
    for (const auto& [key, _] : node_->items()) {
      if (used_.count(key) == 0) problems_->push_back("unknown key '" + dotted(key) + "'");
    }
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  bool has(const std::string& key) const { return node_ != nullptr && node_->contains(key); }

  Reader child(const std::string& key) {
    used_.insert(key);
    const json* sub = has(key) ? &node_->at(key) : nullptr;
    return Reader(sub, dotted(key), problems_);
  }

  template <class T>
  void read(const std::string& key, T& target) {
    used_.insert(key);
    if (!has(key)) return;
    try {
      convert(node_->at(key), target);
    } catch (const std::exception& e) {
      problems_->push_back(dotted(key) + ": " + e.what());
    }
  }

  template <class T, class Parse>
  void read_enum(const std::string& key, T& target, Parse parse) {
    std::string name;
    used_.insert(key);
    if (!has(key)) return;
    try {
      convert(node_->at(key), name);
      target = parse(name);
    } catch (const std::exception& e) {
      problems_->push_back(dotted(key) + ": " + e.what());
    }
  }

  // Raw access for structured values.
  const json* raw(const std::string& key) {
    used_.insert(key);
    return has(key) ? &node_->at(key) : nullptr;
  }

  std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void problem(const std::string& msg) { problems_->push_back(msg); }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  static void convert(const json& v, bool& out) {
    if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
    out = v.get<bool>();
  }
  static void convert(const json& v, int& out) {
    if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
    out = v.get<int>();
  }
  static void convert(const json& v, std::uint64_t& out) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void convert(const json& v, double& out) {
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == ".inf")) {
      out = std::numeric_limits<double>::infinity();
      return;
    }
    if (!v.is_number()) throw std::invalid_argument("expected a number");
    out = v.get<double>();
  }
  static void convert(const json& v, std::string& out) {
    if (!v.is_string()) throw std::invalid_argument("expected a string");
    out = v.get<std::string>();
  }
  template <class A, class B>
  static void convert(const json& v, std::pair<A, B>& out) {
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument("expected a two-element list");
    convert(v[0], out.first);
    convert(v[1], out.second);
  }
  template <class T>
  static void convert(const json& v, std::vector<T>& out) {
    if (!v.is_array()) throw std::invalid_argument("expected a list");
    std::vector<T> tmp(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) convert(v[i], tmp[i]);
    out = std::move(tmp);
  }

  const json* node_;
  std::string path_;
  std::vector<std::string>* problems_;
  std::set<std::string> used_;
};

json synthetic_json(const data::SyntheticSpec& s) {
  return {{"num_videos", s.num_videos},
          {"feature_dim", s.feature_dim},
          {"length_range", pair_json(s.length_range)},
          {"num_classes", s.num_classes},
          {"actions_per_video", pair_json(s.actions_per_video)},
          {"duration_fraction_range", pair_json(s.duration_fraction_range)},
          {"class_signature_strength", s.class_signature_strength},
          {"noise_std", s.noise_std},
          {"seed", s.seed},
          {"val_fraction", s.val_fraction},
          {"frame_rate", s.frame_rate},
          {"feature_stride", s.feature_stride}};
}

void read_synthetic(Reader& r, data::SyntheticSpec& s) {
  r.read("num_videos", s.num_videos);
  r.read("feature_dim", s.feature_dim);
  r.read("length_range", s.length_range);
  r.read("num_classes", s.num_classes);
  r.read("actions_per_video", s.actions_per_video);
  r.read("duration_fraction_range", s.duration_fraction_range);
  r.read("class_signature_strength", s.class_signature_strength);
  r.read("noise_std", s.noise_std);
  r.read("seed", s.seed);
  r.read("val_fraction", s.val_fraction);
  r.read("frame_rate", s.frame_rate);
  r.read("feature_stride", s.feature_stride);
}

}  // namespace

json synthetic_spec_to_json(const data::SyntheticSpec& spec) { return synthetic_json(spec); }

data::SyntheticSpec synthetic_spec_from_json(const json& doc) {
  std::vector<std::string> problems;
  data::SyntheticSpec spec;
  {
    Reader r(&doc, "", &problems);
    read_synthetic(r, spec);
  }
  if (!problems.empty()) throw ConfigError("invalid synthetic spec:", problems);
  return spec;
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  const auto& d = c.dataset;
  json dataset = {{"annotations", d.annotations},
                  {"features", d.features},
                  {"binary_mode", d.binary_mode},
                  {"train_subset", d.train_subset},
                  {"eval_subset", d.eval_subset},
                  {"mapping",
                   {{"mode", data::to_string(d.mapping.mode)},
                    {"target_length", d.mapping.target_length},
                    {"train_overlap", d.mapping.train_overlap},
                    {"test_overlap", d.mapping.test_overlap},
                    {"keep_threshold", d.mapping.keep_threshold}}}};
  if (d.synthetic) dataset["synthetic"] = synthetic_json(*d.synthetic);
  doc["dataset"] = dataset;

  const auto& b = c.backbone;
  doc["backbone"] = {{"mode", backbone::to_string(b.mode)},
                     {"snippet_length", b.snippet_length},
                     {"snippet_stride", b.snippet_stride},
                     {"temporal_pool_factor", b.temporal_pool_factor},
                     {"output_dim", b.output_dim},
                     {"hidden", b.hidden},
                     {"trainable", b.trainable}};

  const auto& n = c.neck;
  json mix = json::array();
  for (const auto& m : n.mix) {
    mix.push_back({{"macro_block", neck::to_string(m.macro)}, {"sequential_module", neck::to_string(m.sequential)}});
  }
  doc["neck"] = {{"macro_block", neck::to_string(n.macro_block)},
                 {"sequential_module", neck::to_string(n.sequential_module)},
                 {"mix", mix},
                 {"width", n.width},
                 {"depth", n.depth},
                 {"pyramid_levels", n.pyramid_levels},
                 {"downsample", neck::to_string(n.downsample)},
                 {"graph_k", n.graph_k},
                 {"heads", n.heads},
                 {"zero_init_residual", n.zero_init_residual}};

  const auto& h = c.heads;
  json ranges = json::array();
  for (const auto& [lo, hi] : h.assignment.regression_ranges) ranges.push_back({range_bound(lo), range_bound(hi)});
  doc["heads"] = {{"anchors", {{"lengths", h.anchors.lengths}, {"scale_with_stride", h.anchors.scale_with_stride}}},
                  {"assignment",
                   {{"strategy", heads::to_string(h.assignment.strategy)},
                    {"radius", h.assignment.radius},
                    {"iou_pos_threshold", h.assignment.iou_pos_threshold},
                    {"regression_ranges", ranges},
                    {"range_base", h.assignment.range_base}}},
                  {"loss",
                   {{"classification", heads::to_string(h.loss.classification)},
                    {"focal_alpha", h.loss.focal_alpha},
                    {"focal_gamma", h.loss.focal_gamma},
                    {"pos_weight", h.loss.pos_weight},
                    {"regression", heads::to_string(h.loss.regression)},
                    {"aux_weight", h.loss.aux_weight},
                    {"cls_weight", h.loss.cls_weight},
                    {"reg_weight", h.loss.reg_weight}}},
                  {"aux_channels", h.aux_channels},
                  {"tower_depth", h.tower_depth},
                  {"prior_probability", h.prior_probability},
                  {"score_threshold", h.score_threshold},
                  {"pre_nms_topk", h.pre_nms_topk}};

  const auto& s = c.stage2;
  doc["stage2"] = {{"enabled", s.enabled},
                   {"roi",
                    {{"method", stage2::to_string(s.roi.method)},
                     {"samples", s.roi.samples},
                     {"extension_ratio", s.roi.extension_ratio},
                     {"bm_max_duration", s.roi.bm_max_duration},
                     {"level", s.roi.level}}},
                   {"hidden", s.hidden},
                   {"aux_channels", s.aux_channels},
                   {"cascade", s.cascade},
                   {"train_proposals", s.train_proposals},
                   {"test_proposals", s.test_proposals},
                   {"selection_nms", s.selection_nms},
                   {"positive_tiou", s.positive_tiou},
                   {"loss_weight", s.loss_weight}};

  const auto& p = c.postprocess;
  doc["postprocess"] = {{"method", to_string(p.method)},
                        {"soft_nms",
                         {{"method", postproc::to_string(p.soft_nms.method)},
                          {"iou_threshold", p.soft_nms.iou_threshold},
                          {"sigma", p.soft_nms.sigma},
                          {"score_floor", p.soft_nms.score_floor},
                          {"per_class", p.soft_nms.per_class}}},
                        {"nms_threshold", p.nms_threshold},
                        {"protocol", p.protocol},
                        {"thresholds", p.thresholds},
                        {"max_predictions_per_video", p.max_predictions_per_video},
                        {"external_scores", p.external_scores},
                        {"external_top_k", p.external_top_k}};

  const auto& t = c.train;
  doc["train"] = {{"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"learning_rate", t.learning_rate},
                  {"warmup_epochs", t.warmup_epochs},
                  {"weight_decay", t.weight_decay},
                  {"grad_clip", t.grad_clip},
                  {"channel_dropout", t.channel_dropout},
                  {"longer_epochs", t.longer_epochs},
                  {"longer_epochs_factor", t.longer_epochs_factor},
                  {"eval_every", t.eval_every},
                  {"seeds", t.seeds}};
  return doc;
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  {
    Reader root(&doc, "", &problems);
    {
      Reader d = root.child("dataset");
      if (d.has("synthetic")) {
        c.dataset.synthetic.emplace();
        Reader s = d.child("synthetic");
        read_synthetic(s, *c.dataset.synthetic);
      } else {
        (void)d.raw("synthetic");
      }
      d.read("annotations", c.dataset.annotations);
      d.read("features", c.dataset.features);
      d.read("binary_mode", c.dataset.binary_mode);
      d.read("train_subset", c.dataset.train_subset);
      d.read("eval_subset", c.dataset.eval_subset);
      Reader m = d.child("mapping");
      m.read_enum("mode", c.dataset.mapping.mode, data::parse_mapping_mode);
      m.read("target_length", c.dataset.mapping.target_length);
      m.read("train_overlap", c.dataset.mapping.train_overlap);
      m.read("test_overlap", c.dataset.mapping.test_overlap);
      m.read("keep_threshold", c.dataset.mapping.keep_threshold);
    }
    {
      Reader b = root.child("backbone");
      b.read_enum("mode", c.backbone.mode, backbone::parse_backbone_mode);
      b.read("snippet_length", c.backbone.snippet_length);
      b.read("snippet_stride", c.backbone.snippet_stride);
      b.read("temporal_pool_factor", c.backbone.temporal_pool_factor);
      b.read("output_dim", c.backbone.output_dim);
      b.read("hidden", c.backbone.hidden);
      b.read("trainable", c.backbone.trainable);
    }
    {
      Reader n = root.child("neck");
      n.read_enum("macro_block", c.neck.macro_block, neck::parse_macro_block);
      n.read_enum("sequential_module", c.neck.sequential_module, neck::parse_sequential_kind);
      if (const json* mix = n.raw("mix")) {
        if (!mix->is_array()) {
          n.problem(n.dotted("mix") + ": expected a list");
        } else {
          c.neck.mix.clear();
          for (std::size_t i = 0; i < mix->size(); ++i) {
            neck::BlockChoice choice;
            Reader e(&(*mix)[i], n.dotted("mix") + "." + std::to_string(i), &problems);
            e.read_enum("macro_block", choice.macro, neck::parse_macro_block);
            e.read_enum("sequential_module", choice.sequential, neck::parse_sequential_kind);
            c.neck.mix.push_back(choice);
          }
        }
      }
      n.read("width", c.neck.width);
      n.read("depth", c.neck.depth);
      n.read("pyramid_levels", c.neck.pyramid_levels);
      n.read_enum("downsample", c.neck.downsample, neck::parse_downsample);
      n.read("graph_k", c.neck.graph_k);
      n.read("heads", c.neck.heads);
      n.read("zero_init_residual", c.neck.zero_init_residual);
    }
    {
      Reader h = root.child("heads");
      {
        Reader a = h.child("anchors");
        a.read("lengths", c.heads.anchors.lengths);
        a.read("scale_with_stride", c.heads.anchors.scale_with_stride);
      }
      {
        Reader a = h.child("assignment");
        a.read_enum("strategy", c.heads.assignment.strategy, heads::parse_assign_strategy);
        a.read("radius", c.heads.assignment.radius);
        a.read("iou_pos_threshold", c.heads.assignment.iou_pos_threshold);
        a.read("regression_ranges", c.heads.assignment.regression_ranges);
        a.read("range_base", c.heads.assignment.range_base);
      }
      {
        Reader l = h.child("loss");
        l.read_enum("classification", c.heads.loss.classification, heads::parse_classification_loss);
        l.read("focal_alpha", c.heads.loss.focal_alpha);
        l.read("focal_gamma", c.heads.loss.focal_gamma);
        l.read("pos_weight", c.heads.loss.pos_weight);
        l.read_enum("regression", c.heads.loss.regression, heads::parse_regression_loss);
        l.read("aux_weight", c.heads.loss.aux_weight);
        l.read("cls_weight", c.heads.loss.cls_weight);
        l.read("reg_weight", c.heads.loss.reg_weight);
      }
      h.read("aux_channels", c.heads.aux_channels);
      h.read("tower_depth", c.heads.tower_depth);
      h.read("prior_probability", c.heads.prior_probability);
      h.read("score_threshold", c.heads.score_threshold);
      h.read("pre_nms_topk", c.heads.pre_nms_topk);
    }
    {
      Reader s = root.child("stage2");
      s.read("enabled", c.stage2.enabled);
      {
        Reader r = s.child("roi");
        r.read_enum("method", c.stage2.roi.method, stage2::parse_roi_method);
        r.read("samples", c.stage2.roi.samples);
        r.read("extension_ratio", c.stage2.roi.extension_ratio);
        r.read("bm_max_duration", c.stage2.roi.bm_max_duration);
        r.read("level", c.stage2.roi.level);
      }
      s.read("hidden", c.stage2.hidden);
      s.read("aux_channels", c.stage2.aux_channels);
      s.read("cascade", c.stage2.cascade);
      s.read("train_proposals", c.stage2.train_proposals);
      s.read("test_proposals", c.stage2.test_proposals);
      s.read("selection_nms", c.stage2.selection_nms);
      s.read("positive_tiou", c.stage2.positive_tiou);
      s.read("loss_weight", c.stage2.loss_weight);
    }
    {
      Reader p = root.child("postprocess");
      p.read_enum("method", c.postprocess.method, parse_suppression_method);
      {
        Reader s = p.child("soft_nms");
        s.read_enum("method", c.postprocess.soft_nms.method, postproc::parse_soft_nms_method);
        s.read("iou_threshold", c.postprocess.soft_nms.iou_threshold);
        s.read("sigma", c.postprocess.soft_nms.sigma);
        s.read("score_floor", c.postprocess.soft_nms.score_floor);
        s.read("per_class", c.postprocess.soft_nms.per_class);
      }
      p.read("nms_threshold", c.postprocess.nms_threshold);
      p.read("protocol", c.postprocess.protocol);
      p.read("thresholds", c.postprocess.thresholds);
      p.read("max_predictions_per_video", c.postprocess.max_predictions_per_video);
      p.read("external_scores", c.postprocess.external_scores);
      p.read("external_top_k", c.postprocess.external_top_k);
    }
    {
      Reader t = root.child("train");
      t.read("epochs", c.train.epochs);
      t.read("batch_size", c.train.batch_size);
      t.read("learning_rate", c.train.learning_rate);
      t.read("warmup_epochs", c.train.warmup_epochs);
      t.read("weight_decay", c.train.weight_decay);
      t.read("grad_clip", c.train.grad_clip);
      t.read("channel_dropout", c.train.channel_dropout);
      t.read("longer_epochs", c.train.longer_epochs);
      t.read("longer_epochs_factor", c.train.longer_epochs_factor);
      t.read("eval_every", c.train.eval_every);
      t.read("seeds", c.train.seeds);
    }
  }
  if (!problems.empty()) throw ConfigError("invalid experiment config:", problems);
  c.heads.binary_mode = c.dataset.binary_mode;
  if (c.dataset.binary_mode) {
    c.heads.num_classes = 2;
  } else if (c.dataset.synthetic) {
    c.heads.num_classes = c.dataset.synthetic->num_classes;
  }
  c.validate();
  return c;
}

namespace {

json yaml_node_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(yaml_node_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_node_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar: break;
  }
  const std::string text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  if (text == "true" || text == "True") return true;
  if (text == "false" || text == "False") return false;
  if (text == "~" || text == "null") return nullptr;
  if (text == ".inf" || text == "inf") return "inf";
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(text, &pos);
    if (pos == text.size()) return i;
  } catch (const std::exception&) {
  }
  try {
    std::size_t pos = 0;
    const double d = std::stod(text, &pos);
    if (pos == text.size()) return d;
  } catch (const std::exception&) {
  }
  return text;
}

}  // namespace

json yaml_to_json(const std::string& yaml_text) {
  try {
    const YAML::Node root = YAML::Load(yaml_text);
    if (!root.IsDefined() || root.IsNull()) return json::object();
    return yaml_node_to_json(root);
  } catch (const YAML::Exception& e) {
    throw ConfigError("malformed YAML:", {e.what()});
  }
}

ExperimentConfig parse_config_yaml(const std::string& yaml_text) { return config_from_json(yaml_to_json(yaml_text)); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_yaml(buf.str());
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  // JSON is a YAML subset, so the canonical form loads back through load_config.
  out << config_to_json(config).dump(2) << '\n';
}

void apply_override(json& doc, const std::string& dotted_path, const std::string& value) {
  json* node = &doc;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', begin);
    const std::string key = dotted_path.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("override refers to an unknown config path:", {dotted_path});
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  const json parsed = yaml_to_json(value);
  *node = parsed.is_object() && parsed.empty() ? json(value) : parsed;
}

ExperimentConfig with_override(const ExperimentConfig& config, const std::string& dotted_path,
                               const std::string& value) {
  json doc = config_to_json(config);
  apply_override(doc, dotted_path, value);
  return config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& config) {
  json doc = config_to_json(config);
  doc["train"].erase("seeds");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace minitad::runner
