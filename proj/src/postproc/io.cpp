#include "minitad/postproc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace minitad::postproc {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int resolve_label(const LabelSpace& labels, const std::string& name, const std::string& where) {
  const auto idx = labels.find(name);
  if (!idx) throw std::invalid_argument(where + ": unknown label '" + name + "'");
  return *idx;
}

}  // namespace

nlohmann::json detections_to_json(const std::vector<ProposalSet>& sets, const LabelSpace& labels) {
  nlohmann::json results = nlohmann::json::object();
  for (const auto& raw : sets) {
    const ProposalSet set = to_seconds(raw);
    auto& list = results[set.video_id];
    if (list.is_null()) list = nlohmann::json::array();
    for (const auto& p : set.proposals) {
      const std::string name = p.label >= 0 && p.label < labels.num_classes()
                                   ? labels.class_names[static_cast<std::size_t>(p.label)]
                                   : std::to_string(p.label);
      list.push_back({{"segment", {p.interval.start, p.interval.end}}, {"label", name}, {"score", p.score.value_or(0.0)}});
    }
  }
  return {{"results", results}};
}

std::vector<ProposalSet> detections_from_json(const nlohmann::json& doc, const LabelSpace& labels) {
  if (!doc.is_object() || !doc.contains("results") || !doc["results"].is_object()) {
    throw std::invalid_argument("detections: expected an object with a \"results\" object");
  }
  std::vector<ProposalSet> sets;
  for (const auto& [vid, list] : doc["results"].items()) {
    ProposalSet set;
    set.video_id = vid;
    set.unit = TimeUnit::kSeconds;
    if (!list.is_array()) throw std::invalid_argument("detections: /results/" + vid + " must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& d = list[i];
      const std::string where = "detections: /results/" + vid + "/" + std::to_string(i);
      if (!d.contains("segment") || !d["segment"].is_array() || d["segment"].size() != 2) {
        throw std::invalid_argument(where + "/segment must be [start, end]");
      }
      ActionInstance a;
      a.interval = {d["segment"][0].get<double>(), d["segment"][1].get<double>()};
      a.label = resolve_label(labels, d.at("label").get<std::string>(), where);
      a.score = d.at("score").get<double>();
      set.proposals.push_back(a);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

void save_detections(const std::vector<ProposalSet>& sets, const LabelSpace& labels, const std::filesystem::path& path) {
  write_text(path, detections_to_json(sets, labels).dump(1) + "\n");
}

std::vector<ProposalSet> load_detections(const std::filesystem::path& path, const LabelSpace& labels) {
  return detections_from_json(read_json(path), labels);
}

ExternalScores external_scores_from_json(const nlohmann::json& doc, const LabelSpace& labels) {
  if (!doc.is_object()) throw std::invalid_argument("external scores: expected an object keyed by video id");
  ExternalScores out;
  for (const auto& [vid, entry] : doc.items()) {
    const auto& names = entry.at("labels");
    const auto& probs = entry.at("scores");
    if (names.size() != probs.size()) {
      throw std::invalid_argument("external scores: labels/scores length mismatch for '" + vid + "'");
    }
    auto& vec = out[vid];
    for (std::size_t i = 0; i < names.size(); ++i) {
      vec.emplace_back(resolve_label(labels, names[i].get<std::string>(), "external scores: " + vid),
                       probs[i].get<double>());
    }
  }
  return out;
}

ExternalScores load_external_scores(const std::filesystem::path& path, const LabelSpace& labels) {
  return external_scores_from_json(read_json(path), labels);
}

std::string report_csv(const EvalResult& result) {
  std::ostringstream out;
  out << "threshold,mAP\n";
  char buf[64];
  for (std::size_t i = 0; i < result.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f,%.6f\n", result.thresholds[i], result.map[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "average,%.6f\n", result.average);
  out << buf;
  return out.str();
}

void save_report(const EvalResult& result, const std::filesystem::path& path) { write_text(path, report_csv(result)); }

}  // namespace minitad::postproc
