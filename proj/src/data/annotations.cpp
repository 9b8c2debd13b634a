#include "minitad/data/annotations.hpp"

#include "minitad/core/interval.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace minitad::data {

namespace {

std::string escape_pointer_token(const std::string& token) {
  std::string out;
  for (char c : token) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

const nlohmann::json& require(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw AnnotationParseError(where + "/" + escape_pointer_token(key), "missing required key");
  }
  return obj.at(key);
}

double require_number(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw AnnotationParseError(where, "expected a number");
  return v.get<double>();
}

std::string join(const std::vector<std::string>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? ", " : "") << items[i];
  return os.str();
}

}  // namespace

std::vector<std::string> AnnotationDatabase::ids(Subset subset) const {
  std::vector<std::string> out;
  for (const auto& [id, rec] : videos) {
    if (rec.subset == subset) out.push_back(id);
  }
  return out;
}

const VideoRecord& AnnotationDatabase::at(const std::string& video_id) const {
  const auto it = videos.find(video_id);
  if (it == videos.end()) throw std::out_of_range("unknown video id '" + video_id + "'");
  return it->second;
}

AnnotationParseError::AnnotationParseError(std::string pointer, const std::string& message)
    : std::runtime_error("annotation schema error at " + (pointer.empty() ? std::string("/") : pointer) +
                         ": " + message),
      pointer_(std::move(pointer)) {}

UnknownLabelError::UnknownLabelError(std::vector<std::string> video_ids, std::vector<std::string> labels)
    : std::runtime_error("unknown labels {" + join(labels) + "} in videos: " + join(video_ids)),
      video_ids_(std::move(video_ids)) {}

AnnotationLoadResult parse_annotations(const nlohmann::json& doc,
                                       const std::optional<LabelSpace>& fixed_labels) {
  if (!doc.is_object()) throw AnnotationParseError("", "expected a JSON object");
  AnnotationLoadResult result;
  AnnotationDatabase& db = result.database;
  if (doc.contains("version")) {
    if (!doc["version"].is_string()) throw AnnotationParseError("/version", "expected a string");
    db.version = doc["version"].get<std::string>();
  }
  const auto& database = require(doc, "database", "");
  if (!database.is_object()) throw AnnotationParseError("/database", "expected an object");

  struct RawAction {
    TimeInterval seg;
    std::string label;
  };
  std::map<std::string, std::vector<RawAction>> raw;
  std::set<std::string> seen_labels;

  for (const auto& [id, entry] : database.items()) {
    const std::string where = "/database/" + escape_pointer_token(id);
    if (!entry.is_object()) throw AnnotationParseError(where, "expected an object");
    VideoRecord rec;
    rec.video_id = id;
    rec.duration = require_number(require(entry, "duration", where), where + "/duration");
    if (rec.duration < 0) throw AnnotationParseError(where + "/duration", "negative duration");
    const auto& subset = require(entry, "subset", where);
    if (!subset.is_string()) throw AnnotationParseError(where + "/subset", "expected a string");
    try {
      rec.subset = parse_subset(subset.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw AnnotationParseError(where + "/subset", e.what());
    }
    if (entry.contains("frame_count")) {
      rec.frame_count = static_cast<std::size_t>(require_number(entry["frame_count"], where + "/frame_count"));
    }
    const auto& anns = require(entry, "annotations", where);
    if (!anns.is_array()) throw AnnotationParseError(where + "/annotations", "expected an array");
    auto& actions = raw[id];
    for (std::size_t i = 0; i < anns.size(); ++i) {
      const std::string aw = where + "/annotations/" + std::to_string(i);
      const auto& seg = require(anns[i], "segment", aw);
      if (!seg.is_array() || seg.size() != 2) throw AnnotationParseError(aw + "/segment", "expected [start, end]");
      TimeInterval t{require_number(seg[0], aw + "/segment/0"), require_number(seg[1], aw + "/segment/1")};
      if (t.start > t.end) throw AnnotationParseError(aw + "/segment", "start after end");
      const auto& label = require(anns[i], "label", aw);
      if (!label.is_string()) throw AnnotationParseError(aw + "/label", "expected a string");
      actions.push_back({t, label.get<std::string>()});
      seen_labels.insert(label.get<std::string>());
    }
    db.videos.emplace(id, std::move(rec));
  }

  if (doc.contains("classes")) {
    const auto& classes = doc["classes"];
    if (!classes.is_array()) throw AnnotationParseError("/classes", "expected an array of strings");
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (!classes[i].is_string()) throw AnnotationParseError("/classes/" + std::to_string(i), "expected a string");
      db.label_space.class_names.push_back(classes[i].get<std::string>());
    }
  } else if (fixed_labels) {
    db.label_space = *fixed_labels;
  } else {
    db.label_space.class_names.assign(seen_labels.begin(), seen_labels.end());
  }

  std::vector<std::string> bad_videos;
  std::set<std::string> bad_labels;
  for (auto& [id, actions] : raw) {
    VideoRecord& rec = db.videos.at(id);
    const TimeInterval bounds{0.0, rec.duration};
    for (const auto& a : actions) {
      const auto label = db.label_space.find(a.label);
      if (!label) {
        if (bad_videos.empty() || bad_videos.back() != id) bad_videos.push_back(id);
        bad_labels.insert(a.label);
        continue;
      }
      const TimeInterval clamped = clamp_interval(a.seg, bounds);
      if (clamped.length() <= 0.0) {
        result.warnings.push_back(id + ": dropped zero-length annotation");
        continue;
      }
      if (clamped != a.seg) result.warnings.push_back(id + ": annotation clamped to video duration");
      rec.annotations.push_back({clamped, *label, std::nullopt});
    }
  }
  if (!bad_videos.empty()) {
    throw UnknownLabelError(bad_videos, std::vector<std::string>(bad_labels.begin(), bad_labels.end()));
  }
  return result;
}

AnnotationLoadResult load_annotations(const std::filesystem::path& path,
                                      const std::optional<LabelSpace>& fixed_labels) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotation file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw AnnotationParseError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_annotations(doc, fixed_labels);
}

nlohmann::json to_json(const AnnotationDatabase& db) {
  nlohmann::json doc;
  doc["version"] = db.version;
  doc["classes"] = db.label_space.class_names;
  nlohmann::json database = nlohmann::json::object();
  for (const auto& [id, rec] : db.videos) {
    nlohmann::json entry;
    entry["duration"] = rec.duration;
    entry["subset"] = to_string(rec.subset);
    if (rec.frame_count > 0) entry["frame_count"] = rec.frame_count;
    nlohmann::json anns = nlohmann::json::array();
    for (const auto& a : rec.annotations) {
      anns.push_back({{"segment", {a.interval.start, a.interval.end}},
                      {"label", db.label_space.class_names.at(static_cast<std::size_t>(a.label))}});
    }
    entry["annotations"] = std::move(anns);
    database[id] = std::move(entry);
  }
  doc["database"] = std::move(database);
  return doc;
}

void save_annotations(const AnnotationDatabase& db, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(db).dump(2) << '\n';
}

}  // namespace minitad::data
