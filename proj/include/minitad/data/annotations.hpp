#pragma once

#include "minitad/core/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace minitad::data {

/// All videos of a dataset, keyed by id, with the shared label vocabulary.
struct AnnotationDatabase {
  std::map<std::string, VideoRecord> videos;
  LabelSpace label_space;
  std::string version;

  [[nodiscard]] std::vector<std::string> ids(Subset subset) const;
  [[nodiscard]] const VideoRecord& at(const std::string& video_id) const;
};

/// Schema violation, located by a JSON pointer into the offending document.
class AnnotationParseError : public std::runtime_error {
 public:
  AnnotationParseError(std::string pointer, const std::string& message);
  [[nodiscard]] const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// Raised when annotations use labels outside a fixed label space.
class UnknownLabelError : public std::runtime_error {
 public:
  UnknownLabelError(std::vector<std::string> video_ids, std::vector<std::string> labels);
  [[nodiscard]] const std::vector<std::string>& video_ids() const { return video_ids_; }

 private:
  std::vector<std::string> video_ids_;
};

struct AnnotationLoadResult {
  AnnotationDatabase database;
  // One entry per clamped or dropped annotation.
  std::vector<std::string> warnings;
};

// Label space resolution order: the optional top-level "classes" array, then
// `fixed_labels`, then the sorted set of labels found in the file.
AnnotationLoadResult parse_annotations(const nlohmann::json& doc,
                                       const std::optional<LabelSpace>& fixed_labels = {});
AnnotationLoadResult load_annotations(const std::filesystem::path& path,
                                      const std::optional<LabelSpace>& fixed_labels = {});

[[nodiscard]] nlohmann::json to_json(const AnnotationDatabase& db);
void save_annotations(const AnnotationDatabase& db, const std::filesystem::path& path);

}  // namespace minitad::data
