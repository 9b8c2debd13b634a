#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace minitad {

/// Coordinate system of a time value. Carried on containers, never per value.
enum class TimeUnit { kFeature, kFrame, kSeconds };

[[nodiscard]] const char* to_string(TimeUnit unit);

/// Closed time segment [start, end].
struct TimeInterval {
  double start = 0.0;
  double end = 0.0;

  [[nodiscard]] double length() const { return end - start; }
  [[nodiscard]] double center() const { return 0.5 * (start + end); }
  [[nodiscard]] bool valid() const { return start <= end; }

  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

/// One ground-truth action or detection. Ground truth leaves `score` empty.
struct ActionInstance {
  TimeInterval interval;
  int label = 0;
  std::optional<double> score;

  friend bool operator==(const ActionInstance&, const ActionInstance&) = default;
};

/// Category vocabulary. In binary mode the network sees action/background only.
struct LabelSpace {
  std::vector<std::string> class_names;
  bool binary_mode = false;

  [[nodiscard]] int num_classes() const { return static_cast<int>(class_names.size()); }
  // Number of classes the classification branch predicts.
  [[nodiscard]] int effective_classes() const { return binary_mode ? 2 : num_classes(); }
  [[nodiscard]] std::optional<int> find(const std::string& name) const;
};

enum class Subset { kTraining, kValidation, kTesting };

[[nodiscard]] const char* to_string(Subset subset);
[[nodiscard]] Subset parse_subset(const std::string& name);

/// A video and its ground truth. Annotation times are in seconds.
struct VideoRecord {
  std::string video_id;
  double duration = 0.0;
  std::optional<std::pair<int, int>> frame_shape;
  std::size_t frame_count = 0;
  std::vector<ActionInstance> annotations;
  Subset subset = Subset::kTraining;
};

/// Thrown when two values with different time units are combined.
class UnitMismatch : public std::runtime_error {
 public:
  UnitMismatch(TimeUnit expected, TimeUnit got);
};

void require_unit(TimeUnit expected, TimeUnit got);

}  // namespace minitad
