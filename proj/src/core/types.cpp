#include "minitad/core/types.hpp"

#include <algorithm>

namespace minitad {

const char* to_string(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::kFeature: return "feature";
    case TimeUnit::kFrame: return "frame";
    case TimeUnit::kSeconds: return "seconds";
  }
  return "unknown";
}

std::optional<int> LabelSpace::find(const std::string& name) const {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end()) return std::nullopt;
  return static_cast<int>(it - class_names.begin());
}

const char* to_string(Subset subset) {
  switch (subset) {
    case Subset::kTraining: return "training";
    case Subset::kValidation: return "validation";
    case Subset::kTesting: return "testing";
  }
  return "unknown";
}

Subset parse_subset(const std::string& name) {
  if (name == "training") return Subset::kTraining;
  if (name == "validation") return Subset::kValidation;
  if (name == "testing") return Subset::kTesting;
  throw std::invalid_argument("unknown subset '" + name + "'");
}

UnitMismatch::UnitMismatch(TimeUnit expected, TimeUnit got)
    : std::runtime_error(std::string("time unit mismatch: expected ") + to_string(expected) +
                         ", got " + to_string(got)) {}

void require_unit(TimeUnit expected, TimeUnit got) {
  if (expected != got) throw UnitMismatch(expected, got);
}

}  // namespace minitad
