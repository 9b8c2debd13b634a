#pragma once

#include "minitad/core/feature_sequence.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace minitad::data {

// On-disk layout: 16-byte header ("MTAD", u32 rows, u32 dim, u32 reserved)
// followed by little-endian float32 values in row-major order.
inline constexpr char kFeatureMagic[4] = {'M', 'T', 'A', 'D'};
inline constexpr std::size_t kFeatureHeaderBytes = 16;

class FeatureLookupError : public std::out_of_range {
 public:
  explicit FeatureLookupError(const std::string& video_id);
};

class FeatureCorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FeatureShape {
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
};

void write_feature_file(const std::filesystem::path& path, const Eigen::MatrixXd& values);
// Validates the header against `expected` when given (zero fields are unchecked).
Eigen::MatrixXd read_feature_file(const std::filesystem::path& path, const FeatureShape& expected = {});

/// In-memory collection of per-video features with a JSON sidecar index.
/// Const access is safe from concurrent readers.
class FeatureStore {
 public:
  void put(const std::string& video_id, FeatureSequence features);
  [[nodiscard]] const FeatureSequence& get(const std::string& video_id) const;
  [[nodiscard]] bool contains(const std::string& video_id) const { return items_.count(video_id) > 0; }
  [[nodiscard]] std::vector<std::string> ids() const;
  [[nodiscard]] std::size_t size() const { return items_.size(); }

  // Writes `<id>.bin` files plus `index.json` into `dir`.
  void save(const std::filesystem::path& dir) const;
  // Reads every entry listed in an index file; paths are relative to it.
  static FeatureStore load(const std::filesystem::path& index_path);

 private:
  std::map<std::string, FeatureSequence> items_;
};

}  // namespace minitad::data
