#include "minitad/data/feature_store.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace minitad::data {

namespace {

static_assert(std::endian::native == std::endian::little, "feature store I/O assumes a little-endian host");

void put_u32(char* dst, std::uint32_t v) { std::memcpy(dst, &v, 4); }
std::uint32_t get_u32(const char* src) {
  std::uint32_t v = 0;
  std::memcpy(&v, src, 4);
  return v;
}

}  // namespace

FeatureLookupError::FeatureLookupError(const std::string& video_id)
    : std::out_of_range("no features stored for video '" + video_id + "'") {}

void write_feature_file(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::array<char, kFeatureHeaderBytes> header{};
  std::memcpy(header.data(), kFeatureMagic, 4);
  put_u32(header.data() + 4, static_cast<std::uint32_t>(values.rows()));
  put_u32(header.data() + 8, static_cast<std::uint32_t>(values.cols()));
  put_u32(header.data() + 12, 0);
  out.write(header.data(), header.size());
  std::vector<float> row(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(values(i, j));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

Eigen::MatrixXd read_feature_file(const std::filesystem::path& path, const FeatureShape& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureCorruptionError("cannot open feature file " + path.string());
  std::array<char, kFeatureHeaderBytes> header{};
  if (!in.read(header.data(), header.size())) throw FeatureCorruptionError(path.string() + ": truncated header");
  if (std::memcmp(header.data(), kFeatureMagic, 4) != 0) throw FeatureCorruptionError(path.string() + ": bad magic");
  const std::uint32_t rows = get_u32(header.data() + 4);
  const std::uint32_t dim = get_u32(header.data() + 8);
  if (expected.rows != 0 && expected.rows != rows) {
    throw FeatureCorruptionError(path.string() + ": header has T'=" + std::to_string(rows) + " but index expects " +
                                 std::to_string(expected.rows));
  }
  if (expected.dim != 0 && expected.dim != dim) {
    throw FeatureCorruptionError(path.string() + ": header has D=" + std::to_string(dim) + " but index expects " +
                                 std::to_string(expected.dim));
  }
  std::vector<float> buf(static_cast<std::size_t>(rows) * dim);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
    throw FeatureCorruptionError(path.string() + ": payload shorter than header shape");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FeatureCorruptionError(path.string() + ": trailing bytes after payload");
  }
  Eigen::MatrixXd out(rows, dim);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) out(i, j) = buf[static_cast<std::size_t>(i) * dim + j];
  }
  return out;
}

void FeatureStore::put(const std::string& video_id, FeatureSequence features) {
  items_[video_id] = std::move(features);
}

const FeatureSequence& FeatureStore::get(const std::string& video_id) const {
  const auto it = items_.find(video_id);
  if (it == items_.end()) throw FeatureLookupError(video_id);
  return it->second;
}

std::vector<std::string> FeatureStore::ids() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& [id, _] : items_) out.push_back(id);
  return out;
}

void FeatureStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::object();
  for (const auto& [id, seq] : items_) {
    const std::string file = id + ".bin";
    write_feature_file(dir / file, seq.values.topRows(seq.valid_length));
    index[id] = {{"path", file},
                 {"feature_stride", seq.feature_stride},
                 {"frame_rate", seq.frame_rate},
                 {"length", seq.valid_length},
                 {"dim", seq.dim()}};
  }
  std::ofstream out(dir / "index.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

FeatureStore FeatureStore::load(const std::filesystem::path& index_path) {
  std::ifstream in(index_path);
  if (!in) throw std::runtime_error("cannot open feature index " + index_path.string());
  nlohmann::json index;
  in >> index;
  if (!index.is_object()) throw FeatureCorruptionError(index_path.string() + ": index must be a JSON object");
  const auto base = index_path.parent_path();
  FeatureStore store;
  for (const auto& [id, entry] : index.items()) {
    if (!entry.is_object() || !entry.contains("path")) {
      throw FeatureCorruptionError(index_path.string() + ": entry '" + id + "' lacks a path");
    }
    FeatureShape expected;
    if (entry.contains("length")) expected.rows = entry["length"].get<std::uint32_t>();
    if (entry.contains("dim")) expected.dim = entry["dim"].get<std::uint32_t>();
    Eigen::MatrixXd values = read_feature_file(base / entry["path"].get<std::string>(), expected);
    FeatureSequence seq(std::move(values), entry.value("feature_stride", 1.0), entry.value("frame_rate", 1.0));
    store.put(id, std::move(seq));
  }
  return store;
}

}  // namespace minitad::data
