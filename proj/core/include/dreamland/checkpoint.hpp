#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamland/world_model.hpp"

namespace dreamland {

// Raised for truncated, corrupted or version-mismatched files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> data;  // row-major
};

// Versioned binary container shared by world models and controllers.
//
// Layout (all integers little-endian):
//   "DLCK" | u32 version | u32 meta_len | meta JSON | u32 array_count |
//   per array: u32 name_len | name | u64 rows | u64 cols | rows*cols f64 |
//   u64 FNV-1a checksum of every preceding byte.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;  // "world_model" or "controller"
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray& array(std::string_view name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Metadata keys n, k, d, action_size are always written; the training record is
// stored under `training` (the trainer records p_train, loss weights, seed, epochs).
Checkpoint world_model_checkpoint(const WorldModelParams& params,
                                  const nlohmann::json& training = nlohmann::json::object());
WorldModelParams world_model_from_checkpoint(const Checkpoint& ckpt);

// Shared little-endian helpers, also used by the dataset format.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
void append_u32(std::string& out, std::uint32_t v);
void append_u64(std::string& out, std::uint64_t v);
void append_f64(std::string& out, double v);

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string_view take(std::size_t n);
  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  std::string_view bytes_;
  std::size_t offset_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dreamland
