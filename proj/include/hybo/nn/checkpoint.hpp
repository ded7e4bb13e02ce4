#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybo/nn/params.hpp"

namespace hybo::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointEntry {
  std::string key;
  ParamKind kind = ParamKind::euclidean;
  ad::Shape shape;
  std::vector<double> values;
};

// Flat key -> tensor archive. On disk (little-endian):
//   "HYBOCKPT" | u32 version | u32 scalar bytes | u64 n, n bytes meta JSON |
//   u64 count | per entry: u32 n, key | u8 kind | u32 ndim | u64 dims... |
//   numel scalars of the recorded width.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::uint32_t version = kVersion;
  std::uint32_t scalar_bytes = 8;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& key) const;
};

template <typename T>
Checkpoint snapshot(const ParameterStore<T>& store, nlohmann::json meta = nlohmann::json::object());

// Copies every entry into `store`; keys, kinds and shapes must match exactly.
template <typename T>
void restore(ParameterStore<T>& store, const Checkpoint& checkpoint);

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace hybo::nn
