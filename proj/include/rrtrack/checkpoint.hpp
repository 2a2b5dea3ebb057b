#pragma once

// Checkpoint layout (little-endian):
//   "RE3CKPT1" | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 dtype (0=f32, 1=f64) | u8 rank | u32 dims[rank] | raw data
//   u64 FNV-1a of every preceding byte

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rrtrack/autodiff.hpp"
#include "rrtrack/network.hpp"

namespace rrtrack {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct CheckpointTensor {
  std::string name;
  DType dtype = DType::f64;
  Tensor tensor;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointTensor> tensors);
/// Throws FormatError on a bad magic, truncation or checksum mismatch.
std::vector<CheckpointTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, std::span<const CheckpointTensor> tensors);
std::vector<CheckpointTensor> read_checkpoint(const std::filesystem::path& path);

/// Network parameters plus the topology, stored as tensor "meta.network_config".
void save_network(const std::filesystem::path& path, const NetworkParams& params, DType dtype = DType::f64);
NetworkParams load_network(const std::filesystem::path& path);

std::vector<double> encode_network_config(const NetworkConfig& config);
NetworkConfig decode_network_config(std::span<const double> values);

}  // namespace rrtrack
