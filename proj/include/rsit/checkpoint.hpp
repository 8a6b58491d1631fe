#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rsit/tensor.hpp"

namespace rsit::ckpt {

inline constexpr char kMagic[8] = {'R', 'S', 'I', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kFormatVersion = 1;

/// Named f64 tensors plus free-form metadata.
///
/// File layout: 8-byte magic, u32 version, u64 manifest length, manifest JSON, then the
/// tensors' raw little-endian doubles back to back. The manifest records each tensor's
/// name, shape, dtype and element offset next to `meta`.
struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write(const std::filesystem::path& path, const Container& c);
/// Throws std::runtime_error on I/O failures, bad magic, unknown versions or truncation.
Container read(const std::filesystem::path& path);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace rsit::ckpt
