#include "rsit/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rsit::ckpt {

static_assert(sizeof(double) == 8);

const Tensor& Container::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::runtime_error("checkpoint has no tensor named '" + name + "'");
}

bool Container::contains(const std::string& name) const {
  for (const auto& entry : tensors)
    if (entry.first == name) return true;
  return false;
}

void write(const std::filesystem::path& path, const Container& c) {
  nlohmann::json manifest;
  manifest["meta"] = c.meta;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    manifest["tensors"].push_back(
        {{"name", name}, {"shape", t.shape()}, {"dtype", "f64"}, {"offset", offset}});
    offset += t.size();
  }
  const std::string text = manifest.dump();
  const std::uint64_t len = text.size();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof(kFormatVersion));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& entry : c.tensors) {
      out.write(reinterpret_cast<const char*>(entry.second.ptr()),
                static_cast<std::streamsize>(entry.second.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Container read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  auto fail = [&](const std::string& why) {
    return std::runtime_error("checkpoint " + path.string() + ": " + why);
  };
  char magic[sizeof(kMagic)];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw fail("not an rsit checkpoint");
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kFormatVersion) throw fail("unsupported format version " + std::to_string(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ull << 32)) throw fail("corrupt manifest length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw fail("truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad manifest: ") + e.what());
  }
  Container c;
  c.meta = manifest.at("meta");
  for (const auto& entry : manifest.at("tensors")) {
    if (entry.at("dtype") != "f64") throw fail("unsupported dtype " + entry.at("dtype").dump());
    Tensor t(entry.at("shape").get<Shape>());
    in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw fail("truncated tensor data for " + entry.at("name").get<std::string>());
    c.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return c;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rsit::ckpt
