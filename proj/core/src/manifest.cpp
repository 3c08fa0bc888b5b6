#include "manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace evi {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void OutputSet::add(std::string path, std::string contents) {
  for (const auto& e : entries_) {
    if (e.path == path) throw std::logic_error("duplicate output path " + path);
  }
  entries_.push_back({std::move(path), std::move(contents)});
}

void OutputSet::write_all(const std::filesystem::path& root) const {
  for (const auto& e : entries_) write_file(root / e.path, e.contents);
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace evi
