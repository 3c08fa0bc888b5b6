#ifndef EVI_SRC_MANIFEST_HPP_
#define EVI_SRC_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evi {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Artifacts are rendered in memory by the (possibly parallel) experiment and
// written here by a single writer, in insertion order.
class OutputSet {
 public:
  struct Entry {
    std::string path;  // relative, '/' separated
    std::string contents;
  };

  void add(std::string path, std::string contents);
  const std::vector<Entry>& entries() const { return entries_; }

  // Writes every entry under root, creating directories as needed.
  void write_all(const std::filesystem::path& root) const;

 private:
  std::vector<Entry> entries_;
};

void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace evi

#endif  // EVI_SRC_MANIFEST_HPP_
