#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "priorloc/harness/config.hpp"

namespace priorloc {

inline constexpr const char* kPriorlocVersion = "0.1.0";

/// FNV-1a 64 of a file's bytes. For a directory, of the sorted relative
/// paths of its regular files, each followed by its own content hash. Other
/// file types hash as empty. Throws Io when the path does not exist.
std::uint64_t path_hash(const std::string& path);

/// "0x" followed by 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

/// What a CLI run read and wrote, enough to repeat it: the command line, the
/// full configuration and its hash, and content hashes of every input and
/// output. Serialized as JSON.
struct Manifest {
  std::string command;
  std::vector<std::string> args;
  RunConfig config;
  std::vector<std::pair<std::string, std::string>> inputs;   // label, path
  std::vector<std::pair<std::string, std::string>> outputs;  // label, path

  /// Hashes the listed paths as they are on disk now.
  std::string to_json() const;
  void write(const std::string& path) const;
};

}  // namespace priorloc
