#include "priorloc/harness/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/common/error.hpp"
#include "priorloc/mapper/map_io.hpp"

namespace priorloc {

namespace fs = std::filesystem;

std::uint64_t path_hash(const std::string& path) {
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) return fnv1a64(read_file_bytes(path));
  if (!fs::exists(path, ec)) throw Error(ErrorCode::kIo, "cannot hash " + path);
  // Devices and pipes have no stable content.
  if (!fs::is_directory(path, ec)) return fnv1a64({});
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path).generic_string());
  }
  std::sort(files.begin(), files.end());
  ByteWriter w;
  for (const std::string& rel : files) {
    w.put_string(rel);
    w.put<std::uint64_t>(fnv1a64(read_file_bytes((fs::path(path) / rel).string())));
  }
  return fnv1a64(w.bytes());
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Manifest::to_json() const {
  using nlohmann::ordered_json;
  const auto files = [](const std::vector<std::pair<std::string, std::string>>& list) {
    ordered_json out = ordered_json::object();
    for (const auto& [label, path] : list) {
      out[label] = {{"path", path}, {"fnv1a64", hex64(path_hash(path))}};
    }
    return out;
  };
  ordered_json j;
  j["tool"] = "priorloc";
  j["version"] = kPriorlocVersion;
  j["map_format"] = kMapFormatVersion;
  j["command"] = command;
  j["args"] = args;
  j["config_hash"] = hex64(config_hash(config));
  j["config"] = format_run_config(config);
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  return j.dump(2) + "\n";
}

void Manifest::write(const std::string& path) const {
  const std::string text = to_json();
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
}

}  // namespace priorloc
