#include "priorloc/registration/cloud_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/common/error.hpp"

namespace priorloc {
namespace {

// Splits off the header (up to and including the line starting with `last`).
std::pair<std::vector<std::string>, std::size_t> read_header(
    const std::vector<std::uint8_t>& bytes, const std::string& last) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != '\n') ++end;
    std::string line(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(end));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end < bytes.size() ? end + 1 : end;
    lines.push_back(line);
    if (line.rfind(last, 0) == 0) return {lines, pos};
    if (lines.size() > 1000) break;
  }
  throw Error(ErrorCode::kCorrupt, "point cloud header not terminated");
}

struct Property {
  std::string name;
  std::size_t size = 0;
  bool is_float = false;
  bool is_signed = false;
};

std::size_t ply_type_size(const std::string& t, bool& is_float, bool& is_signed) {
  is_float = t == "float" || t == "float32" || t == "double" || t == "float64";
  is_signed = is_float || t == "char" || t == "int8" || t == "short" || t == "int16" ||
              t == "int" || t == "int32";
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32") {
    return 4;
  }
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorCode::kCorrupt, "unsupported PLY property type " + t);
}

double decode(const std::uint8_t* p, const Property& prop) {
  if (prop.is_float) {
    if (prop.size == 4) {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  std::uint64_t u = 0;
  std::memcpy(&u, p, prop.size);
  if (prop.is_signed) {
    const int shift = static_cast<int>(64 - 8 * prop.size);
    return static_cast<double>(static_cast<std::int64_t>(u << shift) >> shift);
  }
  return static_cast<double>(u);
}

std::array<int, 3> xyz_indices(const std::vector<Property>& props) {
  std::array<int, 3> idx{-1, -1, -1};
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") idx[0] = static_cast<int>(i);
    if (props[i].name == "y") idx[1] = static_cast<int>(i);
    if (props[i].name == "z") idx[2] = static_cast<int>(i);
  }
  if (idx[0] < 0 || idx[1] < 0 || idx[2] < 0) {
    throw Error(ErrorCode::kCorrupt, "point cloud lacks x/y/z fields");
  }
  return idx;
}

std::vector<Vec3> decode_records(const std::vector<std::uint8_t>& bytes, std::size_t pos,
                                 std::size_t count, const std::vector<Property>& props,
                                 bool binary) {
  const auto idx = xyz_indices(props);
  std::vector<Vec3> out;
  out.reserve(count);
  if (binary) {
    std::size_t stride = 0;
    std::vector<std::size_t> offset;
    for (const auto& p : props) {
      offset.push_back(stride);
      stride += p.size;
    }
    if (bytes.size() < pos + count * stride) {
      throw Error(ErrorCode::kCorrupt, "point cloud body truncated");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint8_t* rec = bytes.data() + pos + i * stride;
      Vec3 v;
      for (int a = 0; a < 3; ++a) v[a] = decode(rec + offset[idx[a]], props[idx[a]]);
      out.push_back(v);
    }
    return out;
  }
  std::istringstream in(std::string(bytes.begin() + static_cast<long>(pos), bytes.end()));
  std::vector<double> row(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& value : row) {
      if (!(in >> value)) throw Error(ErrorCode::kCorrupt, "point cloud body truncated");
    }
    out.emplace_back(row[idx[0]], row[idx[1]], row[idx[2]]);
  }
  return out;
}

}  // namespace

std::vector<Vec3> parse_ply(const std::vector<std::uint8_t>& bytes) {
  const auto [lines, body] = read_header(bytes, "end_header");
  if (lines.empty() || lines[0] != "ply") throw Error(ErrorCode::kCorrupt, "not a PLY file");
  std::string format;
  std::size_t count = 0;
  bool in_vertex = false, vertex_seen = false;
  std::vector<Property> props;
  for (const auto& line : lines) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      ls >> format;
    } else if (tok == "element") {
      std::string name;
      std::size_t n = 0;
      ls >> name >> n;
      if (vertex_seen && in_vertex) in_vertex = false;
      if (name == "vertex") {
        if (vertex_seen) throw Error(ErrorCode::kCorrupt, "duplicate vertex element");
        in_vertex = vertex_seen = true;
        count = n;
      } else if (!vertex_seen) {
        throw Error(ErrorCode::kCorrupt, "PLY elements before vertex are unsupported");
      }
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw Error(ErrorCode::kCorrupt, "list vertex properties unsupported");
      Property p;
      p.name = name;
      p.size = ply_type_size(type, p.is_float, p.is_signed);
      props.push_back(p);
    }
  }
  if (!vertex_seen) throw Error(ErrorCode::kCorrupt, "PLY has no vertex element");
  if (format == "ascii") return decode_records(bytes, body, count, props, false);
  if (format == "binary_little_endian") return decode_records(bytes, body, count, props, true);
  throw Error(ErrorCode::kCorrupt, "unsupported PLY format " + format);
}

std::vector<Vec3> parse_pcd(const std::vector<std::uint8_t>& bytes) {
  const auto [lines, body] = read_header(bytes, "DATA");
  std::vector<std::string> fields, types;
  std::vector<std::size_t> sizes;
  std::size_t count = 0;
  std::string data;
  for (const auto& line : lines) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    std::string v;
    if (tok == "FIELDS") {
      while (ls >> v) fields.push_back(v);
    } else if (tok == "SIZE") {
      while (ls >> v) sizes.push_back(std::stoul(v));
    } else if (tok == "TYPE") {
      while (ls >> v) types.push_back(v);
    } else if (tok == "COUNT") {
      while (ls >> v) {
        if (v != "1") throw Error(ErrorCode::kCorrupt, "PCD field counts above 1 unsupported");
      }
    } else if (tok == "POINTS") {
      ls >> count;
    } else if (tok == "DATA") {
      ls >> data;
    }
  }
  if (fields.empty() || fields.size() != sizes.size() || fields.size() != types.size()) {
    throw Error(ErrorCode::kCorrupt, "inconsistent PCD field description");
  }
  std::vector<Property> props;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    Property p;
    p.name = fields[i];
    p.size = sizes[i];
    p.is_float = types[i] == "F";
    p.is_signed = types[i] != "U";
    if ((p.is_float && p.size != 4 && p.size != 8) || p.size == 0 || p.size > 8) {
      throw Error(ErrorCode::kCorrupt, "unsupported PCD field size");
    }
    props.push_back(p);
  }
  if (data == "ascii") return decode_records(bytes, body, count, props, false);
  if (data == "binary") return decode_records(bytes, body, count, props, true);
  throw Error(ErrorCode::kCorrupt, "unsupported PCD data mode " + data);
}

std::vector<Vec3> read_point_cloud(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "ply" || ext == "PLY") return parse_ply(bytes);
  if (ext == "pcd" || ext == "PCD") return parse_pcd(bytes);
  throw Error(ErrorCode::kIo, "unknown point cloud extension: " + path);
}

void write_ply(const std::string& path, const std::vector<Vec3>& points, bool binary) {
  std::ostringstream header;
  header << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
         << " 1.0\nelement vertex " << points.size()
         << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  ByteWriter w;
  const std::string h = header.str();
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(h.data()), h.size()));
  if (binary) {
    for (const auto& p : points) {
      w.put(p.x());
      w.put(p.y());
      w.put(p.z());
    }
  } else {
    std::ostringstream body;
    body.precision(17);
    for (const auto& p : points) body << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    const std::string b = body.str();
    w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(b.data()), b.size()));
  }
  write_file_bytes(path, w.bytes());
}

void write_pcd(const std::string& path, const std::vector<Vec3>& points) {
  std::ostringstream out;
  out << "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
      << "WIDTH " << points.size() << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS "
      << points.size() << "\nDATA binary\n";
  ByteWriter w;
  const std::string h = out.str();
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(h.data()), h.size()));
  for (const auto& p : points) {
    w.put(static_cast<float>(p.x()));
    w.put(static_cast<float>(p.y()));
    w.put(static_cast<float>(p.z()));
  }
  write_file_bytes(path, w.bytes());
}

}  // namespace priorloc
