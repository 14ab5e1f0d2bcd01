#pragma once

#include <string>
#include <vector>

#include "priorloc/geometry/types.hpp"

namespace priorloc {

/// Reads x/y/z from a PLY (ascii or binary_little_endian, float or double
/// vertex properties) or PCD (ascii or binary, float32 x y z) file, chosen by
/// extension. Other vertex properties are skipped.
std::vector<Vec3> read_point_cloud(const std::string& path);

std::vector<Vec3> parse_ply(const std::vector<std::uint8_t>& bytes);
std::vector<Vec3> parse_pcd(const std::vector<std::uint8_t>& bytes);

void write_ply(const std::string& path, const std::vector<Vec3>& points,
               bool binary = true);
void write_pcd(const std::string& path, const std::vector<Vec3>& points);

}  // namespace priorloc
