#pragma once

#include <filesystem>

#include "artrecon/geometry.hpp"
#include "artrecon/mesh.hpp"

namespace artrecon {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Canonical PLY 1.0 writer: vertex (float x y z [, uchar red green blue])
/// then face (uchar count + int indices). Color properties are written only
/// when the mesh has colors.
void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path,
               PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Reads ascii and binary PLY (either endianness). Unknown elements and
/// properties are skipped; polygons with more than three corners are fanned.
TriangleMesh read_ply(const std::filesystem::path& path);

/// ASCII point dump with x y z [red green blue] [nx ny nz].
void write_point_cloud_ply(const PointCloud& pc, const std::filesystem::path& path);
PointCloud read_point_cloud_ply(const std::filesystem::path& path);

}  // namespace artrecon
