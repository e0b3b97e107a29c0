#pragma once

#include <optional>
#include <string>

#include "diwr/point_cloud.hpp"

namespace diwr {

enum class FileFormat { Auto, Xyz, Ply, Obj };

// Loads a point cloud. XYZ rows are "x y z [extra columns ignored]" with '#'
// comments; PLY may be ascii or binary_little_endian and may carry the
// per-point channels nx/ny/nz, area, conf, density; OBJ contributes its
// v-records. Channels absent from the file get neutral defaults.
// Throws FileNotFound, ParseError, TooFewPoints.
PointCloud load_points(const std::string& path, FileFormat format = FileFormat::Auto);

// Writes a point cloud. PLY (binary little-endian) stores the full per-point
// state and round-trips exactly; XYZ stores positions only.
void save_points(const PointCloud& cloud, const std::string& path,
                 FileFormat format = FileFormat::Auto);

TriMesh load_mesh(const std::string& path, FileFormat format = FileFormat::Auto);

// OBJ as v/f text, PLY as binary little-endian with a face element.
void save_mesh(const TriMesh& mesh, const std::string& path,
               FileFormat format = FileFormat::Auto);

// Uniformly scales and translates the cloud so its bounding box sits at the
// origin with the longest axis exactly 1. The applied map composes into
// cloud.scale, so to_original() always targets the frame of the initial
// input. A second call is the identity. Throws DegenerateExtent.
ScaleRecord normalize_unit_cube(PointCloud& cloud);

// Maps mesh vertices back through a normalization record.
void mesh_to_original_frame(TriMesh& mesh, const ScaleRecord& scale);

}  // namespace diwr
