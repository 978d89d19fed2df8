#pragma once

#include <filesystem>
#include <iosfwd>

#include "uvcloth/geom/mesh.hpp"

namespace uvcloth::geom {

/// Reads an ASCII OBJ (v / vt / f records). Polygons are fan-triangulated.
/// When faces reference vt entries the uv of each vertex is taken from the
/// first face corner that names it; a file with as many vt as v records and
/// no vt references maps them one to one.
TriMesh load_obj(const std::filesystem::path& path);
TriMesh parse_obj(std::istream& in);

void save_obj(const TriMesh& mesh, const std::filesystem::path& path);
void write_obj(const TriMesh& mesh, std::ostream& out);

}  // namespace uvcloth::geom
