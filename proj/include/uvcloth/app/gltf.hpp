#pragma once

#include <filesystem>

#include "uvcloth/geom/mesh.hpp"

namespace uvcloth::app {

/// Single-mesh glTF 2.0 file with an embedded base64 buffer (float32
/// positions, uint32 indices).
void save_gltf(const geom::TriMesh& mesh, const std::filesystem::path& path);

}  // namespace uvcloth::app
