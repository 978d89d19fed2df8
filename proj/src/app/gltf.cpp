#include "uvcloth/app/gltf.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "uvcloth/app/config.hpp"
#include "uvcloth/error.hpp"

namespace uvcloth::app {

void save_gltf(const geom::TriMesh& mesh, const std::filesystem::path& path) {
  std::string buffer;
  auto put = [&](const void* p, std::size_t n) { buffer.append(static_cast<const char*>(p), n); };
  std::array<float, 3> lo{1e30f, 1e30f, 1e30f}, hi{-1e30f, -1e30f, -1e30f};
  for (const geom::Vec3& v : mesh.vertices) {
    for (int k = 0; k < 3; ++k) {
      const float f = static_cast<float>(v[k]);
      lo[k] = std::min(lo[k], f);
      hi[k] = std::max(hi[k], f);
      put(&f, sizeof f);
    }
  }
  const std::size_t pos_bytes = buffer.size();
  for (const geom::Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto idx = static_cast<std::uint32_t>(f[k]);
      put(&idx, sizeof idx);
    }
  }
  const std::size_t idx_bytes = buffer.size() - pos_bytes;

  using nlohmann::json;
  const json doc = {
      {"asset", {{"version", "2.0"}}},
      {"scene", 0},
      {"scenes", json::array({{{"nodes", {0}}}})},
      {"nodes", json::array({{{"mesh", 0}}})},
      {"meshes", json::array({{{"primitives", json::array({{{"attributes", {{"POSITION", 0}}},
                                                             {"indices", 1}}})}}})},
      {"buffers", json::array({{{"byteLength", buffer.size()},
                                {"uri", "data:application/octet-stream;base64," +
                                            base64_encode(buffer)}}})},
      {"bufferViews",
       json::array({{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", pos_bytes}, {"target", 34962}},
                    {{"buffer", 0},
                     {"byteOffset", pos_bytes},
                     {"byteLength", idx_bytes},
                     {"target", 34963}}})},
      {"accessors",
       json::array({{{"bufferView", 0},
                     {"componentType", 5126},
                     {"count", mesh.vertices.size()},
                     {"type", "VEC3"},
                     {"min", lo},
                     {"max", hi}},
                    {{"bufferView", 1},
                     {"componentType", 5125},
                     {"count", 3 * mesh.faces.size()},
                     {"type", "SCALAR"}}})}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

}  // namespace uvcloth::app
