#include "uvcloth/geom/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "uvcloth/error.hpp"

namespace uvcloth::geom {

namespace {

struct CornerRef {
  int v = -1;
  int vt = -1;
};

int resolve_index(long raw, std::size_t count, std::size_t line) {
  long idx = raw > 0 ? raw - 1 : static_cast<long>(count) + raw;
  if (raw == 0 || idx < 0 || idx >= static_cast<long>(count)) {
    throw ParseError("index " + std::to_string(raw) + " out of range (" +
                         std::to_string(count) + " available)",
                     line);
  }
  return static_cast<int>(idx);
}

CornerRef parse_corner(const std::string& tok, std::size_t nv, std::size_t nvt,
                       std::size_t line) {
  CornerRef ref;
  const auto slash = tok.find('/');
  try {
    ref.v = resolve_index(std::stol(tok.substr(0, slash)), nv, line);
    if (slash != std::string::npos) {
      const auto slash2 = tok.find('/', slash + 1);
      const std::string t = tok.substr(slash + 1, slash2 == std::string::npos
                                                      ? std::string::npos
                                                      : slash2 - slash - 1);
      if (!t.empty()) ref.vt = resolve_index(std::stol(t), nvt, line);
    }
  } catch (const std::invalid_argument&) {
    throw ParseError("malformed face corner '" + tok + "'", line);
  } catch (const std::out_of_range&) {
    throw ParseError("malformed face corner '" + tok + "'", line);
  }
  return ref;
}

}  // namespace

TriMesh parse_obj(std::istream& in) {
  TriMesh mesh;
  std::vector<Vec2> texcoords;
  std::vector<int> uv_source;  // per vertex: vt index or -1
  bool any_vt_ref = false;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream ls(raw);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw ParseError("malformed vertex", line);
      mesh.vertices.push_back(p);
      uv_source.push_back(-1);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ls >> t.x() >> t.y())) throw ParseError("malformed texture coordinate", line);
      texcoords.push_back(t);
    } else if (tag == "f") {
      std::vector<CornerRef> corners;
      std::string tok;
      while (ls >> tok) {
        corners.push_back(parse_corner(tok, mesh.vertices.size(), texcoords.size(), line));
      }
      if (corners.size() < 3) throw ParseError("face with fewer than 3 corners", line);
      for (const CornerRef& c : corners) {
        if (c.vt >= 0) {
          any_vt_ref = true;
          if (uv_source[c.v] < 0) uv_source[c.v] = c.vt;
        }
      }
      for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
        Face f{corners[0].v, corners[k].v, corners[k + 1].v};
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
          throw ParseError("degenerate face", line);
        }
        mesh.faces.push_back(f);
      }
    }
    // Other records (vn, o, g, s, usemtl, mtllib) carry nothing we keep.
  }
  if (any_vt_ref) {
    mesh.uv.assign(mesh.vertices.size(), Vec2::Zero());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      if (uv_source[i] >= 0) mesh.uv[i] = texcoords[uv_source[i]];
    }
  } else if (!texcoords.empty() && texcoords.size() == mesh.vertices.size()) {
    mesh.uv = texcoords;
  }
  return mesh;
}

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_obj(in);
}

void write_obj(const TriMesh& mesh, std::ostream& out) {
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  const bool uv = mesh.has_uv();
  for (const Vec2& t : mesh.uv) {
    std::snprintf(buf, sizeof buf, "vt %.9g %.9g\n", t.x(), t.y());
    out << buf;
  }
  for (const Face& f : mesh.faces) {
    if (uv) {
      out << "f " << f[0] + 1 << '/' << f[0] + 1 << ' ' << f[1] + 1 << '/' << f[1] + 1 << ' '
          << f[2] + 1 << '/' << f[2] + 1 << '\n';
    } else {
      out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
  }
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_obj(mesh, out);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace uvcloth::geom
