#include "uvcloth/app/service.hpp"

#include <sstream>

#include "httplib.h"
#include "uvcloth/error.hpp"
#include "uvcloth/geom/obj_io.hpp"

namespace uvcloth::app {

using nlohmann::json;
namespace fs = std::filesystem;

body::BodyTemplate load_template(const ProjectConfig& cfg) {
  return body::build_template(cfg.body_config.empty() ? body::BodyConfig::standard()
                                                      : body::load_body_config(cfg.body_config));
}

std::shared_ptr<const ApiSession> load_session(const ProjectConfig& cfg) {
  auto s = std::make_shared<ApiSession>();
  s->category = cfg.category;
  s->world_scale = cfg.codec.world_scale;
  s->tpl = load_template(cfg);
  const fs::path pn = cfg.model_dir / "paramnet.uvck";
  if (!fs::exists(pn)) throw IoError("no shape model at " + pn.string() + "; run train-paramnet");
  s->shape = model::ParamNet::load(pn);
  s->shape->pca();  // throws when no subspace was fitted
  const int R = s->shape->resolution();
  s->lookup = body::build_atlas_lookup(s->tpl, R);
  if (fs::exists(cfg.model_dir / "animnet.uvck")) {
    s->anim = model::AnimNet::load(cfg.model_dir / "animnet.uvck");
    if (s->anim->case_tag() != s->shape->case_tag() || s->anim->config().resolution != R) {
      throw DomainError("animation model disagrees with the shape model on case or resolution");
    }
  }
  if (fs::exists(cfg.model_dir / "infernet.uvck")) {
    s->infer = model::InferNet::load(cfg.model_dir / "infernet.uvck");
    if (s->infer->latent_dim() != s->shape->latent_dim()) {
      throw DomainError("inference model disagrees with the shape model on the latent size");
    }
  }
  return s;
}

json mesh_json(const geom::TriMesh& mesh) {
  json v = json::array();
  for (const geom::Vec3& p : mesh.vertices) v.push_back({p.x(), p.y(), p.z()});
  json f = json::array();
  for (const geom::Face& t : mesh.faces) f.push_back({t[0], t[1], t[2]});
  return {{"vertices", std::move(v)}, {"faces", std::move(f)}};
}

namespace {

// Request-level failure mapped to an HTTP status.
struct HttpError {
  int status;
  std::string message;
};

ApiResponse respond(int status, const json& body) {
  ApiResponse r;
  r.status = status;
  r.body = body.dump();
  r.content_hash = fnv1a_hex(r.body);
  return r;
}

Eigen::VectorXd read_params(const json& body, const char* key, const model::PCASubspace& pca) {
  if (!body.contains(key) || !body[key].is_array()) {
    throw HttpError{400, std::string("field '") + key + "' must be an array of numbers"};
  }
  const json& a = body[key];
  if (static_cast<int>(a.size()) != pca.dims()) {
    throw HttpError{400, std::string("field '") + key + "' needs " + std::to_string(pca.dims()) +
                             " entries, got " + std::to_string(a.size())};
  }
  Eigen::VectorXd s(pca.dims());
  for (int j = 0; j < pca.dims(); ++j) {
    if (!a[j].is_number()) throw HttpError{400, std::string("field '") + key + "' must be numeric"};
    s(j) = a[j].get<double>();
    if (!std::isfinite(s(j)) || std::abs(s(j)) > 3.0 * pca.sigma(j)) {
      throw HttpError{400, std::string(key) + "[" + std::to_string(j) + "] = " +
                               std::to_string(s(j)) + " lies beyond 3 sigma (" +
                               std::to_string(3.0 * pca.sigma(j)) + ")"};
    }
  }
  return s;
}

body::BodyState read_state(const json& body, const body::BodyTemplate& tpl) {
  body::BodyState st = body::BodyState::identity(tpl.joint_count());
  if (body.contains("theta")) {
    const json& t = body["theta"];
    if (!t.is_array()) throw HttpError{400, "theta must be an array"};
    std::vector<double> flat;
    for (const json& e : t) {
      if (e.is_array()) {
        for (const json& x : e) flat.push_back(x.get<double>());
      } else {
        flat.push_back(e.get<double>());
      }
    }
    if (flat.size() != 3 * st.theta.size()) {
      throw HttpError{400, "theta needs " + std::to_string(st.theta.size()) + " rotations"};
    }
    for (std::size_t j = 0; j < st.theta.size(); ++j)
      st.theta[j] = geom::Vec3(flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]);
  }
  if (body.contains("beta")) {
    const json& b = body["beta"];
    if (!b.is_array() || b.size() != st.beta.size()) {
      throw HttpError{400, "beta needs " + std::to_string(st.beta.size()) + " entries"};
    }
    for (std::size_t k = 0; k < st.beta.size(); ++k) st.beta[k] = b[k].get<double>();
  }
  try {
    st.validate(tpl.joint_count());
  } catch (const Error& e) {
    throw HttpError{400, e.what()};
  }
  return st;
}

geom::TriMesh decode_shape(const ApiSession& s, const Eigen::VectorXd& params, std::size_t* texels) {
  const model::DecodedShape d = s.shape->decode(model::from_params(s.shape->pca(), params));
  if (texels) *texels = d.map.mask_count();
  if (d.map.mask_count() == 0) throw HttpError{422, "decoded shape has an empty mask"};
  return uv::decode_template_free(d.map, uv::MapKind::kTPose, s.tpl, s.lookup, s.tpl.mesh,
                                  s.world_scale)
      .mesh;
}

geom::TriMesh read_obj_field(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) {
    throw HttpError{400, std::string("field '") + key + "' must hold a base64 OBJ"};
  }
  try {
    std::istringstream in(base64_decode(body[key].get<std::string>()));
    return geom::parse_obj(in);
  } catch (const Error& e) {
    throw HttpError{400, std::string(key) + ": " + e.what()};
  }
}

}  // namespace

ApiService::ApiService(std::shared_ptr<const ApiSession> session) : session_(std::move(session)) {
  if (!session_ || !session_->shape) throw DomainError("API service needs a loaded shape model");
}

ApiResponse ApiService::handle(const std::string& method, const std::string& path,
                               const std::string& body_text) const {
  const ApiSession& s = *session_;
  try {
    if (method == "GET" && path == "/api/info") {
      const model::PCASubspace& pca = s.shape->pca();
      std::vector<double> sigma(pca.sigma.data(), pca.sigma.data() + pca.sigma.size());
      return respond(200, {{"category", s.category},
                           {"N", s.shape->latent_dim()},
                           {"n", pca.dims()},
                           {"sigma", sigma},
                           {"resolution", s.shape->resolution()},
                           {"case", uv::case_name(s.shape->case_tag())},
                           {"animate", s.anim.has_value()},
                           {"infer", s.infer.has_value()},
                           {"pose_presets", gen::pose_preset_names()}});
    }
    if (method != "POST") return respond(404, {{"error", "no route " + method + " " + path}});

    json body;
    try {
      body = json::parse(body_text);
    } catch (const json::parse_error& e) {
      throw HttpError{400, std::string("malformed JSON: ") + e.what()};
    }
    if (!body.is_object()) throw HttpError{400, "request body must be a JSON object"};

    try {
      if (path == "/api/decode") {
        std::size_t texels = 0;
        json out = mesh_json(decode_shape(s, read_params(body, "s", s.shape->pca()), &texels));
        out["mask_texels"] = texels;
        return respond(200, out);
      }
      if (path == "/api/animate") {
        if (!s.anim) throw std::runtime_error("no animation model loaded");
        const Eigen::VectorXd params = read_params(body, "s", s.shape->pca());
        const body::BodyState st = read_state(body, s.tpl);
        const model::DecodedShape d = s.shape->decode(model::from_params(s.shape->pca(), params));
        if (d.map.mask_count() == 0) throw HttpError{422, "decoded shape has an empty mask"};
        const model::AnimateResult r = model::animate_map(*s.anim, d.map, s.tpl, st);
        json out = mesh_json(r.mesh);
        out["mask_texels"] = r.mask_texels;
        out["violations"] = r.collisions.violations;
        return respond(200, out);
      }
      if (path == "/api/interpolate") {
        const Eigen::VectorXd a = read_params(body, "a", s.shape->pca());
        const Eigen::VectorXd b = read_params(body, "b", s.shape->pca());
        const json steps_j = body.value("steps", json(5));
        if (!steps_j.is_number_integer() || steps_j.get<int>() < 2 || steps_j.get<int>() > 100) {
          throw HttpError{400, "steps must be an integer in [2, 100]"};
        }
        const int steps = steps_j.get<int>();
        json meshes = json::array();
        for (int k = 0; k < steps; ++k) {
          const double t = static_cast<double>(k) / (steps - 1);
          std::size_t texels = 0;
          json m = mesh_json(decode_shape(s, model::interpolate(a, b, t), &texels));
          m["t"] = t;
          m["mask_texels"] = texels;
          meshes.push_back(std::move(m));
        }
        return respond(200, {{"meshes", std::move(meshes)}});
      }
      if (path == "/api/infer") {
        if (!s.infer) throw std::runtime_error("no inference model loaded");
        const geom::TriMesh garment = read_obj_field(body, "garment_obj");
        const geom::TriMesh human = read_obj_field(body, "human_obj");
        if (garment.faces.empty() || human.faces.empty()) throw HttpError{400, "meshes must not be empty"};
        const model::InferenceResult r = model::infer_shape(*s.infer, *s.shape, garment, human);
        std::vector<double> sv(r.s.data(), r.s.data() + r.s.size());
        return respond(200, {{"s", sv}, {"residual_flag", r.flagged}, {"residual", r.residual}});
      }
    } catch (const json::exception& e) {
      throw HttpError{400, std::string("bad field: ") + e.what()};
    }
    return respond(404, {{"error", "no route " + method + " " + path}});
  } catch (const HttpError& e) {
    return respond(e.status, {{"error", e.message}});
  } catch (const std::exception& e) {
    const std::string id = "E" + fnv1a_hex(method + " " + path + ": " + e.what()).substr(0, 8);
    return respond(500, {{"error", e.what()}, {"error_id", id}});
  }
}

void serve(const ApiService& service, const std::string& host, int port) {
  httplib::Server server;
  const auto bind = [&](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("X-Content-Hash", r.content_hash);
    res.set_content(r.body, "application/json");
  };
  server.Get("/api/info", bind);
  server.Post(R"(/api/.*)", bind);
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace uvcloth::app
