#pragma once

#include <memory>
#include <optional>

#include "uvcloth/app/config.hpp"

namespace uvcloth::app {

/// Models loaded once and shared read-only by every request.
struct ApiSession {
  std::string category;
  double world_scale = 0.5;
  body::BodyTemplate tpl;
  body::AtlasLookup lookup;
  std::optional<model::ParamNet> shape;
  std::optional<model::AnimNet> anim;
  std::optional<model::InferNet> infer;
};

/// Loads paramnet.uvck (required, with a fitted PCA) plus animnet.uvck and
/// infernet.uvck when present from the model directory. Throws DomainError
/// when the models disagree on case tag, resolution or latent size.
std::shared_ptr<const ApiSession> load_session(const ProjectConfig& cfg);

/// Body template for a config (built-in standard body when no path is set).
body::BodyTemplate load_template(const ProjectConfig& cfg);

struct ApiResponse {
  int status = 200;
  std::string body;
  /// FNV-1a of the body; sent as X-Content-Hash.
  std::string content_hash;
};

nlohmann::json mesh_json(const geom::TriMesh& mesh);

/// Transport-free request handler. Status codes: 400 malformed request or a
/// shape parameter beyond 3 sigma, 404 unknown route, 422 empty decoded mask,
/// 500 internal failure (body carries an error id).
class ApiService {
 public:
  explicit ApiService(std::shared_ptr<const ApiSession> session);

  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::string& body) const;

  const ApiSession& session() const { return *session_; }

 private:
  std::shared_ptr<const ApiSession> session_;
};

/// Blocks serving the API over HTTP until the process is stopped.
void serve(const ApiService& service, const std::string& host, int port);

}  // namespace uvcloth::app
