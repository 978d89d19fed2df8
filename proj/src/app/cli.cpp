#include "uvcloth/app/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "uvcloth/app/gltf.hpp"
#include "uvcloth/app/service.hpp"
#include "uvcloth/error.hpp"
#include "uvcloth/geom/obj_io.hpp"
#include "uvcloth/model/map_tensors.hpp"
#include "uvcloth/model/pipeline.hpp"

namespace uvcloth::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Context {
  ProjectConfig cfg;
  bool verbose = false;
  std::ostream& out;
  std::ostream& err;
  json metrics = json::object();
};

// Options shared by every subcommand plus the per-command ones.
struct Options {
  std::string config;
  std::int64_t seed = -1;
  bool verbose = false;

  int count = 100;
  std::string out;
  std::string category;
  std::string data;
  std::string garment, human, posed, pose, map, tmask, posed_out, gltf;
  std::string a, b, s, preset, sequence, pred, gt;
  int steps = 5;
  int dim = 0;
  double c = 0.0;
  int epochs = -1;
  int n = -1;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::vector<std::string> edits;
};

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what(), 0);
  }
}

void write_json_file(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

void save_mesh(const geom::TriMesh& mesh, const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  geom::save_obj(mesh, p);
}

// A file holding a JSON array (or {"s": [...]}) or an inline comma list.
Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> v;
  if (fs::exists(text)) {
    json j = read_json_file(text);
    if (j.is_object()) j = j.at("s");
    v = j.get<std::vector<double>>();
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        v.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw DomainError("'" + text + "' is neither a file nor a comma-separated list of numbers");
      }
    }
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

body::BodyState preset_pose(const body::BodyTemplate& tpl, const std::string& name) {
  const std::vector<std::string> names = gen::pose_preset_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DomainError("unknown pose preset '" + name + "'");
  return gen::pose_presets(tpl)[static_cast<std::size_t>(it - names.begin())];
}

std::vector<body::BodyState> read_poses(const Options& o, const body::BodyTemplate& tpl) {
  std::vector<body::BodyState> poses;
  if (!o.sequence.empty()) {
    json j = read_json_file(o.sequence);
    if (j.is_object()) j = j.at("frames");
    for (const json& f : j) {
      poses.push_back(f.is_string() ? preset_pose(tpl, f.get<std::string>())
                                    : body::body_state_from_json(f));
    }
  } else if (!o.pose.empty()) {
    poses.push_back(body::body_state_from_json(read_json_file(o.pose)));
  } else {
    poses.push_back(preset_pose(tpl, o.preset.empty() ? "t_pose" : o.preset));
  }
  if (poses.empty()) throw DomainError("pose sequence is empty");
  for (const body::BodyState& p : poses) p.validate(tpl.joint_count());
  return poses;
}

fs::path model_path(const Context& ctx, const char* name) { return ctx.cfg.model_dir / name; }

model::ParamNet load_shape(const Context& ctx) {
  const fs::path p = model_path(ctx, "paramnet.uvck");
  if (!fs::exists(p)) {
    throw DomainError("no shape model at " + p.string() + "; run train-paramnet first");
  }
  return model::ParamNet::load(p);
}

const model::PCASubspace& require_pca(const model::ParamNet& net) {
  if (!net.has_pca()) {
    throw DomainError("the shape model has no fitted PCA; run fit-pca (or train-paramnet) first");
  }
  return net.pca();
}

struct EncodedSet {
  std::vector<model::EncodedSample> samples;
  std::size_t skipped = 0;
};

// TRAIN split of a dataset in map form; garments the atlas cannot encode are
// skipped and counted.
EncodedSet encode_training(const Context& ctx, const std::string& dir, const body::BodyTemplate& tpl) {
  const gen::LoadedDataset ds = gen::load_dataset(dir.empty() ? ctx.cfg.dataset_dir : fs::path(dir));
  const geom::SurfaceIndex tbody(tpl.mesh);
  EncodedSet set;
  for (const gen::DatasetSample& s : ds.samples) {
    if (s.split != gen::Split::kTrain) continue;
    try {
      set.samples.push_back(model::encode_sample(s, tpl, tbody, ctx.cfg.codec));
    } catch (const NotEncodableError& e) {
      ++set.skipped;
      if (ctx.verbose) ctx.err << "skipping sample " << s.index << ": " << e.what() << '\n';
    }
  }
  if (set.samples.empty()) throw DomainError("dataset has no encodable training samples");
  return set;
}

nn::TrainConfig with_epochs(nn::TrainConfig t, const Options& o, std::uint64_t seed) {
  if (o.epochs >= 0) t.epochs = o.epochs;
  t.seed = seed;
  return t;
}

json log_json(const nn::TrainLog& log, const std::vector<std::string>& names) {
  json j = log.to_json(names);
  j.erase("seconds");  // keeps the artifact byte-identical across runs
  return j;
}

geom::TriMesh decode_tpose_grid(const uv::UVMap& map, const body::BodyTemplate& tpl,
                                const ProjectConfig& cfg) {
  if (map.mask_count() == 0) throw DomainError("decoded shape has an empty mask");
  const body::AtlasLookup lookup = body::build_atlas_lookup(tpl, map.resolution());
  return uv::decode_template_free(map, uv::MapKind::kTPose, tpl, lookup, tpl.mesh,
                                  cfg.codec.world_scale)
      .mesh;
}

void export_mesh(const geom::TriMesh& mesh, const fs::path& obj, const Options& o) {
  save_mesh(mesh, obj);
  if (!o.gltf.empty()) save_gltf(mesh, o.gltf);
}

// ---------------------------------------------------------------------------

void cmd_gen_data(Context& ctx, const Options& o) {
  gen::DatasetOptions opt;
  opt.count = o.count;
  opt.seed = ctx.cfg.seed;
  opt.category = gen::parse_category(o.category.empty() ? ctx.cfg.category : o.category);
  opt.drape = ctx.cfg.drape;
  opt.pose_jitter = ctx.cfg.pose_jitter;
  const fs::path dir = o.out.empty() ? ctx.cfg.dataset_dir : fs::path(o.out);
  const json manifest = gen::generate_dataset(opt, load_template(ctx.cfg), dir);
  ctx.metrics = {{"count", manifest.at("count")},
                 {"train", manifest.at("train")},
                 {"test", manifest.at("test")}};
  ctx.out << "wrote " << manifest.at("count") << " " << gen::category_name(opt.category)
          << " samples to " << dir.string() << " (train " << manifest.at("train") << ", test "
          << manifest.at("test") << ")\n";
}

void cmd_encode(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const geom::TriMesh g = geom::load_obj(o.garment);
  const gen::Category cat = gen::parse_category(o.category.empty() ? ctx.cfg.category : o.category);
  const uv::CaseTag tag = model::case_for(cat);
  const geom::SurfaceIndex tbody(tpl.mesh);
  const uv::GarmentUV guv = tag == uv::CaseTag::kCase1
                                ? uv::assign_uv_case1(g, tpl, tbody, ctx.cfg.codec)
                                : uv::assign_uv_case2(g, ctx.cfg.codec.y0, ctx.cfg.codec.world_scale);
  const uv::UVMap map = uv::encode_tpose(g, guv, ctx.cfg.codec.resolution);
  uv::save_uvmp(map, o.out);
  const double dmax = ctx.cfg.d_max > 0 ? ctx.cfg.d_max : ctx.cfg.codec.resolution / 4.0;
  if (!o.tmask.empty()) uv::save_uvmp(uv::to_uvmap(uv::bidistance_transform(map, dmax)), o.tmask);
  if (!o.posed.empty()) {
    if (o.pose.empty()) throw DomainError("--posed needs --pose with the body state");
    const geom::TriMesh pg = geom::load_obj(o.posed);
    const geom::TriMesh pb = body::pose_body(tpl, body::body_state_from_json(read_json_file(o.pose)));
    const fs::path dst = o.posed_out.empty() ? fs::path(o.out).replace_extension(".posed.uvmp")
                                             : fs::path(o.posed_out);
    uv::save_uvmp(uv::encode_posed(pg, guv, pb, map), dst);
  }
  const double fp = uv::texel_footprint(g, guv, map.resolution());
  ctx.metrics = {{"mask_texels", map.mask_count()}, {"footprint_mm", 1000.0 * fp}};
  ctx.out << uv::case_name(tag) << " map " << map.resolution() << "x" << map.resolution() << ", "
          << map.mask_count() << " masked texels, texel footprint "
          << std::to_string(1000.0 * fp).substr(0, 5) << " mm\n";
}

void cmd_decode(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const uv::UVMap map = uv::load_uvmp(o.map);
  if (map.case_tag() == uv::CaseTag::kBiDistance) throw DomainError("a bi-distance map holds no geometry");
  geom::TriMesh mesh;
  if (o.pose.empty()) {
    mesh = decode_tpose_grid(map, tpl, ctx.cfg);
  } else {
    const geom::TriMesh pb = body::pose_body(tpl, body::body_state_from_json(read_json_file(o.pose)));
    mesh = uv::decode_template_free(map, uv::MapKind::kPosed, tpl,
                                    body::build_atlas_lookup(tpl, map.resolution()), pb,
                                    ctx.cfg.codec.world_scale)
               .mesh;
  }
  export_mesh(mesh, o.out, o);
  ctx.metrics = {{"vertices", mesh.vertices.size()}, {"faces", mesh.faces.size()}};
  ctx.out << "decoded " << mesh.vertices.size() << " vertices, " << mesh.faces.size()
          << " faces to " << o.out << '\n';
}

void cmd_train_paramnet(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const EncodedSet set = encode_training(ctx, o.data, tpl);
  std::vector<uv::UVMap> maps;
  for (const model::EncodedSample& e : set.samples) maps.push_back(e.t_map);
  model::ParamNetConfig pc = ctx.cfg.paramnet;
  pc.train = with_epochs(pc.train, o, ctx.cfg.seed);
  pc.seed = ctx.cfg.paramnet.seed + ctx.cfg.seed;
  model::ParamNet net(pc, maps.front().case_tag(), maps.front().channels());
  const model::ParamNetTraining t = model::train_paramnet(net, maps);
  fs::create_directories(ctx.cfg.model_dir);
  net.save(model_path(ctx, "paramnet.uvck"), {{"category", ctx.cfg.category}});
  write_json_file(model_path(ctx, "paramnet_log.json"), log_json(t.log, {"map", "mask"}));
  if (!t.pca_warning.empty()) ctx.err << "warning: " << t.pca_warning << '\n';
  ctx.metrics = {{"samples", maps.size()},
                 {"skipped", set.skipped},
                 {"initial_loss", t.log.initial_loss},
                 {"final_loss", t.log.final_loss},
                 {"pca_dims", net.pca().dims()}};
  ctx.out << "trained shape model on " << maps.size() << " maps: loss " << t.log.initial_loss
          << " -> " << t.log.final_loss << '\n';
}

void cmd_fit_pca(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  model::ParamNet net = load_shape(ctx);
  const EncodedSet set = encode_training(ctx, o.data, tpl);
  std::vector<model::Latent> z;
  for (const model::EncodedSample& e : set.samples) z.push_back(net.encode(e.t_map));
  const int n = o.n >= 0 ? o.n : std::min(ctx.cfg.paramnet.pca_dims, static_cast<int>(z.size()) - 1);
  model::PCASubspace pca = model::fit_pca(z, n);
  if (n > pca.rank) ctx.err << "warning: PCA dimension " << n << " exceeds the latent rank " << pca.rank << '\n';
  const double err = model::reconstruction_error(pca, z);
  net.set_pca(std::move(pca));
  net.save(model_path(ctx, "paramnet.uvck"), {{"category", ctx.cfg.category}});
  ctx.metrics = {{"n", n}, {"latents", z.size()}, {"reconstruction_error", err}};
  ctx.out << "fitted a " << n << "-dimensional PCA on " << z.size()
          << " latents (reconstruction error " << err << ")\n";
}

void cmd_train_animnet(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const EncodedSet set = encode_training(ctx, o.data, tpl);
  std::vector<model::PoseSample> samples;
  for (const model::EncodedSample& e : set.samples) samples.emplace_back(e.t_map, e.normal_map, e.a_map);
  model::AnimNetConfig ac = ctx.cfg.animnet;
  ac.train = with_epochs(ac.train, o, ctx.cfg.seed);
  ac.seed = ctx.cfg.animnet.seed + ctx.cfg.seed;
  model::AnimNet net(ac, samples.front().maps.t_map().case_tag(),
                     samples.front().maps.t_map().channels());
  const nn::TrainLog log = model::train_animnet(net, samples);
  fs::create_directories(ctx.cfg.model_dir);
  net.save(model_path(ctx, "animnet.uvck"), {{"category", ctx.cfg.category}});
  write_json_file(model_path(ctx, "animnet_log.json"), log_json(log, {"map"}));
  ctx.metrics = {{"samples", samples.size()},
                 {"initial_loss", log.initial_loss},
                 {"final_loss", log.final_loss}};
  ctx.out << "trained animation model on " << samples.size() << " samples: loss "
          << log.initial_loss << " -> " << log.final_loss << '\n';
}

void cmd_train_infernet(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const model::ParamNet shape = load_shape(ctx);
  const EncodedSet set = encode_training(ctx, o.data, tpl);
  model::InferNetConfig ic = ctx.cfg.infernet;
  ic.train = with_epochs(ic.train, o, ctx.cfg.seed);
  ic.seed = ctx.cfg.infernet.seed + ctx.cfg.seed;
  model::InferNet net(ic, shape.latent_dim());
  std::vector<model::InferPair> pairs;
  for (const model::EncodedSample& e : set.samples) {
    pairs.push_back(net.make_pair(e.sample.posed_garment, e.posed_body, shape.encode(e.t_map)));
  }
  const nn::TrainLog log = model::train_infernet(net, pairs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [d, idx] = net.nearest_training(net.predict(pairs[i].human, pairs[i].garment));
    if (net.training_latents()[idx] == pairs[i].target) ++hits;
  }
  fs::create_directories(ctx.cfg.model_dir);
  net.save(model_path(ctx, "infernet.uvck"), {{"category", ctx.cfg.category}});
  write_json_file(model_path(ctx, "infernet_log.json"), log_json(log, {"latent_l1"}));
  const double retrieval = static_cast<double>(hits) / pairs.size();
  ctx.metrics = {{"pairs", pairs.size()},
                 {"initial_loss", log.initial_loss},
                 {"final_loss", log.final_loss},
                 {"retrieval", retrieval}};
  ctx.out << "trained inference model on " << pairs.size() << " pairs: latent L1 "
          << log.initial_loss << " -> " << log.final_loss << ", retrieval " << 100.0 * retrieval
          << "%\n";
}

void cmd_interpolate(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const model::ParamNet net = load_shape(ctx);
  const model::PCASubspace& pca = require_pca(net);
  const Eigen::VectorXd a = parse_vector(o.a), b = parse_vector(o.b);
  if (a.size() != pca.dims() || b.size() != pca.dims()) {
    throw DimensionError("shape parameters need " + std::to_string(pca.dims()) + " entries");
  }
  if (o.steps < 2) throw DomainError("--steps must be at least 2");
  json texels = json::array();
  for (int k = 0; k < o.steps; ++k) {
    const double t = static_cast<double>(k) / (o.steps - 1);
    const model::DecodedShape d = net.decode(model::from_params(pca, model::interpolate(a, b, t)));
    char name[32];
    std::snprintf(name, sizeof name, "interp_%03d.obj", k);
    save_mesh(decode_tpose_grid(d.map, tpl, ctx.cfg), fs::path(o.out) / name);
    texels.push_back(d.map.mask_count());
  }
  ctx.metrics = {{"steps", o.steps}, {"mask_texels", texels}};
  ctx.out << "wrote " << o.steps << " interpolated shapes to " << o.out << '\n';
}

void cmd_variation(Context& ctx, const Options& o) {
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const fs::path p = model_path(ctx, "paramnet.uvck");
  if (!fs::exists(p)) {
    throw DomainError("no fitted PCA: " + p.string() +
                      " does not exist; run train-paramnet (or fit-pca) first");
  }
  const model::ParamNet net = model::ParamNet::load(p);
  const model::PCASubspace& pca = require_pca(net);
  const Eigen::VectorXd s = model::sample_variation(pca, o.dim, o.c);
  const model::DecodedShape d = net.decode(model::from_params(pca, s));
  const geom::TriMesh mesh = decode_tpose_grid(d.map, tpl, ctx.cfg);
  export_mesh(mesh, o.out, o);
  ctx.metrics = {{"dim", o.dim}, {"c", o.c}, {"mask_texels", d.map.mask_count()}};
  ctx.out << "dim " << o.dim << " at " << o.c << " sigma: " << d.map.mask_count()
          << " masked texels, " << mesh.vertices.size() << " vertices -> " << o.out << '\n';
}

json write_frames(const std::vector<model::AnimateResult>& frames, const fs::path& dir,
                  const Options& o, double seconds) {
  json report = json::array();
  std::size_t violations = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.obj", f);
    save_mesh(frames[f].mesh, dir / name);
    if (!o.gltf.empty() && f == 0) save_gltf(frames[f].mesh, o.gltf);
    violations += frames[f].collisions.violations;
    report.push_back({{"frame", f},
                      {"vertices", frames[f].mesh.vertices.size()},
                      {"mask_texels", frames[f].mask_texels},
                      {"violations", frames[f].collisions.violations},
                      {"collision_iterations", frames[f].collisions.iterations}});
  }
  const json summary = {{"frames", report}, {"violations", violations}, {"seconds", seconds}};
  write_json_file(dir / "report.json", summary);
  return summary;
}

void cmd_animate(Context& ctx, const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const fs::path ap = model_path(ctx, "animnet.uvck");
  if (!fs::exists(ap)) throw DomainError("no animation model at " + ap.string() + "; run train-animnet first");
  const model::AnimNet anim = model::AnimNet::load(ap);
  const std::vector<body::BodyState> poses = read_poses(o, tpl);

  std::vector<model::AnimateResult> frames;
  if (!o.map.empty()) {
    const uv::UVMap t_map = uv::load_uvmp(o.map);
    for (const body::BodyState& st : poses) frames.push_back(model::animate_map(anim, t_map, tpl, st));
  } else {
    const model::ParamNet shape = load_shape(ctx);
    const model::PCASubspace& pca = require_pca(shape);
    const Eigen::VectorXd s = o.s.empty() ? Eigen::VectorXd::Zero(pca.dims()) : parse_vector(o.s);
    if (s.size() != pca.dims()) throw DimensionError("shape parameters need " + std::to_string(pca.dims()) + " entries");
    for (const body::BodyState& st : poses) frames.push_back(model::animate_params(anim, shape, s, tpl, st));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json summary = write_frames(frames, o.out, o, secs);
  ctx.metrics = {{"frames", frames.size()}, {"violations", summary.at("violations")}};
  ctx.out << "animated " << frames.size() << " frames into " << o.out << " ("
          << summary.at("violations") << " collision violations)\n";
}

model::InferenceResult run_inference(const Context& ctx, const Options& o, const model::ParamNet& shape) {
  const fs::path ip = model_path(ctx, "infernet.uvck");
  if (!fs::exists(ip)) throw DomainError("no inference model at " + ip.string() + "; run train-infernet first");
  const model::InferNet net = model::InferNet::load(ip);
  require_pca(shape);
  return model::infer_shape(net, shape, geom::load_obj(o.garment), geom::load_obj(o.human));
}

void cmd_infer(Context& ctx, const Options& o) {
  const model::ParamNet shape = load_shape(ctx);
  const model::InferenceResult r = run_inference(ctx, o, shape);
  const std::vector<double> s(r.s.data(), r.s.data() + r.s.size());
  const json result = {{"s", s}, {"z_norm", r.z.norm()}, {"residual", r.residual},
                       {"residual_flag", r.flagged}};
  if (!o.out.empty()) write_json_file(o.out, result);
  ctx.metrics = {{"residual", r.residual}, {"residual_flag", r.flagged}};
  ctx.out << result.dump() << '\n';
}

void cmd_edit_animate(Context& ctx, const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const body::BodyTemplate tpl = load_template(ctx.cfg);
  const model::ParamNet shape = load_shape(ctx);
  const model::InferenceResult r = run_inference(ctx, o, shape);
  std::vector<std::pair<int, double>> edits;
  for (const std::string& e : o.edits) {
    const auto eq = e.find('=');
    if (eq == std::string::npos) throw DomainError("edit '" + e + "' must look like DIM=VALUE");
    try {
      edits.emplace_back(std::stoi(e.substr(0, eq)), std::stod(e.substr(eq + 1)));
    } catch (const std::exception&) {
      throw DomainError("edit '" + e + "' must look like DIM=VALUE");
    }
  }
  const fs::path ap = model_path(ctx, "animnet.uvck");
  if (!fs::exists(ap)) throw DomainError("no animation model at " + ap.string() + "; run train-animnet first");
  const model::AnimNet anim = model::AnimNet::load(ap);
  const auto frames = model::edit_and_animate(r, edits, shape, anim, tpl, read_poses(o, tpl));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json summary = write_frames(frames, o.out, o, secs);
  ctx.metrics = {{"frames", frames.size()}, {"edits", edits.size()}, {"violations", summary.at("violations")}};
  ctx.out << "edited " << edits.size() << " parameters and animated " << frames.size()
          << " frames into " << o.out << '\n';
}

void cmd_eval(Context& ctx, const Options& o) {
  const double mm = geom::vertex_to_vertex_error(geom::load_obj(o.pred), geom::load_obj(o.gt));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f mm", mm);
  ctx.metrics = {{"vertex_error_mm", mm}};
  ctx.out << buf << '\n';
}

void cmd_serve(Context& ctx, const Options& o) {
  const ApiService service(load_session(ctx.cfg));
  ctx.out << "serving on http://" << o.host << ":" << o.port << '\n' << std::flush;
  serve(service, o.host, o.port);
}

void append_run(const ProjectConfig& cfg, const std::string& command, int code, const json& metrics,
                double seconds) {
  if (cfg.runs_log.empty()) return;
  if (cfg.runs_log.has_parent_path()) fs::create_directories(cfg.runs_log.parent_path());
  std::ofstream log(cfg.runs_log, std::ios::app);
  if (!log) return;
  log << json{{"command", command},
              {"config_hash", config_hash(cfg)},
              {"seed", cfg.seed},
              {"exit_code", code},
              {"metrics", metrics},
              {"wall_time", seconds}}
             .dump()
      << '\n';
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  Options o;
  CLI::App app{"UV-map garment modeling toolkit", "uvcloth"};
  app.add_option("--config", o.config, "Project config JSON");
  app.add_option("--seed", o.seed, "Seed overriding the config");
  app.add_flag("--verbose", o.verbose, "Print progress details");
  app.require_subcommand(1);

  auto* gen_data = app.add_subcommand("gen-data", "Generate a draped garment dataset");
  gen_data->add_option("--count", o.count)->check(CLI::PositiveNumber);
  gen_data->add_option("--out", o.out, "Output directory");
  gen_data->add_option("--category", o.category, "upper, pants or skirt");

  auto* encode = app.add_subcommand("encode", "Encode a T-pose garment OBJ into a UV map");
  encode->add_option("--garment", o.garment)->required();
  encode->add_option("--out", o.out)->required();
  encode->add_option("--category", o.category);
  encode->add_option("--tmask", o.tmask, "Also write the bi-distance map");
  encode->add_option("--posed", o.posed, "Posed garment OBJ with the same connectivity");
  encode->add_option("--pose", o.pose, "Body state JSON of the posed garment");
  encode->add_option("--posed-out", o.posed_out);

  auto* decode = app.add_subcommand("decode", "Decode a UV map into a mesh");
  decode->add_option("--map", o.map)->required();
  decode->add_option("--out", o.out)->required();
  decode->add_option("--pose", o.pose, "Body state JSON for posed maps");
  decode->add_option("--gltf", o.gltf, "Also export glTF");

  auto* train_pn = app.add_subcommand("train-paramnet", "Train the shape-space model and its PCA");
  auto* fit_pca = app.add_subcommand("fit-pca", "Refit the PCA of the shape-space latents");
  auto* train_an = app.add_subcommand("train-animnet", "Train the posed-map regressor");
  auto* train_in = app.add_subcommand("train-infernet", "Train the point-set latent estimator");
  for (CLI::App* c : {train_pn, fit_pca, train_an, train_in}) c->add_option("--data", o.data, "Dataset directory");
  for (CLI::App* c : {train_pn, train_an, train_in}) c->add_option("--epochs", o.epochs);
  fit_pca->add_option("--n", o.n, "PCA dimension");

  auto* interp = app.add_subcommand("interpolate", "Decode shapes between two parameter vectors");
  interp->add_option("--a", o.a)->required();
  interp->add_option("--b", o.b)->required();
  interp->add_option("--steps", o.steps);
  interp->add_option("--out", o.out)->required();

  auto* variation = app.add_subcommand("variation", "Decode c sigma along one PCA dimension");
  variation->add_option("--dim", o.dim)->required();
  variation->add_option("--c", o.c)->required();
  variation->add_option("--out", o.out)->required();
  variation->add_option("--gltf", o.gltf);

  auto* animate = app.add_subcommand("animate", "Animate a shape over poses");
  auto* edit = app.add_subcommand("edit-animate", "Infer, edit and animate a scanned garment");
  for (CLI::App* c : {animate, edit}) {
    c->add_option("--preset", o.preset, "Pose preset name");
    c->add_option("--pose", o.pose, "Body state JSON");
    c->add_option("--sequence", o.sequence, "JSON list of body states or preset names");
    c->add_option("--out", o.out)->required();
    c->add_option("--gltf", o.gltf, "Export the first frame as glTF");
  }
  animate->add_option("--s", o.s, "Shape parameters (file or comma list); default: mean shape");
  animate->add_option("--map", o.map, "T-pose UV map instead of shape parameters");

  auto* infer = app.add_subcommand("infer", "Recover shape parameters from posed meshes");
  for (CLI::App* c : {infer, edit}) {
    c->add_option("--garment", o.garment)->required();
    c->add_option("--human", o.human)->required();
  }
  infer->add_option("--out", o.out, "Write the result JSON");
  edit->add_option("--edit", o.edits, "DIM=VALUE replacement (repeatable)");

  auto* eval = app.add_subcommand("eval", "Mean vertex error between two meshes");
  eval->add_option("--pred", o.pred)->required();
  eval->add_option("--gt", o.gt)->required();

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--port", o.port);
  serve_cmd->add_option("--host", o.host);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    ProjectConfig cfg;
    try {
      if (!o.config.empty()) cfg = load_config(o.config);
    } catch (const Error&) {
    }
    std::string command;
    for (std::size_t i = 0; i < args.size() && command.empty(); ++i) {
      if (args[i] == "--config" || args[i] == "--seed") ++i;
      else if (!args[i].empty() && args[i][0] != '-') command = args[i];
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    append_run(cfg, command, 1, json::object(), secs);
    return 1;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  ProjectConfig cfg;
  try {
    if (!o.config.empty()) cfg = load_config(o.config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  Context ctx{cfg, o.verbose, out, err};

  int code = 0;
  try {
    if (command == "gen-data") cmd_gen_data(ctx, o);
    else if (command == "encode") cmd_encode(ctx, o);
    else if (command == "decode") cmd_decode(ctx, o);
    else if (command == "train-paramnet") cmd_train_paramnet(ctx, o);
    else if (command == "fit-pca") cmd_fit_pca(ctx, o);
    else if (command == "train-animnet") cmd_train_animnet(ctx, o);
    else if (command == "train-infernet") cmd_train_infernet(ctx, o);
    else if (command == "interpolate") cmd_interpolate(ctx, o);
    else if (command == "variation") cmd_variation(ctx, o);
    else if (command == "animate") cmd_animate(ctx, o);
    else if (command == "infer") cmd_infer(ctx, o);
    else if (command == "edit-animate") cmd_edit_animate(ctx, o);
    else if (command == "eval") cmd_eval(ctx, o);
    else if (command == "serve") cmd_serve(ctx, o);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    code = 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    code = 2;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  append_run(ctx.cfg, command, code, ctx.metrics, secs);
  return code;
}

}  // namespace uvcloth::app
