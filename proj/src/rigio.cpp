#include "arti/rigio.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "arti/error.hpp"

#include "json.hpp"

namespace arti {

using json = nlohmann::json;

// --- low-level helpers ------------------------------------------------------

std::string format_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double snap_sig9(double v) { return std::strtod(format_sig9(v).c_str(), nullptr); }

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code dir_ec;
    fs::create_directories(target.parent_path(), dir_ec);
    if (dir_ec) throw_data("cannot create parent directory for: " + path);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_data("cannot open file for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw_data("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw_data("rename failed for: " + path);
  }
}

// --- OBJ --------------------------------------------------------------------

Mesh obj_from_string(const std::string& text) {
  Mesh mesh;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z))
        throw_data("obj line " + std::to_string(lineno) + ": malformed vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // strip /vt/vn suffixes
        size_t slash = tok.find('/');
        if (slash != std::string::npos) tok = tok.substr(0, slash);
        char* end = nullptr;
        long v = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0')
          throw_data("obj line " + std::to_string(lineno) + ": malformed face index");
        if (v < 0) v = static_cast<long>(mesh.vertices.size()) + 1 + v;
        idx.push_back(static_cast<int>(v) - 1);
      }
      if (idx.size() < 3)
        throw_data("obj line " + std::to_string(lineno) + ": face needs 3+ vertices");
      // fan-triangulate polygons
      for (size_t k = 2; k < idx.size(); ++k)
        mesh.faces.push_back({idx[0], idx[k - 1], idx[k]});
    }
  }
  mesh.validate();
  return mesh;
}

Mesh read_obj(const std::string& path) { return obj_from_string(read_file(path)); }

std::string obj_to_string(const Mesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 32 + mesh.faces.size() * 16);
  for (const auto& v : mesh.vertices)
    out += "v " + format_sig9(v.x()) + " " + format_sig9(v.y()) + " " + format_sig9(v.z()) +
           "\n";
  for (const auto& f : mesh.faces)
    out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " +
           std::to_string(f[2] + 1) + "\n";
  return out;
}

void write_obj(const Mesh& mesh, const std::string& path) {
  atomic_write(path, obj_to_string(mesh));
}

// --- canonical rig JSON -----------------------------------------------------

namespace {

json vec3_json(const Vec3& v) {
  return json::array({snap_sig9(v.x()), snap_sig9(v.y()), snap_sig9(v.z())});
}

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw_data("rig json: expected 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

RigFile rig_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_data(std::string("rig json: parse error: ") + e.what());
  }
  RigFile rig;
  try {
    rig.version = j.value("version", 1);
    if (rig.version != 1) throw_data("rig json: unsupported version");
    for (const auto& joint : j.at("joints")) {
      if (!joint.is_object()) throw_data("rig json: joint must be {name, position}");
      rig.skeleton.joints.push_back(vec3_from_json(joint.at("position")));
      rig.joint_names.push_back(joint.value("name", "joint_" + std::to_string(
                                                            rig.joint_names.size())));
    }
    for (const auto& bone : j.at("bones")) {
      if (!bone.is_array() || bone.size() != 2) throw_data("rig json: malformed bone");
      rig.skeleton.bones.emplace_back(bone[0].get<int>(), bone[1].get<int>());
    }
    if (j.contains("root") && !j["root"].is_null()) rig.skeleton.root = j["root"].get<int>();
    if (j.contains("parent"))
      for (auto it = j["parent"].begin(); it != j["parent"].end(); ++it)
        rig.skeleton.parent[std::stoi(it.key())] = it.value().get<int>();
    if (j.contains("skin") && !j["skin"].is_null()) {
      const auto& rows = j["skin"];
      Mat skin(rows.size(), rig.skeleton.joints.size());
      for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rig.skeleton.joints.size())
          throw_data("rig json: skin row width != joint count");
        for (size_t c = 0; c < rows[r].size(); ++c) skin(r, c) = rows[r][c].get<double>();
      }
      rig.skin = std::move(skin);
    }
    if (j.contains("normalization") && !j["normalization"].is_null()) {
      NormalizationTransform t;
      t.translate = vec3_from_json(j["normalization"].at("translate"));
      t.scale = j["normalization"].at("scale").get<double>();
      rig.normalization = t;
    }
    rig.prior = j.value("prior", false);
  } catch (const json::exception& e) {
    throw_data(std::string("rig json: ") + e.what());
  }
  rig.skeleton.validate();
  return rig;
}

std::string rig_to_json(const RigFile& rig) {
  json j;
  j["version"] = rig.version;
  j["joints"] = json::array();
  for (size_t i = 0; i < rig.skeleton.joints.size(); ++i) {
    json joint;
    joint["name"] = i < rig.joint_names.size() ? rig.joint_names[i]
                                               : "joint_" + std::to_string(i);
    joint["position"] = vec3_json(rig.skeleton.joints[i]);
    j["joints"].push_back(joint);
  }
  j["bones"] = json::array();
  for (const auto& [a, b] : rig.skeleton.bones) j["bones"].push_back(json::array({a, b}));
  if (rig.skeleton.root)
    j["root"] = *rig.skeleton.root;
  else
    j["root"] = nullptr;
  if (!rig.skeleton.parent.empty()) {
    json p = json::object();
    for (const auto& [c, par] : rig.skeleton.parent) p[std::to_string(c)] = par;
    j["parent"] = p;
  }
  if (rig.skin) {
    json rows = json::array();
    for (int r = 0; r < rig.skin->rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < rig.skin->cols(); ++c) row.push_back(snap_sig9((*rig.skin)(r, c)));
      rows.push_back(row);
    }
    j["skin"] = rows;
  }
  if (rig.normalization) {
    j["normalization"]["translate"] = vec3_json(rig.normalization->translate);
    j["normalization"]["scale"] = snap_sig9(rig.normalization->scale);
  }
  j["prior"] = rig.prior;
  return j.dump(2) + "\n";
}

RigFile rig_from_text(const std::string& text) {
  RigFile rig;
  std::map<std::string, int> index_of;
  std::map<int, std::map<std::string, double>> skin_rows;
  std::optional<std::string> root_name;
  std::vector<std::pair<std::string, std::string>> hier;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "joints") {
      std::string name;
      double x, y, z;
      if (!(ls >> name >> x >> y >> z))
        throw_data("rig text line " + std::to_string(lineno) + ": malformed joint");
      if (index_of.count(name))
        throw_data("rig text line " + std::to_string(lineno) + ": duplicate joint " + name);
      index_of[name] = static_cast<int>(rig.skeleton.joints.size());
      rig.skeleton.joints.emplace_back(x, y, z);
      rig.joint_names.push_back(name);
    } else if (tag == "root") {
      std::string name;
      if (!(ls >> name))
        throw_data("rig text line " + std::to_string(lineno) + ": malformed root");
      root_name = name;
    } else if (tag == "hier") {
      std::string p, c;
      if (!(ls >> p >> c))
        throw_data("rig text line " + std::to_string(lineno) + ": malformed hier");
      hier.emplace_back(p, c);
    } else if (tag == "skin") {
      int vi;
      if (!(ls >> vi))
        throw_data("rig text line " + std::to_string(lineno) + ": malformed skin record");
      std::string name;
      double w;
      while (ls >> name >> w) skin_rows[vi][name] = w;
    } else {
      throw_data("rig text line " + std::to_string(lineno) + ": unknown record " + tag);
    }
  }
  auto joint_index = [&](const std::string& name) {
    auto it = index_of.find(name);
    if (it == index_of.end()) throw_data("rig text: unknown joint " + name);
    return it->second;
  };
  for (const auto& [p, c] : hier) {
    int pi = joint_index(p), ci = joint_index(c);
    rig.skeleton.bones.emplace_back(pi, ci);
    rig.skeleton.parent[ci] = pi;
  }
  if (root_name) rig.skeleton.root = joint_index(*root_name);
  if (!skin_rows.empty()) {
    int rows = skin_rows.rbegin()->first + 1;
    Mat skin = Mat::Zero(rows, rig.skeleton.joints.size());
    for (const auto& [vi, row] : skin_rows) {
      if (vi < 0) throw_data("rig text: negative skin vertex index");
      for (const auto& [name, w] : row) skin(vi, joint_index(name)) = w;
    }
    rig.skin = std::move(skin);
  }
  rig.skeleton.validate();
  return rig;
}

RigFile read_rig(const std::string& path) {
  std::string text = read_file(path);
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return rig_from_json(text);
  return rig_from_text(text);
}

void write_rig(const RigFile& rig, const std::string& path) {
  atomic_write(path, rig_to_json(rig));
}

// --- point cloud text format ------------------------------------------------

std::string points_to_string(const PointCloud& pc) {
  std::string out;
  out.reserve(pc.points.size() * 64);
  for (size_t i = 0; i < pc.points.size(); ++i) {
    const Vec3& p = pc.points[i];
    const Vec3& n = pc.normals[i];
    out += format_sig9(p.x()) + " " + format_sig9(p.y()) + " " + format_sig9(p.z()) + " " +
           format_sig9(n.x()) + " " + format_sig9(n.y()) + " " + format_sig9(n.z()) + " " +
           std::to_string(pc.source_vertex[i]) + "\n";
  }
  return out;
}

PointCloud points_from_string(const std::string& text) {
  PointCloud pc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    double px, py, pz, nx, ny, nz;
    int sv;
    if (!(ls >> px >> py >> pz >> nx >> ny >> nz >> sv))
      throw_data("points line " + std::to_string(lineno) + ": expected 7 fields");
    pc.points.emplace_back(px, py, pz);
    pc.normals.emplace_back(nx, ny, nz);
    pc.source_vertex.push_back(sv);
  }
  return pc;
}

// --- checkpoints ------------------------------------------------------------

namespace {

json params_to_json(const ad::ParamSet& params) {
  json out = json::object();
  for (const auto& [name, node] : params.all()) {
    json entry;
    entry["rows"] = node->val.rows();
    entry["cols"] = node->val.cols();
    json data = json::array();
    for (int r = 0; r < node->val.rows(); ++r)
      for (int c = 0; c < node->val.cols(); ++c) data.push_back(node->val(r, c));
    entry["data"] = std::move(data);
    out[name] = std::move(entry);
  }
  return out;
}

void params_from_json(ad::ParamSet& params, const json& j) {
  for (const auto& [name, node] : params.all()) {
    if (!j.contains(name)) throw_data("checkpoint: missing parameter " + name);
    const json& entry = j[name];
    int rows = entry.at("rows").get<int>();
    int cols = entry.at("cols").get<int>();
    if (rows != node->val.rows() || cols != node->val.cols())
      throw_data("checkpoint: shape mismatch for " + name);
    const json& data = entry.at("data");
    if (static_cast<int>(data.size()) != rows * cols)
      throw_data("checkpoint: data size mismatch for " + name);
    int k = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) node->val(r, c) = data[k++].get<double>();
  }
  if (j.size() != params.all().size()) throw_data("checkpoint: unexpected extra parameters");
}

}  // namespace

std::string seq_model_to_json(const SeqModel& model) {
  json j;
  j["kind"] = "skeleton_sequence_model";
  j["config"] = {{"vocab", model.cfg.vocab},
                 {"layers", model.cfg.layers},
                 {"heads", model.cfg.heads},
                 {"width", model.cfg.width},
                 {"context", model.cfg.context},
                 {"shape_groups", model.cfg.shape_groups},
                 {"encoder_hidden", model.cfg.encoder_hidden},
                 {"mlp_mult", model.cfg.mlp_mult},
                 {"n_points", model.cfg.n_points}};
  j["params"] = params_to_json(model.params);
  return j.dump() + "\n";
}

SeqModel seq_model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_data(std::string("checkpoint: parse error: ") + e.what());
  }
  if (j.value("kind", "") != "skeleton_sequence_model")
    throw_data("checkpoint: not a skeleton sequence model");
  SeqModel model;
  try {
    const json& c = j.at("config");
    model.cfg.vocab = c.at("vocab").get<int>();
    model.cfg.layers = c.at("layers").get<int>();
    model.cfg.heads = c.at("heads").get<int>();
    model.cfg.width = c.at("width").get<int>();
    model.cfg.context = c.at("context").get<int>();
    model.cfg.shape_groups = c.at("shape_groups").get<int>();
    model.cfg.encoder_hidden = c.at("encoder_hidden").get<int>();
    model.cfg.mlp_mult = c.at("mlp_mult").get<int>();
    model.cfg.n_points = c.at("n_points").get<int>();
    model.init(0);
    params_from_json(model.params, j.at("params"));
  } catch (const json::exception& e) {
    throw_data(std::string("checkpoint: ") + e.what());
  }
  return model;
}

std::string denoiser_to_json(const Denoiser& model) {
  json j;
  j["kind"] = "skin_denoiser";
  j["config"] = {{"n_joints", model.cfg.n_joints},
                 {"width", model.cfg.width},
                 {"stages", model.cfg.stages},
                 {"subset", model.cfg.subset},
                 {"latents", model.cfg.latents},
                 {"heads", model.cfg.heads},
                 {"time_freqs", model.cfg.time_freqs},
                 {"shape_feature_dim", model.cfg.shape_feature_dim}};
  j["params"] = params_to_json(model.params);
  return j.dump() + "\n";
}

Denoiser denoiser_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_data(std::string("checkpoint: parse error: ") + e.what());
  }
  if (j.value("kind", "") != "skin_denoiser") throw_data("checkpoint: not a skin denoiser");
  Denoiser model;
  try {
    const json& c = j.at("config");
    model.cfg.n_joints = c.at("n_joints").get<int>();
    model.cfg.width = c.at("width").get<int>();
    model.cfg.stages = c.at("stages").get<int>();
    model.cfg.subset = c.at("subset").get<int>();
    model.cfg.latents = c.at("latents").get<int>();
    model.cfg.heads = c.at("heads").get<int>();
    model.cfg.time_freqs = c.at("time_freqs").get<int>();
    model.cfg.shape_feature_dim = c.at("shape_feature_dim").get<int>();
    model.init(0);
    params_from_json(model.params, j.at("params"));
  } catch (const json::exception& e) {
    throw_data(std::string("checkpoint: ") + e.what());
  }
  return model;
}

// --- pipeline configuration -------------------------------------------------

void PipelineConfig::validate() const {
  if (quantization_bins != 128) throw_data("config: quantization_bins must be 128");
  if (sample_count < 1) throw_data("config: sample_count must be positive");
  if (shape_groups < 1 || shape_groups > sample_count)
    throw_data("config: shape_groups must be in [1, sample_count]");
  if (max_joints < 1 || max_joints > 128) throw_data("config: max_joints out of range");
  if (diffusion_timesteps < 2) throw_data("config: diffusion_timesteps must be >= 2");
  if (inference_steps < 2 || inference_steps > diffusion_timesteps)
    throw_data("config: inference_steps must be in [2, diffusion_timesteps]");
  if (beta_start <= 0 || beta_end <= beta_start || beta_end >= 1)
    throw_data("config: betas must satisfy 0 < beta_start < beta_end < 1");
  if (voxel_resolution < 8) throw_data("config: voxel_resolution must be >= 8");
  if (metric_samples_per_bone < 2) throw_data("config: metric_samples_per_bone must be >= 2");
  if (prior_sharpness <= 0) throw_data("config: prior_sharpness must be positive");
  if (seq_layers < 1 || seq_heads < 1 || seq_width < seq_heads ||
      seq_width % seq_heads != 0)
    throw_data("config: sequence model sizes invalid");
  if (denoiser_stages < 1 || denoiser_width < 1) throw_data("config: denoiser sizes invalid");
}

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_data(std::string("config: parse error: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    cfg.quantization_bins = j.value("quantization_bins", cfg.quantization_bins);
    cfg.sample_count = j.value("sample_count", cfg.sample_count);
    cfg.shape_groups = j.value("shape_groups", cfg.shape_groups);
    cfg.max_joints = j.value("max_joints", cfg.max_joints);
    cfg.diffusion_timesteps = j.value("diffusion_timesteps", cfg.diffusion_timesteps);
    cfg.inference_steps = j.value("inference_steps", cfg.inference_steps);
    cfg.beta_start = j.value("beta_start", cfg.beta_start);
    cfg.beta_end = j.value("beta_end", cfg.beta_end);
    cfg.voxel_resolution = j.value("voxel_resolution", cfg.voxel_resolution);
    cfg.metric_samples_per_bone = j.value("metric_samples_per_bone", cfg.metric_samples_per_bone);
    cfg.prior_sharpness = j.value("prior_sharpness", cfg.prior_sharpness);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.seq_layers = j.value("seq_layers", cfg.seq_layers);
    cfg.seq_heads = j.value("seq_heads", cfg.seq_heads);
    cfg.seq_width = j.value("seq_width", cfg.seq_width);
    cfg.denoiser_stages = j.value("denoiser_stages", cfg.denoiser_stages);
    cfg.denoiser_width = j.value("denoiser_width", cfg.denoiser_width);
  } catch (const json::exception& e) {
    throw_data(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j;
  j["quantization_bins"] = cfg.quantization_bins;
  j["sample_count"] = cfg.sample_count;
  j["shape_groups"] = cfg.shape_groups;
  j["max_joints"] = cfg.max_joints;
  j["diffusion_timesteps"] = cfg.diffusion_timesteps;
  j["inference_steps"] = cfg.inference_steps;
  j["beta_start"] = snap_sig9(cfg.beta_start);
  j["beta_end"] = snap_sig9(cfg.beta_end);
  j["voxel_resolution"] = cfg.voxel_resolution;
  j["metric_samples_per_bone"] = cfg.metric_samples_per_bone;
  j["prior_sharpness"] = snap_sig9(cfg.prior_sharpness);
  j["seed"] = cfg.seed;
  j["seq_layers"] = cfg.seq_layers;
  j["seq_heads"] = cfg.seq_heads;
  j["seq_width"] = cfg.seq_width;
  j["denoiser_stages"] = cfg.denoiser_stages;
  j["denoiser_width"] = cfg.denoiser_width;
  return j.dump(2) + "\n";
}

// --- reports ----------------------------------------------------------------

std::string skeleton_report_json(const SkeletonReport& r) {
  json j;
  j["cd_b2b"] = snap_sig9(r.cd_b2b);
  j["cd_j2b"] = snap_sig9(r.cd_j2b);
  j["cd_j2j"] = snap_sig9(r.cd_j2j);
  return j.dump(2) + "\n";
}

std::string skeleton_report_table(const SkeletonReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "metric     value (x 1e-2)\n"
                "cd_j2j     %10.4f\n"
                "cd_j2b     %10.4f\n"
                "cd_b2b     %10.4f\n",
                r.cd_j2j * 1e2, r.cd_j2b * 1e2, r.cd_b2b * 1e2);
  return buf;
}

std::string skin_report_json(const SkinReport& r) {
  json j;
  j["avg_dist"] = snap_sig9(r.avg_dist);
  j["avg_l1"] = snap_sig9(r.avg_l1);
  j["precision"] = snap_sig9(r.precision);
  j["precision_undefined"] = r.precision_undefined;
  j["recall"] = snap_sig9(r.recall);
  j["recall_undefined"] = r.recall_undefined;
  return j.dump(2) + "\n";
}

std::string skin_report_table(const SkinReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "metric      value\n"
                "precision   %8.4f%s\n"
                "recall      %8.4f%s\n"
                "avg_l1      %8.4f\n"
                "avg_dist    %10.4f (x 1e-2)\n",
                r.precision, r.precision_undefined ? " (undefined: empty set)" : "", r.recall,
                r.recall_undefined ? " (undefined: empty set)" : "", r.avg_l1,
                r.avg_dist * 1e2);
  return buf;
}

}  // namespace arti
