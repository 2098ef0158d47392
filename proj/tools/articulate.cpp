#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "arti/animation.hpp"
#include "arti/error.hpp"
#include "arti/geodesic.hpp"
#include "arti/geometry.hpp"
#include "arti/metrics.hpp"
#include "arti/rigio.hpp"
#include "arti/seqmodel.hpp"
#include "arti/sequencer.hpp"
#include "arti/skindiff.hpp"
#include "arti/synthgen.hpp"

namespace fs = std::filesystem;
using namespace arti;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string ordering = "spatial";
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
  bool json_errors = false;

  PipelineConfig config() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = config_from_json(read_file(config_path));
    if (seed_set) cfg.seed = seed;
    return cfg;
  }
  OrderingMode mode() const {
    if (ordering == "spatial") return OrderingMode::spatial;
    if (ordering == "hierarchical") return OrderingMode::hierarchical;
    throw_usage("--ordering must be spatial or hierarchical");
  }
};

void emit(const GlobalOpts& g, const std::string& content) {
  if (g.out.empty())
    std::cout << content;
  else
    atomic_write(g.out, content);
}

// --- corpus loading ---------------------------------------------------------

struct CorpusAsset {
  std::string id;
  Mesh mesh;
  RigFile rig;
  PointCloud points;
  TokenSequence spatial_tokens;
  TokenSequence hier_tokens;
};

std::vector<CorpusAsset> load_corpus(const std::string& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("corpus manifest: ") + e.what());
  }
  std::vector<CorpusAsset> out;
  for (const auto& entry : manifest.at("assets")) {
    CorpusAsset a;
    a.id = entry.at("id").get<std::string>();
    fs::path base(dir);
    a.mesh = read_obj((base / (a.id + ".obj")).string());
    a.rig = read_rig((base / (a.id + ".rig.json")).string());
    a.points = points_from_string(read_file((base / (a.id + ".points.txt")).string()));
    a.spatial_tokens = tokens_from_line(read_file((base / (a.id + ".spatial.tokens")).string()),
                                        OrderingMode::spatial);
    a.hier_tokens = tokens_from_line(read_file((base / (a.id + ".hier.tokens")).string()),
                                     OrderingMode::hierarchical);
    out.push_back(std::move(a));
  }
  if (out.empty()) throw_data("corpus is empty: " + dir);
  return out;
}

Mat points_matrix(const PointCloud& pc) {
  Mat m(pc.points.size(), 3);
  for (size_t i = 0; i < pc.points.size(); ++i) m.row(i) = pc.points[i].transpose();
  return m;
}

Mat pad_cols(const Mat& m, int n) {
  if (m.cols() > n) throw_data("joint count exceeds configured maximum");
  Mat out = Mat::Zero(m.rows(), n);
  out.leftCols(m.cols()) = m;
  return out;
}

SkinCondition make_condition(const Skeleton& skeleton, int n_joints, const Mat& shape_feature) {
  SkinCondition cond;
  cond.joints.assign(n_joints, Vec3::Zero());
  cond.joint_mask.assign(n_joints, false);
  if (static_cast<int>(skeleton.joints.size()) > n_joints)
    throw_data("joint count exceeds configured maximum");
  for (size_t i = 0; i < skeleton.joints.size(); ++i) {
    cond.joints[i] = skeleton.joints[i];
    cond.joint_mask[i] = true;
  }
  cond.shape_feature = shape_feature;
  return cond;
}

SeqModel seq_model_for(const PipelineConfig& cfg) {
  SeqModel model;
  model.cfg.layers = cfg.seq_layers;
  model.cfg.heads = cfg.seq_heads;
  model.cfg.width = cfg.seq_width;
  model.cfg.shape_groups = cfg.shape_groups;
  model.cfg.n_points = cfg.sample_count;
  model.cfg.context = cfg.shape_groups + 1 + 6 * 100 + 2 + 16;
  return model;
}

// Frozen global shape feature for skin conditioning: mean over the sequence
// model's shape tokens. Falls back to a deterministically initialized encoder
// when no checkpoint is given.
Mat shape_feature_for(const PointCloud& pc, const std::string& shape_ckpt,
                      const PipelineConfig& cfg) {
  SeqModel enc;
  if (!shape_ckpt.empty()) {
    enc = seq_model_from_json(read_file(shape_ckpt));
  } else {
    enc = seq_model_for(cfg);
    enc.init(0);
  }
  Mat tokens = enc.encode_shape_values(pc);
  Mat feature = tokens.colwise().mean();
  return feature;
}

GeodesicPrior prior_for(const Mesh& mesh, const Skeleton& skeleton, int resolution,
                        double sharpness) {
  VoxelGrid grid = voxelize(mesh, resolution);
  Mat raw = volumetric_geodesic(grid, mesh, skeleton);
  std::vector<bool> mask(skeleton.joints.size(), true);
  return build_prior(raw, mask, sharpness, grid.cell_size(), mesh.vertices, skeleton.joints);
}

// --- subcommand bodies ------------------------------------------------------

int run_synth_gen(const GlobalOpts& g, int count, const std::string& topologies, int min_joints,
                  int max_joints, int points) {
  PipelineConfig cfg = g.config();
  if (g.out.empty()) throw_usage("synth-gen requires --out <dir>");
  if (count < 1) throw_usage("--count must be positive");
  std::vector<Topology> cycle;
  {
    std::istringstream ss(topologies);
    std::string name;
    while (std::getline(ss, name, ',')) cycle.push_back(topology_from_name(name));
  }
  if (cycle.empty()) throw_usage("--topology list is empty");
  std::vector<SynthSpec> specs;
  for (int i = 0; i < count; ++i) {
    SynthSpec s;
    s.topology = cycle[i % cycle.size()];
    s.min_joints = min_joints;
    s.max_joints = max_joints;
    s.seed = cfg.seed + i;
    specs.push_back(s);
  }
  int pts = points > 0 ? points : cfg.sample_count;
  std::string manifest = build_corpus(specs, g.out, pts, cfg.seed);
  std::cerr << "wrote " << count << " assets; manifest " << manifest << "\n";
  return 0;
}

int run_normalize(const GlobalOpts& g, const std::string& mesh_path,
                  const std::string& rig_path) {
  if (g.out.empty()) throw_usage("normalize requires --out <prefix>");
  Mesh mesh = read_obj(mesh_path);
  std::optional<Skeleton> skeleton;
  RigFile rig;
  if (!rig_path.empty()) {
    rig = read_rig(rig_path);
    skeleton = rig.skeleton;
  }
  NormalizedScene scene = normalize_to_unit_cube(mesh, skeleton);
  write_obj(scene.mesh, g.out + ".obj");
  if (scene.skeleton) {
    rig.skeleton = *scene.skeleton;
    rig.normalization = scene.transform;
    write_rig(rig, g.out + ".rig.json");
  } else {
    RigFile t;
    t.normalization = scene.transform;
    // no skeleton: record the transform alone
    nlohmann::json j;
    j["version"] = 1;
    j["normalization"]["scale"] = snap_sig9(scene.transform.scale);
    j["normalization"]["translate"] = {snap_sig9(scene.transform.translate.x()),
                                       snap_sig9(scene.transform.translate.y()),
                                       snap_sig9(scene.transform.translate.z())};
    atomic_write(g.out + ".transform.json", j.dump(2) + "\n");
  }
  return 0;
}

int run_tokenize(const GlobalOpts& g, const std::string& rig_path) {
  RigFile rig = read_rig(rig_path);
  TokenSequence seq = tokenize(rig.skeleton, g.mode());
  emit(g, tokens_to_line(seq) + "\n");
  return 0;
}

int run_detokenize(const GlobalOpts& g, const std::string& tokens_path) {
  std::string text = read_file(tokens_path);
  size_t eol = text.find('\n');
  TokenSequence seq = tokens_from_line(eol == std::string::npos ? text : text.substr(0, eol),
                                       g.mode());
  DetokenizeResult res = detokenize(seq);
  if (res.dropped_partial_bone) std::cerr << "note: dropped trailing partial bone\n";
  if (res.prefix_violation) std::cerr << "note: repaired prefix-order violation\n";
  if (res.dropped_degenerate) std::cerr << "note: dropped degenerate/duplicate bones\n";
  RigFile rig;
  rig.skeleton = res.skeleton;
  emit(g, rig_to_json(rig));
  return 0;
}

int run_train_skeleton(const GlobalOpts& g, const std::string& corpus_dir, int steps, int batch,
                       double lr, bool augment, int log_every) {
  PipelineConfig cfg = g.config();
  if (g.out.empty()) throw_usage("train-skeleton requires --out <checkpoint>");
  auto corpus = load_corpus(corpus_dir);
  OrderingMode mode = g.mode();

  SeqModel model = seq_model_for(cfg);
  model.init(cfg.seed);
  std::vector<SeqSample> samples;
  for (const auto& a : corpus) {
    SeqSample s;
    s.points = points_matrix(a.points);
    s.tokens = (mode == OrderingMode::spatial ? a.spatial_tokens : a.hier_tokens).tokens;
    samples.push_back(std::move(s));
  }

  TrainingConfig tc;
  tc.learning_rate = lr;
  tc.batch_size = batch;
  tc.steps = steps;
  tc.seed = cfg.seed;
  tc.augment_scale = tc.augment_shift = tc.augment_rotate = augment;

  ad::Adam opt;
  opt.lr = lr;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);
  for (int step = 0; step < steps; ++step) {
    std::vector<SeqSample> b;
    for (int k = 0; k < batch; ++k) {
      size_t i = pick(rng);
      if (augment) {
        const auto& a = corpus[i];
        auto [mesh, skel] = augment_scene(a.mesh, a.rig.skeleton, tc, rng);
        SeqSample s;
        s.points = points_matrix(sample_surface(mesh, static_cast<int>(a.points.points.size()),
                                                rng()));
        s.tokens = tokenize(skel, mode).tokens;
        b.push_back(std::move(s));
      } else {
        b.push_back(samples[i]);
      }
    }
    double loss = model.training_step(b, opt);
    if (!std::isfinite(loss)) throw_numeric("training loss is not finite");
    if (step % log_every == 0 || step + 1 == steps)
      std::cerr << "step " << step << " loss " << loss << "\n";
  }
  double acc = model.teacher_forced_accuracy(samples);
  std::cerr << "teacher-forced accuracy " << acc << "\n";
  atomic_write(g.out, seq_model_to_json(model));
  return 0;
}

int run_gen_skeleton(const GlobalOpts& g, const std::string& mesh_path,
                     const std::string& ckpt_path, double temperature) {
  PipelineConfig cfg = g.config();
  Mesh mesh = read_obj(mesh_path);
  NormalizedScene scene = normalize_to_unit_cube(mesh);
  PointCloud pc = sample_surface(scene.mesh, cfg.sample_count, cfg.seed);
  SeqModel model = seq_model_from_json(read_file(ckpt_path));
  SamplingConfig sc;
  sc.temperature = temperature;
  sc.seed = cfg.seed;
  SampleResult res = model.sample_skeleton(points_matrix(pc), sc, g.mode());
  if (res.truncated) std::cerr << "note: sampling truncated at the token budget\n";
  DetokenizeResult det = detokenize(res.sequence);
  det.skeleton.validate();
  RigFile rig;
  rig.skeleton = det.skeleton;
  rig.normalization = scene.transform;
  emit(g, rig_to_json(rig));
  return 0;
}

int run_geodesic(const GlobalOpts& g, const std::string& mesh_path, const std::string& rig_path,
                 int resolution) {
  PipelineConfig cfg = g.config();
  Mesh mesh = read_obj(mesh_path);
  RigFile rig = read_rig(rig_path);
  int res = resolution > 0 ? resolution : cfg.voxel_resolution;
  GeodesicPrior prior = prior_for(mesh, rig.skeleton, res, cfg.prior_sharpness);
  if (!prior.fallback_vertices.empty())
    std::cerr << "note: " << prior.fallback_vertices.size()
              << " vertices fell back to Euclidean distances\n";
  rig.skin = prior.weights;
  rig.prior = true;
  emit(g, rig_to_json(rig));
  return 0;
}

int run_gvb(const GlobalOpts& g, const std::string& mesh_path, const std::string& rig_path,
            int resolution, int k_nearest) {
  PipelineConfig cfg = g.config();
  Mesh mesh = read_obj(mesh_path);
  RigFile rig = read_rig(rig_path);
  int res = resolution > 0 ? resolution : cfg.voxel_resolution;
  GeodesicPrior prior = prior_for(mesh, rig.skeleton, res, cfg.prior_sharpness);
  rig.skin = gvb_baseline(prior, k_nearest);
  rig.prior = false;
  emit(g, rig_to_json(rig));
  return 0;
}

int run_train_skin(const GlobalOpts& g, const std::string& corpus_dir, int steps, int batch,
                   double lr, const std::string& shape_ckpt, int resolution, int log_every) {
  PipelineConfig cfg = g.config();
  if (g.out.empty()) throw_usage("train-skin requires --out <checkpoint>");
  auto corpus = load_corpus(corpus_dir);
  int res = resolution > 0 ? resolution : cfg.voxel_resolution;

  Denoiser model;
  model.cfg.n_joints = cfg.max_joints;
  model.cfg.width = cfg.denoiser_width;
  model.cfg.stages = cfg.denoiser_stages;
  model.cfg.shape_feature_dim = cfg.seq_width;
  model.init(cfg.seed);

  std::vector<SkinTrainItem> items;
  for (const auto& a : corpus) {
    if (!a.rig.skin) throw_data("corpus asset " + a.id + " has no skinning weights");
    GeodesicPrior prior = prior_for(a.mesh, a.rig.skeleton, res, cfg.prior_sharpness);
    Mat point_weights = nearest_vertex_transfer(a.points, *a.rig.skin);
    Mat point_prior = nearest_vertex_transfer(a.points, prior.weights);
    SkinTrainItem item;
    item.points = points_matrix(a.points);
    item.f0 = pad_cols(2.0 * (point_weights - point_prior), cfg.max_joints);
    item.cond = make_condition(a.rig.skeleton, cfg.max_joints,
                               shape_feature_for(a.points, shape_ckpt, cfg));
    items.push_back(std::move(item));
  }

  NoiseSchedule schedule =
      NoiseSchedule::linear(cfg.diffusion_timesteps, cfg.beta_start, cfg.beta_end);
  ad::Adam opt;
  opt.lr = lr;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, items.size() - 1);
  for (int step = 0; step < steps; ++step) {
    std::vector<SkinTrainItem> b;
    for (int k = 0; k < batch; ++k) b.push_back(items[pick(rng)]);
    double loss = training_step_skin(model, b, schedule, opt, rng);
    if (!std::isfinite(loss)) throw_numeric("training loss is not finite");
    if (step % log_every == 0 || step + 1 == steps)
      std::cerr << "step " << step << " loss " << loss << "\n";
  }
  atomic_write(g.out, denoiser_to_json(model));
  return 0;
}

int run_predict_skin(const GlobalOpts& g, const std::string& mesh_path,
                     const std::string& rig_path, const std::string& ckpt_path,
                     const std::string& shape_ckpt, int resolution, int steps) {
  PipelineConfig cfg = g.config();
  Mesh mesh = read_obj(mesh_path);
  RigFile rig = read_rig(rig_path);
  int res = resolution > 0 ? resolution : cfg.voxel_resolution;
  int n_steps = steps > 0 ? steps : cfg.inference_steps;
  Denoiser model = denoiser_from_json(read_file(ckpt_path));

  PointCloud pc = sample_surface(mesh, cfg.sample_count, cfg.seed);
  GeodesicPrior prior = prior_for(mesh, rig.skeleton, res, cfg.prior_sharpness);
  Mat point_prior = pad_cols(nearest_vertex_transfer(pc, prior.weights), model.cfg.n_joints);
  SkinCondition cond =
      make_condition(rig.skeleton, model.cfg.n_joints, shape_feature_for(pc, shape_ckpt, cfg));
  NoiseSchedule schedule =
      NoiseSchedule::linear(cfg.diffusion_timesteps, cfg.beta_start, cfg.beta_end);
  Mat point_weights =
      sample_skin(model, points_matrix(pc), cond, point_prior, schedule, n_steps, cfg.seed);
  Mat vertex_weights = vertex_weights_from_points(point_weights, pc, mesh);
  rig.skin = vertex_weights.leftCols(rig.skeleton.joints.size()).eval();
  // renormalize after dropping the padded columns
  for (int r = 0; r < rig.skin->rows(); ++r) {
    double s = rig.skin->row(r).sum();
    if (s > 0)
      rig.skin->row(r) /= s;
    else
      rig.skin->row(r).setConstant(1.0 / rig.skin->cols());
  }
  rig.prior = false;
  emit(g, rig_to_json(rig));
  return 0;
}

int run_deform(const GlobalOpts& g, const std::string& mesh_path, const std::string& rig_path,
               int poses, double angle) {
  PipelineConfig cfg = g.config();
  if (g.out.empty()) throw_usage("deform requires --out <dir>");
  Mesh mesh = read_obj(mesh_path);
  RigFile rig = read_rig(rig_path);
  if (!rig.skin) throw_data("deform: rig has no skinning weights");
  RiggedAsset asset;
  asset.mesh = mesh;
  asset.skeleton = rig.skeleton;
  asset.skin = *rig.skin;
  asset.validate();
  auto pose_list = random_poses(rig.skeleton, poses, angle, cfg.seed);
  fs::create_directories(g.out);
  for (size_t i = 0; i < pose_list.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "pose_%03zu.obj", i);
    write_obj(lbs_deform(asset, pose_list[i]), (fs::path(g.out) / name).string());
  }
  return 0;
}

int run_eval_skeleton(const GlobalOpts& g, const std::string& pred_path,
                      const std::string& truth_path, bool table) {
  PipelineConfig cfg = g.config();
  Skeleton pred = read_rig(pred_path).skeleton;
  Skeleton truth = read_rig(truth_path).skeleton;
  SkeletonReport r = evaluate_skeleton(pred, truth, cfg.metric_samples_per_bone);
  emit(g, table ? skeleton_report_table(r) : skeleton_report_json(r));
  return 0;
}

int run_eval_skin(const GlobalOpts& g, const std::string& mesh_path,
                  const std::string& pred_path, const std::string& truth_path, int poses,
                  double angle, double threshold, bool table) {
  PipelineConfig cfg = g.config();
  Mesh mesh = read_obj(mesh_path);
  RigFile pred = read_rig(pred_path);
  RigFile truth = read_rig(truth_path);
  if (!pred.skin || !truth.skin) throw_data("eval-skin: both rigs need skinning weights");
  RiggedAsset pa{mesh, pred.skeleton, *pred.skin, {}};
  RiggedAsset ta{mesh, truth.skeleton, *truth.skin, {}};
  pa.validate();
  ta.validate();
  auto pose_list = random_poses(truth.skeleton, poses, angle, cfg.seed);
  SkinReport r = evaluate_skin(pa, ta, pose_list, threshold);
  emit(g, table ? skin_report_table(r) : skin_report_json(r));
  return 0;
}

int run_pipeline(const GlobalOpts& g, const std::string& mesh_path,
                 const std::string& skeleton_ckpt, const std::string& skin_ckpt,
                 int resolution, int steps, double temperature) {
  PipelineConfig cfg = g.config();
  Mesh raw_mesh = read_obj(mesh_path);
  NormalizedScene scene = normalize_to_unit_cube(raw_mesh);
  int res = resolution > 0 ? resolution : cfg.voxel_resolution;
  int n_steps = steps > 0 ? steps : cfg.inference_steps;

  PointCloud pc = sample_surface(scene.mesh, cfg.sample_count, cfg.seed);
  SeqModel seq = seq_model_from_json(read_file(skeleton_ckpt));
  SamplingConfig sc;
  sc.temperature = temperature;
  sc.seed = cfg.seed;
  SampleResult sampled = seq.sample_skeleton(points_matrix(pc), sc, g.mode());
  if (sampled.truncated) std::cerr << "note: sampling truncated at the token budget\n";
  DetokenizeResult det = detokenize(sampled.sequence);
  det.skeleton.validate();

  Denoiser den = denoiser_from_json(read_file(skin_ckpt));
  GeodesicPrior prior = prior_for(scene.mesh, det.skeleton, res, cfg.prior_sharpness);
  Mat point_prior = pad_cols(nearest_vertex_transfer(pc, prior.weights), den.cfg.n_joints);
  Mat shape_tokens = seq.encode_shape_values(pc);
  Mat feature = shape_tokens.colwise().mean();
  SkinCondition cond = make_condition(det.skeleton, den.cfg.n_joints, feature);
  NoiseSchedule schedule =
      NoiseSchedule::linear(cfg.diffusion_timesteps, cfg.beta_start, cfg.beta_end);
  Mat point_weights =
      sample_skin(den, points_matrix(pc), cond, point_prior, schedule, n_steps, cfg.seed);
  Mat vertex_weights = vertex_weights_from_points(point_weights, pc, scene.mesh);

  RigFile rig;
  rig.skeleton = det.skeleton;
  rig.skin = vertex_weights.leftCols(det.skeleton.joints.size()).eval();
  for (int r = 0; r < rig.skin->rows(); ++r) {
    double s = rig.skin->row(r).sum();
    if (s > 0)
      rig.skin->row(r) /= s;
    else
      rig.skin->row(r).setConstant(1.0 / rig.skin->cols());
  }
  rig.normalization = scene.transform;
  emit(g, rig_to_json(rig));
  return 0;
}

int report_error(const GlobalOpts& g, const Error& e) {
  const char* kind = e.kind() == ErrorKind::usage  ? "usage"
                     : e.kind() == ErrorKind::data ? "data"
                                                   : "numeric";
  if (g.json_errors) {
    nlohmann::json j;
    j["error"]["kind"] = kind;
    j["error"]["message"] = e.what();
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "error (" << kind << "): " << e.what() << "\n";
  }
  switch (e.kind()) {
    case ErrorKind::usage: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"articulate: skeleton and skinning-weight generation toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "pipeline configuration JSON");
  app.add_option("--seed", g.seed, "override the configured seed")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--ordering", g.ordering, "token ordering: spatial|hierarchical")
      ->check(CLI::IsMember({"spatial", "hierarchical"}));
  app.add_option("--out", g.out, "output path (stdout when omitted)");
  app.add_flag("--json-errors", g.json_errors, "emit machine-readable error JSON");

  // synth-gen
  auto* sg = app.add_subcommand("synth-gen", "generate a synthetic rigged corpus");
  int sg_count = 8, sg_min = 4, sg_max = 9, sg_points = 0;
  std::string sg_topo = "chain,star,biped,quadruped";
  sg->add_option("--count", sg_count, "number of assets");
  sg->add_option("--topology", sg_topo, "comma-separated topology cycle");
  sg->add_option("--min-joints", sg_min, "minimum joint count");
  sg->add_option("--max-joints", sg_max, "maximum joint count");
  sg->add_option("--points", sg_points, "surface samples per asset");

  // normalize
  auto* nm = app.add_subcommand("normalize", "normalize a mesh (and rig) to the unit cube");
  std::string nm_mesh, nm_rig;
  nm->add_option("mesh", nm_mesh, "input OBJ")->required();
  nm->add_option("--rig", nm_rig, "rig to normalize along with the mesh");

  // tokenize / detokenize
  auto* tk = app.add_subcommand("tokenize", "rig -> token line");
  std::string tk_rig;
  tk->add_option("rig", tk_rig, "input rig")->required();
  auto* dt = app.add_subcommand("detokenize", "token line -> rig JSON");
  std::string dt_tokens;
  dt->add_option("tokens", dt_tokens, "token line file")->required();

  // train-skeleton
  auto* ts = app.add_subcommand("train-skeleton", "train the skeleton sequence model");
  std::string ts_corpus;
  int ts_steps = 2000, ts_batch = 4, ts_log = 100;
  double ts_lr = 1e-3;
  bool ts_augment = false;
  ts->add_option("--corpus", ts_corpus, "corpus directory")->required();
  ts->add_option("--steps", ts_steps, "training steps");
  ts->add_option("--batch", ts_batch, "batch size");
  ts->add_option("--lr", ts_lr, "learning rate");
  ts->add_option("--log-every", ts_log, "loss log interval");
  ts->add_flag("--augment", ts_augment, "scale/shift/rotation augmentation");

  // gen-skeleton
  auto* gs = app.add_subcommand("gen-skeleton", "sample a skeleton for a mesh");
  std::string gs_mesh, gs_ckpt;
  double gs_temp = 0.0;
  gs->add_option("mesh", gs_mesh, "input OBJ")->required();
  gs->add_option("checkpoint", gs_ckpt, "sequence model checkpoint")->required();
  gs->add_option("--temperature", gs_temp, "sampling temperature (0 = greedy)");

  // geodesic / gvb
  auto* ge = app.add_subcommand("geodesic", "volumetric geodesic prior for a rig");
  std::string ge_mesh, ge_rig;
  int ge_res = 0;
  ge->add_option("mesh", ge_mesh, "input OBJ")->required();
  ge->add_option("rig", ge_rig, "rig with skeleton")->required();
  ge->add_option("--resolution", ge_res, "voxel resolution");
  auto* gv = app.add_subcommand("gvb", "geodesic voxel binding baseline weights");
  std::string gv_mesh, gv_rig;
  int gv_res = 0, gv_k = 5;
  gv->add_option("mesh", gv_mesh, "input OBJ")->required();
  gv->add_option("rig", gv_rig, "rig with skeleton")->required();
  gv->add_option("--resolution", gv_res, "voxel resolution");
  gv->add_option("--k", gv_k, "number of nearest joints kept");

  // train-skin
  auto* tw = app.add_subcommand("train-skin", "train the skinning-weight denoiser");
  std::string tw_corpus, tw_shape;
  int tw_steps = 2000, tw_batch = 2, tw_res = 0, tw_log = 100;
  double tw_lr = 1e-3;
  tw->add_option("--corpus", tw_corpus, "corpus directory")->required();
  tw->add_option("--steps", tw_steps, "training steps");
  tw->add_option("--batch", tw_batch, "batch size");
  tw->add_option("--lr", tw_lr, "learning rate");
  tw->add_option("--shape-ckpt", tw_shape, "sequence checkpoint for shape features");
  tw->add_option("--resolution", tw_res, "voxel resolution for priors");
  tw->add_option("--log-every", tw_log, "loss log interval");

  // predict-skin
  auto* ps = app.add_subcommand("predict-skin", "sample skinning weights for a rig");
  std::string ps_mesh, ps_rig, ps_ckpt, ps_shape;
  int ps_res = 0, ps_steps = 0;
  ps->add_option("mesh", ps_mesh, "input OBJ")->required();
  ps->add_option("rig", ps_rig, "rig with skeleton")->required();
  ps->add_option("checkpoint", ps_ckpt, "denoiser checkpoint")->required();
  ps->add_option("--shape-ckpt", ps_shape, "sequence checkpoint for shape features");
  ps->add_option("--resolution", ps_res, "voxel resolution");
  ps->add_option("--steps", ps_steps, "denoising steps");

  // deform
  auto* df = app.add_subcommand("deform", "deform a rigged mesh under random poses");
  std::string df_mesh, df_rig;
  int df_poses = 4;
  double df_angle = 30.0;
  df->add_option("mesh", df_mesh, "input OBJ")->required();
  df->add_option("rig", df_rig, "rig with skin")->required();
  df->add_option("--poses", df_poses, "number of poses");
  df->add_option("--angle", df_angle, "max rotation angle (degrees)");

  // eval-skeleton / eval-skin
  auto* es = app.add_subcommand("eval-skeleton", "chamfer metrics between two rigs");
  std::string es_pred, es_truth;
  bool es_table = false;
  es->add_option("predicted", es_pred, "predicted rig")->required();
  es->add_option("reference", es_truth, "reference rig")->required();
  es->add_flag("--table", es_table, "human-readable table output");
  auto* ew = app.add_subcommand("eval-skin", "skinning metrics between two rigs");
  std::string ew_mesh, ew_pred, ew_truth;
  int ew_poses = 10;
  double ew_angle = 30.0, ew_thresh = 1e-4;
  bool ew_table = false;
  ew->add_option("mesh", ew_mesh, "shared OBJ")->required();
  ew->add_option("predicted", ew_pred, "predicted rig")->required();
  ew->add_option("reference", ew_truth, "reference rig")->required();
  ew->add_option("--poses", ew_poses, "number of evaluation poses");
  ew->add_option("--angle", ew_angle, "max rotation angle (degrees)");
  ew->add_option("--threshold", ew_thresh, "influence threshold");
  ew->add_flag("--table", ew_table, "human-readable table output");

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "mesh -> rig JSON (skeleton + skin)");
  std::string pl_mesh, pl_skel_ckpt, pl_skin_ckpt;
  int pl_res = 0, pl_steps = 0;
  double pl_temp = 0.0;
  pl->add_option("mesh", pl_mesh, "input OBJ")->required();
  pl->add_option("--skeleton-ckpt", pl_skel_ckpt, "sequence model checkpoint")->required();
  pl->add_option("--skin-ckpt", pl_skin_ckpt, "denoiser checkpoint")->required();
  pl->add_option("--resolution", pl_res, "voxel resolution");
  pl->add_option("--steps", pl_steps, "denoising steps");
  pl->add_option("--temperature", pl_temp, "skeleton sampling temperature");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sg->parsed()) return run_synth_gen(g, sg_count, sg_topo, sg_min, sg_max, sg_points);
    if (nm->parsed()) return run_normalize(g, nm_mesh, nm_rig);
    if (tk->parsed()) return run_tokenize(g, tk_rig);
    if (dt->parsed()) return run_detokenize(g, dt_tokens);
    if (ts->parsed())
      return run_train_skeleton(g, ts_corpus, ts_steps, ts_batch, ts_lr, ts_augment, ts_log);
    if (gs->parsed()) return run_gen_skeleton(g, gs_mesh, gs_ckpt, gs_temp);
    if (ge->parsed()) return run_geodesic(g, ge_mesh, ge_rig, ge_res);
    if (gv->parsed()) return run_gvb(g, gv_mesh, gv_rig, gv_res, gv_k);
    if (tw->parsed())
      return run_train_skin(g, tw_corpus, tw_steps, tw_batch, tw_lr, tw_shape, tw_res, tw_log);
    if (ps->parsed())
      return run_predict_skin(g, ps_mesh, ps_rig, ps_ckpt, ps_shape, ps_res, ps_steps);
    if (df->parsed()) return run_deform(g, df_mesh, df_rig, df_poses, df_angle);
    if (es->parsed()) return run_eval_skeleton(g, es_pred, es_truth, es_table);
    if (ew->parsed())
      return run_eval_skin(g, ew_mesh, ew_pred, ew_truth, ew_poses, ew_angle, ew_thresh,
                           ew_table);
    if (pl->parsed())
      return run_pipeline(g, pl_mesh, pl_skel_ckpt, pl_skin_ckpt, pl_res, pl_steps, pl_temp);
  } catch (const Error& e) {
    return report_error(g, e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
