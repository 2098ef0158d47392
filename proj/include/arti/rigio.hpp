#pragma once

#include <optional>
#include <string>

#include "arti/geometry.hpp"
#include "arti/metrics.hpp"
#include "arti/seqmodel.hpp"
#include "arti/skindiff.hpp"

namespace arti {

// --- low-level helpers ------------------------------------------------------

// Fixed 9-significant-digit float formatting keeps emission byte-stable.
std::string format_sig9(double v);
double snap_sig9(double v);

uint64_t fnv1a(const std::string& bytes);
std::string read_file(const std::string& path);
// write-to-temp + atomic rename; no partial files on error
void atomic_write(const std::string& path, const std::string& content);

// --- OBJ --------------------------------------------------------------------

// v/f records only; everything else is ignored. Faces are 1-based and may
// carry /vt/vn suffixes, which are stripped.
Mesh obj_from_string(const std::string& text);
Mesh read_obj(const std::string& path);
std::string obj_to_string(const Mesh& mesh);
void write_obj(const Mesh& mesh, const std::string& path);

// --- canonical rig JSON -----------------------------------------------------

struct RigFile {
  int version = 1;
  Skeleton skeleton;
  std::vector<std::string> joint_names;  // optional; defaults to joint_<i>
  std::optional<Mat> skin;               // v x n row-major
  std::optional<NormalizationTransform> normalization;
  bool prior = false;  // skin holds a geodesic prior rather than weights
};

RigFile rig_from_json(const std::string& text);
std::string rig_to_json(const RigFile& rig);  // sorted keys, sig9 floats
// Import shim for simple line-based rigs:
//   joints <name> <x> <y> <z> / root <name> / hier <parent> <child>
//   skin <vertex> <joint-name> <weight> [...]
RigFile rig_from_text(const std::string& text);
// Dispatches on content: '{' -> JSON, otherwise the line-based shim.
RigFile read_rig(const std::string& path);
void write_rig(const RigFile& rig, const std::string& path);

// --- point cloud text format ------------------------------------------------

std::string points_to_string(const PointCloud& pc);
PointCloud points_from_string(const std::string& text);

// --- checkpoints ------------------------------------------------------------

std::string seq_model_to_json(const SeqModel& model);
SeqModel seq_model_from_json(const std::string& text);
std::string denoiser_to_json(const Denoiser& model);
Denoiser denoiser_from_json(const std::string& text);

// --- pipeline configuration -------------------------------------------------

struct PipelineConfig {
  int quantization_bins = 128;
  int sample_count = 8192;
  int shape_groups = 256;  // shape tokens = groups + 1
  int max_joints = 55;
  int diffusion_timesteps = 1000;
  int inference_steps = 25;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int voxel_resolution = 64;
  int metric_samples_per_bone = 32;
  double prior_sharpness = 2.0;
  uint64_t seed = 0;

  // model sizes
  int seq_layers = 2;
  int seq_heads = 4;
  int seq_width = 128;
  int denoiser_stages = 2;
  int denoiser_width = 128;

  void validate() const;
};

PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& cfg);

// --- reports ----------------------------------------------------------------

// JSON carries raw normalized-unit values; tables display x 1e-2 units.
std::string skeleton_report_json(const SkeletonReport& r);
std::string skeleton_report_table(const SkeletonReport& r);
std::string skin_report_json(const SkinReport& r);
std::string skin_report_table(const SkinReport& r);

}  // namespace arti
