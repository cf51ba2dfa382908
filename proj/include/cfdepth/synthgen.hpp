#pragma once

#include "cfdepth/image.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cfd {

enum class Complexity { simple, complex };
enum class Rarity { common, rare };
enum class Behind { wall, empty, objects };

/// Standard scenes follow the factor labels; slanted scenes put an oblique
/// wall or a concave corner right behind the object.
enum class SceneFamily { standard, slanted };

struct FactorLabels {
  Complexity complexity = Complexity::simple;
  Rarity rarity = Rarity::common;
  int neighbors = 0;      // 0, 1 or 2
  Behind behind = Behind::wall;
  double distance = 1.5;  // 1.5 or 2.0 m

  void validate() const;
  bool operator==(const FactorLabels&) const = default;
};

std::string to_string(Complexity v);
std::string to_string(Rarity v);
std::string to_string(Behind v);
std::string to_string(SceneFamily v);
Complexity parse_complexity(const std::string& s);
Rarity parse_rarity(const std::string& s);
Behind parse_behind(const std::string& s);
SceneFamily parse_family(const std::string& s);

/// All 2 x 2 x 3 x 3 x 2 label combinations in a fixed order.
std::vector<FactorLabels> factor_sweep();

// Scene primitives in world coordinates (y up, floor at y = 0).

/// Half-space n . p >= c with unit inward normal n; the surface is a room wall.
struct HalfSpace {
  Eigen::Vector3d n;
  double c = 0.0;
};

/// Box rotated by `yaw` about the vertical axis.
struct Box {
  Eigen::Vector3d center;
  Eigen::Vector3d half;
  double yaw = 0.0;
};

struct Sphere {
  Eigen::Vector3d center;
  double radius = 0.0;
};

using Part = std::variant<HalfSpace, Box, Sphere>;

enum class ObjectRole { room, removable, neighbor, clutter };

struct SceneObject {
  int id = 0;
  ObjectRole role = ObjectRole::room;
  std::string category;    // wall, floor, box, chair, sphere, doll
  Eigen::Vector3d anchor;  // floor point under the object
  Eigen::Vector3d albedo;
  std::vector<Part> parts;
};

struct CameraPose {
  Eigen::Vector3d position;
  double pitch = 0.0;  // radians, positive looks up
  double yaw = 0.0;    // radians about the vertical axis

  /// Columns: camera right, down and forward axes in world coordinates.
  Eigen::Matrix3d rotation() const;
  Eigen::Vector3d forward() const { return rotation().col(2); }
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  int removable_id = -1;
  Eigen::Vector3d light_dir;  // unit, towards the light
  CameraPose camera;
  FactorLabels factors;
  SceneFamily family = SceneFamily::standard;

  const SceneObject& object(int id) const;
};

struct GenConfig {
  int width = 160;
  int height = 128;
  double fx = 100.0;
  double fy = 100.0;
  double max_depth = 5.0;
  double ambient = 0.3;
  double rare_fraction = 0.04;      // training scenes with a rare object
  double slanted_fraction = 0.25;   // training scenes from the slanted family
  double proximity_radius = 1.3;    // neighbours lie within this of the object
  double similar_depth = 0.3;       // max depth offset of a neighbour
  int min_mask_pixels = 100;
  int max_attempts = 500;

  void validate() const;
  Intrinsics intrinsics() const;
};

/// Camera pitch is clamped to this magnitude.
inline constexpr double kMaxPitchDeg = 45.0;

/// Position uniform over [-1, 1]^2 on the floor, height ~ N(1.0, 0.1^2) m,
/// pitch ~ N(0, 10^2) deg, yaw uniform.
CameraPose sample_camera(std::uint64_t seed);

/// Room plus objects for the given labels. The camera is part of the scene
/// because the object is placed at the labelled distance from it. Attempts
/// are re-drawn until the object is fully inside the frame with a one pixel
/// margin; PlacementError after `max_attempts`.
SceneSpec generate_scene(const FactorLabels& factors, std::uint64_t seed, const GenConfig& config = {},
                         SceneFamily family = SceneFamily::standard);

struct SampleRecord {
  int id = 0;
  std::uint64_t seed = 0;
  RgbImage rgb;
  ObjectMask mask;
  DepthMap depth_with;
  DepthMap depth_without;
  std::optional<FactorLabels> factors;
  SceneFamily family = SceneFamily::standard;
};

struct RayHit {
  double t = 0.0;  // camera-frame z of the hit
  int object = -1;
  Eigen::Vector3d normal;
};

/// Nearest hit of the ray origin + t * dir (t > 0), skipping object `skip`.
std::optional<RayHit> cast_ray(const SceneSpec& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               int skip = -1);

/// Renders the scene with and without the removable object. Depth is
/// camera-frame z, clipped to max_depth.
SampleRecord render_sample(const SceneSpec& scene, const CameraPose& camera, const GenConfig& config);

/// generate_scene + render_sample.
SampleRecord generate_sample(const FactorLabels& factors, std::uint64_t seed, const GenConfig& config = {},
                             SceneFamily family = SceneFamily::standard);

/// Training mix: labels drawn at random (rare objects with probability
/// rare_fraction, slanted scenes with probability slanted_fraction).
std::vector<SampleRecord> generate_training_set(int count, std::uint64_t master_seed, const GenConfig& config = {});

/// `replicates` samples of each of the 72 label combinations.
std::vector<SampleRecord> generate_factor_sweep(int replicates, std::uint64_t master_seed,
                                                const GenConfig& config = {});

/// Slanted-family samples with random labels (behind = wall).
std::vector<SampleRecord> generate_slanted_set(int count, std::uint64_t master_seed, const GenConfig& config = {});

struct NoiseParams {
  double sigma = 0.001;          // white noise, m
  double patch_prob = 0.01;      // chance a pixel centers a patch
  double patch_height = 0.01;    // m added per covering disc
  double patch_diameter = 5.0;   // pixels

  void validate() const;
};

/// Adds Gaussian white noise and raised discs to valid pixels. Disc centers
/// are drawn for every pixel before any white noise; overlapping discs add.
DepthMap simulate_sensor_noise(const DepthMap& depth, std::uint64_t seed, const NoiseParams& params = {});

/// One directory per sample named by zero-padded id: rgb.ppm, mask.pgm,
/// depth_with.pfm, depth_without.pfm, meta.json.
void write_dataset(const std::vector<SampleRecord>& records, const std::filesystem::path& directory);
std::vector<SampleRecord> load_dataset(const std::filesystem::path& directory);
SampleRecord load_sample(const std::filesystem::path& sample_dir);
std::string sample_dir_name(int id);

/// The meta.json part of a sample.
struct SampleMeta {
  int id = 0;
  std::uint64_t seed = 0;
  SceneFamily family = SceneFamily::standard;
  Intrinsics intrinsics;
  std::optional<FactorLabels> factors;
};

/// meta.json of every sample directory, without decoding the images.
std::vector<SampleMeta> load_dataset_meta(const std::filesystem::path& directory);

}  // namespace cfd
