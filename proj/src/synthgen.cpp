#include "cfdepth/synthgen.hpp"

#include "cfdepth/errors.hpp"
#include "cfdepth/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cfd {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kEps = 1e-9;

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, v] : table) {
    if (s == name) return v;
  }
  throw InvalidInput(std::string("unknown ") + what + " '" + s + "'");
}

// Horizontal unit vector at angle a from +z towards +x.
Eigen::Vector3d heading(double a) { return {std::sin(a), 0.0, std::cos(a)}; }

// Rotation about the vertical axis taking local +z to heading(yaw).
Eigen::Matrix3d yaw_matrix(double yaw) {
  Eigen::Matrix3d m;
  m << std::cos(yaw), 0.0, std::sin(yaw), 0.0, 1.0, 0.0, -std::sin(yaw), 0.0, std::cos(yaw);
  return m;
}

double support(const Part& part, const Eigen::Vector3d& v) {
  if (const auto* b = std::get_if<Box>(&part)) {
    const Eigen::Matrix3d rot = yaw_matrix(b->yaw);
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 8; ++k) {
      const Eigen::Vector3d s((k & 1) ? 1.0 : -1.0, (k & 2) ? 1.0 : -1.0, (k & 4) ? 1.0 : -1.0);
      best = std::max(best, v.dot(b->center + rot * s.cwiseProduct(b->half)));
    }
    return best;
  }
  if (const auto* s = std::get_if<Sphere>(&part)) return v.dot(s->center) + s->radius * v.norm();
  return std::numeric_limits<double>::infinity();
}

// max over the object of v . p.
double support(const SceneObject& obj, const Eigen::Vector3d& v) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : obj.parts) best = std::max(best, support(p, v));
  return best;
}

std::optional<std::pair<double, Eigen::Vector3d>> intersect(const Part& part, const Eigen::Vector3d& o,
                                                           const Eigen::Vector3d& d) {
  if (const auto* h = std::get_if<HalfSpace>(&part)) {
    const double nd = h->n.dot(d);
    if (nd >= 0.0) return std::nullopt;
    const double t = (h->c - h->n.dot(o)) / nd;
    if (!(t > kEps)) return std::nullopt;
    return std::pair{t, h->n};
  }
  if (const auto* b = std::get_if<Box>(&part)) {
    const Eigen::Matrix3d rt = yaw_matrix(b->yaw).transpose();
    const Eigen::Vector3d lo = rt * (o - b->center);
    const Eigen::Vector3d ld = rt * d;
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int axis = -1;
    double sign = 0.0;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(ld[a]) < 1e-15) {
        if (std::abs(lo[a]) > b->half[a]) return std::nullopt;
        continue;
      }
      double t0 = (-b->half[a] - lo[a]) / ld[a];
      double t1 = (b->half[a] - lo[a]) / ld[a];
      double s = -1.0;
      if (t0 > t1) {
        std::swap(t0, t1);
        s = 1.0;
      }
      if (t0 > t_near) {
        t_near = t0;
        axis = a;
        sign = s;
      }
      t_far = std::min(t_far, t1);
    }
    if (axis < 0 || t_near > t_far || !(t_near > kEps)) return std::nullopt;
    Eigen::Vector3d ln = Eigen::Vector3d::Zero();
    ln[axis] = sign;
    return std::pair{t_near, Eigen::Vector3d(yaw_matrix(b->yaw) * ln)};
  }
  const auto& s = std::get<Sphere>(part);
  const Eigen::Vector3d oc = o - s.center;
  const double a = d.squaredNorm();
  const double hb = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = hb * hb - a * c;
  if (disc < 0.0) return std::nullopt;
  const double t = (-hb - std::sqrt(disc)) / a;
  if (!(t > kEps)) return std::nullopt;
  return std::pair{t, Eigen::Vector3d((o + t * d - s.center) / s.radius)};
}

Eigen::Vector3d random_albedo(Rng& rng, double lo, double hi) {
  const double r = rng.uniform(lo, hi);
  const double g = rng.uniform(lo, hi);
  const double b = rng.uniform(lo, hi);
  return {r, g, b};
}

Eigen::Vector3d gray_albedo(Rng& rng, double lo, double hi) {
  const double base = rng.uniform(lo, hi);
  const double tr = rng.uniform(-0.05, 0.05);
  const double tb = rng.uniform(-0.05, 0.05);
  return {base + tr, base, base + tb};
}

Box floor_box(const Eigen::Vector3d& anchor, const Eigen::Vector3d& half, double yaw,
              const Eigen::Vector3d& local = Eigen::Vector3d::Zero()) {
  return Box{anchor + yaw_matrix(yaw) * local + Eigen::Vector3d(0.0, half.y(), 0.0), half, yaw};
}

SceneObject make_object(const std::string& category, const Eigen::Vector3d& anchor, double yaw, Rng& rng) {
  SceneObject obj;
  obj.category = category;
  obj.anchor = anchor;
  obj.albedo = random_albedo(rng, 0.15, 0.9);
  if (category == "box") {
    const Eigen::Vector3d half(rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.4), rng.uniform(0.12, 0.3));
    obj.parts.emplace_back(floor_box(anchor, half, yaw));
  } else if (category == "chair") {
    const double w = rng.uniform(0.2, 0.25);
    const double d = rng.uniform(0.2, 0.25);
    const double seat = rng.uniform(0.42, 0.5);
    const double back = rng.uniform(0.2, 0.25);
    const double leg = 0.025;
    for (int sx : {-1, 1}) {
      for (int sz : {-1, 1}) {
        obj.parts.emplace_back(floor_box(anchor, {leg, 0.5 * (seat - 0.04), leg}, yaw,
                                         {sx * (w - leg), 0.0, sz * (d - leg)}));
      }
    }
    obj.parts.emplace_back(floor_box(anchor, {w, 0.02, d}, yaw, {0.0, seat - 0.04, 0.0}));
    obj.parts.emplace_back(floor_box(anchor, {w, back, 0.03}, yaw, {0.0, seat, d - 0.03}));
  } else if (category == "sphere") {
    const double r = rng.uniform(0.2, 0.35);
    obj.parts.emplace_back(Sphere{anchor + Eigen::Vector3d(0.0, r, 0.0), r});
  } else if (category == "doll") {
    const double r1 = rng.uniform(0.2, 0.26);
    const double r2 = 0.7 * r1;
    const double r3 = 0.5 * r1;
    const double y1 = r1;
    const double y2 = y1 + r1 + 0.8 * r2;
    const double y3 = y2 + r2 + 0.8 * r3;
    obj.parts.emplace_back(Sphere{anchor + Eigen::Vector3d(0.0, y1, 0.0), r1});
    obj.parts.emplace_back(Sphere{anchor + Eigen::Vector3d(0.0, y2, 0.0), r2});
    obj.parts.emplace_back(Sphere{anchor + Eigen::Vector3d(0.0, y3, 0.0), r3});
  } else {
    throw InvalidInput("unknown object category " + category);
  }
  return obj;
}

SceneObject make_neighbor_box(const Eigen::Vector3d& anchor, double yaw, Rng& rng) {
  SceneObject obj;
  obj.category = "box";
  obj.anchor = anchor;
  obj.albedo = random_albedo(rng, 0.15, 0.9);
  const Eigen::Vector3d half(rng.uniform(0.12, 0.25), rng.uniform(0.15, 0.45), rng.uniform(0.12, 0.25));
  obj.parts.emplace_back(floor_box(anchor, half, yaw));
  return obj;
}

SceneObject make_wall(const std::string& category, const Eigen::Vector3d& n, double c, const Eigen::Vector3d& albedo) {
  SceneObject obj;
  obj.role = ObjectRole::room;
  obj.category = category;
  obj.anchor = Eigen::Vector3d::Zero();
  obj.albedo = albedo;
  obj.parts.emplace_back(HalfSpace{n.normalized(), c});
  return obj;
}

// Offset of an inward-facing wall that sits `gap` behind every object.
double wall_offset_behind(const std::vector<SceneObject>& objects, const Eigen::Vector3d& n, double gap) {
  double c = std::numeric_limits<double>::infinity();
  for (const auto& o : objects) {
    if (o.role != ObjectRole::room) c = std::min(c, -support(o, -n));
  }
  return c - gap;
}

SceneSpec build_scene(const FactorLabels& f, SceneFamily family, Rng& rng) {
  SceneSpec scene;
  scene.factors = f;
  scene.family = family;
  scene.camera = sample_camera(rng.next());
  const CameraPose& cam = scene.camera;
  const Eigen::Vector3d cam_floor(cam.position.x(), 0.0, cam.position.z());
  const Eigen::Vector3d h_cam = heading(cam.yaw);
  const Eigen::Vector3d r_cam(h_cam.z(), 0.0, -h_cam.x());
  const double room_yaw = cam.yaw + rng.uniform(-0.15, 0.15);
  const Eigen::Vector3d h_room = heading(room_yaw);
  const Eigen::Vector3d r_room(h_room.z(), 0.0, -h_room.x());

  std::vector<SceneObject> things;
  const bool rare = f.rarity == Rarity::rare;
  const bool complex = f.complexity == Complexity::complex;
  const std::string category = rare ? (complex ? "doll" : "sphere") : (complex ? "chair" : "box");
  const Eigen::Vector3d anchor = cam_floor + f.distance * h_cam;
  SceneObject removable = make_object(category, anchor, room_yaw + rng.uniform(-0.1, 0.1), rng);
  removable.role = ObjectRole::removable;
  things.push_back(std::move(removable));

  if (f.neighbors > 0) {
    const double first_side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    for (int k = 0; k < f.neighbors; ++k) {
      const double side = k == 0 ? first_side : -first_side;
      const double lateral = rng.uniform(0.75, 1.05);
      const double along = rng.uniform(-0.15, 0.15);
      const Eigen::Vector3d a = anchor + side * lateral * r_cam + along * h_cam;
      SceneObject nb = make_neighbor_box(a, room_yaw + rng.uniform(-0.2, 0.2), rng);
      nb.role = ObjectRole::neighbor;
      things.push_back(std::move(nb));
    }
  }
  if (family == SceneFamily::standard && f.behind == Behind::objects) {
    const int count = rng.uniform_int(1, 2);
    for (int k = 0; k < count; ++k) {
      const double behind = rng.uniform(0.65, 1.0);
      const double lateral = rng.uniform(-0.35, 0.35);
      const Eigen::Vector3d a = anchor + behind * h_cam + lateral * r_cam;
      SceneObject cl = make_neighbor_box(a, room_yaw + rng.uniform(-0.3, 0.3), rng);
      cl.role = ObjectRole::clutter;
      things.push_back(std::move(cl));
    }
  }

  // Room: floor, ceiling, side walls, the wall behind the camera, then the
  // far wall(s) whose placement encodes what lies behind the object.
  const Eigen::Vector3d pos = cam.position;
  scene.objects.push_back(make_wall("floor", {0, 1, 0}, 0.0, gray_albedo(rng, 0.3, 0.55)));
  scene.objects.push_back(make_wall("ceiling", {0, -1, 0}, -rng.uniform(2.5, 3.0), gray_albedo(rng, 0.7, 0.9)));
  const Eigen::Vector3d wall_albedo = gray_albedo(rng, 0.55, 0.85);
  scene.objects.push_back(make_wall("wall", r_room, r_room.dot(pos) - rng.uniform(1.8, 2.6), wall_albedo));
  scene.objects.push_back(make_wall("wall", -r_room, -(r_room.dot(pos) + rng.uniform(1.8, 2.6)), wall_albedo));
  scene.objects.push_back(make_wall("wall", h_room, h_room.dot(pos) - rng.uniform(0.8, 1.5), wall_albedo));

  if (family == SceneFamily::slanted) {
    const auto rotated = [&](double a) -> Eigen::Vector3d { return yaw_matrix(a) * h_room; };
    const double gap = rng.uniform(0.01, 0.05);
    if (rng.bernoulli(0.5)) {
      const double beta = rng.uniform(30.0, 50.0) * kDeg * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      const Eigen::Vector3d n = -rotated(beta);
      scene.objects.push_back(make_wall("wall", n, wall_offset_behind(things, n, gap), wall_albedo));
    } else {
      const double beta = rng.uniform(35.0, 55.0) * kDeg;
      for (double s : {1.0, -1.0}) {
        const Eigen::Vector3d n = -rotated(s * beta);
        scene.objects.push_back(make_wall("wall", n, wall_offset_behind(things, n, gap), wall_albedo));
      }
    }
  } else {
    double c = 0.0;
    switch (f.behind) {
      case Behind::wall:
        c = wall_offset_behind(things, -h_room, rng.uniform(0.01, 0.05));
        break;
      case Behind::empty:
        c = -(h_room.dot(pos) + rng.uniform(4.0, 6.0));
        break;
      case Behind::objects:
        c = wall_offset_behind(things, -h_room, rng.uniform(0.3, 1.0));
        break;
    }
    scene.objects.push_back(make_wall("wall", -h_room, c, wall_albedo));
  }

  for (auto& t : things) scene.objects.push_back(std::move(t));
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    scene.objects[i].id = i;
    if (scene.objects[i].role == ObjectRole::removable) scene.removable_id = i;
  }
  scene.light_dir = Eigen::Vector3d(rng.uniform(-0.6, 0.6), 1.0, rng.uniform(-0.6, 0.6)).normalized();
  return scene;
}

Eigen::Vector3d pixel_ray(const Intrinsics& k, int x, int y) {
  return {(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0};
}

// True if the removable object covers at least min_pixels pixels and stays
// off the outermost ring of the frame. The ring is tested first since most
// rejected attempts cross it.
bool object_in_frame(const SceneSpec& scene, const GenConfig& config) {
  const Intrinsics k = config.intrinsics();
  const Eigen::Matrix3d rot = scene.camera.rotation();
  const int w = config.width;
  const int h = config.height;
  auto on_object = [&](int x, int y) {
    const auto hit = cast_ray(scene, scene.camera.position, rot * pixel_ray(k, x, y));
    return hit && hit->object == scene.removable_id;
  };
  for (int x = 0; x < w; ++x)
    if (on_object(x, 0) || on_object(x, h - 1)) return false;
  for (int y = 1; y < h - 1; ++y)
    if (on_object(0, y) || on_object(w - 1, y)) return false;
  int count = 0;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      if (on_object(x, y) && ++count >= config.min_mask_pixels) return true;
  return false;
}

FactorLabels random_labels(Rng& rng, const GenConfig& config) {
  FactorLabels f;
  f.complexity = rng.bernoulli(0.5) ? Complexity::complex : Complexity::simple;
  f.rarity = rng.bernoulli(config.rare_fraction) ? Rarity::rare : Rarity::common;
  f.neighbors = rng.uniform_int(0, 2);
  f.behind = static_cast<Behind>(rng.uniform_int(0, 2));
  f.distance = rng.bernoulli(0.5) ? 2.0 : 1.5;
  return f;
}

}  // namespace

void FactorLabels::validate() const {
  if (neighbors < 0 || neighbors > 2) throw InvalidInput("neighbors must be 0, 1 or 2");
  if (distance != 1.5 && distance != 2.0) throw InvalidInput("distance must be 1.5 or 2.0");
}

std::string to_string(Complexity v) { return v == Complexity::simple ? "simple" : "complex"; }
std::string to_string(Rarity v) { return v == Rarity::common ? "common" : "rare"; }
std::string to_string(Behind v) {
  switch (v) {
    case Behind::wall:
      return "wall";
    case Behind::empty:
      return "empty";
    case Behind::objects:
      return "objects";
  }
  return "wall";
}
std::string to_string(SceneFamily v) { return v == SceneFamily::standard ? "standard" : "slanted"; }

Complexity parse_complexity(const std::string& s) {
  return parse_enum<Complexity>(s, {{"simple", Complexity::simple}, {"complex", Complexity::complex}}, "complexity");
}
Rarity parse_rarity(const std::string& s) {
  return parse_enum<Rarity>(s, {{"common", Rarity::common}, {"rare", Rarity::rare}}, "rarity");
}
Behind parse_behind(const std::string& s) {
  return parse_enum<Behind>(s, {{"wall", Behind::wall}, {"empty", Behind::empty}, {"objects", Behind::objects}},
                            "behind");
}
SceneFamily parse_family(const std::string& s) {
  return parse_enum<SceneFamily>(s, {{"standard", SceneFamily::standard}, {"slanted", SceneFamily::slanted}},
                                 "family");
}

std::vector<FactorLabels> factor_sweep() {
  std::vector<FactorLabels> out;
  for (Complexity c : {Complexity::simple, Complexity::complex})
    for (Rarity r : {Rarity::common, Rarity::rare})
      for (int n : {0, 1, 2})
        for (Behind b : {Behind::wall, Behind::empty, Behind::objects})
          for (double d : {1.5, 2.0}) out.push_back({c, r, n, b, d});
  return out;
}

Eigen::Matrix3d CameraPose::rotation() const {
  const Eigen::Vector3d fwd(std::sin(yaw) * std::cos(pitch), std::sin(pitch), std::cos(yaw) * std::cos(pitch));
  const Eigen::Vector3d right(std::cos(yaw), 0.0, -std::sin(yaw));
  const Eigen::Vector3d down = right.cross(fwd);
  Eigen::Matrix3d m;
  m.col(0) = right;
  m.col(1) = down;
  m.col(2) = fwd;
  return m;
}

const SceneObject& SceneSpec::object(int id) const {
  if (id < 0 || id >= static_cast<int>(objects.size())) throw InvalidInput("no object with id " + std::to_string(id));
  return objects[id];
}

void GenConfig::validate() const {
  if (width < 8 || height < 8) throw ConfigError("image must be at least 8x8");
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("focal lengths must be positive");
  if (!(max_depth > 0.0)) throw ConfigError("max_depth must be positive");
  if (ambient < 0.0 || ambient > 1.0) throw ConfigError("ambient must lie in [0, 1]");
  if (rare_fraction < 0.0 || rare_fraction > 1.0) throw ConfigError("rare_fraction must lie in [0, 1]");
  if (slanted_fraction < 0.0 || slanted_fraction > 1.0) throw ConfigError("slanted_fraction must lie in [0, 1]");
  if (min_mask_pixels < 1 || max_attempts < 1) throw ConfigError("min_mask_pixels and max_attempts must be >= 1");
}

Intrinsics GenConfig::intrinsics() const { return {fx, fy, 0.5 * (width - 1), 0.5 * (height - 1)}; }

CameraPose sample_camera(std::uint64_t seed) {
  Rng rng(seed);
  CameraPose pose;
  const double x = rng.uniform(-1.0, 1.0);
  const double z = rng.uniform(-1.0, 1.0);
  const double height = rng.normal(1.0, 0.1);
  const double pitch = rng.normal(0.0, 10.0);
  pose.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
  pose.position = {x, height, z};
  pose.pitch = std::clamp(pitch, -kMaxPitchDeg, kMaxPitchDeg) * kDeg;
  return pose;
}

SceneSpec generate_scene(const FactorLabels& factors, std::uint64_t seed, const GenConfig& config,
                         SceneFamily family) {
  factors.validate();
  config.validate();
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    SceneSpec scene = build_scene(factors, family, rng);
    if (object_in_frame(scene, config)) return scene;
  }
  throw PlacementError("object not fully visible after " + std::to_string(config.max_attempts) + " attempts");
}

std::optional<RayHit> cast_ray(const SceneSpec& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               int skip) {
  std::optional<RayHit> best;
  for (const auto& obj : scene.objects) {
    if (obj.id == skip) continue;
    for (const auto& part : obj.parts) {
      const auto hit = intersect(part, origin, dir);
      if (hit && (!best || hit->first < best->t)) best = RayHit{hit->first, obj.id, hit->second};
    }
  }
  return best;
}

SampleRecord render_sample(const SceneSpec& scene, const CameraPose& camera, const GenConfig& config) {
  config.validate();
  const int w = config.width;
  const int h = config.height;
  const Intrinsics k = config.intrinsics();
  const Eigen::Matrix3d rot = camera.rotation();
  const float far = static_cast<float>(config.max_depth);

  SampleRecord rec;
  rec.rgb = RgbImage(w, h);
  rec.mask = ObjectMask(w, h, 1);
  rec.depth_with = DepthMap(w, h, k);
  rec.depth_without = DepthMap(w, h, k);
  rec.factors = scene.factors;
  rec.family = scene.family;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d dir = rot * pixel_ray(k, x, y);
      const auto hit = cast_ray(scene, camera.position, dir);
      if (!hit) {
        rec.depth_with.data(y, x) = far;
        rec.depth_without.data(y, x) = far;
        continue;
      }
      const float dw = std::min(static_cast<float>(hit->t), far);
      rec.depth_with.data(y, x) = dw;
      if (hit->object == scene.removable_id) {
        rec.mask.data(y, x) = 0;
        const auto behind = cast_ray(scene, camera.position, dir, scene.removable_id);
        rec.depth_without.data(y, x) = behind ? std::min(static_cast<float>(behind->t), far) : far;
      } else {
        rec.depth_without.data(y, x) = dw;
      }
      Eigen::Vector3d n = hit->normal;
      if (n.dot(dir) > 0.0) n = -n;
      const double shade = config.ambient + (1.0 - config.ambient) * std::max(0.0, n.dot(scene.light_dir));
      const Eigen::Vector3d& albedo = scene.objects[hit->object].albedo;
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(albedo[c] * shade, 0.0, 1.0);
        rec.rgb.ch[c](y, x) = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
      }
    }
  }
  return rec;
}

SampleRecord generate_sample(const FactorLabels& factors, std::uint64_t seed, const GenConfig& config,
                             SceneFamily family) {
  const SceneSpec scene = generate_scene(factors, seed, config, family);
  SampleRecord rec = render_sample(scene, scene.camera, config);
  rec.seed = seed;
  return rec;
}

std::vector<SampleRecord> generate_training_set(int count, std::uint64_t master_seed, const GenConfig& config) {
  if (count < 1) throw InvalidInput("count must be positive");
  std::vector<SampleRecord> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(seed, 0xfac7));
    FactorLabels f = random_labels(rng, config);
    const SceneFamily family = rng.bernoulli(config.slanted_fraction) ? SceneFamily::slanted : SceneFamily::standard;
    if (family == SceneFamily::slanted) f.behind = Behind::wall;
    SampleRecord rec = generate_sample(f, seed, config, family);
    rec.id = i;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SampleRecord> generate_factor_sweep(int replicates, std::uint64_t master_seed, const GenConfig& config) {
  if (replicates < 1) throw InvalidInput("replicates must be positive");
  const auto cells = factor_sweep();
  std::vector<SampleRecord> out;
  out.reserve(cells.size() * replicates);
  int id = 0;
  for (int r = 0; r < replicates; ++r) {
    for (const auto& f : cells) {
      SampleRecord rec = generate_sample(f, derive_seed(master_seed, static_cast<std::uint64_t>(id)), config);
      rec.id = id++;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<SampleRecord> generate_slanted_set(int count, std::uint64_t master_seed, const GenConfig& config) {
  if (count < 1) throw InvalidInput("count must be positive");
  std::vector<SampleRecord> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(seed, 0xfac7));
    FactorLabels f = random_labels(rng, config);
    f.behind = Behind::wall;
    SampleRecord rec = generate_sample(f, seed, config, SceneFamily::slanted);
    rec.id = i;
    out.push_back(std::move(rec));
  }
  return out;
}

void NoiseParams::validate() const {
  if (sigma < 0.0) throw InvalidInput("noise sigma must be non-negative");
  if (patch_prob < 0.0 || patch_prob > 1.0) throw InvalidInput("patch probability must lie in [0, 1]");
  if (patch_height < 0.0) throw InvalidInput("patch height must be non-negative");
  if (!(patch_diameter > 0.0)) throw InvalidInput("patch diameter must be positive");
}

DepthMap simulate_sensor_noise(const DepthMap& depth, std::uint64_t seed, const NoiseParams& params) {
  params.validate();
  const int w = depth.width();
  const int h = depth.height();
  Rng rng(seed);

  PlaneD add = PlaneD::Zero(h, w);
  const double r = 0.5 * params.patch_diameter;
  const int reach = static_cast<int>(std::floor(r));
  std::vector<std::pair<int, int>> disc;
  for (int dy = -reach; dy <= reach; ++dy)
    for (int dx = -reach; dx <= reach; ++dx)
      if (dx * dx + dy * dy <= r * r) disc.emplace_back(dy, dx);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!rng.bernoulli(params.patch_prob)) continue;
      for (const auto& [dy, dx] : disc) {
        const int yy = y + dy;
        const int xx = x + dx;
        if (yy >= 0 && yy < h && xx >= 0 && xx < w) add(yy, xx) += params.patch_height;
      }
    }
  }
  DepthMap out = depth;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double n = rng.normal();
      if (!depth.valid(y, x)) continue;
      out.data(y, x) = static_cast<float>(static_cast<double>(depth.data(y, x)) + add(y, x) + params.sigma * n);
    }
  }
  return out;
}

}  // namespace cfd
