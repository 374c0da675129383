// Command-line front end for the avatar pipeline: synthetic data generation,
// training, single-image reconstruction, animation, evaluation, and
// finite-difference gradient audits.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gav/body_model.hpp"
#include "gav/gaussians.hpp"
#include "gav/gradcheck_suites.hpp"
#include "gav/image.hpp"
#include "gav/losses.hpp"
#include "gav/network.hpp"
#include "gav/renderer.hpp"
#include "gav/skinning.hpp"
#include "gav/training.hpp"

namespace {

using gav::Error;

/// Errors caused by flags, config files, or incompatible inputs (exit 2),
/// as opposed to runtime failures (exit 1).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};

// ---- configuration registry ---------------------------------------------
//
// Every tunable lives in Settings and is exposed three ways with one table:
// as a --section.key flag, as a `key = value` line under `[section]` in a
// config file, and in the --print-config dump. Flags override file values.

struct Settings {
  gav::train::TrainConfig train;
  gav::train::SceneParams scene;
  uint64_t scene_seed = 1;
};

struct Entry {
  std::string key;  // "section.name"
  enum Kind { kDouble, kInt, kUint } kind;
  void* p;
};

std::vector<Entry> registry(Settings& s) {
  auto& t = s.train;
  auto& n = s.train.net;
  auto& l = s.train.weights;
  auto& a = s.train.activation;
  auto& sc = s.scene;
  return {
      {"train.lr", Entry::kDouble, &t.lr},
      {"train.beta1", Entry::kDouble, &t.beta1},
      {"train.beta2", Entry::kDouble, &t.beta2},
      {"train.eps", Entry::kDouble, &t.eps},
      {"train.weight_decay", Entry::kDouble, &t.weight_decay},
      {"train.clip", Entry::kDouble, &t.clip},
      {"train.iterations", Entry::kInt, &t.iterations},
      {"train.targets_per_step", Entry::kInt, &t.targets_per_step},
      {"train.init_seed", Entry::kUint, &t.init_seed},
      {"train.step_seed", Entry::kUint, &t.step_seed},
      {"train.percep_seed", Entry::kUint, &t.percep_seed},
      {"net.token_dim", Entry::kInt, &n.token_dim},
      {"net.pos_freqs", Entry::kInt, &n.pos_freqs},
      {"net.layers", Entry::kInt, &n.layers},
      {"net.heads", Entry::kInt, &n.heads},
      {"net.body_res", Entry::kInt, &n.body_res},
      {"net.body_patch", Entry::kInt, &n.body_patch},
      {"net.head_res", Entry::kInt, &n.head_res},
      {"net.head_patch", Entry::kInt, &n.head_patch},
      {"net.encoder_depth", Entry::kInt, &n.encoder_depth},
      {"net.tap1", Entry::kInt, &n.tap_depths[0]},
      {"net.tap2", Entry::kInt, &n.tap_depths[1]},
      {"net.tap3", Entry::kInt, &n.tap_depths[2]},
      {"net.tap4", Entry::kInt, &n.tap_depths[3]},
      {"net.mlp_hidden_mult", Entry::kInt, &n.mlp_hidden_mult},
      {"net.max_mask_ratio", Entry::kDouble, &n.max_mask_ratio},
      {"net.sh_dim", Entry::kInt, &n.sh_dim},
      {"loss.rgb", Entry::kDouble, &l.rgb},
      {"loss.mask", Entry::kDouble, &l.mask},
      {"loss.perceptual", Entry::kDouble, &l.perceptual},
      {"loss.isotropy", Entry::kDouble, &l.isotropy},
      {"loss.offset", Entry::kDouble, &l.offset},
      {"loss.offset_limit", Entry::kDouble, &l.offset_limit},
      {"activation.offset_cap", Entry::kDouble, &a.offset_cap},
      {"activation.scale_floor", Entry::kDouble, &a.scale_floor},
      {"scene.gaussians", Entry::kInt, &sc.n_gaussians},
      {"scene.train_views", Entry::kInt, &sc.n_train_views},
      {"scene.holdout_views", Entry::kInt, &sc.n_holdout_views},
      {"scene.image_res", Entry::kInt, &sc.image_res},
      {"scene.skin_resolution", Entry::kInt, &sc.skin_resolution},
      {"scene.camera_distance", Entry::kDouble, &sc.camera_distance},
      {"scene.max_pose_angle", Entry::kDouble, &sc.max_pose_angle},
      {"scene.seed", Entry::kUint, &s.scene_seed},
  };
}

void set_entry(const Entry& e, const std::string& value) {
  std::istringstream in(value);
  bool ok = false;
  switch (e.kind) {
    case Entry::kDouble: ok = static_cast<bool>(in >> *static_cast<double*>(e.p)); break;
    case Entry::kInt: ok = static_cast<bool>(in >> *static_cast<int64_t*>(e.p)); break;
    case Entry::kUint: ok = static_cast<bool>(in >> *static_cast<uint64_t*>(e.p)); break;
  }
  std::string rest;
  if (!ok || (in >> rest))
    throw UsageError("config: bad value '" + value + "' for key " + e.key);
}

std::string entry_str(const Entry& e) {
  char buf[64];
  switch (e.kind) {
    case Entry::kDouble:
      std::snprintf(buf, sizeof(buf), "%.17g", *static_cast<double*>(e.p));
      break;
    case Entry::kInt:
      std::snprintf(buf, sizeof(buf), "%" PRId64, *static_cast<int64_t*>(e.p));
      break;
    case Entry::kUint:
      std::snprintf(buf, sizeof(buf), "%" PRIu64, *static_cast<uint64_t*>(e.p));
      break;
  }
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// `key = value` lines with optional `[section]` headers and `#` comments.
/// Values already set on the command line win over the file; `aliases` maps
/// config keys to additional flags that also count as "set on the line".
void apply_config_file(const std::string& path, std::vector<Entry>& entries,
                       const CLI::App* cmd,
                       const std::map<std::string, const CLI::Option*>& aliases) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file: " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (size_t h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    Entry* found = nullptr;
    for (Entry& e : entries)
      if (e.key == key) found = &e;
    if (!found) throw UsageError(where + ": unknown key '" + key + "'");
    const CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    bool set_by_flag = opt && opt->count() > 0;
    if (auto a = aliases.find(key); a != aliases.end() && a->second->count() > 0)
      set_by_flag = true;
    if (set_by_flag) continue;  // flags override the file
    set_entry(*found, value);
  }
}

std::string print_config(std::vector<Entry>& entries) {
  std::string out, section;
  for (Entry& e : entries) {
    std::string sec = e.key.substr(0, e.key.find('.'));
    std::string name = e.key.substr(e.key.find('.') + 1);
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += name + " = " + entry_str(e) + "\n";
  }
  return out;
}

/// Shared plumbing: every data-bearing subcommand gets the full flag set, a
/// --config file, and --print-config.
struct ConfiguredCommand {
  CLI::App* cmd = nullptr;
  std::vector<Entry> entries;
  std::string config_path;
  bool print_only = false;
  std::map<std::string, const CLI::Option*> aliases;

  ConfiguredCommand(CLI::App& app, Settings& s, const std::string& name,
                    const std::string& desc) {
    cmd = app.add_subcommand(name, desc);
    entries = registry(s);
    for (Entry& e : entries) {
      switch (e.kind) {
        case Entry::kDouble: cmd->add_option("--" + e.key, *static_cast<double*>(e.p)); break;
        case Entry::kInt: cmd->add_option("--" + e.key, *static_cast<int64_t*>(e.p)); break;
        case Entry::kUint: cmd->add_option("--" + e.key, *static_cast<uint64_t*>(e.p)); break;
      }
    }
    cmd->add_option("--config", config_path, "key = value config file; flags override");
    cmd->add_flag("--print-config", print_only, "print the effective config and exit");
  }

  /// An extra flag (e.g. --seed) standing in for a registry key.
  void add_alias(const std::string& key, const CLI::Option* opt) {
    aliases.emplace(key, opt);
  }

  /// Returns true when the command should stop after printing the config.
  bool finalize() {
    if (!config_path.empty()) apply_config_file(config_path, entries, cmd, aliases);
    if (print_only) std::fputs(print_config(entries).c_str(), stdout);
    return print_only;
  }
};

// ---- small shared helpers ------------------------------------------------

gav::body::BodyTemplate load_body_or_default(const std::string& path) {
  if (path.empty()) return gav::body::generate_humanoid();
  return gav::body::load_body_model(path);
}

std::vector<double> read_number_file(const std::string& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw Error(std::string("cannot open ") + what + " file: " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(f, line)) {
    if (size_t h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream in(line);
    double v;
    while (in >> v) out.push_back(v);
  }
  return out;
}

/// Camera file: 23 numbers — fx fy cx cy near, width height, then the 4x4
/// world-to-camera matrix row-major. `#` comments allowed.
gav::raster::Camera read_camera_file(const std::string& path) {
  std::vector<double> v = read_number_file(path, "camera");
  if (v.size() != 23)
    throw UsageError("camera file " + path + ": expected 23 numbers, got " +
                     std::to_string(v.size()));
  gav::raster::Camera cam;
  cam.fx = v[0];
  cam.fy = v[1];
  cam.cx = v[2];
  cam.cy = v[3];
  cam.near = v[4];
  cam.width = static_cast<int64_t>(v[5]);
  cam.height = static_cast<int64_t>(v[6]);
  for (int i = 0; i < 16; ++i) cam.world_to_camera.m[i] = v[7 + i];
  cam.validate();
  return cam;
}

/// Motion file: first number J, then per frame J*3 axis-angle values followed
/// by the 3 root-translation components.
std::vector<gav::body::Pose> read_motion_file(const std::string& path, int64_t expect_j) {
  std::vector<double> v = read_number_file(path, "motion");
  if (v.empty()) throw UsageError("motion file " + path + " is empty");
  int64_t j = static_cast<int64_t>(v[0]);
  if (j != expect_j)
    throw UsageError("motion file has " + std::to_string(j) + " joints but the rig has " +
                     std::to_string(expect_j));
  size_t per_frame = static_cast<size_t>(j) * 3 + 3;
  if ((v.size() - 1) % per_frame != 0 || v.size() == 1)
    throw UsageError("motion file " + path + ": expected 1 + k*(" +
                     std::to_string(per_frame) + ") numbers, got " +
                     std::to_string(v.size()));
  std::vector<gav::body::Pose> poses;
  for (size_t off = 1; off < v.size(); off += per_frame) {
    gav::body::Pose p = gav::body::Pose::rest(j);
    for (int64_t i = 0; i < j * 3; ++i) p.axis_angle[i] = v[off + i];
    p.root_translation = {v[off + j * 3], v[off + j * 3 + 1], v[off + j * 3 + 2]};
    poses.push_back(std::move(p));
  }
  return poses;
}

/// Documented fallback when no head crop is supplied: the head-region anchors
/// are projected into a canonical front view, their pixel bounding box is
/// expanded by 20%, squared up, and resampled from the body image.
gav::Tensor derive_head_crop(const gav::Tensor& image,
                             const gav::body::BodyTemplate& body,
                             const gav::body::SampledPoints& points,
                             int64_t head_res) {
  using namespace gav;
  int64_t res = image.extent(0);
  Vec3 center;
  for (int64_t i = 0; i < body.num_vertices(); ++i) {
    center.x += body.vertices.at2(i, 0);
    center.y += body.vertices.at2(i, 1);
    center.z += body.vertices.at2(i, 2);
  }
  center = center * (1.0 / static_cast<double>(body.num_vertices()));
  // Front view matching the synthetic-scene camera convention.
  Vec3 eye = center + Vec3{0, 0, 1} * 2.3;
  Vec3 z = (center - eye).normalized();
  Vec3 x = Vec3{0, 1, 0}.cross(z).normalized();
  Vec3 y = z.cross(x);
  double fx = 1.2 * static_cast<double>(res);
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (int64_t i = 0; i < points.count(); ++i) {
    if (points.region[i] != body::kHead) continue;
    Vec3 p{points.positions.at2(i, 0), points.positions.at2(i, 1),
           points.positions.at2(i, 2)};
    Vec3 rel = p - eye;
    Vec3 c{x.dot(rel), y.dot(rel), z.dot(rel)};
    if (c.z <= 0.1) continue;
    double u = fx * c.x / c.z + res / 2.0;
    double v = fx * c.y / c.z + res / 2.0;
    x0 = std::min(x0, u);
    x1 = std::max(x1, u);
    y0 = std::min(y0, v);
    y1 = std::max(y1, v);
  }
  if (x0 > x1) throw Error("head-crop fallback: no head anchors project into the view");
  double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  double half = std::max(0.5 * 1.2 * std::max(x1 - x0, y1 - y0), 1.0);
  double rect[4] = {cx - half, cy - half, cx + half, cy + half};
  return train::crop_resize(image, rect, head_res);
}

// ---- subcommands ----------------------------------------------------------

int cmd_make_body(const std::string& out) {
  gav::body::BodyTemplate t = gav::body::generate_humanoid();
  gav::body::save_body_model(t, out);
  std::printf("wrote %s (V=%lld, J=%lld)\n", out.c_str(),
              static_cast<long long>(t.num_vertices()),
              static_cast<long long>(t.num_joints()));
  return 0;
}

int cmd_make_data(const Settings& s, const std::string& body_path,
                  const std::string& out) {
  gav::body::BodyTemplate body = load_body_or_default(body_path);
  gav::train::SyntheticScene scene =
      gav::train::make_synthetic_scene(body, s.scene, s.scene_seed);
  gav::train::write_scene(scene, out);
  std::printf("wrote scene %s (%zu views, %lld holdout, %lld gaussians)\n",
              out.c_str(), scene.views.size(),
              static_cast<long long>(scene.holdout.size()),
              static_cast<long long>(scene.gt.count()));
  return 0;
}

int cmd_train(const Settings& s, const std::string& scene_dir,
              const std::string& out_ckpt, const std::string& log_path,
              const std::string& resume) {
  gav::train::SyntheticScene scene = gav::train::read_scene(scene_dir);
  gav::train::Trainer trainer(s.train, scene);
  if (!resume.empty()) trainer.load_checkpoint(resume);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw Error("cannot open log file: " + log_path);
  }
  gav::loss::LossReport last;
  while (trainer.step() < s.train.iterations) {
    int64_t step = trainer.step();
    last = trainer.train_step();
    std::string line = last.log_line(step);
    if (log) log << line << "\n";
    if (step % 50 == 0 || trainer.step() == s.train.iterations)
      std::printf("%s\n", line.c_str());
  }
  trainer.save_checkpoint(out_ckpt);
  std::printf("wrote checkpoint %s at step %lld\n", out_ckpt.c_str(),
              static_cast<long long>(trainer.step()));
  if (trainer.step() > 0) std::printf("final %s\n", last.log_line(trainer.step() - 1).c_str());
  return 0;
}

int cmd_reconstruct(const Settings& s, const std::string& image_path,
                    const std::string& crop_path, const std::string& body_path,
                    const std::string& ckpt_path, const std::string& out_avatar,
                    uint64_t anchor_seed) {
  using namespace gav;
  auto t0 = std::chrono::steady_clock::now();
  body::BodyTemplate body = load_body_or_default(body_path);
  Tensor image = img::read_raw(image_path);
  const net::NetworkConfig& cfg = s.train.net;
  if (image.extent(0) != cfg.body_res || image.extent(1) != cfg.body_res)
    throw UsageError("input image is " + std::to_string(image.extent(0)) + "x" +
                     std::to_string(image.extent(1)) + " but net.body_res is " +
                     std::to_string(cfg.body_res));
  train::Checkpoint ckpt = train::read_checkpoint(ckpt_path);
  net::NetworkWeights expect = net::NetworkWeights::init(cfg, 0);
  if (ckpt.weights.params.size() != expect.params.size())
    throw UsageError(ckpt_path + ": parameter count does not match the configured architecture");
  for (const auto& [key, t] : expect.params) {
    auto it = ckpt.weights.params.find(key);
    if (it == ckpt.weights.params.end() || !it->second.same_shape(t))
      throw UsageError(ckpt_path + ": checkpoint does not match the configured architecture (" + key + ")");
  }

  body::SampledPoints points =
      body::sample_surface_points(body, s.scene.n_gaussians, anchor_seed);
  Tensor crop = crop_path.empty()
                    ? derive_head_crop(image, body, points, cfg.head_res)
                    : img::read_raw(crop_path);
  if (crop.extent(0) != cfg.head_res || crop.extent(1) != cfg.head_res)
    throw UsageError("head crop resolution does not match net.head_res");

  splat::RawGaussianParams raw =
      net::predict_gaussians_value(image, crop, points, cfg, ckpt.weights);
  splat::GaussianSet g = splat::activate_raw(raw, points.positions, s.train.activation);

  skin::SkinField field = skin::build_skin_field(body, s.scene.skin_resolution);
  splat::AvatarSkin skin;
  skin.weights = skin::query_weights(field, points.positions);
  for (int64_t j = 0; j < body.num_joints(); ++j)
    skin.joint_ids.push_back(static_cast<uint32_t>(j));
  splat::write_avatar(g, skin, out_avatar);
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("wrote %s (%lld gaussians) in %.3f s\n", out_avatar.c_str(),
              static_cast<long long>(g.count()), dt);
  return 0;
}

int cmd_animate(const std::string& avatar_path, const std::string& body_path,
                const std::string& motion_path, const std::string& camera_path,
                const std::string& out_dir) {
  using namespace gav;
  auto [g, skin] = splat::read_avatar(avatar_path);
  if (!skin) throw UsageError(avatar_path + ": avatar carries no skinning data");
  body::BodyTemplate body = load_body_or_default(body_path);
  if (static_cast<int64_t>(skin->joint_ids.size()) != body.num_joints())
    throw UsageError("avatar skin has " + std::to_string(skin->joint_ids.size()) +
                     " joints but the body rig has " + std::to_string(body.num_joints()));
  std::vector<body::Pose> motion = read_motion_file(motion_path, body.num_joints());
  raster::Camera cam = read_camera_file(camera_path);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory: " + out_dir);
  auto t0 = std::chrono::steady_clock::now();
  char name[64];
  for (size_t f = 0; f < motion.size(); ++f) {
    std::vector<Mat4> transforms = body::forward_kinematics(body, motion[f]);
    splat::GaussianSet posed = skin::pose_gaussians(g, skin->weights, transforms);
    raster::RenderResult rr = raster::render(posed, cam, {0, 0, 0});
    std::snprintf(name, sizeof(name), "/frame%04zu.limg", f);
    img::write_raw(rr.rgb, out_dir + name);
    std::snprintf(name, sizeof(name), "/frame%04zu.ppm", f);
    img::write_ppm(rr.rgb, out_dir + name);
  }
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("rendered %zu frames to %s (%.2f frames/s)\n", motion.size(),
              out_dir.c_str(), static_cast<double>(motion.size()) / dt);
  return 0;
}

int cmd_gradcheck(const std::string& suite_name) {
  gav::suite::SuiteReport r = gav::suite::run_suite(suite_name);
  std::fputs(r.to_text().c_str(), stdout);
  return r.all_pass() ? 0 : 1;
}

int cmd_eval(const Settings& s, const std::string& ckpt_path,
             const std::string& scene_dir, const std::string& holdout_spec,
             bool use_ground_truth, const std::string& out_path) {
  using namespace gav;
  train::SyntheticScene scene = train::read_scene(scene_dir);
  std::vector<int64_t> views = scene.holdout;
  if (!holdout_spec.empty()) {
    views.clear();
    std::istringstream in(holdout_spec);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      try {
        views.push_back(std::stoll(tok));
      } catch (const std::exception&) {
        throw UsageError("bad holdout view index: '" + tok + "'");
      }
    }
    for (int64_t v : views)
      for (int64_t t : scene.train_views())
        if (v == t)
          throw UsageError("holdout view " + std::to_string(v) +
                           " overlaps the training views");
  }
  splat::GaussianSet canonical;
  if (use_ground_truth) {
    canonical = scene.gt;
  } else {
    if (ckpt_path.empty())
      throw UsageError("eval needs --checkpoint (or --use-ground-truth)");
    train::Trainer trainer(s.train, scene);
    trainer.load_checkpoint(ckpt_path);
    canonical = trainer.predict_canonical();
  }
  train::EvalReport rep = train::evaluate(canonical, scene, views);
  std::string text = rep.to_text();
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw Error("cannot open report file: " + out_path);
    f << text;
  }
  std::fputs(text.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gav: single-image animatable Gaussian avatars, desk scale"};
  app.require_subcommand(1);
  Settings s;

  // make-body
  auto* mb = app.add_subcommand("make-body", "write the procedural humanoid body model");
  std::string mb_out;
  mb->add_option("--out", mb_out, "output .lbm path")->required();

  // make-data
  ConfiguredCommand md(app, s, "make-data", "generate a synthetic training scene");
  std::string md_body, md_out;
  md.cmd->add_option("--body", md_body, "body model .lbm (default: procedural)");
  md.cmd->add_option("--out", md_out, "output scene directory")->required();
  md.add_alias("scene.gaussians",
               md.cmd->add_option("--gaussians", s.scene.n_gaussians, "alias for --scene.gaussians"));
  md.add_alias("scene.train_views",
               md.cmd->add_option("--views", s.scene.n_train_views, "alias for --scene.train_views"));
  md.add_alias("scene.holdout_views",
               md.cmd->add_option("--holdout", s.scene.n_holdout_views, "alias for --scene.holdout_views"));
  md.add_alias("scene.seed",
               md.cmd->add_option("--seed", s.scene_seed, "alias for --scene.seed"));

  // train
  ConfiguredCommand tr(app, s, "train", "fit the network to a scene");
  std::string tr_scene, tr_out, tr_log, tr_resume;
  tr.cmd->add_option("--scene", tr_scene, "scene directory")->required();
  tr.cmd->add_option("--out-checkpoint", tr_out, "checkpoint output path")->required();
  tr.cmd->add_option("--log", tr_log, "loss log file (one line per step)");
  tr.cmd->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr.add_alias("train.iterations",
               tr.cmd->add_option("--iterations", s.train.iterations, "alias for --train.iterations"));

  // reconstruct
  ConfiguredCommand rc(app, s, "reconstruct", "single image -> canonical avatar (.lha)");
  std::string rc_image, rc_crop, rc_body, rc_ckpt, rc_out;
  uint64_t rc_seed = 1;
  rc.cmd->add_option("--image", rc_image, "source body image (.limg)")->required();
  rc.cmd->add_option("--head-crop", rc_crop, "head crop (.limg); derived when omitted");
  rc.cmd->add_option("--body", rc_body, "body model .lbm (default: procedural)");
  rc.cmd->add_option("--checkpoint", rc_ckpt, "trained checkpoint")->required();
  rc.cmd->add_option("--out-avatar", rc_out, "output .lha path")->required();
  rc.cmd->add_option("--anchor-seed", rc_seed, "surface-sampling seed for the anchors");
  rc.add_alias("scene.gaussians",
               rc.cmd->add_option("--gaussians", s.scene.n_gaussians, "alias for --scene.gaussians"));

  // animate
  auto* an = app.add_subcommand("animate", "render an avatar along a motion file");
  std::string an_avatar, an_body, an_motion, an_camera, an_out;
  an->add_option("--avatar", an_avatar, "avatar .lha with skinning data")->required();
  an->add_option("--body", an_body, "body model .lbm for the skeleton (default: procedural)");
  an->add_option("--motion", an_motion, "motion file (text)")->required();
  an->add_option("--camera", an_camera, "camera file (text)")->required();
  an->add_option("--out-dir", an_out, "output frame directory")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  std::string gc_suite;
  gc->add_option("--suite", gc_suite, "ops | losses | renderer | network | end2end")
      ->required()
      ->check(CLI::IsMember(gav::suite::suite_names()));

  // eval
  ConfiguredCommand ev(app, s, "eval", "PSNR/SSIM metrics on holdout views");
  std::string ev_ckpt, ev_scene, ev_holdout, ev_out;
  bool ev_gt = false;
  ev.cmd->add_option("--checkpoint", ev_ckpt, "trained checkpoint");
  ev.cmd->add_option("--scene", ev_scene, "scene directory")->required();
  ev.cmd->add_option("--holdout", ev_holdout, "comma-separated view indices (default: scene holdout)");
  ev.cmd->add_flag("--use-ground-truth", ev_gt, "evaluate the stored ground-truth avatar");
  ev.cmd->add_option("--out", ev_out, "write the report to this file too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*mb) return cmd_make_body(mb_out);
    if (*md.cmd) {
      if (md.finalize()) return 0;
      return cmd_make_data(s, md_body, md_out);
    }
    if (*tr.cmd) {
      if (tr.finalize()) return 0;
      return cmd_train(s, tr_scene, tr_out, tr_log, tr_resume);
    }
    if (*rc.cmd) {
      if (rc.finalize()) return 0;
      return cmd_reconstruct(s, rc_image, rc_crop, rc_body, rc_ckpt, rc_out, rc_seed);
    }
    if (*an) return cmd_animate(an_avatar, an_body, an_motion, an_camera, an_out);
    if (*gc) return cmd_gradcheck(gc_suite);
    if (*ev.cmd) {
      if (ev.finalize()) return 0;
      return cmd_eval(s, ev_ckpt, ev_scene, ev_holdout, ev_gt, ev_out);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
