#include "gav/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gav/binio.hpp"
#include "gav/rng.hpp"

namespace gav {
namespace body {

namespace {
constexpr uint32_t kVersion = 1;
}

void BodyTemplate::validate() const {
  int64_t v = num_vertices(), j = num_joints(), b = num_shape_dims();
  int64_t f = num_faces();
  if (vertices.shape() != Shape{v, 3}) throw Error("body model: vertices must be Vx3");
  if (v < 3) throw Error("body model: too few vertices");
  vertices.check_finite("body model vertices");
  if (static_cast<int64_t>(faces.size()) != f * 3 || f < 1)
    throw Error("body model: faces must be Fx3");
  for (size_t i = 0; i < faces.size(); ++i)
    if (faces[i] >= static_cast<uint32_t>(v))
      throw Error("body model: face vertex index out of range at entry " + std::to_string(i));
  if (joints.shape() != Shape{j, 3} || j < 1) throw Error("body model: joints must be Jx3");
  joints.check_finite("body model joints");
  if (static_cast<int64_t>(parents.size()) != j)
    throw Error("body model: parents length must equal J");
  if (parents[0] != -1) throw Error("body model: parents[0] must be the root sentinel -1");
  for (int64_t i = 1; i < j; ++i)
    if (parents[i] < 0 || parents[i] >= i)
      throw Error("body model: parents[" + std::to_string(i) + "] must be < " +
                  std::to_string(i));
  if (skin_weights.shape() != Shape{v, j})
    throw Error("body model: skin weights must be VxJ");
  for (int64_t i = 0; i < v; ++i) {
    double s = 0;
    for (int64_t k = 0; k < j; ++k) {
      double w = skin_weights.at2(i, k);
      if (w < 0)
        throw Error("body model: negative skin weight in row " + std::to_string(i));
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-6)
      throw Error("body model: weights row " + std::to_string(i) + " not normalized");
  }
  if (shape_basis.shape() != Shape{b, v, 3})
    throw Error("body model: shape basis must be BxVx3");
  shape_basis.check_finite("body model shape basis");
  if (joint_regressor.shape() != Shape{j, v})
    throw Error("body model: joint regressor must be JxV");
  for (int64_t i = 0; i < j; ++i) {
    double s = 0;
    for (int64_t k = 0; k < v; ++k) s += joint_regressor.at2(i, k);
    if (std::abs(s - 1.0) > 1e-6)
      throw Error("body model: regressor row " + std::to_string(i) + " not normalized");
  }
  if (static_cast<int64_t>(region.size()) != v)
    throw Error("body model: region labels length must equal V");
  bool head = false, bodyv = false;
  for (uint8_t r : region) {
    if (r == kHead) head = true;
    else if (r == kBody) bodyv = true;
    else throw Error("body model: invalid region label");
  }
  if (!head || !bodyv)
    throw Error("body model: needs at least one head and one body vertex");
}

void save_body_model(const BodyTemplate& t, const std::string& path) {
  t.validate();
  uint32_t v = static_cast<uint32_t>(t.num_vertices());
  uint32_t f = static_cast<uint32_t>(t.num_faces());
  uint32_t j = static_cast<uint32_t>(t.num_joints());
  uint32_t b = static_cast<uint32_t>(t.num_shape_dims());
  BinWriter w;
  w.tag("LBM1");
  w.u32(kVersion);
  auto section = [&](const char tag[5], auto&& payload) {
    w.tag(tag);
    size_t at = w.size();
    w.u64(0);
    size_t begin = w.size();
    payload();
    w.patch_u64(at, w.size() - begin);
  };
  section("HDRC", [&] { w.u32(v); w.u32(f); w.u32(j); w.u32(b); });
  section("VERT", [&] { w.f32_array(t.vertices); });
  section("FACE", [&] { for (uint32_t idx : t.faces) w.u32(idx); });
  section("JNTS", [&] { w.f32_array(t.joints); });
  section("PRNT", [&] { for (int32_t p : t.parents) w.i32(p); });
  section("SKIN", [&] { w.f32_array(t.skin_weights); });
  section("SHPB", [&] { w.f32_array(t.shape_basis); });
  section("JREG", [&] { w.f32_array(t.joint_regressor); });
  section("REGN", [&] { for (uint8_t r : t.region) w.u8(r); });
  w.save(path);
}

BodyTemplate load_body_model(const std::string& path) {
  BinReader r = BinReader::from_file(path);
  r.set_context("header");
  if (r.tag() != "LBM1") throw Error(path + ": bad magic, not a body model file");
  uint32_t ver = r.u32();
  if (ver != kVersion)
    throw Error(path + ": unsupported version " + std::to_string(ver));

  BodyTemplate t;
  bool have_hdr = false;
  uint32_t v = 0, f = 0, j = 0, b = 0;
  std::set<std::string> seen;
  while (!r.eof()) {
    r.set_context("section table");
    std::string tag = r.tag();
    uint64_t len = r.u64();
    r.set_context(tag);
    if (r.remaining() < len) throw Error("truncated file in section " + tag);
    if (!seen.insert(tag).second) throw Error(path + ": duplicate section " + tag);
    if (tag == "HDRC") {
      v = r.u32(); f = r.u32(); j = r.u32(); b = r.u32();
      have_hdr = true;
    } else if (!have_hdr) {
      throw Error(path + ": section " + tag + " before HDRC");
    } else if (tag == "VERT") {
      t.vertices = r.f32_tensor({v, 3});
    } else if (tag == "FACE") {
      t.faces.resize(static_cast<size_t>(f) * 3);
      for (auto& idx : t.faces) idx = r.u32();
    } else if (tag == "JNTS") {
      t.joints = r.f32_tensor({j, 3});
    } else if (tag == "PRNT") {
      t.parents.resize(j);
      for (auto& p : t.parents) p = r.i32();
    } else if (tag == "SKIN") {
      t.skin_weights = r.f32_tensor({v, j});
    } else if (tag == "SHPB") {
      t.shape_basis = r.f32_tensor({b, v, 3});
    } else if (tag == "JREG") {
      t.joint_regressor = r.f32_tensor({j, v});
    } else if (tag == "REGN") {
      t.region.resize(v);
      for (auto& reg : t.region) reg = r.u8();
    } else {
      throw Error(path + ": unknown section " + tag);
    }
  }
  for (const char* required :
       {"HDRC", "VERT", "FACE", "JNTS", "PRNT", "SKIN", "SHPB", "JREG", "REGN"}) {
    if (!seen.count(required))
      throw Error(path + ": missing section " + required);
  }
  t.validate();
  return t;
}

Tensor apply_shape(const BodyTemplate& t, const Tensor& beta) {
  int64_t b = t.num_shape_dims();
  if (beta.shape() != Shape{b})
    throw Error("apply_shape: beta length " + shape_str(beta.shape()) +
                " does not match B=" + std::to_string(b));
  Tensor out = t.vertices;
  int64_t n = out.size();
  for (int64_t k = 0; k < b; ++k) {
    double c = beta[k];
    if (c == 0.0) continue;
    const double* basis = t.shape_basis.data() + k * n;
    for (int64_t i = 0; i < n; ++i) out[i] += c * basis[i];
  }
  return out;
}

Tensor regress_joints(const BodyTemplate& t, const Tensor& vertices) {
  if (t.joint_regressor.rank() != 2) throw Error("regress_joints: regressor must be JxV");
  int64_t j = t.joint_regressor.extent(0), v = t.joint_regressor.extent(1);
  if (vertices.shape() != Shape{v, 3}) throw Error("regress_joints: vertices must be Vx3");
  Tensor out({j, 3});
  for (int64_t k = 0; k < j; ++k) {
    const double* row = t.joint_regressor.data() + k * v;
    for (int64_t i = 0; i < v; ++i) {
      double w = row[i];
      if (w == 0.0) continue;
      out.at2(k, 0) += w * vertices.at2(i, 0);
      out.at2(k, 1) += w * vertices.at2(i, 1);
      out.at2(k, 2) += w * vertices.at2(i, 2);
    }
  }
  return out;
}

std::vector<Mat4> forward_kinematics(const BodyTemplate& t, const Pose& pose) {
  int64_t j = t.num_joints();
  if (pose.axis_angle.shape() != Shape{j, 3})
    throw Error("forward_kinematics: pose must be Jx3");
  pose.axis_angle.check_finite("pose");
  std::vector<Mat4> world(static_cast<size_t>(j));
  for (int64_t k = 0; k < j; ++k) {
    Vec3 aa{pose.axis_angle.at2(k, 0), pose.axis_angle.at2(k, 1), pose.axis_angle.at2(k, 2)};
    Vec3 c{t.joints.at2(k, 0), t.joints.at2(k, 1), t.joints.at2(k, 2)};
    Mat3 rot = axis_angle_to_mat3(aa);
    // rotation about the rest joint location: T(c) R T(-c)
    Mat4 local = Mat4::from_rt(rot, c - rot * c);
    if (k == 0) {
      world[0] = Mat4::translation(pose.root_translation) * local;
    } else {
      world[static_cast<size_t>(k)] = world[static_cast<size_t>(t.parents[k])] * local;
    }
  }
  return world;
}

SampledPoints sample_surface_points(const BodyTemplate& t, int64_t n, uint64_t seed) {
  if (n < 1) throw Error("sample_surface_points: n must be >= 1");
  int64_t f = t.num_faces();
  std::vector<double> cum(static_cast<size_t>(f));
  double total = 0;
  for (int64_t i = 0; i < f; ++i) {
    Vec3 a{t.vertices.at2(t.faces[i * 3], 0), t.vertices.at2(t.faces[i * 3], 1),
           t.vertices.at2(t.faces[i * 3], 2)};
    Vec3 b{t.vertices.at2(t.faces[i * 3 + 1], 0), t.vertices.at2(t.faces[i * 3 + 1], 1),
           t.vertices.at2(t.faces[i * 3 + 1], 2)};
    Vec3 c{t.vertices.at2(t.faces[i * 3 + 2], 0), t.vertices.at2(t.faces[i * 3 + 2], 1),
           t.vertices.at2(t.faces[i * 3 + 2], 2)};
    total += 0.5 * (b - a).cross(c - a).norm();
    cum[static_cast<size_t>(i)] = total;
  }
  if (total <= 0) throw Error("sample_surface_points: degenerate mesh (zero area)");

  SampledPoints out;
  out.positions = Tensor({n, 3});
  out.barycentric = Tensor({n, 3});
  out.face_index.resize(static_cast<size_t>(n));
  out.region.resize(static_cast<size_t>(n));
  Rng rng(seed);
  for (int64_t i = 0; i < n; ++i) {
    double r = rng.uniform() * total;
    int64_t fi = static_cast<int64_t>(
        std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
    if (fi >= f) fi = f - 1;
    double u = rng.uniform(), vv = rng.uniform();
    if (u + vv > 1.0) {
      u = 1.0 - u;
      vv = 1.0 - vv;
    }
    double w0 = 1.0 - u - vv;
    out.face_index[static_cast<size_t>(i)] = fi;
    out.barycentric.at2(i, 0) = w0;
    out.barycentric.at2(i, 1) = u;
    out.barycentric.at2(i, 2) = vv;
    uint32_t ia = t.faces[fi * 3], ib = t.faces[fi * 3 + 1], ic = t.faces[fi * 3 + 2];
    for (int d = 0; d < 3; ++d)
      out.positions.at2(i, d) = w0 * t.vertices.at2(ia, d) + u * t.vertices.at2(ib, d) +
                                vv * t.vertices.at2(ic, d);
    int head_votes = (t.region[ia] == kHead) + (t.region[ib] == kHead) + (t.region[ic] == kHead);
    out.region[static_cast<size_t>(i)] = head_votes * 2 >= 3 ? kHead : kBody;
  }
  return out;
}

}  // namespace body
}  // namespace gav
