#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gav/body_model.hpp"

namespace gav {
namespace body {

namespace {

struct MeshBuilder {
  std::vector<double> verts;        // xyz triples
  std::vector<uint32_t> faces;
  std::vector<double> weights;      // V x J rows
  std::vector<uint8_t> region;
  int64_t joint_count;

  explicit MeshBuilder(int64_t j) : joint_count(j) {}

  int64_t num_verts() const { return static_cast<int64_t>(verts.size()) / 3; }

  uint32_t push_vertex(const Vec3& p, const std::vector<double>& w, uint8_t reg) {
    verts.push_back(p.x);
    verts.push_back(p.y);
    verts.push_back(p.z);
    weights.insert(weights.end(), w.begin(), w.end());
    region.push_back(reg);
    return static_cast<uint32_t>(num_verts() - 1);
  }

  void push_face(uint32_t a, uint32_t b, uint32_t c) {
    faces.push_back(a);
    faces.push_back(b);
    faces.push_back(c);
  }
};

struct ChainStop {
  int joint;
  double station;  // along the part axis, in [0,1]
};

std::vector<double> chain_weights(const std::vector<ChainStop>& chain, double t,
                                  int64_t joint_count) {
  std::vector<double> w(static_cast<size_t>(joint_count), 0.0);
  if (t <= chain.front().station) {
    w[chain.front().joint] = 1.0;
    return w;
  }
  if (t >= chain.back().station) {
    w[chain.back().joint] = 1.0;
    return w;
  }
  for (size_t k = 0; k + 1 < chain.size(); ++k) {
    if (t <= chain[k + 1].station) {
      double u = (t - chain[k].station) / (chain[k + 1].station - chain[k].station);
      w[chain[k].joint] = 1.0 - u;
      w[chain[k + 1].joint] = u;
      return w;
    }
  }
  w[chain.back().joint] = 1.0;
  return w;
}

void frame_for_axis(const Vec3& axis, Vec3& u, Vec3& v) {
  Vec3 ref = std::abs(axis.y) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
  u = axis.cross(ref).normalized();
  v = axis.cross(u);
}

/// Capped tube from a to b: `rings` circles plus two pole vertices.
void add_tube(MeshBuilder& mb, const Vec3& a, const Vec3& b, double radius, int rings,
              int slices, const std::vector<ChainStop>& chain, uint8_t reg) {
  Vec3 axis = (b - a).normalized();
  Vec3 u, v;
  frame_for_axis(axis, u, v);
  uint32_t base = static_cast<uint32_t>(mb.num_verts());
  for (int r = 0; r < rings; ++r) {
    double t = static_cast<double>(r) / (rings - 1);
    Vec3 c = a + (b - a) * t;
    auto w = chain_weights(chain, t, mb.joint_count);
    for (int s = 0; s < slices; ++s) {
      double ang = 2.0 * M_PI * s / slices;
      Vec3 p = c + u * (radius * std::cos(ang)) + v * (radius * std::sin(ang));
      mb.push_vertex(p, w, reg);
    }
  }
  uint32_t pole_a = mb.push_vertex(a, chain_weights(chain, 0.0, mb.joint_count), reg);
  uint32_t pole_b = mb.push_vertex(b, chain_weights(chain, 1.0, mb.joint_count), reg);
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < slices; ++s) {
      uint32_t s1 = static_cast<uint32_t>((s + 1) % slices);
      uint32_t i0 = base + r * slices + s;
      uint32_t i1 = base + r * slices + s1;
      uint32_t i2 = base + (r + 1) * slices + s;
      uint32_t i3 = base + (r + 1) * slices + s1;
      mb.push_face(i0, i2, i1);
      mb.push_face(i1, i2, i3);
    }
  }
  for (int s = 0; s < slices; ++s) {
    uint32_t s1 = static_cast<uint32_t>((s + 1) % slices);
    mb.push_face(pole_a, base + s, base + s1);
    mb.push_face(pole_b, base + (rings - 1) * slices + s1, base + (rings - 1) * slices + s);
  }
}

void add_sphere(MeshBuilder& mb, const Vec3& center, double radius, int stacks, int slices,
                int joint, uint8_t reg) {
  std::vector<double> w(static_cast<size_t>(mb.joint_count), 0.0);
  w[joint] = 1.0;
  uint32_t top = mb.push_vertex(center + Vec3{0, radius, 0}, w, reg);
  uint32_t base = static_cast<uint32_t>(mb.num_verts());
  for (int st = 1; st < stacks; ++st) {
    double phi = M_PI * st / stacks;
    for (int s = 0; s < slices; ++s) {
      double ang = 2.0 * M_PI * s / slices;
      Vec3 p = center + Vec3{radius * std::sin(phi) * std::cos(ang), radius * std::cos(phi),
                             radius * std::sin(phi) * std::sin(ang)};
      mb.push_vertex(p, w, reg);
    }
  }
  uint32_t bottom = mb.push_vertex(center - Vec3{0, radius, 0}, w, reg);
  for (int s = 0; s < slices; ++s) {
    uint32_t s1 = static_cast<uint32_t>((s + 1) % slices);
    mb.push_face(top, base + s1, base + s);
    mb.push_face(bottom, base + (stacks - 2) * slices + s, base + (stacks - 2) * slices + s1);
  }
  for (int st = 0; st + 2 < stacks; ++st) {
    for (int s = 0; s < slices; ++s) {
      uint32_t s1 = static_cast<uint32_t>((s + 1) % slices);
      uint32_t i0 = base + st * slices + s;
      uint32_t i1 = base + st * slices + s1;
      uint32_t i2 = base + (st + 1) * slices + s;
      uint32_t i3 = base + (st + 1) * slices + s1;
      mb.push_face(i0, i1, i2);
      mb.push_face(i1, i3, i2);
    }
  }
}

enum JointId {
  kPelvis = 0, kSpine, kNeck, kHeadJoint,
  kLHip, kLKnee, kLAnkle,
  kRHip, kRKnee, kRAnkle,
  kLShoulder, kLElbow, kLWrist,
  kRShoulder, kRElbow, kRWrist,
  kJointCount
};

}  // namespace

BodyTemplate generate_humanoid(const GeneratorParams& p) {
  const std::vector<Vec3> joint_pos = {
      {0.00, 0.95, 0},  // pelvis
      {0.00, 1.15, 0},  // spine
      {0.00, 1.45, 0},  // neck
      {0.00, 1.55, 0},  // head
      {0.10, 0.90, 0},  {0.10, 0.50, 0},  {0.10, 0.10, 0},   // left leg
      {-0.10, 0.90, 0}, {-0.10, 0.50, 0}, {-0.10, 0.10, 0},  // right leg
      {0.20, 1.40, 0},  {0.45, 1.40, 0},  {0.70, 1.40, 0},   // left arm
      {-0.20, 1.40, 0}, {-0.45, 1.40, 0}, {-0.70, 1.40, 0},  // right arm
  };
  const std::vector<int32_t> parents = {-1, 0,  1,  2,  0,  4,  5,  0,
                                        7,  8,  2,  10, 11, 2,  13, 14};

  MeshBuilder mb(kJointCount);
  // torso spans pelvis..neck: stations of the chain joints along its axis
  Vec3 torso_a{0, 0.90, 0}, torso_b{0, 1.45, 0};
  auto station = [&](const Vec3& j) { return (j.y - torso_a.y) / (torso_b.y - torso_a.y); };
  add_tube(mb, torso_a, torso_b, 0.14, p.torso_rings, p.torso_slices,
           {{kPelvis, station(joint_pos[kPelvis])},
            {kSpine, station(joint_pos[kSpine])},
            {kNeck, 1.0}},
           kBody);
  add_sphere(mb, {0, 1.62, 0}, 0.11, p.head_stacks, p.head_slices, kHeadJoint, kHead);
  struct Limb {
    int j0, j1, j2;
    double radius;
  };
  for (const Limb& limb : {Limb{kLHip, kLKnee, kLAnkle, 0.06},
                           Limb{kRHip, kRKnee, kRAnkle, 0.06},
                           Limb{kLShoulder, kLElbow, kLWrist, 0.045},
                           Limb{kRShoulder, kRElbow, kRWrist, 0.045}}) {
    add_tube(mb, joint_pos[limb.j0], joint_pos[limb.j2], limb.radius, p.limb_rings,
             p.limb_slices, {{limb.j0, 0.0}, {limb.j1, 0.5}, {limb.j2, 1.0}}, kBody);
  }

  BodyTemplate t;
  int64_t v = mb.num_verts();
  t.vertices = Tensor({v, 3}, std::move(mb.verts));
  t.faces = std::move(mb.faces);
  t.parents = parents;
  t.skin_weights = Tensor({v, kJointCount}, std::move(mb.weights));
  t.region = std::move(mb.region);

  // Regressor: the 12 nearest vertices of each authored joint location,
  // uniform weights; rest joints are then re-derived through it so that
  // shape changes and the stored skeleton stay consistent.
  const int64_t k_near = 12;
  t.joint_regressor = Tensor({kJointCount, v});
  for (int64_t j = 0; j < kJointCount; ++j) {
    std::vector<std::pair<double, int64_t>> dist(static_cast<size_t>(v));
    for (int64_t i = 0; i < v; ++i) {
      Vec3 pv{t.vertices.at2(i, 0), t.vertices.at2(i, 1), t.vertices.at2(i, 2)};
      dist[static_cast<size_t>(i)] = {(pv - joint_pos[j]).norm(), i};
    }
    std::sort(dist.begin(), dist.end());
    for (int64_t k = 0; k < k_near; ++k)
      t.joint_regressor.at2(j, dist[static_cast<size_t>(k)].second) = 1.0 / k_near;
  }
  t.joints = regress_joints(t, t.vertices);

  // Shape modes: overall scale, height, width, belly.
  const int64_t b = 4;
  t.shape_basis = Tensor({b, v, 3});
  Vec3 pelvis{t.joints.at2(kPelvis, 0), t.joints.at2(kPelvis, 1), t.joints.at2(kPelvis, 2)};
  for (int64_t i = 0; i < v; ++i) {
    Vec3 pv{t.vertices.at2(i, 0), t.vertices.at2(i, 1), t.vertices.at2(i, 2)};
    Vec3 d0 = (pv - pelvis) * 0.06;
    t.shape_basis[(0 * v + i) * 3 + 0] = d0.x;
    t.shape_basis[(0 * v + i) * 3 + 1] = d0.y;
    t.shape_basis[(0 * v + i) * 3 + 2] = d0.z;
    t.shape_basis[(1 * v + i) * 3 + 1] = 0.10 * (pv.y - pelvis.y);
    t.shape_basis[(2 * v + i) * 3 + 0] = 0.08 * pv.x;
    double belly = std::exp(-std::pow((pv.y - 1.10) / 0.20, 2.0));
    t.shape_basis[(3 * v + i) * 3 + 0] = 0.05 * belly * pv.x;
    t.shape_basis[(3 * v + i) * 3 + 2] = 0.05 * belly * pv.z;
  }

  t.validate();
  return t;
}

}  // namespace body
}  // namespace gav
