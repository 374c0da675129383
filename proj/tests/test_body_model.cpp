#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "gav/body_model.hpp"
#include "gav/rng.hpp"

using namespace gav;
using namespace gav::body;

namespace {

// Minimal valid template: one triangle, two joints.
BodyTemplate tiny_template() {
  BodyTemplate t;
  t.vertices = Tensor({3, 3}, {0, 0, 0, 1, 0, 0, 0, 1, 0});
  t.faces = {0, 1, 2};
  t.joints = Tensor({2, 3}, {0, 0, 0, 1, 0, 0});
  t.parents = {-1, 0};
  t.skin_weights = Tensor({3, 2}, {1, 0, 0.5, 0.5, 0, 1});
  t.shape_basis = Tensor({1, 3, 3});
  t.joint_regressor = Tensor({2, 3}, {1, 0, 0, 0, 1, 0});
  t.region = {kBody, kBody, kHead};
  return t;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::vector<char>(std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>());
}

bool near_identity(const Mat4& m, double tol) {
  Mat4 id = Mat4::identity();
  for (int i = 0; i < 16; ++i)
    if (std::abs(m.m[i] - id.m[i]) > tol) return false;
  return true;
}

}  // namespace

TEST_CASE("generated humanoid has the documented dimensions") {
  BodyTemplate t = generate_humanoid();
  CHECK(t.num_vertices() == 402);
  CHECK(t.num_joints() == 16);
  CHECK(t.num_shape_dims() == 4);
  CHECK(t.num_faces() > 0);
  CHECK_NOTHROW(t.validate());
  int head = 0, bodyv = 0;
  for (uint8_t r : t.region) (r == kHead ? head : bodyv)++;
  CHECK(head == 56);  // the head sphere
  CHECK(bodyv == 402 - 56);
}

TEST_CASE("generated joints equal their regressed positions") {
  BodyTemplate t = generate_humanoid();
  Tensor j = regress_joints(t, t.vertices);
  for (int64_t i = 0; i < j.size(); ++i)
    CHECK(j[i] == doctest::Approx(t.joints[i]).epsilon(1e-12));
}

TEST_CASE("body model file roundtrip is byte-exact") {
  BodyTemplate t = generate_humanoid();
  std::string p1 = "tmp_body_a.lbm", p2 = "tmp_body_b.lbm";
  save_body_model(t, p1);
  BodyTemplate u = load_body_model(p1);
  save_body_model(u, p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(u.num_vertices() == t.num_vertices());
  CHECK(u.faces == t.faces);
  CHECK(u.parents == t.parents);
  CHECK(u.region == t.region);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("validation rejects broken templates with descriptive messages") {
  SUBCASE("unnormalized skin weights") {
    BodyTemplate t = tiny_template();
    t.skin_weights.at2(1, 0) = 0.9;
    CHECK_THROWS_WITH_AS(t.validate(),
                         doctest::Contains("weights row 1 not normalized"), Error);
  }
  SUBCASE("negative skin weight") {
    BodyTemplate t = tiny_template();
    t.skin_weights.at2(0, 0) = -0.1;
    t.skin_weights.at2(0, 1) = 1.1;
    CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("negative skin weight"), Error);
  }
  SUBCASE("bad root sentinel") {
    BodyTemplate t = tiny_template();
    t.parents[0] = 0;
    CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("root sentinel"), Error);
  }
  SUBCASE("parent ordering violated") {
    BodyTemplate t = tiny_template();
    t.parents[1] = 1;
    CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("parents[1]"), Error);
  }
  SUBCASE("face index out of range") {
    BodyTemplate t = tiny_template();
    t.faces[2] = 7;
    CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("out of range"), Error);
  }
  SUBCASE("regressor row not normalized") {
    BodyTemplate t = tiny_template();
    t.joint_regressor.at2(1, 1) = 0.5;
    CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("regressor row 1"), Error);
  }
  SUBCASE("missing head region") {
    BodyTemplate t = tiny_template();
    t.region = {kBody, kBody, kBody};
    CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("head"), Error);
  }
}

TEST_CASE("loader reports truncation and corruption") {
  BodyTemplate t = tiny_template();
  std::string path = "tmp_body_trunc.lbm";
  save_body_model(t, path);
  auto bytes = slurp(path);

  SUBCASE("truncated") {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    f.close();
    CHECK_THROWS_WITH_AS(load_body_model(path), doctest::Contains("truncated"), Error);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    CHECK_THROWS_WITH_AS(load_body_model(path), doctest::Contains("magic"), Error);
  }
  std::remove(path.c_str());
}

TEST_CASE("rest pose gives identity joint transforms") {
  BodyTemplate t = generate_humanoid();
  auto world = forward_kinematics(t, Pose::rest(t.num_joints()));
  for (const Mat4& m : world) CHECK(near_identity(m, 1e-14));
}

TEST_CASE("two-bone chain rotates the child joint about the root") {
  BodyTemplate t = tiny_template();
  Pose pose = Pose::rest(2);
  pose.axis_angle.at2(0, 2) = M_PI / 2;  // root: quarter turn about z
  auto world = forward_kinematics(t, pose);
  // child rest position (1,0,0) carried by the root's transform
  Vec3 p = world[1].transform_point({1, 0, 0});
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rotation pivots about the rest joint location") {
  BodyTemplate t = tiny_template();
  t.joints = Tensor({2, 3}, {1, 0, 0, 2, 0, 0});
  Pose pose = Pose::rest(2);
  pose.axis_angle.at2(0, 2) = M_PI;  // half turn about z at joint (1,0,0)
  auto world = forward_kinematics(t, pose);
  Vec3 p = world[0].transform_point({2, 0, 0});
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(p.y) < 1e-12);
}

TEST_CASE("root translation shifts the whole chain") {
  BodyTemplate t = generate_humanoid();
  Pose pose = Pose::rest(t.num_joints());
  pose.root_translation = {1, 2, 3};
  auto world = forward_kinematics(t, pose);
  for (const Mat4& m : world) {
    Vec3 p = m.transform_point({0.1, 0.2, 0.3});
    CHECK(p.x == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(p.y == doctest::Approx(2.2).epsilon(1e-12));
    CHECK(p.z == doctest::Approx(3.3).epsilon(1e-12));
  }
}

TEST_CASE("forward kinematics transforms stay rigid for random poses") {
  BodyTemplate t = generate_humanoid();
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    Pose pose = Pose::rest(t.num_joints());
    for (int64_t i = 0; i < pose.axis_angle.size(); ++i)
      pose.axis_angle[i] = rng.normal() * 0.5;
    for (const Mat4& m : forward_kinematics(t, pose)) {
      Mat3 r = m.rotation();
      Mat3 rtr = r.transposed() * r;
      Mat3 id = Mat3::identity();
      for (int i = 0; i < 9; ++i) CHECK(std::abs(rtr.m[i] - id.m[i]) < 1e-10);
      CHECK(r.det() == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("shape blending is linear in the coefficients") {
  BodyTemplate t = generate_humanoid();
  Tensor b1({4}, {0.3, -0.2, 0.5, 0.1});
  Tensor b2({4}, {-0.7, 0.4, 0.0, 0.9});
  Tensor sum({4});
  for (int i = 0; i < 4; ++i) sum[i] = b1[i] + b2[i];
  Tensor v1 = apply_shape(t, b1), v2 = apply_shape(t, b2), vs = apply_shape(t, sum);
  for (int64_t i = 0; i < vs.size(); ++i)
    CHECK(std::abs((v1[i] + v2[i] - t.vertices[i]) - vs[i]) < 1e-12);
  // zero coefficients reproduce the template exactly
  CHECK(apply_shape(t, Tensor({4})).bit_equal(t.vertices));
}

TEST_CASE("surface sampling is deterministic and well-formed") {
  BodyTemplate t = generate_humanoid();
  SampledPoints a = sample_surface_points(t, 500, 7);
  SampledPoints b = sample_surface_points(t, 500, 7);
  CHECK(a.positions.bit_equal(b.positions));
  CHECK(a.face_index == b.face_index);
  SampledPoints c = sample_surface_points(t, 500, 8);
  CHECK_FALSE(a.positions.bit_equal(c.positions));

  for (int64_t i = 0; i < a.count(); ++i) {
    double s = 0;
    for (int d = 0; d < 3; ++d) {
      CHECK(a.barycentric.at2(i, d) >= 0.0);
      s += a.barycentric.at2(i, d);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    // position reconstructs from the face and barycentric coordinates
    int64_t fi = a.face_index[static_cast<size_t>(i)];
    for (int d = 0; d < 3; ++d) {
      double p = 0;
      for (int k = 0; k < 3; ++k)
        p += a.barycentric.at2(i, k) * t.vertices.at2(t.faces[fi * 3 + k], d);
      CHECK(p == doctest::Approx(a.positions.at2(i, d)).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampling density follows triangle area") {
  // two triangles in one template, areas 0.5 and 2.0
  BodyTemplate t = tiny_template();
  t.vertices = Tensor({6, 3}, {0, 0, 0, 1, 0, 0, 0, 1, 0,
                               3, 0, 0, 5, 0, 0, 3, 2, 0});
  t.faces = {0, 1, 2, 3, 4, 5};
  t.skin_weights = Tensor({6, 2});
  for (int64_t i = 0; i < 6; ++i) t.skin_weights.at2(i, 0) = 1.0;
  t.shape_basis = Tensor({1, 6, 3});
  t.joint_regressor = Tensor({2, 6});
  t.joint_regressor.at2(0, 0) = 1.0;
  t.joint_regressor.at2(1, 1) = 1.0;
  t.region = {kBody, kBody, kBody, kHead, kHead, kHead};
  t.validate();

  SampledPoints s = sample_surface_points(t, 10000, 123);
  int64_t big = 0;
  for (int64_t fi : s.face_index) big += (fi == 1);
  CHECK(big > 7600);  // expected 8000 of 10000
  CHECK(big < 8400);
  // region labels follow the face
  for (int64_t i = 0; i < s.count(); ++i)
    CHECK(s.region[static_cast<size_t>(i)] ==
          (s.face_index[static_cast<size_t>(i)] == 1 ? kHead : kBody));
}

TEST_CASE("head region sits above the shoulders") {
  BodyTemplate t = generate_humanoid();
  for (int64_t i = 0; i < t.num_vertices(); ++i)
    if (t.region[static_cast<size_t>(i)] == kHead) CHECK(t.vertices.at2(i, 1) > 1.45);
}
