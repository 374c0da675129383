#include "gav/geometry.hpp"

namespace gav {

Quat mat3_to_quat(const Mat3& r) {
  double t = r.at(0, 0) + r.at(1, 1) + r.at(2, 2);
  Quat q;
  if (t > 0) {
    double s = std::sqrt(t + 1.0) * 2;
    q = {0.25 * s, (r.at(2, 1) - r.at(1, 2)) / s, (r.at(0, 2) - r.at(2, 0)) / s,
         (r.at(1, 0) - r.at(0, 1)) / s};
  } else if (r.at(0, 0) > r.at(1, 1) && r.at(0, 0) > r.at(2, 2)) {
    double s = std::sqrt(1.0 + r.at(0, 0) - r.at(1, 1) - r.at(2, 2)) * 2;
    q = {(r.at(2, 1) - r.at(1, 2)) / s, 0.25 * s, (r.at(0, 1) + r.at(1, 0)) / s,
         (r.at(0, 2) + r.at(2, 0)) / s};
  } else if (r.at(1, 1) > r.at(2, 2)) {
    double s = std::sqrt(1.0 + r.at(1, 1) - r.at(0, 0) - r.at(2, 2)) * 2;
    q = {(r.at(0, 2) - r.at(2, 0)) / s, (r.at(0, 1) + r.at(1, 0)) / s, 0.25 * s,
         (r.at(1, 2) + r.at(2, 1)) / s};
  } else {
    double s = std::sqrt(1.0 + r.at(2, 2) - r.at(0, 0) - r.at(1, 1)) * 2;
    q = {(r.at(1, 0) - r.at(0, 1)) / s, (r.at(0, 2) + r.at(2, 0)) / s,
         (r.at(1, 2) + r.at(2, 1)) / s, 0.25 * s};
  }
  if (q[0] < 0) q = {-q[0], -q[1], -q[2], -q[3]};
  return quat_normalized(q);
}

Mat3 axis_angle_to_mat3(const Vec3& aa) {
  double theta = aa.norm();
  if (theta < 1e-12) {
    // second-order small-angle expansion keeps this smooth through zero
    Mat3 k;
    k.m = {0, -aa.z, aa.y, aa.z, 0, -aa.x, -aa.y, aa.x, 0};
    Mat3 r = Mat3::identity();
    for (int i = 0; i < 9; ++i) r.m[i] += k.m[i];
    Mat3 k2 = k * k;
    for (int i = 0; i < 9; ++i) r.m[i] += 0.5 * k2.m[i];
    return r;
  }
  Vec3 axis = aa * (1.0 / theta);
  double c = std::cos(theta), s = std::sin(theta), t = 1 - c;
  Mat3 r;
  r.m = {t * axis.x * axis.x + c,          t * axis.x * axis.y - s * axis.z,
         t * axis.x * axis.z + s * axis.y, t * axis.x * axis.y + s * axis.z,
         t * axis.y * axis.y + c,          t * axis.y * axis.z - s * axis.x,
         t * axis.x * axis.z - s * axis.y, t * axis.y * axis.z + s * axis.x,
         t * axis.z * axis.z + c};
  return r;
}

Mat3 polar_rotation(const Mat3& m) {
  if (m.det() <= 1e-8) throw Error("polar_rotation: non-positive determinant");
  Mat3 x = m;
  for (int it = 0; it < 64; ++it) {
    Mat3 xit = x.inverse().transposed();
    Mat3 next;
    double diff = 0;
    for (int i = 0; i < 9; ++i) {
      next.m[i] = 0.5 * (x.m[i] + xit.m[i]);
      diff += std::abs(next.m[i] - x.m[i]);
    }
    x = next;
    if (diff < 1e-14) break;
  }
  return x;
}

}  // namespace gav
