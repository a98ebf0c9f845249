#include <cmath>

#include "pvvs/perception.hpp"
#include "pvvs/simd/kernels.hpp"

namespace pvvs {

void PvScene::validate() const {
  if (!(panel_width > 0.0) || !(panel_length > 0.0) || panel_count <= 0) {
    throw Error("config", "array width and length must be positive");
  }
  if (!(edge_thickness > 0.0) || edge_thickness > panel_width / 2) {
    throw Error("config", "edge thickness must be in (0, width/2]");
  }
  if (!(direction.norm() > 0.0)) throw Error("config", "array direction must be non-zero");
  if (!(ground_z < array_z)) throw Error("config", "ground must lie below the array");
}

Vec2 PvScene::left_normal() const {
  const Vec2 d = direction.normalized();
  return {-d.y(), d.x()};
}

Mat3 camera_rotation_world(double psi, double pitch, double roll, const CameraRig& rig) {
  const Mat3 R_wb = (Eigen::AngleAxisd(psi, Vec3::UnitZ()) *
                     Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                     Eigen::AngleAxisd(roll, Vec3::UnitX()))
                        .toRotationMatrix();
  return R_wb * rig.R_bc;
}

EdgeImage render_edge_mask(const PvScene& scene, const Pose4& cam_pose, const CameraRig& rig) {
  return render_edge_mask(scene, Vec3(cam_pose.x, cam_pose.y, cam_pose.z),
                          camera_rotation_world(cam_pose.psi, 0.0, 0.0, rig), rig);
}

EdgeImage render_edge_mask(const PvScene& scene, const Vec3& cam_position, const Mat3& R_wc,
                           const CameraRig& rig) {
  EdgeImage img;
  img.width = rig.image_width;
  img.height = rig.image_height;
  img.mask.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  img.depth.assign(img.mask.size(), 0.f);

  const Vec2 dir = scene.direction.normalized();
  const Vec2 nrm = scene.left_normal();
  const Vec2 rel = cam_position.head<2>() - scene.origin;
  const Vec3 c0 = R_wc.col(0), c1 = R_wc.col(1), c2 = R_wc.col(2);
  const double h_array = cam_position.z() - scene.array_z;
  const double h_ground = cam_position.z() - scene.ground_z;

  simd::RenderRow row;
  row.x0 = static_cast<float>((0.5 - rig.cx()) / rig.lambda);
  row.dx = static_cast<float>(1.0 / rig.lambda);
  row.negdz_s = static_cast<float>(-c0.z());
  row.perp_s = static_cast<float>(nrm.dot(c0.head<2>()));
  row.along_s = static_cast<float>(dir.dot(c0.head<2>()));
  row.perp0 = static_cast<float>(nrm.dot(rel));
  row.along0 = static_cast<float>(dir.dot(rel));
  row.h_array = static_cast<float>(h_array);
  row.h_ground = static_cast<float>(h_ground);
  row.half_width = static_cast<float>(0.5 * scene.width());
  row.inner_edge = static_cast<float>(0.5 * scene.width() - scene.edge_thickness);
  // Camera under the panel plane: the array is not visible.
  row.length = h_array > 0.0 ? static_cast<float>(scene.length()) : -1.f;

  const simd::KernelSet& k = simd::active_kernels();
  for (int j = 0; j < img.height; ++j) {
    const double yn = (j + 0.5 - rig.cy()) / rig.lambda;
    const Vec3 base = c1 * yn + c2;
    row.negdz_b = static_cast<float>(-base.z());
    row.perp_b = static_cast<float>(nrm.dot(base.head<2>()));
    row.along_b = static_cast<float>(dir.dot(base.head<2>()));
    const std::size_t off = img.index(0, j);
    k.render_row(row, img.width, img.mask.data() + off, img.depth.data() + off);
  }
  return img;
}

}  // namespace pvvs
