// Kinematics of a 6-DOF serial arm described by standard Denavit-Hartenberg
// rows: T_i = Rz(theta_i) * Tz(d_i) * Tx(a_i) * Rx(alpha_i).
//
// Everything here is a pure function over value types, templated on the
// scalar type. Orientation is reported as ZYX Euler angles (roll, pitch, yaw)
// with R = Rz(yaw) * Ry(pitch) * Rx(roll).
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rbs::kin {

inline constexpr int kJoints = 6;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Transform = Eigen::Matrix<Scalar, 4, 4>;
template <typename Scalar>
using JointVector = Eigen::Matrix<Scalar, kJoints, 1>;
template <typename Scalar>
using Jacobian = Eigen::Matrix<Scalar, 6, kJoints>;

template <typename Scalar>
struct DhRow {
  Scalar a{0};      // m
  Scalar d{0};      // m
  Scalar alpha{0};  // rad

  bool operator==(const DhRow&) const = default;
};

template <typename Scalar>
struct KinematicParamsT {
  std::array<DhRow<Scalar>, kJoints> dh{};
  JointVector<Scalar> lower = JointVector<Scalar>::Constant(-2 * std::numbers::pi_v<Scalar>);
  JointVector<Scalar> upper = JointVector<Scalar>::Constant(2 * std::numbers::pi_v<Scalar>);
  Scalar max_joint_speed{2.0943951};  // rad/s

  bool valid() const {
    if (!(max_joint_speed > 0)) return false;
    for (int i = 0; i < kJoints; ++i) {
      if (!(lower[i] < upper[i])) return false;
    }
    return true;
  }

  bool operator==(const KinematicParamsT&) const = default;
};

/// Nominal UR10 geometry. Users override it through the session config.
template <typename Scalar = double>
KinematicParamsT<Scalar> ur10_params() {
  constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  KinematicParamsT<Scalar> p;
  p.dh = {{{0, Scalar(0.1273), half_pi},
           {Scalar(-0.612), 0, 0},
           {Scalar(-0.5723), 0, 0},
           {0, Scalar(0.163941), half_pi},
           {0, Scalar(0.1157), -half_pi},
           {0, Scalar(0.0922), 0}}};
  return p;
}

template <typename Scalar>
struct JointStateT {
  JointVector<Scalar> q = JointVector<Scalar>::Zero();     // rad
  JointVector<Scalar> qdot = JointVector<Scalar>::Zero();  // rad/s
  Scalar timestamp{0};                                      // s

  bool operator==(const JointStateT&) const = default;
};

template <typename Scalar>
struct PoseT {
  Vector3<Scalar> position = Vector3<Scalar>::Zero();  // m, base frame
  Vector3<Scalar> rpy = Vector3<Scalar>::Zero();       // roll, pitch, yaw (rad)
};

template <typename Scalar>
struct CollaboratorStateT {
  Vector3<Scalar> position = Vector3<Scalar>::Zero();
  Scalar timestamp{0};
};

/// Output of forward kinematics: the frame of every link (link i is the frame
/// after joint i) plus the TCP, which coincides with the last link frame.
template <typename Scalar>
struct ChainPosesT {
  std::array<Transform<Scalar>, kJoints> frames;
  std::array<PoseT<Scalar>, kJoints> links;
  PoseT<Scalar> tcp;
};

// Angles are wrapped into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  a = std::remainder(a, 2 * pi);
  if (a <= -pi) a += 2 * pi;
  return a;
}

/// Width of the band around pitch = +-pi/2 in which roll is reported as zero.
template <typename Scalar>
inline constexpr Scalar kGimbalBand = Scalar(0.01);

template <typename Scalar>
Matrix3<Scalar> rotation_from_rpy(const Vector3<Scalar>& rpy) {
  using Eigen::AngleAxis;
  return (AngleAxis<Scalar>(rpy[2], Vector3<Scalar>::UnitZ()) *
          AngleAxis<Scalar>(rpy[1], Vector3<Scalar>::UnitY()) *
          AngleAxis<Scalar>(rpy[0], Vector3<Scalar>::UnitX()))
      .toRotationMatrix();
}

template <typename Scalar>
Vector3<Scalar> rpy_from_rotation(const Matrix3<Scalar>& r) {
  using std::atan2;
  using std::sqrt;
  constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  const Scalar pitch = atan2(-r(2, 0), sqrt(r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0)));
  Scalar roll;
  Scalar yaw;
  if (half_pi - std::abs(pitch) < kGimbalBand<Scalar>) {
    // Roll and yaw are coupled here; yaw absorbs the whole rotation.
    roll = 0;
    yaw = atan2(-r(0, 1), r(1, 1));
  } else {
    roll = atan2(r(2, 1), r(2, 2));
    yaw = atan2(r(1, 0), r(0, 0));
  }
  return {wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw)};
}

template <typename Scalar>
PoseT<Scalar> pose_from_transform(const Transform<Scalar>& t) {
  PoseT<Scalar> p;
  p.position = t.template block<3, 1>(0, 3);
  p.rpy = rpy_from_rotation<Scalar>(t.template block<3, 3>(0, 0));
  return p;
}

template <typename Scalar>
Transform<Scalar> dh_transform(const DhRow<Scalar>& row, Scalar theta) {
  using std::cos;
  using std::sin;
  const Scalar ct = cos(theta), st = sin(theta);
  const Scalar ca = cos(row.alpha), sa = sin(row.alpha);
  Transform<Scalar> t;
  t << ct, -st * ca, st * sa, row.a * ct,
       st, ct * ca, -ct * sa, row.a * st,
       0, sa, ca, row.d,
       0, 0, 0, 1;
  return t;
}

template <typename Scalar>
std::array<Transform<Scalar>, kJoints> link_frames(const JointVector<Scalar>& q,
                                                   const KinematicParamsT<Scalar>& params) {
  std::array<Transform<Scalar>, kJoints> frames;
  Transform<Scalar> t = Transform<Scalar>::Identity();
  for (int i = 0; i < kJoints; ++i) {
    t = t * dh_transform(params.dh[i], q[i]);
    frames[i] = t;
  }
  return frames;
}

template <typename Scalar>
ChainPosesT<Scalar> forward_kinematics(const JointStateT<Scalar>& state,
                                       const KinematicParamsT<Scalar>& params) {
  ChainPosesT<Scalar> out;
  out.frames = link_frames(state.q, params);
  for (int i = 0; i < kJoints; ++i) out.links[i] = pose_from_transform(out.frames[i]);
  out.tcp = out.links[kJoints - 1];
  return out;
}

template <typename Scalar>
Vector3<Scalar> tcp_position(const JointVector<Scalar>& q, const KinematicParamsT<Scalar>& params) {
  return link_frames(q, params)[kJoints - 1].template block<3, 1>(0, 3);
}

/// Geometric Jacobian in the base frame. Rows 0-2 map qdot to TCP linear
/// velocity, rows 3-5 to angular velocity.
template <typename Scalar>
Jacobian<Scalar> jacobian(const JointStateT<Scalar>& state, const KinematicParamsT<Scalar>& params) {
  const auto frames = link_frames(state.q, params);
  const Vector3<Scalar> tip = frames[kJoints - 1].template block<3, 1>(0, 3);
  Jacobian<Scalar> j;
  Vector3<Scalar> z = Vector3<Scalar>::UnitZ();
  Vector3<Scalar> origin = Vector3<Scalar>::Zero();
  for (int i = 0; i < kJoints; ++i) {
    j.template block<3, 1>(0, i) = z.cross(tip - origin);
    j.template block<3, 1>(3, i) = z;
    z = frames[i].template block<3, 1>(0, 2);
    origin = frames[i].template block<3, 1>(0, 3);
  }
  return j;
}

template <typename Scalar>
struct SteeringOptionsT {
  Scalar gain{0.5};         // unitless, (0, 1]
  Scalar damping{0.01};     // lambda of the damped least-squares solve
  Scalar standoff{0.25};    // m kept between TCP and collaborator
  Scalar max_condition{1e4};

  bool operator==(const SteeringOptionsT&) const = default;
};

template <typename Scalar>
struct SteerResultT {
  JointStateT<Scalar> state;
  bool near_singular = false;
  Scalar condition{1};
};

/// Point the TCP is driven to: the collaborator position pushed back towards
/// the TCP by the standoff distance.
template <typename Scalar>
Vector3<Scalar> standoff_target(const Vector3<Scalar>& tcp, const Vector3<Scalar>& collaborator,
                                Scalar standoff) {
  Vector3<Scalar> dir = tcp - collaborator;
  const Scalar n = dir.norm();
  dir = n > Scalar(1e-12) ? Vector3<Scalar>(dir / n) : Vector3<Scalar>::UnitZ();
  return collaborator + standoff * dir;
}

/// Distance from the TCP to its standoff target.
template <typename Scalar>
Scalar standoff_error(const Vector3<Scalar>& tcp, const Vector3<Scalar>& collaborator, Scalar standoff) {
  return (standoff_target(tcp, collaborator, standoff) - tcp).norm();
}

/// Position errors below this (m) produce no motion.
template <typename Scalar>
inline constexpr Scalar kSteerDeadband = Scalar(1e-9);

/// One resolved-rate damped least-squares step of the TCP towards the
/// collaborator's standoff point. Joint speed is limited by uniformly scaling
/// qdot (the step direction is preserved); joint limits are then enforced by
/// clamping. Near a singularity the step is scaled by max_condition / cond.
template <typename Scalar>
SteerResultT<Scalar> steer_towards(const JointStateT<Scalar>& current,
                                   const CollaboratorStateT<Scalar>& collaborator,
                                   const SteeringOptionsT<Scalar>& opts, Scalar dt,
                                   const KinematicParamsT<Scalar>& params) {
  if (!(dt > 0)) throw std::invalid_argument("steer_towards: dt must be positive");
  if (!(opts.gain > 0 && opts.gain <= 1)) throw std::invalid_argument("steer_towards: gain must be in (0, 1]");
  if (!(opts.damping > 0)) throw std::invalid_argument("steer_towards: damping must be positive");

  SteerResultT<Scalar> result;
  result.state = current;

  const Vector3<Scalar> tcp = tcp_position(current.q, params);
  const Vector3<Scalar> error = standoff_target(tcp, collaborator.position, opts.standoff) - tcp;
  if (error.norm() < kSteerDeadband<Scalar>) {
    result.state.qdot.setZero();
    return result;
  }

  const Eigen::Matrix<Scalar, 3, kJoints> jp = jacobian(current, params).template topRows<3>();
  const Eigen::JacobiSVD<Eigen::Matrix<Scalar, 3, kJoints>> svd(jp);
  const auto& sv = svd.singularValues();
  result.condition = sv[2] > 0 ? sv[0] / sv[2] : std::numeric_limits<Scalar>::infinity();

  const Vector3<Scalar> velocity = opts.gain * error / dt;
  const Matrix3<Scalar> damped =
      jp * jp.transpose() + opts.damping * opts.damping * Matrix3<Scalar>::Identity();
  JointVector<Scalar> qdot = jp.transpose() * damped.ldlt().solve(velocity);

  if (result.condition > opts.max_condition) {
    result.near_singular = true;
    qdot *= opts.max_condition / result.condition;
  }
  const Scalar peak = qdot.cwiseAbs().maxCoeff();
  if (peak > params.max_joint_speed) qdot *= params.max_joint_speed / peak;

  JointVector<Scalar> q = (current.q + qdot * dt).cwiseMax(params.lower).cwiseMin(params.upper);
  result.state.qdot = (q - current.q) / dt;
  result.state.q = q;
  return result;
}

/// Euclidean TCP speed between two timestamped poses.
template <typename Scalar>
Scalar tcp_speed(const PoseT<Scalar>& previous, Scalar t_previous, const PoseT<Scalar>& latest,
                 Scalar t_latest) {
  const Scalar dt = t_latest - t_previous;
  if (!(dt > 0)) throw std::domain_error("tcp_speed: degenerate interval");
  return (latest.position - previous.position).norm() / dt;
}

template <typename Scalar>
Scalar proximity(const CollaboratorStateT<Scalar>& collaborator, const PoseT<Scalar>& tcp) {
  return (collaborator.position - tcp.position).norm();
}

using KinematicParams = KinematicParamsT<double>;
using JointState = JointStateT<double>;
using Pose = PoseT<double>;
using CollaboratorState = CollaboratorStateT<double>;
using ChainPoses = ChainPosesT<double>;
using SteeringOptions = SteeringOptionsT<double>;
using SteerResult = SteerResultT<double>;
using Vec3 = Vector3<double>;
using Joints = JointVector<double>;

}  // namespace rbs::kin
