#pragma once

// Synthetic sensorimotor stream standing in for recorded robot data.
//
// A planar arm with a shoulder slide q1 and an elbow q2 moves under smooth
// random velocity commands, pulled toward a key placed for each episode. Two
// further joint channels (wrist, finger) are tendon-coupled to the arm and
// carry no independent state. The camera sees two markers: the hand and the
// key. Touch is +1 while the hand is within the key's contact radius; sound is
// +1 on the step where touch switches on.
//
// Because the key is visible only to the camera, vision is the one modality
// from which the whole state can be read off.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "data.hpp"
#include "layout.hpp"
#include "rng.hpp"

namespace mmvae {

struct SyntheticParams {
  double noise = 0.01;              // std of process noise on the joints
  double dt = 0.1;
  double contact_threshold = 0.08;  // mean contact radius around the key
  double contact_jitter = 0.4;      // relative per-episode spread of the radius
  std::int64_t episode_length = 50;
  double command_scale = 0.3;       // stationary std of the velocity commands
  double command_smoothness = 0.97; // AR(1) coefficient of the commands
  double reach_gain = 1.0;          // pull of the arm toward the key pose
};

namespace synthetic_detail {

inline constexpr double kForearm = 0.45;
inline constexpr double kQ1Min = 0.0, kQ1Max = 0.6;
inline constexpr double kQ2Min = -0.6, kQ2Max = 0.6;

inline std::array<double, 2> hand(double q1, double q2) {
  return {q1 + kForearm * std::cos(q2), kForearm * std::sin(q2)};
}

// Coupled distal joints: wrist and finger follow the arm linearly.
inline std::array<double, 4> joint_vector(double q1, double q2) {
  return {q1, q2, 0.5 * q2 - 0.2 * q1, 0.3 * q1 + 0.4 * q2};
}

inline std::array<double, 4> motor_vector(double v1, double v2) {
  return {v1, v2, 0.5 * v2 - 0.2 * v1, 0.3 * v1 + 0.4 * v2};
}

struct Step {
  std::array<double, 4> joint;
  std::array<double, 4> vision;
  double touch;
  double sound;
  std::array<double, 4> motor;
};

}  // namespace synthetic_detail

/// Raw samples (dims x n) in layout order; consecutive steps packed as
/// (t-1, t) pairs within episodes.
inline Eigen::MatrixXd generate_synthetic_raw(std::uint64_t seed,
                                              std::size_t n_samples,
                                              const SyntheticParams& params) {
  using namespace synthetic_detail;
  if (n_samples == 0) throw UsageError("n_samples must be >= 1");
  if (params.episode_length < 2)
    throw ConfigurationError("episode_length must be >= 2");
  const auto& layout = ModalityLayout::standard();
  Rng rng(seed);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(layout.total_dim()),
                      static_cast<Eigen::Index>(n_samples));
  const double innovation =
      params.command_scale *
      std::sqrt(1.0 - params.command_smoothness * params.command_smoothness);

  auto put = [&](Eigen::Index col, Timestep t, const Step& s) {
    for (std::size_t d = 0; d < 4; ++d) {
      raw(static_cast<Eigen::Index>(layout.index(0, t, d)), col) = s.joint[d];
      raw(static_cast<Eigen::Index>(layout.index(1, t, d)), col) = s.vision[d];
      raw(static_cast<Eigen::Index>(layout.index(4, t, d)), col) = s.motor[d];
    }
    raw(static_cast<Eigen::Index>(layout.index(2, t, 0)), col) = s.touch;
    raw(static_cast<Eigen::Index>(layout.index(3, t, 0)), col) = s.sound;
  };

  std::size_t filled = 0;
  while (filled < n_samples) {
    // Episode setup: key somewhere in the reachable band, arm at random.
    double q1 = rng.uniform(kQ1Min, kQ1Max);
    double q2 = rng.uniform(kQ2Min, kQ2Max);
    const std::array<double, 2> key_pose{
        rng.uniform(0.9 * kQ1Min + 0.1 * kQ1Max, 0.1 * kQ1Min + 0.9 * kQ1Max),
        rng.uniform(0.9 * kQ2Min + 0.1 * kQ2Max, 0.1 * kQ2Min + 0.9 * kQ2Max)};
    const auto key = hand(key_pose[0], key_pose[1]);
    const double radius =
        params.contact_threshold *
        (1.0 + params.contact_jitter * rng.uniform(-1.0, 1.0));
    double c1 = params.command_scale * rng.normal();
    double c2 = params.command_scale * rng.normal();
    double prev_touch = -1.0;

    auto observe = [&](double v1, double v2) {
      Step s;
      s.joint = joint_vector(q1, q2);
      const auto h = hand(q1, q2);
      s.vision = {h[0], h[1], key[0], key[1]};
      const double dist = std::hypot(h[0] - key[0], h[1] - key[1]);
      s.touch = dist < radius ? 1.0 : -1.0;
      s.sound = (s.touch > 0.0 && prev_touch < 0.0) ? 1.0 : -1.0;
      prev_touch = s.touch;
      s.motor = motor_vector(v1, v2);
      return s;
    };

    // Velocity command issued at the current state.
    auto command = [&]() {
      c1 = params.command_smoothness * c1 + innovation * rng.normal();
      c2 = params.command_smoothness * c2 + innovation * rng.normal();
      // Joint-space servo toward the arm pose that touches the key.
      double v1 = c1 + params.reach_gain * (key_pose[0] - q1);
      double v2 = c2 + params.reach_gain * (key_pose[1] - q2);
      // Commands that would leave the joint range are reflected.
      const double n1 = q1 + v1 * params.dt, n2 = q2 + v2 * params.dt;
      if ((n1 > kQ1Max && v1 > 0.0) || (n1 < kQ1Min && v1 < 0.0)) {
        v1 = -v1;
        c1 = -c1;
      }
      if ((n2 > kQ2Max && v2 > 0.0) || (n2 < kQ2Min && v2 < 0.0)) {
        v2 = -v2;
        c2 = -c2;
      }
      return std::array<double, 2>{v1, v2};
    };

    auto v = command();
    Step previous = observe(v[0], v[1]);
    for (std::int64_t t = 1; t < params.episode_length && filled < n_samples;
         ++t) {
      q1 += v[0] * params.dt + params.noise * rng.normal();
      q2 += v[1] * params.dt + params.noise * rng.normal();
      v = command();
      Step current = observe(v[0], v[1]);
      const auto col = static_cast<Eigen::Index>(filled++);
      put(col, Timestep::previous, previous);
      put(col, Timestep::current, current);
      previous = current;
    }
  }
  return raw;
}

inline std::string describe(const SyntheticParams& p, std::uint64_t seed,
                            std::size_t n) {
  return "synthetic(seed=" + std::to_string(seed) + ", n=" + std::to_string(n) +
         ", noise=" + format_real(p.noise) + ", dt=" + format_real(p.dt) +
         ", contact_threshold=" + format_real(p.contact_threshold) +
         ", episode_length=" + std::to_string(p.episode_length) + ")";
}

/// Normalized synthetic dataset.
inline Dataset generate_synthetic(std::uint64_t seed, std::size_t n_samples,
                                  const SyntheticParams& params = {}) {
  return normalize(generate_synthetic_raw(seed, n_samples, params),
                   ModalityLayout::standard(),
                   describe(params, seed, n_samples));
}

}  // namespace mmvae
