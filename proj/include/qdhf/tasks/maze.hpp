#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdhf/tasks/task.hpp"

namespace qdhf {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Segment {
  Point a;
  Point b;
};

namespace geom {

inline double cross(const Point& o, const Point& p, const Point& q) {
  return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x);
}

inline int sign(double v) { return (v > 0.0) - (v < 0.0); }

inline bool on_segment(const Point& p, const Point& a, const Point& b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

/// Closed-segment intersection; touching counts.
inline bool segments_intersect(const Segment& s, const Segment& t) {
  const int o1 = sign(cross(s.a, s.b, t.a));
  const int o2 = sign(cross(s.a, s.b, t.b));
  const int o3 = sign(cross(t.a, t.b, s.a));
  const int o4 = sign(cross(t.a, t.b, s.b));
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  if (o1 == 0 && on_segment(t.a, s.a, s.b)) return true;
  if (o2 == 0 && on_segment(t.b, s.a, s.b)) return true;
  if (o3 == 0 && on_segment(s.a, t.a, t.b)) return true;
  if (o4 == 0 && on_segment(s.b, t.a, t.b)) return true;
  return false;
}

/// Distance along the unit direction (dx, dy) from p to the segment, or +inf.
inline double ray_distance(const Point& p, double dx, double dy, const Segment& w) {
  const double ex = w.b.x - w.a.x;
  const double ey = w.b.y - w.a.y;
  const double denom = dx * ey - dy * ex;
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  const double qx = w.a.x - p.x;
  const double qy = w.a.y - p.y;
  const double t = (qx * ey - qy * ex) / denom;
  const double u = (qx * dy - qy * dx) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace geom

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Walls of the default layout: three interior walls forming a serpentine
/// passage from the bottom-left start to the top of the arena.
inline std::vector<Segment> default_maze_walls() {
  return {
      {{0.0, 0.25}, {0.75, 0.25}},
      {{0.25, 0.5}, {1.0, 0.5}},
      {{0.0, 0.75}, {0.75, 0.75}},
  };
}

/// Parses `x1 y1 x2 y2` lines. Blank lines and `#` comments are ignored.
inline std::vector<Segment> parse_maze_layout(std::istream& in) {
  std::vector<Segment> walls;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Segment s;
    std::string extra;
    if (!(ls >> s.a.x >> s.a.y >> s.b.x >> s.b.y) || (ls >> extra)) {
      throw InvalidArgument("maze layout line " + std::to_string(lineno) +
                            ": expected `x1 y1 x2 y2`");
    }
    for (double c : {s.a.x, s.a.y, s.b.x, s.b.y}) {
      if (!(c >= 0.0 && c <= 1.0)) {
        throw InvalidArgument("maze layout line " + std::to_string(lineno) +
                              ": coordinates must lie in [0,1]");
      }
    }
    walls.push_back(s);
  }
  return walls;
}

inline std::vector<Segment> load_maze_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open maze layout: " + path);
  return parse_maze_layout(in);
}

struct MazeParams {
  std::vector<Segment> walls = default_maze_walls();  // interior walls only
  Pose start{0.1, 0.1, 0.0};
  int steps = 250;
  std::array<double, 3> laser_angles{-std::numbers::pi / 4, 0.0, std::numbers::pi / 4};
  double laser_range = 0.2;
  std::array<double, 2> contact_angles{-std::numbers::pi / 4, std::numbers::pi / 4};
  double contact_range = 0.02;
  double step_length = 0.01;  // v_max * dt
  double axle = 0.05;
  int hidden = 8;
};

struct MazeRollout {
  std::vector<Pose> poses;                       // after each step, length = steps
  std::vector<std::array<double, 2>> actions;   // wheel commands per step
  double objective = 0.0;
};

/// Simplified Khepera-like maze navigation with an MLP controller
/// 5 -> hidden (tanh) -> 2 (tanh). Inputs are three normalized laser
/// readings and two contact sensors (+1 contact, -1 none).
class MazeTask {
 public:
  explicit MazeTask(MazeParams params = {}) : p_(std::move(params)) {
    walls_ = {
        {{0.0, 0.0}, {1.0, 0.0}},
        {{1.0, 0.0}, {1.0, 1.0}},
        {{1.0, 1.0}, {0.0, 1.0}},
        {{0.0, 1.0}, {0.0, 0.0}},
    };
    walls_.insert(walls_.end(), p_.walls.begin(), p_.walls.end());
    const Point s{p_.start.x, p_.start.y};
    if (!(s.x > 0.0 && s.x < 1.0 && s.y > 0.0 && s.y < 1.0)) {
      throw InvalidArgument("MazeTask: start must lie strictly inside the arena");
    }
    for (const auto& w : walls_) {
      if (geom::segments_intersect({s, s}, w)) {
        throw InvalidArgument("MazeTask: start lies on a wall");
      }
    }
    if (p_.steps <= 0 || p_.hidden <= 0) throw InvalidArgument("MazeTask: bad sizes");
    for (const auto& w : walls_) {
      boxes_.push_back({std::min(w.a.x, w.b.x), std::max(w.a.x, w.b.x), std::min(w.a.y, w.b.y),
                        std::max(w.a.y, w.b.y)});
    }
    reach_ = std::max({p_.laser_range, p_.contact_range, p_.step_length});
    for (std::size_t i = 0; i < 3; ++i) {
      laser_rot_[i] = {std::cos(p_.laser_angles[i]), std::sin(p_.laser_angles[i])};
    }
    for (std::size_t i = 0; i < 2; ++i) {
      contact_rot_[i] = {std::cos(p_.contact_angles[i]), std::sin(p_.contact_angles[i])};
      for (std::size_t l = 0; l < 3; ++l) {
        if (p_.contact_angles[i] == p_.laser_angles[l]) contact_shares_laser_[i] = static_cast<int>(l);
      }
    }
  }

  [[nodiscard]] std::string name() const { return "maze"; }
  [[nodiscard]] const MazeParams& params() const { return p_; }
  /// Boundary walls followed by interior walls.
  [[nodiscard]] const std::vector<Segment>& walls() const { return walls_; }

  [[nodiscard]] std::size_t genome_dim() const {
    const auto h = static_cast<std::size_t>(p_.hidden);
    return kInputs * h + h + h * kOutputs + kOutputs;
  }
  [[nodiscard]] std::size_t feature_dim() const { return 2 * static_cast<std::size_t>(p_.steps); }

  [[nodiscard]] std::vector<Interval> genome_domain() const {
    return std::vector<Interval>(genome_dim(), Interval{-1.0, 1.0});
  }

  [[nodiscard]] MeasureBounds gt_bounds() const { return MeasureBounds::uniform(2, 0.0, 1.0); }

  /// Normalized laser reading in [0,1] at the given pose and relative angle.
  [[nodiscard]] double laser(const Pose& pose, double rel_angle) const {
    return std::min(p_.laser_range, cast(pose, rel_angle)) / p_.laser_range;
  }

  [[nodiscard]] std::array<double, 5> sensors(const Pose& pose) const {
    return sensors(pose, std::cos(pose.heading), std::sin(pose.heading));
  }

  /// Applies one differential-drive update. Translation is cancelled when the
  /// swept segment touches any wall; rotation always applies.
  [[nodiscard]] Pose step(const Pose& pose, double wl, double wr) const {
    return step(pose, std::cos(pose.heading), std::sin(pose.heading), wl, wr);
  }

  [[nodiscard]] bool blocked(const Segment& move) const {
    for (const auto& w : walls_) {
      if (geom::segments_intersect(move, w)) return true;
    }
    return false;
  }

  [[nodiscard]] MazeRollout rollout(const Genome& genome) const {
    if (static_cast<std::size_t>(genome.size()) != genome_dim()) {
      throw InvalidArgument("MazeTask: wrong genome length");
    }
    const Genome g = clip_to_domain(genome, genome_domain());
    const auto h = static_cast<Eigen::Index>(p_.hidden);
    // Layout: W1 (h x 5, row-major), b1 (h), W2 (2 x h, row-major), b2 (2).
    const double* w = g.values.data();
    const double* w1 = w;
    const double* b1 = w1 + h * kInputs;
    const double* w2 = b1 + h;
    const double* b2 = w2 + kOutputs * h;

    MazeRollout out;
    out.poses.reserve(static_cast<std::size_t>(p_.steps));
    out.actions.reserve(static_cast<std::size_t>(p_.steps));
    std::vector<double> hid(static_cast<std::size_t>(h));
    Pose pose = p_.start;
    double reward = 0.0;
    double ch = std::cos(pose.heading);
    double sh = std::sin(pose.heading);
    NearWalls near;
    near.reserve(walls_.size());
    for (int t = 0; t < p_.steps; ++t) {
      near_walls(pose, near);
      const auto in = sensors(pose, ch, sh, near);
      for (Eigen::Index j = 0; j < h; ++j) {
        double a = b1[j];
        for (Eigen::Index i = 0; i < kInputs; ++i) a += w1[j * kInputs + i] * in[i];
        hid[static_cast<std::size_t>(j)] = fast_tanh(a);
      }
      std::array<double, 2> act{};
      for (Eigen::Index o = 0; o < kOutputs; ++o) {
        double a = b2[o];
        for (Eigen::Index j = 0; j < h; ++j) a += w2[o * h + j] * hid[static_cast<std::size_t>(j)];
        act[static_cast<std::size_t>(o)] = fast_tanh(a);
      }
      reward -= 0.5 * (act[0] * act[0] + act[1] * act[1]);
      const double before = pose.heading;
      pose = step(pose, ch, sh, act[0], act[1], near);
      if (pose.heading != before) {
        ch = std::cos(pose.heading);
        sh = std::sin(pose.heading);
      }
      out.poses.push_back(pose);
      out.actions.push_back(act);
    }
    out.objective = std::clamp(1.0 + reward / p_.steps, 0.0, 1.0);
    return out;
  }

  [[nodiscard]] Evaluation evaluate(const Genome& genome) const {
    const MazeRollout r = rollout(genome);
    Evaluation ev;
    ev.objective = r.objective;
    ev.features.resize(static_cast<Eigen::Index>(feature_dim()));
    for (std::size_t t = 0; t < r.poses.size(); ++t) {
      ev.features[static_cast<Eigen::Index>(2 * t)] = r.poses[t].x;
      ev.features[static_cast<Eigen::Index>(2 * t + 1)] = r.poses[t].y;
    }
    ev.gt_measures = Vec(2);
    ev.gt_measures << r.poses.back().x, r.poses.back().y;
    return ev;
  }

  [[nodiscard]] nlohmann::json render(const Genome& genome) const {
    const MazeRollout r = rollout(genome);
    nlohmann::json walls = nlohmann::json::array();
    for (const auto& w : walls_) walls.push_back({w.a.x, w.a.y, w.b.x, w.b.y});
    nlohmann::json traj = nlohmann::json::array();
    traj.push_back({p_.start.x, p_.start.y});
    for (const auto& p : r.poses) traj.push_back({p.x, p.y});
    const Pose& last = r.poses.back();
    return {{"kind", "maze"},
            {"walls", walls},
            {"trajectory", traj},
            {"final_pose", {last.x, last.y, last.heading}}};
  }

 private:
  static constexpr Eigen::Index kInputs = 5;
  static constexpr Eigen::Index kOutputs = 2;

  /// tanh through a single exp; |error| ~ 1e-16.
  static double fast_tanh(double x) {
    if (x > 20.0) return 1.0;
    if (x < -20.0) return -1.0;
    return 1.0 - 2.0 / (std::exp(2.0 * x) + 1.0);
  }

  static double wrap(double a) {
    a = std::fmod(a, 2.0 * std::numbers::pi);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    return a;
  }

  [[nodiscard]] double cast(const Pose& pose, double rel_angle) const {
    return cast_dir(pose, std::cos(pose.heading + rel_angle), std::sin(pose.heading + rel_angle));
  }

  using NearWalls = std::vector<std::size_t>;

  /// Walls whose bounding box lies within `reach_` of the pose. Walls farther
  /// away cannot change a clamped sensor reading or block a move.
  void near_walls(const Pose& pose, NearWalls& out) const {
    out.clear();
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
      const auto& b = boxes_[i];
      const double dx = std::max({b[0] - pose.x, 0.0, pose.x - b[1]});
      const double dy = std::max({b[2] - pose.y, 0.0, pose.y - b[3]});
      if (dx * dx + dy * dy <= reach_ * reach_) out.push_back(i);
    }
  }

  [[nodiscard]] double cast_dir(const Pose& pose, double dx, double dy) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& w : walls_) best = std::min(best, geom::ray_distance({pose.x, pose.y}, dx, dy, w));
    return best;
  }

  [[nodiscard]] double cast_dir(const Pose& pose, double dx, double dy, const NearWalls& near) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : near) {
      best = std::min(best, geom::ray_distance({pose.x, pose.y}, dx, dy, walls_[i]));
    }
    return best;
  }

  [[nodiscard]] bool blocked(const Segment& move, const NearWalls& near) const {
    for (std::size_t i : near) {
      if (geom::segments_intersect(move, walls_[i])) return true;
    }
    return false;
  }

  /// Sensor vector given the cosine/sine of the current heading. Relative
  /// directions are applied as rotations; contact probes that share a laser
  /// direction reuse its cast.
  [[nodiscard]] std::array<double, 5> sensors(const Pose& pose, double ch, double sh) const {
    NearWalls near;
    near_walls(pose, near);
    return sensors(pose, ch, sh, near);
  }

  [[nodiscard]] std::array<double, 5> sensors(const Pose& pose, double ch, double sh,
                                              const NearWalls& near) const {
    std::array<double, 5> in{};
    std::array<double, 3> dist{};
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& r = laser_rot_[i];
      dist[i] = cast_dir(pose, ch * r[0] - sh * r[1], sh * r[0] + ch * r[1], near);
      in[i] = std::min(p_.laser_range, dist[i]) / p_.laser_range;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      double d = 0.0;
      if (contact_shares_laser_[i] >= 0) {
        d = dist[static_cast<std::size_t>(contact_shares_laser_[i])];
      } else {
        const auto& r = contact_rot_[i];
        d = cast_dir(pose, ch * r[0] - sh * r[1], sh * r[0] + ch * r[1], near);
      }
      in[3 + i] = d <= p_.contact_range ? 1.0 : -1.0;
    }
    return in;
  }

  [[nodiscard]] Pose step(const Pose& pose, double ch, double sh, double wl, double wr) const {
    NearWalls near;
    near_walls(pose, near);
    return step(pose, ch, sh, wl, wr, near);
  }

  [[nodiscard]] Pose step(const Pose& pose, double ch, double sh, double wl, double wr,
                          const NearWalls& near) const {
    Pose next = pose;
    const double forward = 0.5 * (wl + wr) * p_.step_length;
    const Point from{pose.x, pose.y};
    const Point to{pose.x + forward * ch, pose.y + forward * sh};
    if (forward != 0.0 && !blocked({from, to}, near)) {
      next.x = to.x;
      next.y = to.y;
    }
    next.heading = wrap(pose.heading + (wr - wl) / p_.axle * p_.step_length);
    return next;
  }

  MazeParams p_;
  std::vector<Segment> walls_;
  std::array<std::array<double, 2>, 3> laser_rot_{};
  std::array<std::array<double, 2>, 2> contact_rot_{};
  std::array<int, 2> contact_shares_laser_{-1, -1};
  std::vector<std::array<double, 4>> boxes_;  // min x, max x, min y, max y per wall
  double reach_ = 0.0;                        // no sensor or move looks farther than this
};

}  // namespace qdhf
