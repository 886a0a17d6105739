#pragma once

#include "avt/agent.hpp"
#include "avt/camera.hpp"
#include "avt/dynamics.hpp"
#include "avt/scene.hpp"

#include <optional>
#include <vector>

namespace avt {

inline Image<double> to_gray(const Image<double>& color) {
  Image<double> g(color.height(), color.width(), 1);
  for (int v = 0; v < color.height(); ++v) {
    for (int u = 0; u < color.width(); ++u) {
      g(v, u) = 0.299 * color(v, u, 0) + 0.587 * color(v, u, 1) + 0.114 * color(v, u, 2);
    }
  }
  return g;
}

struct TrackerParams {
  int search_margin = 32;
  double update_rate = 0.05;
  double min_score = 0.4;
  /// Correlation sums are subsampled so that at most this many template pixels are used.
  int max_template_samples = 4096;
};

struct TrackResult {
  BoundingBox bbox;
  double score = 0;
  bool confident = false;
};

/// Normalized cross-correlation template tracker over a local search window.
class TemplateTracker {
 public:
  TemplateTracker(const Image<double>& color, const BoundingBox& box, TrackerParams params = {})
      : params_(params) {
    if (params.update_rate < 0 || params.update_rate > 1) throw std::invalid_argument("tracker: eta outside [0,1]");
    const int W = color.width(), H = color.height();
    int x0 = static_cast<int>(std::lround(box.x)), y0 = static_cast<int>(std::lround(box.y));
    int x1 = static_cast<int>(std::lround(box.x + box.w)), y1 = static_cast<int>(std::lround(box.y + box.h));
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    x1 = std::min(W, x1);
    y1 = std::min(H, y1);
    if (!box.valid() || x1 - x0 < 1 || y1 - y0 < 1) throw std::invalid_argument("tracker: bbox outside the image");
    x_ = x0;
    y_ = y0;
    tw_ = x1 - x0;
    th_ = y1 - y0;
    stride_ = 1;
    while ((tw_ / stride_) * (th_ / stride_) > params_.max_template_samples) ++stride_;
    auto gray = to_gray(color);
    templ_.assign(static_cast<std::size_t>(tw_) * th_, 0.0);
    for (int v = 0; v < th_; ++v) {
      for (int u = 0; u < tw_; ++u) templ_[idx(u, v)] = gray(y_ + v, x_ + u);
    }
    refresh_template();
  }

  BoundingBox bbox() const { return {double(x_), double(y_), double(tw_), double(th_)}; }
  int template_width() const { return tw_; }
  int template_height() const { return th_; }
  const TrackerParams& params() const { return params_; }

  /// NCC score of the template against the window with top-left (px, py) of a gray image.
  double score_at(const Image<double>& gray, int px, int py) const {
    double s = 0, s2 = 0, cross = 0;
    int n = 0;
    for (int v = 0; v < th_; v += stride_) {
      for (int u = 0; u < tw_; u += stride_) {
        double val = gray(py + v, px + u);
        s += val;
        s2 += val * val;
        cross += centered_[idx(u, v)] * val;
        ++n;
      }
    }
    double var = s2 - s * s / n;
    double mean = s / n;
    if (templ_norm_ <= 0 || var <= 1e-12 * n * (1.0 + mean * mean)) return 0.0;
    return std::clamp(cross / (templ_norm_ * std::sqrt(var)), -1.0, 1.0);
  }

  TrackResult update(const Image<double>& color) {
    auto gray = to_gray(color);
    const int W = gray.width(), H = gray.height();
    double best = -2;
    int bx = x_, by = y_;
    for (int py = std::max(0, y_ - params_.search_margin); py <= std::min(H - th_, y_ + params_.search_margin); ++py) {
      for (int px = std::max(0, x_ - params_.search_margin); px <= std::min(W - tw_, x_ + params_.search_margin);
           ++px) {
        double sc = score_at(gray, px, py);
        // ties resolve towards the previous position, then scan order
        bool closer = sc == best && (std::abs(px - x_) + std::abs(py - y_) < std::abs(bx - x_) + std::abs(by - y_));
        if (sc > best || closer) {
          best = sc;
          bx = px;
          by = py;
        }
      }
    }
    TrackResult r;
    r.score = std::max(best, -1.0);
    r.confident = r.score >= params_.min_score;
    if (r.confident) {
      x_ = bx;
      y_ = by;
      const double eta = params_.update_rate;
      if (eta > 0) {
        for (int v = 0; v < th_; ++v) {
          for (int u = 0; u < tw_; ++u) {
            templ_[idx(u, v)] = (1 - eta) * templ_[idx(u, v)] + eta * gray(y_ + v, x_ + u);
          }
        }
        refresh_template();
      }
    }
    r.bbox = bbox();
    return r;
  }

 private:
  std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * tw_ + u; }

  void refresh_template() {
    double s = 0;
    int n = 0;
    for (int v = 0; v < th_; v += stride_) {
      for (int u = 0; u < tw_; u += stride_) {
        s += templ_[idx(u, v)];
        ++n;
      }
    }
    double mean = s / n;
    centered_.assign(templ_.size(), 0.0);
    double norm2 = 0;
    for (int v = 0; v < th_; v += stride_) {
      for (int u = 0; u < tw_; u += stride_) {
        double c = templ_[idx(u, v)] - mean;
        centered_[idx(u, v)] = c;
        norm2 += c * c;
      }
    }
    templ_norm_ = norm2 > 1e-12 * n ? std::sqrt(norm2) : 0.0;
  }

  TrackerParams params_;
  int x_ = 0, y_ = 0, tw_ = 0, th_ = 0, stride_ = 1;
  std::vector<double> templ_;
  std::vector<double> centered_;
  double templ_norm_ = 0;
};

struct Estimate3d {
  Vec3 position = Vec3::Zero();
  bool held = false;  // crop was empty; previous estimate reused
};

/// Frustum crop + frustum average; falls back to `previous` on an empty proposal.
inline Estimate3d estimate_3d(const Frame& frame, const BoundingBox& box, const CameraIntrinsics& k, double z_max,
                              const Vec3& previous) {
  auto cloud = frustum_crop(k, frame.depth, box, z_max);
  if (cloud.empty()) return {previous, true};
  return {frustum_average(cloud), false};
}

struct PidGains {
  Vec3 kp = Vec3::Zero();
  Vec3 ki = Vec3::Zero();
  Vec3 kd = Vec3::Zero();
};

/// Fixed-rule gains. Force: Kp = m/4 and Kd = 2 sqrt(Kp m) critically damp the double integrator.
inline PidGains default_gains(ControlMode mode, double mass = kChaserMass) {
  if (mode == ControlMode::Force) {
    double kp = mass / 4.0;
    return {Vec3::Constant(kp), Vec3::Constant(0.5), Vec3::Constant(2.0 * std::sqrt(kp * mass))};
  }
  return {Vec3::Constant(0.8), Vec3::Constant(0.05), Vec3::Zero()};
}

inline double output_limit(ControlMode mode) { return mode == ControlMode::Force ? kForceLimit : kVelocityLimit; }

/// Per-axis PID with rectangle-rule integral and conditional-integration anti-windup.
class PidController {
 public:
  PidController(PidGains gains, double limit) : gains_(gains), limit_(limit) {
    if ((gains.kp.array() < 0).any() || (gains.ki.array() < 0).any() || (gains.kd.array() < 0).any()) {
      throw std::invalid_argument("PidController: gains must be non-negative");
    }
  }

  const PidGains& gains() const { return gains_; }
  const Vec3& integral() const { return integral_; }

  void reset() {
    integral_.setZero();
    prev_.reset();
  }

  Vec3 update(const Vec3& error, double dt) {
    if (!(dt > 0)) throw std::domain_error("PidController: dt must be positive");
    Vec3 deriv = prev_ ? Vec3((error - *prev_) / dt) : Vec3::Zero();
    Vec3 candidate = integral_ + error * dt;
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
      double u = gains_.kp[i] * error[i] + gains_.ki[i] * candidate[i] + gains_.kd[i] * deriv[i];
      if (std::abs(u) > limit_) {
        // saturated: freeze the integral on this axis
        u = gains_.kp[i] * error[i] + gains_.ki[i] * integral_[i] + gains_.kd[i] * deriv[i];
      } else {
        integral_[i] = candidate[i];
      }
      out[i] = std::clamp(u, -limit_, limit_);
    }
    prev_ = error;
    return out;
  }

 private:
  PidGains gains_;
  double limit_;
  Vec3 integral_ = Vec3::Zero();
  std::optional<Vec3> prev_;
};

enum class BoxSource { Tracker, GroundTruth };

/// Position-based visual servoing: 2D box -> frustum average -> body frame error -> PID.
class PbvsAgent final : public Agent {
 public:
  PbvsAgent(ControlMode mode, BoxSource source, TrackerParams tracker = {}, std::optional<PidGains> gains = {})
      : mode_(mode), source_(source), tracker_params_(tracker),
        gains_(gains.value_or(default_gains(mode))), pid_(gains_, output_limit(mode)) {
    if (mode == ControlMode::PositionStep) throw std::invalid_argument("PBVS drives force or velocity control");
  }

  std::string name() const override { return source_ == BoxSource::Tracker ? "pbvs" : "pbvs-oracle"; }
  ControlMode mode() const override { return mode_; }

  std::unique_ptr<Agent> clone() const override {
    return std::make_unique<PbvsAgent>(mode_, source_, tracker_params_, gains_);
  }

  void reset(const AgentView& view, std::uint64_t) override {
    pid_.reset();
    tracker_.reset();
    estimate_ = view.config.mount.body_to_camera(view.config.r_star);
    held_ = true;
    bbox_.reset();
    score_ = 0;
    auto box = truth_box(view);
    if (!box) return;
    if (source_ == BoxSource::Tracker) tracker_.emplace(view.frame.color, *box, tracker_params_);
    auto est = estimate_3d(view.frame, *box, view.intr, view.config.z_max, estimate_);
    estimate_ = est.position;
    held_ = est.held;
    bbox_ = box;
  }

  ControlCommand act(const AgentView& view) override {
    std::optional<BoundingBox> box;
    if (source_ == BoxSource::GroundTruth) {
      box = truth_box(view);
      score_ = box ? 1.0 : 0.0;
    } else if (tracker_) {
      auto r = tracker_->update(view.frame.color);
      score_ = r.score;
      if (r.confident) box = r.bbox;
    }
    held_ = true;
    if (box) {
      auto est = estimate_3d(view.frame, *box, view.intr, view.config.z_max, estimate_);
      estimate_ = est.position;
      held_ = est.held;
      bbox_ = box;
    }
    Vec3 r_body = view.config.mount.camera_to_body(estimate_);
    Vec3 u = pid_.update(r_body - view.config.r_star, view.config.dt);
    return ControlCommand{mode_, u};
  }

  void annotate(StepRecord& rec) const override {
    rec.bbox = bbox_;
    rec.estimate = estimate_;
  }

  const Vec3& estimate() const { return estimate_; }
  bool estimate_held() const { return held_; }
  double last_score() const { return score_; }
  const PidController& pid() const { return pid_; }

 private:
  static std::optional<BoundingBox> truth_box(const AgentView& view) {
    auto b = sphere_bbox(view.intr, view.truth_camera, view.target_radius);
    if (!b) return std::nullopt;
    return clip_to_image(view.intr, *b);
  }

  ControlMode mode_;
  BoxSource source_;
  TrackerParams tracker_params_;
  PidGains gains_;
  PidController pid_;
  std::optional<TemplateTracker> tracker_;
  Vec3 estimate_ = Vec3::Zero();
  bool held_ = true;
  std::optional<BoundingBox> bbox_;
  double score_ = 0;
};

}  // namespace avt
