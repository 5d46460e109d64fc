#include "sgfloc/sgf_detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "sgfloc/errors.hpp"

namespace sgfloc {

BinaryShape BinaryShape::from_pixels(std::vector<PixelCoord> pixels) {
  BinaryShape s;
  s.pixels = std::move(pixels);
  if (s.pixels.empty()) {
    return s;
  }
  s.min_u = s.max_u = s.pixels.front().u;
  s.min_v = s.max_v = s.pixels.front().v;
  for (const PixelCoord& p : s.pixels) {
    s.min_u = std::min(s.min_u, p.u);
    s.max_u = std::max(s.max_u, p.u);
    s.min_v = std::min(s.min_v, p.v);
    s.max_v = std::max(s.max_v, p.v);
  }
  return s;
}

BinaryShape BinaryShape::from_image(const BinaryImage& img) {
  std::vector<PixelCoord> px;
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      if (img.at(u, v)) px.push_back({u, v});
    }
  }
  return from_pixels(std::move(px));
}

Eigen::Vector2d BinaryShape::centroid() const {
  if (pixels.empty()) {
    throw EmptyShape("centroid of an empty shape");
  }
  double su = 0.0;
  double sv = 0.0;
  for (const PixelCoord& p : pixels) {
    su += p.u;
    sv += p.v;
  }
  const double n = static_cast<double>(pixels.size());
  return {su / n, sv / n};
}

double central_moment(const BinaryShape& s, int p, int q) {
  if (s.empty()) {
    throw EmptyShape("moment of an empty shape");
  }
  if (p < 0 || q < 0 || p + q > 3) {
    throw InvalidArgument("central moment order must satisfy p + q <= 3");
  }
  const Eigen::Vector2d c = s.centroid();
  double sum = 0.0;
  for (const PixelCoord& px : s.pixels) {
    sum += std::pow(px.u - c.x(), p) * std::pow(px.v - c.y(), q);
  }
  return sum;
}

NormalizedMoments normalized_moments(const BinaryShape& s) {
  if (s.empty()) {
    throw EmptyShape("moments of an empty shape");
  }
  const Eigen::Vector2d c = s.centroid();
  double m20 = 0, m11 = 0, m02 = 0, m30 = 0, m21 = 0, m12 = 0, m03 = 0;
  for (const PixelCoord& px : s.pixels) {
    const double du = px.u - c.x();
    const double dv = px.v - c.y();
    m20 += du * du;
    m11 += du * dv;
    m02 += dv * dv;
    m30 += du * du * du;
    m21 += du * du * dv;
    m12 += du * dv * dv;
    m03 += dv * dv * dv;
  }
  const double m00 = static_cast<double>(s.size());
  const double n2 = m00 * m00;                // mu00^(1 + 2/2)
  const double n3 = std::pow(m00, 2.5);       // mu00^(1 + 3/2)
  return {m20 / n2, m11 / n2, m02 / n2, m30 / n3, m21 / n3, m12 / n3, m03 / n3};
}

HuVector hu_vector(const BinaryShape& s) {
  const NormalizedMoments n = normalized_moments(s);
  const double a = n.eta30 + n.eta12;
  const double b = n.eta21 + n.eta03;
  const double c = n.eta30 - 3.0 * n.eta12;
  const double d = 3.0 * n.eta21 - n.eta03;
  const double e = n.eta20 - n.eta02;

  HuVector hu;
  hu.h[0] = n.eta20 + n.eta02;
  hu.h[1] = e * e + 4.0 * n.eta11 * n.eta11;
  hu.h[2] = c * c + d * d;
  hu.h[3] = a * a + b * b;
  hu.h[4] = c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b);
  hu.h[5] = e * (a * a - b * b) + 4.0 * n.eta11 * a * b;
  hu.h[6] = d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b);
  return hu;
}

double hu_distance(const HuVector& a, const HuVector& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < 7; ++j) {
    d += std::abs(a.h[j] - b.h[j]);
  }
  return d;
}

std::vector<BinaryShape> connected_components(const BinaryImage& img, std::size_t min_pixels) {
  std::vector<BinaryShape> out;
  std::vector<std::uint8_t> seen(img.data.size(), 0);
  std::vector<PixelCoord> stack;
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * img.width + u;
      if (!img.data[idx] || seen[idx]) continue;
      std::vector<PixelCoord> blob;
      seen[idx] = 1;
      stack.push_back({u, v});
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        blob.push_back(p);
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const int nu = p.u + du;
            const int nv = p.v + dv;
            if (!img.in_bounds(nu, nv)) continue;
            const std::size_t nidx = static_cast<std::size_t>(nv) * img.width + nu;
            if (img.data[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.push_back({nu, nv});
            }
          }
        }
      }
      if (blob.size() >= min_pixels) {
        std::sort(blob.begin(), blob.end(),
                  [](const PixelCoord& a, const PixelCoord& b) { return std::tie(a.v, a.u) < std::tie(b.v, b.u); });
        out.push_back(BinaryShape::from_pixels(std::move(blob)));
      }
    }
  }
  return out;
}

bool touches_boundary(const BinaryShape& s, int width, int height, const BinaryImage* valid) {
  if (s.min_u <= 0 || s.min_v <= 0 || s.max_u >= width - 1 || s.max_v >= height - 1) {
    return true;
  }
  if (valid == nullptr || valid->width == 0) {
    return false;
  }
  for (const PixelCoord& p : s.pixels) {
    for (int dv = -1; dv <= 1; ++dv) {
      for (int du = -1; du <= 1; ++du) {
        if (!valid->at(p.u + du, p.v + dv)) return true;
      }
    }
  }
  return false;
}

FeatureTracker::FeatureTracker(const VirtualCamera& vc, TrackerParams params) : vc_(vc), params_(params) {
  if (params_.gap_frames < 1) throw InvalidArgument("tracker gap must be >= 1 frame");
  if (!(params_.gate_m > 0.0)) throw InvalidArgument("tracker gate must be > 0");
}

std::vector<FeatureTrack> FeatureTracker::push(int frame, const BevMask& bev, const Se2& motion) {
  if (bev.mask.width != vc_.width || bev.mask.height != vc_.height) {
    throw DimensionMismatch("BEV mask size does not match the virtual camera");
  }
  const Se2 inv = motion.inverse();
  for (Open& o : open_) {
    o.predicted = inv.apply(o.predicted);
  }

  std::vector<TrackFrame> detections;
  for (BinaryShape& shape : connected_components(bev.mask, params_.min_pixels)) {
    TrackFrame tf;
    tf.frame = frame;
    const Eigen::Vector2d c = shape.centroid();
    tf.centroid = bev_to_ground(c.x(), c.y(), vc_);
    tf.interior = !touches_boundary(shape, vc_.width, vc_.height, &bev.valid);
    tf.hu = hu_vector(shape);
    tf.shape = std::move(shape);
    detections.push_back(std::move(tf));
  }

  // Greedy nearest-first association, deterministic on ties.
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t t = 0; t < open_.size(); ++t) {
    for (std::size_t d = 0; d < detections.size(); ++d) {
      const double dist = (open_[t].predicted - detections[d].centroid.vec()).norm();
      if (dist <= params_.gate_m) pairs.emplace_back(dist, t, d);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> track_used(open_.size(), false);
  std::vector<bool> det_used(detections.size(), false);
  for (const auto& [dist, t, d] : pairs) {
    if (track_used[t] || det_used[d]) continue;
    track_used[t] = det_used[d] = true;
    Open& o = open_[t];
    TrackFrame& tf = detections[d];
    tf.d_hu_prev = hu_distance(o.track.frames.back().hu, tf.hu);
    o.predicted = tf.centroid.vec();
    o.misses = 0;
    o.track.state = TrackState::tracking;
    o.track.frames.push_back(std::move(tf));
  }

  std::vector<FeatureTrack> closed;
  std::vector<Open> still_open;
  for (std::size_t t = 0; t < open_.size(); ++t) {
    Open& o = open_[t];
    if (!track_used[t] && ++o.misses >= params_.gap_frames) {
      o.track.state = TrackState::closed;
      closed.push_back(std::move(o.track));
    } else {
      still_open.push_back(std::move(o));
    }
  }
  open_ = std::move(still_open);

  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (det_used[d]) continue;
    Open o;
    o.track.id = next_id_++;
    o.predicted = detections[d].centroid.vec();
    o.track.frames.push_back(std::move(detections[d]));
    open_.push_back(std::move(o));
  }
  return closed;
}

std::vector<FeatureTrack> FeatureTracker::flush() {
  std::vector<FeatureTrack> closed;
  for (Open& o : open_) {
    o.track.state = TrackState::closed;
    closed.push_back(std::move(o.track));
  }
  open_.clear();
  return closed;
}

std::vector<FeatureTrack> track_features(std::span<const BevMask> frames, const VirtualCamera& vc, TrackerParams params,
                                         std::span<const Se2> motions) {
  if (!motions.empty() && motions.size() != frames.size()) {
    throw DimensionMismatch("track_features: one motion per frame expected");
  }
  FeatureTracker tracker(vc, params);
  std::vector<FeatureTrack> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto closed = tracker.push(static_cast<int>(i), frames[i], motions.empty() ? Se2::identity() : motions[i]);
    std::move(closed.begin(), closed.end(), std::back_inserter(out));
  }
  auto rest = tracker.flush();
  std::move(rest.begin(), rest.end(), std::back_inserter(out));
  return out;
}

std::optional<SgfCandidate> select_optimal_sgf(const FeatureTrack& t, double d_max) {
  const std::size_t n = t.frames.size();
  std::vector<bool> stable(n, false);
  for (std::size_t i = 1; i < n; ++i) {
    if (hu_distance(t.frames[i - 1].hu, t.frames[i].hu) < d_max) {
      stable[i - 1] = stable[i] = true;
    }
  }
  const TrackFrame* best = nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    const TrackFrame& f = t.frames[i];
    if (!stable[i] || !f.interior) continue;
    if (best == nullptr || f.shape.size() > best->shape.size()) {
      best = &f;
    }
  }
  if (best == nullptr) {
    return std::nullopt;
  }
  return SgfCandidate{best->frame, t.id, best->shape, best->hu, static_cast<double>(best->shape.size())};
}

std::string format_track_records(const FeatureTrack& t) {
  std::string out;
  char buf[512];
  for (const TrackFrame& f : t.frames) {
    std::snprintf(buf, sizeof(buf), "%d %d %.6f %.6f %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", f.frame, t.id,
                  f.centroid.x, f.centroid.y, f.hu.h[0], f.hu.h[1], f.hu.h[2], f.hu.h[3], f.hu.h[4], f.hu.h[5],
                  f.hu.h[6], f.d_hu_prev);
    out += buf;
  }
  return out;
}

}  // namespace sgfloc
