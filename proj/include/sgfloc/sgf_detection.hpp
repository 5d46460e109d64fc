#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgfloc/camera_geometry.hpp"
#include "sgfloc/image.hpp"
#include "sgfloc/se2.hpp"

namespace sgfloc {

struct PixelCoord {
  int u = 0;
  int v = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// One 8-connected blob of set BEV pixels.
struct BinaryShape {
  std::vector<PixelCoord> pixels;
  int min_u = 0;
  int min_v = 0;
  int max_u = -1;
  int max_v = -1;

  static BinaryShape from_pixels(std::vector<PixelCoord> pixels);
  static BinaryShape from_image(const BinaryImage& img);

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }
  /// Mean pixel coordinate (u, v).
  Eigen::Vector2d centroid() const;
};

struct HuVector {
  std::array<double, 7> h{};
  double operator[](std::size_t i) const { return h[i]; }
};

/// Scale-normalized central moments of order two and three.
struct NormalizedMoments {
  double eta20 = 0, eta11 = 0, eta02 = 0;
  double eta30 = 0, eta21 = 0, eta12 = 0, eta03 = 0;
};

/// Central moment mu_pq about the shape centroid, for p + q <= 3.
double central_moment(const BinaryShape& s, int p, int q);
NormalizedMoments normalized_moments(const BinaryShape& s);
HuVector hu_vector(const BinaryShape& s);
/// Sum of absolute component differences of raw Hu vectors.
double hu_distance(const HuVector& a, const HuVector& b);

/// 8-connected components in raster order of their first pixel; blobs
/// smaller than `min_pixels` are dropped.
std::vector<BinaryShape> connected_components(const BinaryImage& img, std::size_t min_pixels = 50);

/// True when the shape touches the image border or, if `valid` is non-empty,
/// any pixel outside the visible footprint (8-neighborhood).
bool touches_boundary(const BinaryShape& s, int width, int height, const BinaryImage* valid = nullptr);

enum class TrackState { appearing, tracking, closed };

struct TrackFrame {
  int frame = 0;
  BinaryShape shape;
  HuVector hu;
  GroundPoint centroid;  // ground frame of this frame's camera
  bool interior = false;
  double d_hu_prev = -1.0;  // distance to the previous frame of the track, -1 for the first
};

struct FeatureTrack {
  int id = 0;
  std::vector<TrackFrame> frames;
  TrackState state = TrackState::appearing;

  int first_frame() const { return frames.front().frame; }
  int last_frame() const { return frames.back().frame; }
};

struct TrackerParams {
  double gate_m = 0.5;
  int gap_frames = 3;
  std::size_t min_pixels = 50;
};

/// Associates per-frame BEV blobs into appearance episodes.
///
/// Each push consumes one BEV frame plus the robot motion since the previous
/// push (used to predict where old centroids now lie) and returns the tracks
/// that closed on this frame. Closed tracks come out in id order.
class FeatureTracker {
 public:
  FeatureTracker(const VirtualCamera& vc, TrackerParams params = {});

  std::vector<FeatureTrack> push(int frame, const BevMask& bev, const Se2& motion = Se2::identity());
  /// Closes every open track (end of stream).
  std::vector<FeatureTrack> flush();

  std::size_t open_tracks() const { return open_.size(); }

 private:
  struct Open {
    FeatureTrack track;
    Eigen::Vector2d predicted;
    int misses = 0;
  };

  VirtualCamera vc_;
  TrackerParams params_;
  std::vector<Open> open_;
  int next_id_ = 0;
};

/// Batch helper: tracks over a stream of BEV masks with optional per-frame
/// motion (motions[i] is the motion from frame i-1 to frame i).
std::vector<FeatureTrack> track_features(std::span<const BevMask> frames, const VirtualCamera& vc,
                                         TrackerParams params = {}, std::span<const Se2> motions = {});

struct SgfCandidate {
  int frame = 0;
  int track_id = 0;
  BinaryShape shape;
  HuVector hu;
  double saliency_score = 0.0;  // BEV pixel count
};

/// Picks the largest interior frame among those belonging to a stable pair
/// (consecutive track frames with hu_distance < d_max). Ties go to the
/// earliest frame.
std::optional<SgfCandidate> select_optimal_sgf(const FeatureTrack& t, double d_max = 0.005);

/// One debug record per track frame:
/// frame track_id centroid_x centroid_y hu1..hu7 d_hu_prev
std::string format_track_records(const FeatureTrack& t);

}  // namespace sgfloc
