#pragma once

#include <string>
#include <vector>

#include "hlv/types.hpp"

namespace hlv {

/// Plot coordinates on the unit triangle: E at (0, 0), N at (1, 0),
/// C at (0.5, sqrt(3)/2).
struct TernaryPoint {
  double x = 0.0;
  double y = 0.0;
};

TernaryPoint ternary_coords(const JudgmentDistribution& d) noexcept;

struct ZoomResult {
  JudgmentDistribution distribution;
  bool clipped = false;
};

/// Scales d away from (scale > 1) or toward the centroid. Components pushed
/// below zero are clipped and the result renormalized.
ZoomResult zoom(const JudgmentDistribution& d, double scale);

struct LabeledPoint {
  std::string id;
  TernaryPoint point;
  std::string dataset;
  /// Set when zooming pushed the point off the simplex.
  bool clipped = false;
};

struct ErrorPair {
  std::string id;
  TernaryPoint from;
  TernaryPoint to;
  double distance = 0.0;
};

struct PlotSpec {
  std::string title;
  double point_radius = 3.0;
  /// Recorded in the figure; coordinates passed in are already zoomed.
  double zoom_scale = 1.0;
  /// Error-line ramp endpoints (lightest for zero distance, darkest for the
  /// largest distance in the figure).
  std::string light_shade = "#c7e9c0";
  std::string dark_shade = "#00441b";
  /// Free-form lines (input digests and the like) written into <metadata>.
  std::vector<std::string> provenance;

  void validate() const;
};

/// Standalone SVG: triangle frame, corner labels, one <circle> per point.
/// Colors follow the order in which dataset labels first appear.
std::string render_scatter(const std::vector<LabeledPoint>& points, const PlotSpec& spec);

/// One <line> per pair shaded by distance, plus a <circle> at each end.
std::string render_error_plot(const std::vector<ErrorPair>& pairs, const PlotSpec& spec);

/// Shade for distance d on a ramp whose darkest value sits at max_distance.
std::string error_shade(double distance, double max_distance, const PlotSpec& spec);

/// id,x,y,dataset,clipped rows for external plotting.
std::string points_csv(const std::vector<LabeledPoint>& points);

}  // namespace hlv
