#include "hlv/viz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "hlv/error.hpp"

namespace hlv {

namespace {

const double kSqrt3Over2 = std::sqrt(3.0) / 2.0;

constexpr double kSide = 520.0;
constexpr double kMarginX = 60.0;
constexpr double kMarginTop = 70.0;
constexpr double kWidth = kSide + 2 * kMarginX;
constexpr double kHeight = 600.0;

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000" so identical geometry renders identically.
  if (std::string_view(buf) == "-0.000") return "0.000";
  return buf;
}

double px(const TernaryPoint& p) { return kMarginX + kSide * p.x; }
double py(const TernaryPoint& p) { return kMarginTop + kSide * kSqrt3Over2 - kSide * p.y; }

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

void header(std::ostringstream& os, const PlotSpec& spec) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\""
     << num(kHeight) << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\">\n"
     << "<desc>ternary plot; zoom scale " << num(spec.zoom_scale) << "</desc>\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
     << "\" fill=\"#ffffff\"/>\n";
  if (!spec.provenance.empty()) {
    os << "<metadata>\n";
    for (const auto& line : spec.provenance) os << escape(line) << '\n';
    os << "</metadata>\n";
  }
  if (!spec.title.empty()) {
    os << "<text x=\"" << num(kWidth / 2) << "\" y=\"30.000\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"16\">" << escape(spec.title) << "</text>\n";
  }
  const TernaryPoint e{0.0, 0.0};
  const TernaryPoint n{1.0, 0.0};
  const TernaryPoint c{0.5, kSqrt3Over2};
  os << "<g class=\"frame\">\n"
     << "<polygon points=\"" << num(px(e)) << ',' << num(py(e)) << ' ' << num(px(n)) << ','
     << num(py(n)) << ' ' << num(px(c)) << ',' << num(py(c))
     << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n"
     << "<text x=\"" << num(px(e) - 12) << "\" y=\"" << num(py(e) + 22)
     << "\" font-family=\"sans-serif\" font-size=\"16\">E</text>\n"
     << "<text x=\"" << num(px(n) + 2) << "\" y=\"" << num(py(n) + 22)
     << "\" font-family=\"sans-serif\" font-size=\"16\">N</text>\n"
     << "<text x=\"" << num(px(c) - 5) << "\" y=\"" << num(py(c) - 10)
     << "\" font-family=\"sans-serif\" font-size=\"16\">C</text>\n"
     << "</g>\n";
}

std::array<int, 3> parse_hex(const std::string& hex) {
  unsigned r = 0;
  unsigned g = 0;
  unsigned b = 0;
  if (hex.size() != 7 || hex[0] != '#' || std::sscanf(hex.c_str() + 1, "%02x%02x%02x", &r, &g, &b) != 3) {
    throw UsageError("expected a #rrggbb color, got '" + hex + "'");
  }
  return {static_cast<int>(r), static_cast<int>(g), static_cast<int>(b)};
}

}  // namespace

TernaryPoint ternary_coords(const JudgmentDistribution& d) noexcept {
  return {d[NliLabel::Neutral] + 0.5 * d[NliLabel::Contradiction],
          kSqrt3Over2 * d[NliLabel::Contradiction]};
}

ZoomResult zoom(const JudgmentDistribution& d, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw UsageError("zoom scale must be positive");
  if (scale == 1.0) return {d, false};
  constexpr double c = 1.0 / 3.0;
  Probs z{};
  bool clipped = false;
  for (std::size_t i = 0; i < 3; ++i) {
    z[i] = c + scale * (d.at(i) - c);
    if (z[i] < 0.0) {
      z[i] = 0.0;
      clipped = true;
    }
  }
  if (clipped) return {JudgmentDistribution::normalized(z), true};
  // Unclipped values sum to one analytically; renormalize away rounding only.
  return {JudgmentDistribution::normalized(z), false};
}

void PlotSpec::validate() const {
  if (!(zoom_scale > 0.0)) throw UsageError("zoom scale must be positive");
  if (!(point_radius > 0.0)) throw UsageError("point radius must be positive");
  parse_hex(light_shade);
  parse_hex(dark_shade);
}

std::string error_shade(double distance, double max_distance, const PlotSpec& spec) {
  const auto lo = parse_hex(spec.light_shade);
  const auto hi = parse_hex(spec.dark_shade);
  const double t = max_distance > 0.0 ? std::clamp(distance / max_distance, 0.0, 1.0) : 0.0;
  char buf[8];
  std::array<int, 3> rgb{};
  for (std::size_t i = 0; i < 3; ++i) {
    rgb[i] = static_cast<int>(std::lround(lo[i] + t * (hi[i] - lo[i])));
  }
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string render_scatter(const std::vector<LabeledPoint>& points, const PlotSpec& spec) {
  spec.validate();
  std::ostringstream os;
  header(os, spec);
  std::map<std::string, std::size_t> colors;
  std::vector<std::string> order;
  for (const auto& p : points) {
    if (colors.emplace(p.dataset, colors.size()).second) order.push_back(p.dataset);
  }
  os << "<g class=\"points\">\n";
  for (const auto& p : points) {
    os << "<circle class=\"pt\" cx=\"" << num(px(p.point)) << "\" cy=\"" << num(py(p.point))
       << "\" r=\"" << num(spec.point_radius) << "\" fill=\""
       << kPalette[colors[p.dataset] % kPalette.size()] << "\" fill-opacity=\"0.6\">"
       << "<title>" << escape(p.id) << "</title></circle>\n";
  }
  os << "</g>\n<g class=\"legend\">\n";
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double y = kHeight - 60.0 + 18.0 * static_cast<double>(i % 3);
    const double x = 20.0 + 200.0 * static_cast<double>(i / 3);
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 10) << "\" width=\"10.000\" height=\"10.000\" fill=\""
       << kPalette[i % kPalette.size()] << "\"/>"
       << "<text x=\"" << num(x + 16) << "\" y=\"" << num(y)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(order[i]) << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string render_error_plot(const std::vector<ErrorPair>& pairs, const PlotSpec& spec) {
  spec.validate();
  double max_distance = 0.0;
  for (const auto& p : pairs) {
    if (!(p.distance >= 0.0)) throw UsageError("error distances must be non-negative");
    max_distance = std::max(max_distance, p.distance);
  }
  std::ostringstream os;
  header(os, spec);
  os << "<g class=\"errors\">\n";
  for (const auto& p : pairs) {
    os << "<line class=\"err\" x1=\"" << num(px(p.from)) << "\" y1=\"" << num(py(p.from))
       << "\" x2=\"" << num(px(p.to)) << "\" y2=\"" << num(py(p.to)) << "\" stroke=\""
       << error_shade(p.distance, max_distance, spec) << "\" stroke-width=\"1.2\">"
       << "<title>" << escape(p.id) << ' ' << num(p.distance) << "</title></line>\n";
  }
  os << "</g>\n<g class=\"points\">\n";
  for (const auto& p : pairs) {
    os << "<circle class=\"pt from\" cx=\"" << num(px(p.from)) << "\" cy=\"" << num(py(p.from))
       << "\" r=\"" << num(spec.point_radius * 0.7) << "\" fill=\"" << kPalette[0]
       << "\" fill-opacity=\"0.6\"/>\n"
       << "<circle class=\"pt to\" cx=\"" << num(px(p.to)) << "\" cy=\"" << num(py(p.to))
       << "\" r=\"" << num(spec.point_radius * 0.7) << "\" fill=\"" << kPalette[1]
       << "\" fill-opacity=\"0.6\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string points_csv(const std::vector<LabeledPoint>& points) {
  std::ostringstream os;
  os << "id,x,y,dataset,clipped\n";
  os.precision(17);
  for (const auto& p : points) {
    os << p.id << ',' << p.point.x << ',' << p.point.y << ',' << p.dataset << ',' << (p.clipped ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace hlv
