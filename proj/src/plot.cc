#include "coopgot/plot.h"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <vector>

namespace coopgot {
namespace {

constexpr double kScale = 8.0;  // px per meter
constexpr double kPad = 40.0;

struct View {
  double min_x, max_x, min_y, max_y;
  double sx(double x) const { return (x - min_x) * kScale + kPad; }
  double sy(double y) const { return (max_y - y) * kScale + kPad; }
  double width() const { return (max_x - min_x) * kScale + 2 * kPad; }
  double height() const { return (max_y - min_y) * kScale + 2 * kPad; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string polyline(const View& v, const std::vector<Vec2>& pts, const std::string& stroke, bool dashed) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"2\"";
  if (dashed) s += " stroke-dasharray=\"6,4\"";
  s += " points=\"";
  for (const Vec2& p : pts) s += num(v.sx(p.x)) + "," + num(v.sy(p.y)) + " ";
  s += "\"/>\n";
  for (const Vec2& p : pts) {
    s += "<circle cx=\"" + num(v.sx(p.x)) + "\" cy=\"" + num(v.sy(p.y)) + "\" r=\"2.5\" fill=\"" + stroke + "\"/>\n";
  }
  return s;
}

std::string marker(const View& v, Vec2 p, const std::string& stroke, double r) {
  return "<circle cx=\"" + num(v.sx(p.x)) + "\" cy=\"" + num(v.sy(p.y)) + "\" r=\"" + num(r) +
         "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"2\"/>\n";
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// Draws an answer's geometry; class-only answers become a caption line.
std::string draw_answer(const View& v, const Answer& a, const std::string& color, double r) {
  std::string s;
  std::visit(
      [&](const auto& val) {
        using T = std::decay_t<decltype(val)>;
        if constexpr (std::is_same_v<T, ObjectList>) {
          for (Vec2 p : val.objects) s += marker(v, p, color, r);
        } else if constexpr (std::is_same_v<T, PredictionList>) {
          for (const auto& e : val.entries) {
            std::vector<Vec2> pts{e.start};
            pts.insert(pts.end(), e.waypoints.begin(), e.waypoints.end());
            s += polyline(v, pts, color, false);
          }
        } else if constexpr (std::is_same_v<T, Trajectory6>) {
          std::vector<Vec2> pts{{0.0, 0.0}};
          pts.insert(pts.end(), val.waypoints.begin(), val.waypoints.end());
          s += polyline(v, pts, color, false);
        }
      },
      a.value);
  return s;
}

}  // namespace

std::string render_sample_svg(const Scene& scene, const QaPair& qa, const std::optional<Answer>& model,
                              const std::string& title) {
  const Pose2 ego = scene.agent(qa.ego_cav).pose_at(qa.t);
  std::vector<std::pair<const TrackedObject*, BBox2>> boxes;
  View v{-10.0, 40.0, -25.0, 25.0};
  for (const TrackedObject* a : scene.agents()) {
    BBox2 b = a->box_at(qa.t);
    b.center = to_ego_frame(b.center, ego);
    if (std::abs(b.center.x) > 80.0 || std::abs(b.center.y) > 80.0) continue;
    v.min_x = std::min(v.min_x, b.center.x - 5);
    v.max_x = std::max(v.max_x, b.center.x + 5);
    v.min_y = std::min(v.min_y, b.center.y - 5);
    v.max_y = std::max(v.max_y, b.center.y + 5);
    boxes.push_back({a, b});
  }

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(v.width()) + "\" height=\"" +
                  num(v.height() + 60) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& [a, b] : boxes) {
    const auto c = bbox_corners(b);
    const bool is_ego = a->id == qa.ego_cav;
    const std::string fill = is_ego ? "#f4b400" : (a->kind == ObjectKind::kCav ? "#8ab4f8" : "#cccccc");
    s += "<polygon fill=\"" + fill + "\" stroke=\"#444\" points=\"";
    for (const Vec2& p : c) s += num(v.sx(p.x)) + "," + num(v.sy(p.y)) + " ";
    s += "\"/>\n";
  }
  if (qa.payload.contains("reference")) {
    std::vector<Vec2> ref{{0.0, 0.0}};
    for (const auto& p : qa.payload.at("reference")) ref.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    s += polyline(v, ref, "#1a73e8", true);
  }
  s += draw_answer(v, qa.gt, "#188038", 7.0);
  if (model) s += draw_answer(v, *model, "#d93025", 4.5);

  const double base = v.height() + 14;
  s += "<text x=\"8\" y=\"" + num(base) + "\">" + escape(title.empty() ? qa.uid : title) + "</text>\n";
  s += "<text x=\"8\" y=\"" + num(base + 16) + "\" fill=\"#188038\">GT: " + escape(qa.gt_text) + "</text>\n";
  if (model) {
    s += "<text x=\"8\" y=\"" + num(base + 32) + "\" fill=\"#d93025\">Model: " + escape(render_answer(*model)) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace coopgot
