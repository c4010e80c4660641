#include "sse/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sse/artifacts.hpp"

namespace sse {

namespace {

constexpr double kScale = 20.0;  // pixels per goal-space unit
constexpr double kMargin = 10.0;

class Canvas {
 public:
  explicit Canvas(const Box& bounds) : b_(bounds) {
    out_.setf(std::ios::fixed);
    out_.precision(2);
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(b_.width()) + 2 * kMargin
         << "\" height=\"" << px(b_.height()) + 2 * kMargin << "\">\n";
    out_ << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  }

  void rect(const Box& box, const std::string& fill, double opacity = 1.0) {
    const Box c = clip(box);
    if (!c.nondegenerate()) return;
    out_ << "<rect x=\"" << sx(c.x_min) << "\" y=\"" << sy(c.y_max) << "\" width=\"" << px(c.width())
         << "\" height=\"" << px(c.height()) << "\" fill=\"" << fill << "\"";
    if (opacity < 1.0) out_ << " fill-opacity=\"" << opacity << "\"";
    out_ << "/>\n";
  }

  void line(GoalPoint a, GoalPoint b, const std::string& stroke, double width) {
    out_ << "<line x1=\"" << sx(a.x) << "\" y1=\"" << sy(a.y) << "\" x2=\"" << sx(b.x) << "\" y2=\"" << sy(b.y)
         << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
  }

  void polyline(const std::vector<GoalPoint>& pts, const std::string& stroke, double width, bool dashed) {
    if (pts.size() < 2) return;
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"";
    if (dashed) out_ << " stroke-dasharray=\"4 3\"";
    out_ << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out_ << (i ? " " : "") << sx(pts[i].x) << ',' << sy(pts[i].y);
    }
    out_ << "\"/>\n";
  }

  void circle(GoalPoint c, double r_px, const std::string& fill) {
    out_ << "<circle cx=\"" << sx(c.x) << "\" cy=\"" << sy(c.y) << "\" r=\"" << r_px << "\" fill=\"" << fill
         << "\"/>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  static double px(double v) { return v * kScale; }
  double sx(double x) const { return kMargin + px(x - b_.x_min); }
  double sy(double y) const { return kMargin + px(b_.y_max - y); }
  Box clip(const Box& box) const {
    return {std::max(box.x_min, b_.x_min), std::max(box.y_min, b_.y_min), std::min(box.x_max, b_.x_max),
            std::min(box.y_max, b_.y_max)};
  }

  Box b_;
  std::ostringstream out_;
};

std::string hex_color(double r, double g, double b) {
  auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
  return buf;
}

// Green for the cheapest edge, red for the most expensive.
std::string cost_color(double t) { return hex_color(0.2 + 0.7 * t, 0.65 * (1.0 - t) + 0.15, 0.25); }

void draw_env(Canvas& canvas, const EnvConfig& env, bool zones) {
  if (zones) {
    for (const SlipZone& z : env.slip_zones) canvas.rect(z.area, "#f4a582", 0.6);
  }
  for (const Box& w : env.walls) canvas.rect(w, "#404040");
}

void draw_task(Canvas& canvas, const EnvConfig& env) {
  canvas.circle(env.start, 5.0, "#1b7837");
  for (const GoalPoint& p : env.task.points) canvas.circle(p, 5.0, "#b2182b");
}

}  // namespace

std::string render_maze_svg(const RenderScene& scene) {
  Canvas canvas(scene.env.bounds);
  draw_env(canvas, scene.env, true);

  double lo = kInfiniteCost, hi = 0.0;
  for (const RenderEdge& e : scene.edges) {
    if (!std::isfinite(e.refined_cost)) continue;
    lo = std::min(lo, e.refined_cost);
    hi = std::max(hi, e.refined_cost);
  }
  for (const RenderEdge& e : scene.edges) {
    if (!std::isfinite(e.refined_cost) || e.src < 0 || e.dst < 0 ||
        e.src >= static_cast<int>(scene.nodes.size()) || e.dst >= static_cast<int>(scene.nodes.size())) {
      continue;
    }
    const double t = hi > lo ? (e.refined_cost - lo) / (hi - lo) : 0.0;
    canvas.line(scene.nodes[static_cast<std::size_t>(e.src)], scene.nodes[static_cast<std::size_t>(e.dst)],
                cost_color(t), 1.0);
  }
  for (const GoalPoint& n : scene.nodes) canvas.circle(n, 1.5, "#636363");
  for (const auto& path : scene.paths) canvas.polyline(path, "#2166ac", 2.0, true);
  canvas.polyline(scene.trajectory, "#762a83", 2.0, false);
  draw_task(canvas, scene.env);
  return canvas.finish();
}

std::string render_heatmap_svg(const RenderScene& scene) {
  Canvas canvas(scene.env.bounds);
  double most = 0.0;
  for (const RenderCell& c : scene.cells) most = std::max(most, c.visits);
  for (const RenderCell& c : scene.cells) {
    const double t = most > 0.0 ? c.visits / most : 0.0;
    canvas.rect(c.box, hex_color(0.97 - 0.75 * t, 0.97 - 0.55 * t, 0.97 - 0.2 * t));
    if (c.failure_ratio > 0.0) canvas.rect(c.box, "#d7301f", 0.8 * std::min(1.0, c.failure_ratio));
  }
  draw_env(canvas, scene.env, false);
  draw_task(canvas, scene.env);
  return canvas.finish();
}

RenderScene load_scene(const std::filesystem::path& dir) {
  RenderScene s;
  const auto env_path = dir / "env.txt";
  if (!std::filesystem::exists(env_path)) throw std::runtime_error("missing artifact file '" + env_path.string() + "'");
  s.env = load_env_file(env_path.string());

  const CsvTable nodes = read_csv(dir / "graph_nodes.csv");
  const std::size_t nx = nodes.column("x"), ny = nodes.column("y");
  for (const auto& r : nodes.rows) s.nodes.push_back({r[nx], r[ny]});

  const CsvTable edges = read_csv(dir / "graph_edges.csv");
  const std::size_t es = edges.column("src"), ed = edges.column("dst"), er = edges.column("raw_cost"),
                    ef = edges.column("refined_cost");
  for (const auto& r : edges.rows) {
    s.edges.push_back({static_cast<int>(r[es]), static_cast<int>(r[ed]), r[er], r[ef]});
  }

  const CsvTable paths = read_csv(dir / "paths.csv");
  const std::size_t pd = paths.column("decision"), px = paths.column("x"), py = paths.column("y");
  std::map<int, std::vector<GoalPoint>> by_decision;
  for (const auto& r : paths.rows) by_decision[static_cast<int>(r[pd])].push_back({r[px], r[py]});
  for (auto& [d, pts] : by_decision) s.paths.push_back(std::move(pts));

  const CsvTable traj = read_csv(dir / "trajectory.csv");
  const std::size_t tx = traj.column("x"), ty = traj.column("y");
  for (const auto& r : traj.rows) s.trajectory.push_back({r[tx], r[ty]});

  const CsvTable grid = read_csv(dir / "grid.csv");
  const std::size_t gx = grid.column("x_lo"), gy = grid.column("y_lo"), gv = grid.column("visits"),
                    gr = grid.column("ratio");
  // The cell side is the smallest gap between distinct lower corners.
  double side = std::max(s.env.bounds.width(), s.env.bounds.height());
  for (const auto& r : grid.rows) {
    const double dx = r[gx] - s.env.bounds.x_min, dy = r[gy] - s.env.bounds.y_min;
    if (dx > 1e-12) side = std::min(side, dx);
    if (dy > 1e-12) side = std::min(side, dy);
  }
  for (const auto& r : grid.rows) {
    s.cells.push_back({{r[gx], r[gy], r[gx] + side, r[gy] + side}, r[gv], r[gr]});
  }
  return s;
}

void render_run_dir(const std::filesystem::path& dir) {
  const RenderScene scene = load_scene(dir);
  for (const auto& [name, text] : {std::pair{"maze.svg", render_maze_svg(scene)},
                                   std::pair{"heatmap.svg", render_heatmap_svg(scene)}}) {
    std::ofstream out(dir / name);
    out << text;
    if (!out) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
  }
}

}  // namespace sse
