#include "sse/artifacts.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sse {

namespace {

// Fixed formatting so identical runs produce identical files.
std::ostream& num(std::ostream& out, double v) { return out << format_number(v); }

const char* source_name(SubgoalSource s) {
  switch (s) {
    case SubgoalSource::goal: return "0";
    case SubgoalSource::greedy: return "1";
    case SubgoalSource::random: return "2";
    case SubgoalSource::novel: return "3";
  }
  return "1";
}

}  // namespace

void write_grid_csv(std::ostream& out, const GridPartition& partition) {
  out << "m,x_lo,y_lo,visits,fails,ratio\n";
  for (int m = 0; m < partition.cell_count(); ++m) {
    const Box b = partition.cell_box(m);
    const CellStats& s = partition.stats(m);
    out << m << ',';
    num(out, b.x_min) << ',';
    num(out, b.y_min) << ',' << s.visits << ',' << s.fails << ',';
    num(out, partition.failure_ratio(m)) << '\n';
  }
}

void write_graph_nodes_csv(std::ostream& out, const LandmarkGraph& graph) {
  out << "id,x,y\n";
  for (int i = 0; i < graph.size(); ++i) {
    out << i << ',';
    num(out, graph.node(i).x) << ',';
    num(out, graph.node(i).y) << '\n';
  }
}

void write_graph_edges_csv(std::ostream& out, const LandmarkGraph& graph, const RawCostFn& raw_cost,
                           const GridPartition* partition, double c_dist) {
  out << "src,dst,raw_cost,refined_cost\n";
  for (int i = 0; i < graph.size(); ++i) {
    for (int j : graph.neighbors(i)) {
      const double raw = raw_cost(graph.node(i), graph.node(j));
      double ratio = 0.0;
      if (partition != nullptr) ratio = partition->failure_ratio(partition->cell_of(graph.node(j)));
      out << i << ',' << j << ',';
      num(out, raw) << ',';
      num(out, refined_cost(raw, ratio, c_dist)) << '\n';
    }
  }
}

void write_decisions_csv(std::ostream& out, const std::vector<DecisionRecord>& decisions) {
  out << "decision,cell,step,flags,subgoal_x,subgoal_y,source,path_length,k,success,reward\n";
  for (const DecisionRecord& d : decisions) {
    out << d.index << ',' << d.state.cell << ',' << d.state.step << ',' << d.state.flags << ',';
    num(out, d.choice.point.x) << ',';
    num(out, d.choice.point.y) << ',' << source_name(d.choice.source) << ',' << d.path_length << ','
                               << d.steps << ',' << (d.success ? 1 : 0) << ',';
    num(out, d.reward) << '\n';
  }
}

void write_paths_csv(std::ostream& out, const std::vector<DecisionRecord>& decisions) {
  out << "decision,index,x,y\n";
  for (const DecisionRecord& d : decisions) {
    for (std::size_t i = 0; i < d.waypoints.size(); ++i) {
      out << d.index << ',' << i << ',';
      num(out, d.waypoints[i].x) << ',';
      num(out, d.waypoints[i].y) << '\n';
    }
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryPoint>& trajectory) {
  out << "t,x,y,reward,flags\n";
  for (const TrajectoryPoint& p : trajectory) {
    out << p.t << ',';
    num(out, p.position.x) << ',';
    num(out, p.position.y) << ',';
    num(out, p.reward) << ',' << p.flags << '\n';
  }
}

void write_low_heatmap_csv(std::ostream& out, const LowLearner& low, const EnvConfig& env, GoalPoint waypoint) {
  out << "x,y,value\n";
  const double c = low.config().cell_size;
  const Box& b = env.bounds;
  const int cols = static_cast<int>(std::floor(b.width() / c + 1e-9));
  const int rows = static_cast<int>(std::floor(b.height() / c + 1e-9));
  const GoalPoint wp = low.snap(waypoint);
  for (int j = 0; j <= rows; ++j) {
    for (int i = 0; i <= cols; ++i) {
      const GoalPoint p{b.x_min + i * c, b.y_min + j * c};
      if (!env.free(p) || !low.within_key_range(p, wp)) continue;
      num(out, p.x) << ',';
      num(out, p.y) << ',';
      num(out, low.q_value(p, wp)) << '\n';
    }
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::runtime_error("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing artifact file '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty artifact file '" + path.string() + "'");
  {
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) t.header.push_back(cell);
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.header.size()) + " fields");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace sse
