#include "brainnet/sweep.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "brainnet/error.hpp"

namespace brainnet::sweep {

std::vector<double> default_grid() { return {0.05, 0.1, 0.3, 0.6}; }

namespace {

void check_grid(const std::vector<double>& g, const char* name) {
  require(!g.empty(), ErrorCode::kInvalidConfig, std::string(name) + " grid is empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    require(g[i] > 0.0 && g[i] <= 1.0, ErrorCode::kInvalidConfig, std::string(name) + " grid values must lie in (0, 1]");
    require(i == 0 || g[i] > g[i - 1], ErrorCode::kInvalidConfig, std::string(name) + " grid must be increasing");
  }
}

std::size_t count_edges(const std::vector<Matrix>& graphs) {
  std::size_t n = 0;
  for (const Matrix& a : graphs) n += graph::edge_count(a);
  return n;
}

std::size_t possible(const std::vector<Matrix>& graphs, bool exclude_diagonal) {
  std::size_t n = 0;
  for (const Matrix& a : graphs) n += a.size() - (exclude_diagonal ? std::min(a.rows(), a.cols()) : 0);
  return n;
}

}  // namespace

SweepResult sweep_thresholds(const bcpc::BcpcModel& pretrained, const data::SegmentSet& train_set,
                             const data::SegmentSet& valid_set, const data::SegmentSet& test_set,
                             const hier::ModelConfig& model_config, const train::TrainConfig& train_config,
                             const train::EvalConfig& eval_config, const std::vector<double>& grid_inner,
                             const std::vector<double>& grid_cross, data::Ratio ratio) {
  check_grid(grid_inner, "theta_inner");
  check_grid(grid_cross, "theta_cross");
  require(!train_config.ablations.no_graph, ErrorCode::kInvalidConfig, "threshold sweep needs the graph component");
  SweepResult out;
  out.grid_inner = grid_inner;
  out.grid_cross = grid_cross;
  out.ratio = ratio;

  for (std::size_t i = 0; i < grid_inner.size(); ++i) {
    for (std::size_t j = 0; j < grid_cross.size(); ++j) {
      hier::ModelConfig mc = model_config;
      mc.theta_inner = grid_inner[i];
      mc.theta_cross = grid_cross[j];
      train::TrainResult trained = train::train(pretrained, train_set, valid_set, mc, train_config);
      SweepPoint p;
      p.theta_inner = grid_inner[i];
      p.theta_cross = grid_cross[j];
      p.report = train::evaluate(trained.model, test_set, eval_config);
      const train::Metrics& m = p.report.at(data::Level::kChannel, ratio);
      p.channel_f2 = m.f2;
      p.channel_auc = m.auc;
      const train::GraphTrace trace = train::trace_graphs(trained.model, test_set, eval_config.window_len);
      std::size_t cross_possible = 0, inner_possible = 0;
      for (std::size_t d = 0; d < 2; ++d) {
        p.cross_edges += count_edges(trace.cross[0][d]);
        p.inner_edges += count_edges(trace.inner[0][d]);
        cross_possible += possible(trace.cross[0][d], false);
        inner_possible += possible(trace.inner[0][d], true);
      }
      p.cross_density = cross_possible ? static_cast<double>(p.cross_edges) / static_cast<double>(cross_possible) : 0.0;
      p.inner_density = inner_possible ? static_cast<double>(p.inner_edges) / static_cast<double>(inner_possible) : 0.0;

      const bool is_default = p.theta_inner == model_config.theta_inner && p.theta_cross == model_config.theta_cross;
      if (is_default) out.base_index = out.points.size();
      if (is_default || out.points.empty()) {
        out.base_cross_edges.assign(grid_cross.size(), 0);
        out.base_inner_edges.assign(grid_inner.size(), 0);
        for (std::size_t d = 0; d < 2; ++d) {
          for (const Matrix& s : trace.cross_scores[0][d])
            for (std::size_t k = 0; k < grid_cross.size(); ++k)
              out.base_cross_edges[k] += graph::edges_at_threshold(s, grid_cross[k], false);
          for (const Matrix& s : trace.inner_scores[0][d])
            for (std::size_t k = 0; k < grid_inner.size(); ++k)
              out.base_inner_edges[k] += graph::edges_at_threshold(s, grid_inner[k], true);
        }
      }
      out.points.push_back(std::move(p));
    }
  }

  for (std::size_t k = 1; k < out.points.size(); ++k)
    if (out.points[k].channel_f2 > out.points[out.best_index].channel_f2) out.best_index = k;
  const std::size_t bi = out.best_index / grid_cross.size(), bj = out.best_index % grid_cross.size();
  const bool inner_edge = bi == 0 || bi + 1 == grid_inner.size();
  const bool cross_edge = bj == 0 || bj + 1 == grid_cross.size();
  out.best_interior = !inner_edge && !cross_edge;
  std::ostringstream loc;
  loc << "theta_inner=" << grid_inner[bi] << " theta_cross=" << grid_cross[bj] << " ("
      << (out.best_interior ? "interior" : "boundary:");
  if (!out.best_interior) {
    if (inner_edge) loc << (bi == 0 ? " lowest" : " highest") << " theta_inner";
    if (cross_edge) loc << (bj == 0 ? " lowest" : " highest") << " theta_cross";
  }
  loc << ")";
  out.best_location = loc.str();
  return out;
}

void write_sweep_csv(const SweepResult& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << std::setprecision(10);
  out << "theta_inner,theta_cross,channel_f2,channel_auc,cross_edges,inner_edges,cross_density,inner_density,best\n";
  for (std::size_t k = 0; k < r.points.size(); ++k) {
    const SweepPoint& p = r.points[k];
    out << p.theta_inner << ',' << p.theta_cross << ',' << p.channel_f2 << ',' << p.channel_auc << ','
        << p.cross_edges << ',' << p.inner_edges << ',' << p.cross_density << ',' << p.inner_density << ','
        << (k == r.best_index ? 1 : 0) << '\n';
  }
  std::ofstream base(path.string() + ".base_edges.csv", std::ios::trunc);
  require(static_cast<bool>(base), ErrorCode::kIo, "cannot write base edge table");
  base << "kind,theta,edges\n";
  for (std::size_t k = 0; k < r.grid_cross.size(); ++k) base << "cross," << r.grid_cross[k] << ',' << r.base_cross_edges[k] << '\n';
  for (std::size_t k = 0; k < r.grid_inner.size(); ++k) base << "inner," << r.grid_inner[k] << ',' << r.base_inner_edges[k] << '\n';
}

}  // namespace brainnet::sweep
