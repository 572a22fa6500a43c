#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdhf/archive.hpp"
#include "qdhf/config.hpp"
#include "qdhf/io.hpp"
#include "qdhf/metrics.hpp"

namespace qdhf {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std, 0 for a single value
};

/// Values are summed in sorted order so the result does not depend on the
/// order of the input.
inline MeanStd mean_std(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("mean_std: no values");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

/// Average ranks (1-based), ties share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation: Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("spearman: need two equal-length samples of size >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// One finished run as seen by the aggregator.
struct TrialRecord {
  ExperimentConfig config;
  MetricsRow final;
};

struct TrialSummary {
  std::string strategy;
  std::string task;
  int trials = 0;
  std::map<std::string, MeanStd> metrics;
};

inline nlohmann::json to_json(const TrialSummary& s) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, ms] : s.metrics) metrics[name] = {{"mean", ms.mean}, {"std", ms.std}};
  return {{"strategy", s.strategy}, {"task", s.task}, {"trials", s.trials}, {"metrics", metrics}};
}

/// Mean and sample std of the final metrics. All runs must share the same
/// config apart from seed and output directory.
inline TrialSummary aggregate_trials(const std::vector<TrialRecord>& runs) {
  if (runs.empty()) throw InvalidArgument("aggregate_trials: no runs");
  auto normalized = [](ExperimentConfig c) {
    c.seed = 0;
    c.out.clear();
    return c;
  };
  const ExperimentConfig ref = normalized(runs.front().config);
  for (const auto& r : runs) {
    if (!(normalized(r.config) == ref)) {
      throw InvalidArgument("aggregate_trials: runs differ in more than the seed");
    }
  }
  TrialSummary s;
  s.strategy = to_string(ref.strategy);
  s.task = ref.task;
  s.trials = static_cast<int>(runs.size());
  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(field(r.final));
    return mean_std(std::move(v));
  };
  s.metrics["qd_score_archive"] = collect([](const MetricsRow& m) { return m.qd_score_archive; });
  s.metrics["coverage_archive"] = collect([](const MetricsRow& m) { return m.coverage_archive; });
  s.metrics["qd_score_all"] = collect([](const MetricsRow& m) { return m.qd_score_all; });
  s.metrics["coverage_all"] = collect([](const MetricsRow& m) { return m.coverage_all; });
  const bool all_val = std::all_of(runs.begin(), runs.end(),
                                   [](const TrialRecord& r) { return r.final.val_acc.has_value(); });
  if (all_val) s.metrics["val_acc"] = collect([](const MetricsRow& m) { return *m.val_acc; });
  return s;
}

// ---------------------------------------------------------------------------
// Budget sweep

struct SweepRow {
  int budget = 0;
  Strategy strategy = Strategy::QdhfOnline;
  int trial = 0;
  std::uint64_t seed = 0;
  double qd_score_all = 0.0;
  std::optional<double> val_acc;
};

using RunFn = std::function<MetricsRow(const ExperimentConfig&)>;

/// Runs qdhf-offline and qdhf-online for every budget and trial. Each run
/// gets its own seed: base seed + (budget index * trials + trial).
inline std::vector<SweepRow> sweep_budget(const std::vector<int>& budgets,
                                          const ExperimentConfig& base, int trials,
                                          const RunFn& run) {
  if (budgets.empty()) throw InvalidArgument("sweep: need at least one budget");
  if (!std::is_sorted(budgets.begin(), budgets.end())) {
    throw InvalidArgument("sweep: budgets must be sorted ascending");
  }
  if (trials < 1) throw InvalidArgument("sweep: trials must be >= 1");
  std::vector<SweepRow> rows;
  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t seed =
          base.seed + static_cast<std::uint64_t>(bi) * static_cast<std::uint64_t>(trials) +
          static_cast<std::uint64_t>(t);
      for (Strategy s : {Strategy::QdhfOffline, Strategy::QdhfOnline}) {
        ExperimentConfig c = base;
        c.strategy = s;
        c.engine.budget_total = budgets[bi];
        c.seed = seed;
        c.validate();
        const MetricsRow m = run(c);
        rows.push_back({budgets[bi], s, t, seed, m.qd_score_all, m.val_acc});
      }
    }
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "budget,strategy,qd_score_all,val_acc\n";
  for (const auto& r : rows) {
    out << r.budget << ',' << to_string(r.strategy) << ',' << format_double(r.qd_score_all) << ',';
    if (r.val_acc) out << format_double(*r.val_acc);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Heatmaps

/// Piecewise-linear viridis approximation, t in [0,1].
inline std::array<int, 3> viridis(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * static_cast<double>(stops.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), stops.size() - 2);
  const double f = pos - static_cast<double>(i);
  std::array<int, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
  }
  return rgb;
}

/// Row j, column i holds the objective of cell (i, j); empty cells are blank.
inline std::string heatmap_csv(const Archive& archive) {
  if (archive.dims() != 2) throw InvalidArgument("export_heatmap: archive must be 2-D");
  const int nx = archive.shape()[0];
  const int ny = archive.shape()[1];
  std::ostringstream out;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i) out << ',';
      if (const auto& e = archive.at({i, j})) out << format_double(e->objective);
    }
    out << '\n';
  }
  return out.str();
}

/// One rect per filled cell, colored by objective on [0,1]; y grows upward.
inline std::string heatmap_svg(const Archive& archive, int cell_px = 8) {
  if (archive.dims() != 2) throw InvalidArgument("export_heatmap: archive must be 2-D");
  const int nx = archive.shape()[0];
  const int ny = archive.shape()[1];
  std::ostringstream out;
  out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << nx * cell_px << R"(" height=")"
      << ny * cell_px << R"(" viewBox="0 0 )" << nx * cell_px << ' ' << ny * cell_px << "\">\n";
  out << R"(<rect width="100%" height="100%" fill="#ffffff" stroke="#000000"/>)" << '\n';
  for (std::size_t f : archive.filled_cells()) {
    const CellIndex idx = archive.unflat(f);
    const auto rgb = viridis(archive.at(idx)->objective);
    out << "<rect x=\"" << idx[0] * cell_px << "\" y=\"" << (ny - 1 - idx[1]) * cell_px
        << "\" width=\"" << cell_px << "\" height=\"" << cell_px << "\" fill=\"rgb(" << rgb[0]
        << ',' << rgb[1] << ',' << rgb[2] << ")\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// Writes heatmap.csv and heatmap.svg into `dir`.
inline void export_heatmap(const Archive& archive, const fs::path& dir) {
  const std::string csv = heatmap_csv(archive);
  const std::string svg = heatmap_svg(archive);
  fs::create_directories(dir);
  write_text(dir / "heatmap.csv", csv);
  write_text(dir / "heatmap.svg", svg);
}

}  // namespace qdhf
