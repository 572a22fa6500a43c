#pragma once

#include <optional>
#include <vector>

#include "qdhf/archive.hpp"

namespace qdhf {

/// 100 * (sum of elite objectives) / total cells.
inline double qd_score(const Archive& archive) {
  if (archive.total_cells() == 0) return 0.0;
  double sum = 0.0;
  archive.for_each_elite([&](const Individual& e) { sum += e.objective; });
  return 100.0 * sum / static_cast<double>(archive.total_cells());
}

/// 100 * filled / total cells.
inline double coverage(const Archive& archive) {
  if (archive.total_cells() == 0) return 0.0;
  return 100.0 * static_cast<double>(archive.filled()) /
         static_cast<double>(archive.total_cells());
}

struct ArchiveMetrics {
  double qd_score = 0.0;
  double coverage = 0.0;
};

/// QD score and coverage the elites of `archive` would achieve if
/// re-inserted into an empty ground-truth grid. Avoids materializing the
/// view archive on every iteration.
inline ArchiveMetrics ground_truth_view_metrics(const Archive& archive,
                                                const MeasureBounds& gt_bounds,
                                                const std::vector<int>& gt_shape) {
  std::size_t total = 1;
  for (int s : gt_shape) total *= static_cast<std::size_t>(s);
  std::vector<double> best(total, -1.0);
  std::size_t filled = 0;
  archive.for_each_elite([&](const Individual& e) {
    const CellIndex idx = cell_index(e.gt_measures, gt_bounds, gt_shape);
    std::size_t f = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      f = f * static_cast<std::size_t>(gt_shape[i]) + static_cast<std::size_t>(idx[i]);
    }
    if (best[f] < 0.0) ++filled;
    if (e.objective > best[f]) best[f] = e.objective;
  });
  double sum = 0.0;
  for (double b : best) {
    if (b >= 0.0) sum += b;
  }
  return {100.0 * sum / static_cast<double>(total),
          100.0 * static_cast<double>(filled) / static_cast<double>(total)};
}

/// Separate ground-truth archives used only for evaluation.
struct EvalArchives {
  Archive all_solutions;       // every evaluated individual, insert-only
  Archive final_archive_view;  // final working elites re-inserted by ground truth
};

inline Archive ground_truth_view(const Archive& working, const MeasureBounds& gt_bounds,
                                 const std::vector<int>& gt_shape) {
  Archive view(gt_shape, gt_bounds, MeasureSpace::GroundTruth);
  working.for_each_elite([&](const Individual& e) { view.insert(e); });
  return view;
}

struct MetricsRow {
  int iteration = 0;
  double qd_score_archive = 0.0;
  double coverage_archive = 0.0;
  double qd_score_all = 0.0;
  double coverage_all = 0.0;
  int judgments_used = 0;
  std::optional<double> val_acc;
};

}  // namespace qdhf
