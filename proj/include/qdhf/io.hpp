#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdhf/archive.hpp"
#include "qdhf/engine.hpp"
#include "qdhf/judgment.hpp"
#include "qdhf/latent/model.hpp"
#include "qdhf/metrics.hpp"

namespace qdhf {

namespace fs = std::filesystem;

class OutputExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string to_string(MeasureSpace s) {
  return s == MeasureSpace::GroundTruth ? "ground_truth" : "latent";
}

inline nlohmann::json archive_to_json(const Archive& archive) {
  nlohmann::json bounds = nlohmann::json::array();
  for (const auto& d : archive.bounds().dims()) bounds.push_back({d.low, d.high});
  nlohmann::json elites = nlohmann::json::array();
  for (std::size_t f : archive.filled_cells()) {
    const CellIndex idx = archive.unflat(f);
    const Individual& e = *archive.at(idx);
    nlohmann::json j{{"id", e.id},
                     {"cell", idx},
                     {"genome", to_std(e.genome.values)},
                     {"objective", e.objective},
                     {"gt_measures", to_std(e.gt_measures)}};
    if (e.latent_measures) j["latent_measures"] = to_std(*e.latent_measures);
    elites.push_back(std::move(j));
  }
  return {{"shape", archive.shape()},
          {"bounds", bounds},
          {"measure_space", to_string(archive.space())},
          {"elites", elites}};
}

inline Archive archive_from_json(const nlohmann::json& j) {
  std::vector<Interval> dims;
  for (const auto& b : j.at("bounds")) dims.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  const auto space_name = j.at("measure_space").get<std::string>();
  const MeasureSpace space =
      space_name == "latent" ? MeasureSpace::Latent : MeasureSpace::GroundTruth;
  Archive archive(j.at("shape").get<std::vector<int>>(), MeasureBounds(std::move(dims)), space);
  for (const auto& e : j.at("elites")) {
    Individual ind;
    ind.id = e.at("id").get<IndividualId>();
    ind.genome = Genome(from_std(e.at("genome").get<std::vector<double>>()));
    ind.objective = e.at("objective").get<double>();
    ind.gt_measures = from_std(e.at("gt_measures").get<std::vector<double>>());
    if (e.contains("latent_measures")) {
      ind.latent_measures = from_std(e.at("latent_measures").get<std::vector<double>>());
    }
    archive.insert(std::move(ind));
  }
  return archive;
}

inline constexpr const char* kMetricsHeader =
    "iteration,qd_score_archive,coverage_archive,qd_score_all,coverage_all,judgments_used,val_acc";

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.iteration << ',' << format_double(r.qd_score_archive) << ','
        << format_double(r.coverage_archive) << ',' << format_double(r.qd_score_all) << ','
        << format_double(r.coverage_all) << ',' << r.judgments_used << ',';
    if (r.val_acc) out << format_double(*r.val_acc);
    out << '\n';
  }
  return out.str();
}

inline std::vector<MetricsRow> parse_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw InvalidArgument("metrics.csv: unexpected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 6) cells.emplace_back();
    if (cells.size() != 7) throw InvalidArgument("metrics.csv: bad row '" + line + "'");
    MetricsRow r;
    r.iteration = std::stoi(cells[0]);
    r.qd_score_archive = std::stod(cells[1]);
    r.coverage_archive = std::stod(cells[2]);
    r.qd_score_all = std::stod(cells[3]);
    r.coverage_all = std::stod(cells[4]);
    r.judgments_used = std::stoi(cells[5]);
    if (!cells[6].empty()) r.val_acc = std::stod(cells[6]);
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json judgments_to_json(const std::vector<Judgment>& judgments) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& j : judgments) {
    out.push_back({{"ref", j.triplet.ref},
                   {"a", j.triplet.a},
                   {"b", j.triplet.b},
                   {"choice", to_string(j.choice)},
                   {"source", to_string(j.source)}});
  }
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_text(path)); }

/// Creates `dir`, refusing to reuse a non-empty directory unless `force`.
inline void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw OutputExists("output directory " + dir.string() +
                         " is not empty (pass --force to overwrite)");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

/// Writes the standard run layout: archive.json, metrics.csv, config.json,
/// plus the evaluation archives, the latent model and the judgment log.
inline void write_run(const fs::path& dir, const RunResult& run, const nlohmann::json& config) {
  fs::create_directories(dir);
  write_json(dir / "archive.json", archive_to_json(run.archive));
  write_text(dir / "metrics.csv", metrics_csv(run.metrics));
  write_json(dir / "config.json", config);
  write_json(dir / "eval_archive.json", archive_to_json(run.eval.final_archive_view));
  write_json(dir / "all_solutions.json", archive_to_json(run.eval.all_solutions));
  if (run.model) write_json(dir / "model.json", model_to_json(*run.model));
  if (!run.judgments.empty()) write_json(dir / "judgments.json", judgments_to_json(run.judgments));
}

/// Checkpoint written after every metric update.
inline void write_checkpoint(const fs::path& dir, const UpdateSnapshot& snap) {
  fs::create_directories(dir);
  write_json(dir / "archive.json", archive_to_json(*snap.archive));
  if (snap.model) write_json(dir / "model.json", model_to_json(*snap.model));
  write_json(dir / "budget.json", {{"iteration", snap.iteration},
                                   {"total", snap.budget->total()},
                                   {"used", snap.budget->used()},
                                   {"per_update", snap.budget->per_update()}});
  if (snap.judgments) write_json(dir / "judgments.json", judgments_to_json(*snap.judgments));
}

}  // namespace qdhf
