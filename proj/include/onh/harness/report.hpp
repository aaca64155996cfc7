#pragma once

#include <filesystem>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "onh/harness/pipeline.hpp"

namespace onh::harness {

struct Report {
  std::string markdown;
  std::vector<std::string> missing;
};

namespace detail {

inline std::string csv_as_table(const std::string& csv_text, size_t max_rows = 64) {
  std::istringstream in(csv_text);
  std::string line, out;
  size_t row = 0;
  while (std::getline(in, line) && row <= max_rows) {
    std::string md = "|";
    std::stringstream ss(line);
    std::string cell;
    int cells = 0;
    while (std::getline(ss, cell, ',')) {
      md += " " + cell + " |";
      ++cells;
    }
    out += md + "\n";
    if (row == 0) {
      out += "|";
      for (int c = 0; c < cells; ++c) out += " --- |";
      out += "\n";
    }
    ++row;
  }
  return out;
}

}  // namespace detail

/// Summarizes a completed artifact directory as markdown; artifacts that are
/// missing are listed explicitly instead of failing. Reading-only: re-running
/// the report never mutates pipeline outputs.
inline Report report(const std::string& out_dir) {
  namespace fs = std::filesystem;
  Report rep;
  auto have = [&](const std::string& rel) {
    if (fs::exists(fs::path(out_dir) / rel)) return true;
    rep.missing.push_back(rel);
    return false;
  };
  auto read = [&](const std::string& rel) { return read_file((fs::path(out_dir) / rel).string()); };

  std::ostringstream md;
  md << "# Pipeline report\n\n";

  if (have("config.txt")) md << "## Configuration\n\n```\n" << read("config.txt") << "```\n\n";

  if (have("dataset/manifest.jsonl")) {
    auto manifest = synthgen::load_manifest((fs::path(out_dir) / "dataset/manifest.jsonl").string());
    int g = 0;
    for (auto& r : manifest.records) g += r.class_label == synthgen::ClassLabel::kGlaucoma;
    md << "## Dataset\n\n" << manifest.records.size() << " images (" << g << " glaucoma, "
       << manifest.records.size() - size_t(g) << " non-glaucoma), 4 studies.\n\n";
  }

  if (have("seg/dice.csv"))
    md << "## Segmentation\n\nPer-class test Dice:\n\n" << detail::csv_as_table(read("seg/dice.csv"))
       << "\nPanels: `seg/panel_*.png` (input | truth | prediction).\n\n";

  if (have("ae/metrics.json")) {
    auto j = nlohmann::json::parse(read("ae/metrics.json"));
    md << "## Autoencoder\n\n"
       << "- reconstruction Dice: " << j.at("dice_mean").get<double>() << " +/- "
       << j.at("dice_sd").get<double>() << "\n"
       << "- accuracy: " << j.at("accuracy").get<double>() << "\n"
       << "- AUC: " << j.at("auc").get<double>() << "\n"
       << "- sensitivity at 95% specificity: " << j.at("sens95").get<double>() << "\n"
       << "- best epoch: " << j.at("best_epoch").get<int>() << "\n\n"
       << "Reconstruction panels: `ae/recon_*.png`.\n\n";
  }

  if (have("sweep/summary.csv"))
    md << "## Latent-dimension sweep (5-fold CV)\n\n"
       << detail::csv_as_table(read("sweep/summary.csv")) << "\n";

  if (have("analysis/ranking.csv"))
    md << "## PC diagnostic ranking (linear SVC)\n\n"
       << detail::csv_as_table(read("analysis/ranking.csv"), 8) << "\n";

  if (have("analysis/pvalues.csv"))
    md << "## Per-PC group p-values (Welch)\n\n"
       << detail::csv_as_table(read("analysis/pvalues.csv"), 8) << "\n";

  if (have("analysis/metrics.json")) {
    auto j = nlohmann::json::parse(read("analysis/metrics.json"));
    md << "UMAP silhouette vs class labels: " << j.at("umap_silhouette").get<double>()
       << " (scatter: `analysis/umap.png`).\n\n";
  }

  if (have("traverse/steps.csv"))
    md << "## PC traversal\n\n" << detail::csv_as_table(read("traverse/steps.csv"), 12)
       << "\nStrip: `traverse/strip.png`, trajectory: `traverse/trajectory.png`.\n\n";

  have("MANIFEST.json");

  if (!rep.missing.empty()) {
    md << "## Missing artifacts\n\n";
    for (auto& m : rep.missing) md << "- " << m << "\n";
    md << "\n";
  }
  rep.markdown = md.str();
  return rep;
}

inline void write_report(const std::string& out_dir) {
  write_file((std::filesystem::path(out_dir) / "report.md").string(), report(out_dir).markdown);
}

}  // namespace onh::harness
