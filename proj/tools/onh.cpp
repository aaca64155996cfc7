// Pipeline CLI: dataset generation, training, latent-dimension sweeps,
// latent analysis, PC traversal, end-to-end runs and report emission.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "onh/harness/pipeline.hpp"
#include "onh/harness/report.hpp"

using onh::harness::ExperimentConfig;
using onh::harness::StageContext;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "onh_out";
  std::optional<uint64_t> seed;

  ExperimentConfig resolve() const {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "artifact directory");
  cmd->add_option("--seed", args.seed, "override the global seed");
}

int guarded(const std::string& stage, const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const std::exception& e) {
    std::string what = e.what();
    if (what.rfind("stage ", 0) == 0)
      std::cerr << "onh: " << what << "\n";
    else
      std::cerr << "onh: stage " << stage << ": " << what << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ONH structural-phenotype pipeline"};
  app.require_subcommand(1);

  CommonArgs gen_args, seg_args, ae_args, sweep_args, analyze_args, traverse_args, run_args;
  std::string report_dir = "onh_out";

  auto* gen = app.add_subcommand("generate", "generate the synthetic phantom dataset");
  add_common(gen, gen_args);

  auto* seg = app.add_subcommand("train-seg", "train the segmentation U-Net");
  add_common(seg, seg_args);

  auto* ae = app.add_subcommand("train-ae", "train the autoencoder");
  add_common(ae, ae_args);
  std::optional<int> ae_n;
  bool ae_unsupervised = false;
  ae->add_option("--n", ae_n, "latent size multiplier (1..8, d = 9n)");
  ae->add_flag("--unsupervised", ae_unsupervised, "drop the classification branch");

  auto* sweep = app.add_subcommand("sweep", "latent-dimension sweep with 5-fold CV");
  add_common(sweep, sweep_args);
  std::string sweep_dims;
  sweep->add_option("--dims", sweep_dims, "comma-separated latent dims, e.g. 9,18,27");

  auto* analyze = app.add_subcommand("analyze", "PCA, SVC ranking, group stats, UMAP");
  add_common(analyze, analyze_args);
  std::string analyze_ckpt, analyze_dataset;
  analyze->add_option("--checkpoint", analyze_ckpt, "autoencoder directory (with meta.json)");
  analyze->add_option("--dataset", analyze_dataset, "dataset manifest.jsonl");

  auto* traverse = app.add_subcommand("traverse", "decode a PC traversal");
  add_common(traverse, traverse_args);
  std::optional<int> traverse_pc;
  std::optional<int> traverse_steps;
  traverse->add_option("--pc", traverse_pc, "principal component (1-based)");
  traverse->add_option("--steps", traverse_steps, "number of steps");

  auto* run = app.add_subcommand("run", "run the full pipeline");
  add_common(run, run_args);

  auto* rep = app.add_subcommand("report", "summarize an artifact directory");
  rep->add_option("--out", report_dir, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed())
    return guarded("generate", [&] {
      StageContext ctx{gen_args.resolve(), gen_args.out_dir, &std::cerr};
      onh::harness::stage_generate(ctx);
    });
  if (seg->parsed())
    return guarded("train-seg", [&] {
      StageContext ctx{seg_args.resolve(), seg_args.out_dir, &std::cerr};
      onh::harness::stage_train_seg(ctx);
    });
  if (ae->parsed())
    return guarded("train-ae", [&] {
      ExperimentConfig cfg = ae_args.resolve();
      if (ae_n) cfg.ae_n = *ae_n;
      if (ae_unsupervised) cfg.ae_supervised = false;
      StageContext ctx{cfg, ae_args.out_dir, &std::cerr};
      onh::harness::stage_train_ae(ctx);
    });
  if (sweep->parsed())
    return guarded("sweep", [&] {
      ExperimentConfig cfg = sweep_args.resolve();
      if (!sweep_dims.empty()) cfg.sweep_dims = sweep_dims;
      StageContext ctx{cfg, sweep_args.out_dir, &std::cerr};
      onh::harness::stage_sweep(ctx);
    });
  if (analyze->parsed())
    return guarded("analyze", [&] {
      StageContext ctx{analyze_args.resolve(), analyze_args.out_dir, &std::cerr};
      ctx.dataset_manifest = analyze_dataset;
      ctx.ae_dir = analyze_ckpt;
      onh::harness::stage_analyze(ctx);
    });
  if (traverse->parsed())
    return guarded("traverse", [&] {
      ExperimentConfig cfg = traverse_args.resolve();
      if (traverse_pc) cfg.traverse_pc = *traverse_pc;
      if (traverse_steps) cfg.traverse_steps = *traverse_steps;
      StageContext ctx{cfg, traverse_args.out_dir, &std::cerr};
      onh::harness::stage_traverse(ctx);
    });
  if (run->parsed())
    return guarded("run", [&] {
      onh::harness::run_pipeline(run_args.resolve(), run_args.out_dir, &std::cerr);
      onh::harness::write_report(run_args.out_dir);
    });
  if (rep->parsed())
    return guarded("report", [&] {
      auto r = onh::harness::report(report_dir);
      onh::harness::write_report(report_dir);
      if (!r.missing.empty()) {
        std::cerr << "onh: report: missing artifacts:\n";
        for (auto& m : r.missing) std::cerr << "  - " << m << "\n";
      }
      std::cout << r.markdown;
    });
  return 1;
}
