#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "onh/autoencoder/train.hpp"
#include "onh/figures.hpp"
#include "onh/harness/config.hpp"
#include "onh/latent/probe.hpp"
#include "onh/latent/stats.hpp"
#include "onh/latent/svc.hpp"
#include "onh/latent/traverse.hpp"
#include "onh/segnet/train.hpp"
#include "onh/sha256.hpp"
#include "onh/synthgen/dataset.hpp"

namespace onh::harness {

namespace fs = std::filesystem;

struct StageContext {
  ExperimentConfig cfg;
  std::string out_dir;
  std::ostream* log = nullptr;
  // optional overrides; empty means the standard layout under out_dir
  std::string dataset_manifest;
  std::string ae_dir;
};

inline uint64_t stage_seed(uint64_t global, uint64_t stage_tag) {
  return Rng::stream(global, 0x53746167 + stage_tag).next_u64();
}

namespace detail {

inline std::string num(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return s.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  write_file(path, text);
}

inline void log_line(const StageContext& ctx, const std::string& msg) {
  if (ctx.log) (*ctx.log) << msg << "\n";
}

inline traincore::TrainConfig train_cfg(double lr, double momentum, int batch, int epochs,
                                        uint64_t seed) {
  traincore::TrainConfig cfg;
  cfg.learning_rate = float(lr);
  cfg.momentum = float(momentum);
  cfg.nesterov = true;
  cfg.batch_size = batch;
  cfg.epochs = epochs;
  cfg.rng_seed = seed;
  return cfg;
}

inline std::string curve_csv(const std::vector<traincore::EpochPoint>& curve) {
  std::string s = "epoch,train_loss,val_loss\n";
  for (size_t e = 0; e < curve.size(); ++e)
    s += std::to_string(e) + "," + num(curve[e].train_loss) + "," + num(curve[e].val_loss) + "\n";
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

inline synthgen::DatasetManifest stage_generate(const StageContext& ctx) {
  detail::log_line(ctx, "[generate] building dataset");
  synthgen::SamplerConfig sampler;
  sampler.overlap = ctx.cfg.dataset_overlap;
  auto manifest = synthgen::make_dataset(
      ctx.cfg.dataset_n_per_class_per_study, ctx.cfg.dataset_height, ctx.cfg.dataset_width,
      stage_seed(ctx.cfg.seed, 1), (fs::path(ctx.out_dir) / "dataset").string(), sampler);
  detail::log_line(ctx, "[generate] " + std::to_string(manifest.records.size()) + " images");
  return manifest;
}

inline synthgen::DatasetManifest load_dataset(const StageContext& ctx) {
  const std::string path = ctx.dataset_manifest.empty()
                               ? (fs::path(ctx.out_dir) / "dataset" / "manifest.jsonl").string()
                               : ctx.dataset_manifest;
  return synthgen::load_manifest(path);
}

inline std::string ae_dir_of(const StageContext& ctx) {
  return ctx.ae_dir.empty() ? (fs::path(ctx.out_dir) / "ae").string() : ctx.ae_dir;
}

inline void stage_train_seg(const StageContext& ctx) {
  auto manifest = load_dataset(ctx);
  segnet::SegTrainOptions opt;
  opt.train = detail::train_cfg(ctx.cfg.seg_lr, ctx.cfg.seg_momentum, ctx.cfg.seg_batch,
                                ctx.cfg.seg_epochs, stage_seed(ctx.cfg.seed, 2));
  opt.use_augmentation = ctx.cfg.seg_augment;
  detail::log_line(ctx, "[train-seg] " + std::to_string(ctx.cfg.seg_epochs) + " epochs");
  auto report = segnet::train_seg(manifest, opt, ctx.log);

  const fs::path dir = fs::path(ctx.out_dir) / "seg";
  fs::create_directories(dir);
  traincore::save_checkpoint(report.checkpoint, (dir / "checkpoint.onhw").string());
  detail::write_text((dir / "curve.csv").string(), detail::curve_csv(report.curve));
  {
    std::string csv = "class,dice\n";
    for (int c = 0; c < kNumClasses; ++c)
      csv += std::to_string(c) + "," + detail::num(report.dice_per_class[size_t(c)]) + "\n";
    csv += "mean," + detail::num(report.mean_dice) + "\n";
    csv += "sd," + detail::num(report.sd_dice) + "\n";
    detail::write_text((dir / "dice.csv").string(), csv);
  }
  // side-by-side panels: input | truth | prediction for three test images
  {
    auto net = segnet::build_unet(ctx.cfg.dataset_height, ctx.cfg.dataset_width);
    report.checkpoint.apply_to(net);
    int made = 0;
    for (size_t i = 0; i < manifest.records.size() && made < 3; ++i) {
      if (report.split[i] != 2) continue;
      IntensityImage img = synthgen::load_record_intensity(manifest, manifest.records[i]);
      LabelMap truth = synthgen::load_record_map(manifest, manifest.records[i]);
      LabelMap pred = segnet::segment(net, img);
      auto panel = fig::hstack({fig::intensity_canvas(img), fig::label_map_canvas(truth),
                                fig::label_map_canvas(pred)});
      fig::write_png(panel, (dir / ("panel_" + std::to_string(made) + ".png")).string());
      if (made == 0) fig::write_pgm(img, (dir / "panel_0_input.pgm").string());
      ++made;
    }
  }
  detail::log_line(ctx, "[train-seg] mean test dice " + detail::num(report.mean_dice));
}

/// The maps the autoencoder consumes: network segmentations of the renders
/// (the paper's flow) or the ground-truth maps, per config.
inline std::vector<LabelMap> ae_input_maps(const StageContext& ctx,
                                           const synthgen::DatasetManifest& manifest) {
  std::vector<LabelMap> maps;
  maps.reserve(manifest.records.size());
  if (ctx.cfg.ae_input == "truth") {
    for (const auto& r : manifest.records) maps.push_back(synthgen::load_record_map(manifest, r));
    return maps;
  }
  const std::string ckpt_path = (fs::path(ctx.out_dir) / "seg" / "checkpoint.onhw").string();
  if (!fs::exists(ckpt_path))
    throw std::runtime_error("ae.input=segmented needs seg/checkpoint.onhw (run train-seg first)");
  auto net = segnet::build_unet(ctx.cfg.dataset_height, ctx.cfg.dataset_width);
  traincore::load_checkpoint(ckpt_path).apply_to(net);
  for (const auto& r : manifest.records)
    maps.push_back(segnet::segment(net, synthgen::load_record_intensity(manifest, r)));
  return maps;
}

inline void stage_train_ae(const StageContext& ctx) {
  auto manifest = load_dataset(ctx);
  auto maps = ae_input_maps(ctx, manifest);
  auto infos = manifest.sample_infos();

  autoencoder::AeTrainOptions opt;
  opt.train = detail::train_cfg(ctx.cfg.ae_lr, ctx.cfg.ae_momentum, ctx.cfg.ae_batch,
                                ctx.cfg.ae_epochs, stage_seed(ctx.cfg.seed, 3));
  opt.supervised = ctx.cfg.ae_supervised;
  opt.augment = ctx.cfg.ae_augment;
  detail::log_line(ctx, "[train-ae] n=" + std::to_string(ctx.cfg.ae_n) + " (" +
                            std::to_string(ctx.cfg.ae_epochs) + " epochs)");
  auto report = autoencoder::train_ae(maps, infos, ctx.cfg.ae_n, opt, ctx.log);

  const fs::path dir = fs::path(ctx.out_dir) / "ae";
  fs::create_directories(dir);
  traincore::save_checkpoint(report.checkpoint, (dir / "checkpoint.onhw").string());
  detail::write_text((dir / "curve.csv").string(), detail::curve_csv(report.curve));
  {
    autoencoder::AeModel probe = autoencoder::build_autoencoder(
        ctx.cfg.ae_n, ctx.cfg.dataset_height, ctx.cfg.dataset_width, ctx.cfg.ae_supervised);
    nlohmann::ordered_json j;
    j["n"] = ctx.cfg.ae_n;
    j["latent_dim"] = report.latent_dim;
    j["height"] = ctx.cfg.dataset_height;
    j["width"] = ctx.cfg.dataset_width;
    j["supervised"] = ctx.cfg.ae_supervised;
    j["input"] = ctx.cfg.ae_input;
    j["parameter_count"] = probe.net.param_count();
    detail::write_text((dir / "meta.json").string(), j.dump(2) + "\n");
  }
  {
    nlohmann::ordered_json j;
    j["dice_mean"] = report.mean_dice;
    j["dice_sd"] = report.sd_dice;
    j["accuracy"] = report.accuracy;
    j["auc"] = report.auc;
    j["sens95"] = report.sens95;
    j["best_epoch"] = report.checkpoint.epoch;
    detail::write_text((dir / "metrics.json").string(), j.dump(2) + "\n");
  }
  // reconstruction panels: input | reconstruction
  {
    autoencoder::AeModel model =
        autoencoder::build_autoencoder(ctx.cfg.ae_n, ctx.cfg.dataset_height,
                                       ctx.cfg.dataset_width, ctx.cfg.ae_supervised);
    report.checkpoint.apply_to(model.net);
    for (int k = 0; k < 3 && k < int(report.test_indices.size()); ++k) {
      const LabelMap& in = maps[report.test_indices[size_t(k)]];
      auto z = autoencoder::encode(model, in);
      LabelMap recon = argmax_map(autoencoder::decode(model, z).reconstruction);
      auto panel = fig::hstack({fig::label_map_canvas(in), fig::label_map_canvas(recon)});
      fig::write_png(panel, (dir / ("recon_" + std::to_string(k) + ".png")).string());
    }
  }
  detail::log_line(ctx, "[train-ae] test dice " + detail::num(report.mean_dice) + ", acc " +
                            detail::num(report.accuracy));
}

inline void stage_sweep(const StageContext& ctx) {
  auto manifest = load_dataset(ctx);
  auto maps = ae_input_maps(ctx, manifest);
  auto infos = manifest.sample_infos();

  autoencoder::AeTrainOptions opt;
  opt.train = detail::train_cfg(ctx.cfg.ae_lr, ctx.cfg.ae_momentum, ctx.cfg.ae_batch,
                                ctx.cfg.sweep_epochs, stage_seed(ctx.cfg.seed, 4));
  opt.supervised = true;
  opt.augment = ctx.cfg.ae_augment;
  auto dims = ctx.cfg.sweep_dim_list();
  detail::log_line(ctx, "[sweep] dims " + ctx.cfg.sweep_dims + ", " +
                            std::to_string(ctx.cfg.sweep_epochs) + " epochs per cell");
  auto table = autoencoder::latent_sweep(maps, infos, dims, opt, ctx.cfg.sweep_folds, ctx.log);

  const fs::path dir = fs::path(ctx.out_dir) / "sweep";
  fs::create_directories(dir);
  {
    std::string csv = "dim,fold,dice,acc,auc,sens95\n";
    for (const auto& r : table.rows)
      csv += std::to_string(r.dim) + "," + std::to_string(r.fold) + "," + detail::num(r.dice) +
             "," + detail::num(r.acc) + "," + detail::num(r.auc) + "," + detail::num(r.sens95) +
             "\n";
    detail::write_text((dir / "sweep.csv").string(), csv);
  }
  {
    std::string csv =
        "dim,dice_mean,dice_sd,acc_mean,acc_sd,auc_mean,auc_sd,sens95_mean,sens95_sd\n";
    nlohmann::ordered_json all;
    for (int dim : dims) {
      auto s = table.summarize(dim);
      csv += std::to_string(dim) + "," + detail::num(s.dice_mean) + "," + detail::num(s.dice_sd) +
             "," + detail::num(s.acc_mean) + "," + detail::num(s.acc_sd) + "," +
             detail::num(s.auc_mean) + "," + detail::num(s.auc_sd) + "," +
             detail::num(s.sens_mean) + "," + detail::num(s.sens_sd) + "\n";
      nlohmann::ordered_json j;
      j["dice"] = {{"mean", s.dice_mean}, {"sd", s.dice_sd}};
      j["accuracy"] = {{"mean", s.acc_mean}, {"sd", s.acc_sd}};
      j["auc"] = {{"mean", s.auc_mean}, {"sd", s.auc_sd}};
      j["sens95"] = {{"mean", s.sens_mean}, {"sd", s.sens_sd}};
      all[std::to_string(dim)] = j;
    }
    detail::write_text((dir / "summary.csv").string(), csv);
    detail::write_text((dir / "summary.json").string(), all.dump(2) + "\n");
  }
}

/// Everything analyze/traverse need about the trained autoencoder.
struct LatentWorkspace {
  autoencoder::AeModel model;
  std::vector<LabelMap> maps;
  std::vector<int> labels;
  std::vector<std::vector<double>> latents;     // N x d
  latent::PCBasis basis;                        // class-oriented
  std::vector<std::vector<double>> coords;      // PCA coordinates
  std::vector<std::vector<double>> umap_input;  // what UMAP consumed
  latent::Embedding2D embedding;
};

inline LatentWorkspace build_latent_workspace(const StageContext& ctx) {
  auto manifest = load_dataset(ctx);
  const fs::path dir = ae_dir_of(ctx);
  auto meta = nlohmann::json::parse(read_file((dir / "meta.json").string()));
  LatentWorkspace ws{autoencoder::build_autoencoder(meta.at("n").get<int>(),
                                                    meta.at("height").get<int>(),
                                                    meta.at("width").get<int>(),
                                                    meta.at("supervised").get<bool>()),
                     {}, {}, {}, {}, {}, {}, {}};
  traincore::load_checkpoint((dir / "checkpoint.onhw").string()).apply_to(ws.model.net);

  StageContext maps_ctx = ctx;
  maps_ctx.cfg.ae_input = meta.at("input").get<std::string>();
  ws.maps = ae_input_maps(maps_ctx, manifest);
  for (const auto& r : manifest.records) ws.labels.push_back(int(r.class_label));

  for (const auto& m : ws.maps) {
    auto z = autoencoder::encode(ws.model, m);
    ws.latents.emplace_back(z.begin(), z.end());
  }
  ws.basis = latent::fit_pca(ws.latents);
  latent::orient_for_classes(ws.basis, ws.latents, ws.labels);
  ws.coords = latent::project_all(ws.basis, ws.latents);
  ws.umap_input = (ctx.cfg.umap_input == "latent") ? ws.latents : ws.coords;
  ws.embedding = latent::fit_umap(ws.umap_input, ctx.cfg.umap_k, ctx.cfg.umap_min_dist,
                                  ctx.cfg.umap_epochs, stage_seed(ctx.cfg.seed, 5));
  return ws;
}

inline void stage_analyze(const StageContext& ctx) {
  detail::log_line(ctx, "[analyze] PCA / SVC ranking / group stats / UMAP");
  auto ws = build_latent_workspace(ctx);
  const fs::path dir = fs::path(ctx.out_dir) / "analysis";
  fs::create_directories(dir);

  {
    std::string csv = "index,label";
    for (int k = 0; k < int(ws.latents[0].size()); ++k) csv += ",z" + std::to_string(k);
    csv += "\n";
    for (size_t i = 0; i < ws.latents.size(); ++i) {
      csv += std::to_string(i) + "," + std::to_string(ws.labels[i]);
      for (double v : ws.latents[i]) csv += "," + detail::num(v);
      csv += "\n";
    }
    detail::write_text((dir / "latents.csv").string(), csv);
  }
  {
    std::string csv = "pc,eigenvalue\n";
    for (size_t k = 0; k < ws.basis.eigenvalues.size(); ++k)
      csv += std::to_string(k + 1) + "," + detail::num(ws.basis.eigenvalues[k]) + "\n";
    detail::write_text((dir / "pca_spectrum.csv").string(), csv);
  }
  {
    auto rank = latent::rank_pcs(ws.coords, ws.labels, 5, stage_seed(ctx.cfg.seed, 6));
    std::string csv = "pc,acc_mean,acc_sd,cum_mean,cum_sd\n";
    for (const auto& e : rank.by_pc)
      csv += std::to_string(e.pc + 1) + "," + detail::num(e.acc_mean) + "," +
             detail::num(e.acc_sd) + "," + detail::num(e.cum_mean) + "," + detail::num(e.cum_sd) +
             "\n";
    detail::write_text((dir / "ranking.csv").string(), csv);
  }
  {
    auto ps = latent::group_stats(ws.coords, ws.labels);
    std::string csv = "pc,p_value\n";
    for (size_t k = 0; k < ps.size(); ++k)
      csv += std::to_string(k + 1) + "," + detail::num(ps[k]) + "\n";
    detail::write_text((dir / "pvalues.csv").string(), csv);
  }
  {
    std::string csv = "index,label,x,y\n";
    for (size_t i = 0; i < ws.embedding.points.size(); ++i)
      csv += std::to_string(i) + "," + std::to_string(ws.labels[i]) + "," +
             detail::num(ws.embedding.points[i][0]) + "," + detail::num(ws.embedding.points[i][1]) +
             "\n";
    detail::write_text((dir / "umap.csv").string(), csv);

    std::vector<fig::ScatterPoint> pts;
    for (size_t i = 0; i < ws.embedding.points.size(); ++i)
      pts.push_back({ws.embedding.points[i][0], ws.embedding.points[i][1],
                     ws.labels[i] ? fig::Rgb{220, 40, 40} : fig::Rgb{40, 80, 220}, 2, false});
    fig::write_png(fig::scatter(pts), (dir / "umap.png").string());
  }
  {
    std::vector<std::vector<double>> pts;
    for (auto& p : ws.embedding.points) pts.push_back({p[0], p[1]});
    nlohmann::ordered_json j;
    j["umap_silhouette"] = latent::silhouette(pts, ws.labels);
    detail::write_text((dir / "metrics.json").string(), j.dump(2) + "\n");
  }
}

inline void stage_traverse(const StageContext& ctx) {
  detail::log_line(ctx, "[traverse] PC" + std::to_string(ctx.cfg.traverse_pc));
  auto ws = build_latent_workspace(ctx);
  if (!ws.model.net.has_head("cls"))
    throw std::runtime_error("traversal needs a supervised autoencoder checkpoint");
  auto stats = latent::class_pc_stats(ws.coords, ws.labels);
  const int pc = ctx.cfg.traverse_pc - 1;

  // seed: the correctly-classified non-glaucoma image with the highest
  // coordinate on the traversed PC
  int pick = -1;
  double best = -1e300;
  for (size_t i = 0; i < ws.latents.size(); ++i) {
    if (ws.labels[i] != 0) continue;
    autoencoder::LatentVector z(ws.latents[i].begin(), ws.latents[i].end());
    if (autoencoder::classify(ws.model, z)[0] < 0.5) continue;
    if (ws.coords[i][size_t(pc)] > best) {
      best = ws.coords[i][size_t(pc)];
      pick = int(i);
    }
  }
  if (pick < 0)
    for (size_t i = 0; i < ws.latents.size(); ++i)
      if (ws.labels[i] == 0 && ws.coords[i][size_t(pc)] > best) {
        best = ws.coords[i][size_t(pc)];
        pick = int(i);
      }
  if (pick < 0) throw std::runtime_error("traverse: no non-glaucoma image available");

  autoencoder::LatentVector z0(ws.latents[size_t(pick)].begin(), ws.latents[size_t(pick)].end());
  auto res = latent::traverse_pc(ws.basis, ws.model, z0, pc, stats, ctx.cfg.traverse_steps,
                                 std::nullopt, &ws.embedding, &ws.umap_input);

  const fs::path dir = fs::path(ctx.out_dir) / "traverse";
  fs::create_directories(dir);
  {
    std::string csv =
        "step,pc_value,prob_glaucoma,rnfl,gcl_ipl,prelamina_thickness,prelamina_depth,lc_depth,"
        "lc_thickness,disc_size,mrw,umap_x,umap_y\n";
    auto opt_num = [](const std::optional<double>& v) {
      return v ? detail::num(*v) : std::string("nan");
    };
    for (size_t s = 0; s < res.maps.size(); ++s) {
      auto f = latent::phenotype_probe(res.maps[s]);
      csv += std::to_string(s + 1) + "," + detail::num(res.pc_values[s]) + "," +
             detail::num(res.class_probs[s][1]) + "," + opt_num(f.rnfl_thickness) + "," +
             opt_num(f.gcl_ipl_thickness) + "," + opt_num(f.prelamina_thickness) + "," +
             opt_num(f.prelamina_depth) + "," + opt_num(f.lc_depth) + "," +
             opt_num(f.lc_thickness) + "," + opt_num(f.disc_size) + "," + opt_num(f.mrw) + "," +
             detail::num(res.umap_points[s][0]) + "," + detail::num(res.umap_points[s][1]) + "\n";
    }
    detail::write_text((dir / "steps.csv").string(), csv);
  }
  {
    std::vector<fig::Canvas> panels;
    for (const auto& m : res.maps) panels.push_back(fig::label_map_canvas(m));
    fig::write_png(fig::hstack(panels), (dir / "strip.png").string());
  }
  {
    std::vector<fig::ScatterPoint> pts;
    for (size_t i = 0; i < ws.embedding.points.size(); ++i)
      pts.push_back({ws.embedding.points[i][0], ws.embedding.points[i][1],
                     ws.labels[i] ? fig::Rgb{220, 40, 40} : fig::Rgb{40, 80, 220}, 2, false});
    for (size_t s = 0; s < res.umap_points.size(); ++s) {
      const bool glaucoma = res.class_probs[s][1] >= 0.5;
      pts.push_back({res.umap_points[s][0], res.umap_points[s][1],
                     glaucoma ? fig::Rgb{0, 0, 0} : fig::Rgb{120, 120, 120}, 2, true});
    }
    fig::write_png(fig::scatter(pts), (dir / "trajectory.png").string());
  }
}

// ---------------------------------------------------------------------------
// Whole-pipeline driver with lockfile, stage tagging and artifact manifest.
// ---------------------------------------------------------------------------

class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(fs::path(dir) / ".lock") {
    fs::create_directories(dir);
    if (fs::exists(path_))
      throw std::runtime_error("artifact directory is locked (another run in progress?): " +
                               path_.string());
    std::ofstream f(path_);
    f << "lock\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

inline void write_artifact_manifest(const std::string& out_dir) {
  std::map<std::string, std::string> hashes;
  for (auto& entry : fs::recursive_directory_iterator(out_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), out_dir).generic_string();
    if (rel == "MANIFEST.json" || rel == ".lock" || rel == "report.md") continue;
    hashes[rel] = Sha256::of(read_file(entry.path().string()));
  }
  nlohmann::ordered_json j;
  for (auto& [rel, h] : hashes) j[rel] = h;
  write_file((fs::path(out_dir) / "MANIFEST.json").string(), j.dump(2) + "\n");
}

inline void run_stage(const StageContext& ctx, const std::string& name,
                      const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

/// generate -> train-seg -> train-ae (+ sweep) -> analyze -> traverse, then
/// the content-hash manifest. Fully reproducible for a fixed config + seed.
inline void run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir,
                         std::ostream* log = nullptr) {
  StageContext ctx{cfg, out_dir, log};
  DirLock lock(out_dir);
  detail::write_text((fs::path(out_dir) / "config.txt").string(), cfg.serialize());
  run_stage(ctx, "generate", [&] { stage_generate(ctx); });
  run_stage(ctx, "train-seg", [&] { stage_train_seg(ctx); });
  run_stage(ctx, "train-ae", [&] { stage_train_ae(ctx); });
  if (cfg.sweep_enabled) run_stage(ctx, "sweep", [&] { stage_sweep(ctx); });
  run_stage(ctx, "analyze", [&] { stage_analyze(ctx); });
  run_stage(ctx, "traverse", [&] { stage_traverse(ctx); });
  run_stage(ctx, "manifest", [&] { write_artifact_manifest(out_dir); });
}

}  // namespace onh::harness
