#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "onh/metrics/folds.hpp"
#include "onh/synthgen/phantom.hpp"
#include "onh/synthgen/render.hpp"

namespace onh::synthgen {

struct DatasetRecord {
  int id = 0;
  int subject_id = 0;
  int study_id = 0;
  ClassLabel class_label = ClassLabel::kNonGlaucoma;
  PhantomParams params;
  std::string label_path;      // relative to the manifest directory
  std::string intensity_path;
};

struct DatasetManifest {
  std::string root;  // directory holding manifest.jsonl and the image files
  std::vector<DatasetRecord> records;

  std::vector<metrics::SampleInfo> sample_infos() const {
    std::vector<metrics::SampleInfo> out;
    out.reserve(records.size());
    for (const auto& r : records)
      out.push_back({r.subject_id, r.study_id, int(r.class_label)});
    return out;
  }
};

namespace detail {

inline nlohmann::ordered_json record_to_json(const DatasetRecord& r) {
  const PhantomParams& p = r.params;
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["subject_id"] = r.subject_id;
  j["study_id"] = r.study_id;
  j["class_label"] = r.class_label == ClassLabel::kGlaucoma ? "glaucoma" : "non_glaucoma";
  j["disc_radius"] = p.disc_radius;
  j["mrw"] = p.mrw;
  j["rnfl_thickness"] = p.rnfl_thickness;
  j["gcl_ipl_thickness"] = p.gcl_ipl_thickness;
  j["orl_thickness"] = p.orl_thickness;
  j["rpe_thickness"] = p.rpe_thickness;
  j["choroid_thickness"] = p.choroid_thickness;
  j["sclera_thickness"] = p.sclera_thickness;
  j["prelamina_thickness"] = p.prelamina_thickness;
  j["prelamina_depth"] = p.prelamina_depth;
  j["lc_thickness"] = p.lc_thickness;
  j["lc_depth"] = p.lc_depth;
  j["scleral_bowing"] = p.scleral_bowing;
  j["label_path"] = r.label_path;
  j["intensity_path"] = r.intensity_path;
  return j;
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<int>();
  r.subject_id = j.at("subject_id").get<int>();
  r.study_id = j.at("study_id").get<int>();
  r.class_label = j.at("class_label").get<std::string>() == "glaucoma"
                      ? ClassLabel::kGlaucoma
                      : ClassLabel::kNonGlaucoma;
  PhantomParams& p = r.params;
  p.disc_radius = j.at("disc_radius").get<double>();
  p.mrw = j.at("mrw").get<double>();
  p.rnfl_thickness = j.at("rnfl_thickness").get<double>();
  p.gcl_ipl_thickness = j.at("gcl_ipl_thickness").get<double>();
  p.orl_thickness = j.at("orl_thickness").get<double>();
  p.rpe_thickness = j.at("rpe_thickness").get<double>();
  p.choroid_thickness = j.at("choroid_thickness").get<double>();
  p.sclera_thickness = j.at("sclera_thickness").get<double>();
  p.prelamina_thickness = j.at("prelamina_thickness").get<double>();
  p.prelamina_depth = j.at("prelamina_depth").get<double>();
  p.lc_thickness = j.at("lc_thickness").get<double>();
  p.lc_depth = j.at("lc_depth").get<double>();
  p.scleral_bowing = j.at("scleral_bowing").get<double>();
  p.study_id = r.study_id;
  p.subject_id = r.subject_id;
  p.class_label = r.class_label;
  r.label_path = j.at("label_path").get<std::string>();
  r.intensity_path = j.at("intensity_path").get<std::string>();
  return r;
}

}  // namespace detail

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  for (const auto& r : m.records) f << detail::record_to_json(r).dump() << "\n";
  if (!f) throw std::runtime_error("manifest write failed: " + path);
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  DatasetManifest m;
  m.root = std::filesystem::path(path).parent_path().string();
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    m.records.push_back(detail::record_from_json(nlohmann::json::parse(line)));
  }
  return m;
}

inline LabelMap load_record_map(const DatasetManifest& m, const DatasetRecord& r) {
  return load_label_map((std::filesystem::path(m.root) / r.label_path).string());
}
inline IntensityImage load_record_intensity(const DatasetManifest& m, const DatasetRecord& r) {
  return load_intensity((std::filesystem::path(m.root) / r.intensity_path).string());
}

/// Generates a dataset balanced exactly across the 4 synthetic studies and
/// the 2 classes, one image per subject, and writes label maps, renders and
/// the JSON-lines manifest under out_dir.
inline DatasetManifest make_dataset(int n_per_class_per_study, int height, int width,
                                    uint64_t rng_seed, const std::string& out_dir,
                                    const SamplerConfig& sampler = {}) {
  if (n_per_class_per_study < 1)
    throw std::invalid_argument("make_dataset: n_per_class_per_study must be >= 1");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("make_dataset: cannot create " + out_dir);

  DatasetManifest m;
  m.root = out_dir;
  const double scale = height / 100.0;
  int id = 0;
  char buf[64];
  for (int study = 0; study < 4; ++study) {
    for (int cls = 0; cls < 2; ++cls) {
      for (int i = 0; i < n_per_class_per_study; ++i, ++id) {
        DatasetRecord rec;
        rec.id = id;
        rec.subject_id = id;  // one image per subject
        rec.study_id = study;
        rec.class_label = ClassLabel(cls);
        uint64_t sample_seed = Rng::stream(rng_seed, uint64_t(id) * 2 + 0).next_u64();
        uint64_t render_seed = Rng::stream(rng_seed, uint64_t(id) * 2 + 1).next_u64();
        rec.params = sample_params(rec.class_label, study, sample_seed, sampler).scaled(scale);
        rec.params.subject_id = rec.subject_id;

        LabelMap map = rasterize(rec.params, height, width);
        IntensityImage img = render_oct(map, study_render_profile(study), render_seed);

        std::snprintf(buf, sizeof buf, "label_%05d.onhl", id);
        rec.label_path = buf;
        std::snprintf(buf, sizeof buf, "intensity_%05d.onhi", id);
        rec.intensity_path = buf;
        save_label_map(map, (fs::path(out_dir) / rec.label_path).string());
        save_intensity(img, (fs::path(out_dir) / rec.intensity_path).string());
        m.records.push_back(std::move(rec));
      }
    }
  }
  save_manifest(m, (fs::path(out_dir) / "manifest.jsonl").string());
  return m;
}

}  // namespace onh::synthgen
