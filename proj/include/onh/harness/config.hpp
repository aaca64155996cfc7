#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace onh::harness {

/// Full experiment configuration, controlling every pipeline stage. The file
/// form is flat `key = value` lines with '#' comments; unknown keys are
/// rejected and serialization round-trips losslessly.
struct ExperimentConfig {
  uint64_t seed = 42;

  int dataset_n_per_class_per_study = 25;  // 25 -> 200 images
  int dataset_height = 100;
  int dataset_width = 200;
  double dataset_overlap = 0.2;

  int seg_epochs = 50;
  double seg_lr = 0.02;
  double seg_momentum = 0.9;
  int seg_batch = 8;
  bool seg_augment = true;

  int ae_n = 6;
  int ae_epochs = 150;
  double ae_lr = 0.05;
  double ae_momentum = 0.9;
  int ae_batch = 8;
  bool ae_supervised = true;
  bool ae_augment = true;
  std::string ae_input = "segmented";  // "segmented" (paper flow) or "truth"

  bool sweep_enabled = true;
  std::string sweep_dims = "9,18,27,36,45,54";
  int sweep_epochs = 12;  // reduced-epoch mode for the sweep cells
  int sweep_folds = 5;

  int umap_k = 15;
  double umap_min_dist = 0.1;
  int umap_epochs = 200;
  std::string umap_input = "pcs";  // "pcs" or "latent"

  int traverse_pc = 1;  // 1-based
  int traverse_steps = 10;

  std::vector<int> sweep_dim_list() const {
    std::vector<int> dims;
    std::stringstream ss(sweep_dims);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      dims.push_back(std::stoi(tok));
    }
    if (dims.empty()) throw std::invalid_argument("config: sweep.dims is empty");
    return dims;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    auto as_u64 = [&] { return std::stoull(value); };
    auto as_double = [&] { return std::stod(value); };
    auto as_bool = [&]() -> bool {
      if (value == "1" || value == "true") return true;
      if (value == "0" || value == "false") return false;
      throw std::invalid_argument("config: boolean key '" + key + "' wants 0/1, got " + value);
    };
    if (key == "seed") seed = as_u64();
    else if (key == "dataset.n_per_class_per_study") dataset_n_per_class_per_study = as_int();
    else if (key == "dataset.height") dataset_height = as_int();
    else if (key == "dataset.width") dataset_width = as_int();
    else if (key == "dataset.overlap") dataset_overlap = as_double();
    else if (key == "seg.epochs") seg_epochs = as_int();
    else if (key == "seg.lr") seg_lr = as_double();
    else if (key == "seg.momentum") seg_momentum = as_double();
    else if (key == "seg.batch") seg_batch = as_int();
    else if (key == "seg.augment") seg_augment = as_bool();
    else if (key == "ae.n") ae_n = as_int();
    else if (key == "ae.epochs") ae_epochs = as_int();
    else if (key == "ae.lr") ae_lr = as_double();
    else if (key == "ae.momentum") ae_momentum = as_double();
    else if (key == "ae.batch") ae_batch = as_int();
    else if (key == "ae.supervised") ae_supervised = as_bool();
    else if (key == "ae.augment") ae_augment = as_bool();
    else if (key == "ae.input") {
      if (value != "segmented" && value != "truth")
        throw std::invalid_argument("config: ae.input must be 'segmented' or 'truth'");
      ae_input = value;
    } else if (key == "sweep.enabled") sweep_enabled = as_bool();
    else if (key == "sweep.dims") sweep_dims = value;
    else if (key == "sweep.epochs") sweep_epochs = as_int();
    else if (key == "sweep.folds") sweep_folds = as_int();
    else if (key == "umap.k") umap_k = as_int();
    else if (key == "umap.min_dist") umap_min_dist = as_double();
    else if (key == "umap.epochs") umap_epochs = as_int();
    else if (key == "umap.input") {
      if (value != "pcs" && value != "latent")
        throw std::invalid_argument("config: umap.input must be 'pcs' or 'latent'");
      umap_input = value;
    } else if (key == "traverse.pc") traverse_pc = as_int();
    else if (key == "traverse.steps") traverse_steps = as_int();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  std::string serialize() const {
    std::ostringstream o;
    auto num = [](double v) {
      std::ostringstream s;
      s.precision(17);
      s << v;
      return s.str();
    };
    o << "# experiment configuration\n";
    o << "seed = " << seed << "\n";
    o << "dataset.n_per_class_per_study = " << dataset_n_per_class_per_study << "\n";
    o << "dataset.height = " << dataset_height << "\n";
    o << "dataset.width = " << dataset_width << "\n";
    o << "dataset.overlap = " << num(dataset_overlap) << "\n";
    o << "seg.epochs = " << seg_epochs << "\n";
    o << "seg.lr = " << num(seg_lr) << "\n";
    o << "seg.momentum = " << num(seg_momentum) << "\n";
    o << "seg.batch = " << seg_batch << "\n";
    o << "seg.augment = " << (seg_augment ? 1 : 0) << "\n";
    o << "ae.n = " << ae_n << "\n";
    o << "ae.epochs = " << ae_epochs << "\n";
    o << "ae.lr = " << num(ae_lr) << "\n";
    o << "ae.momentum = " << num(ae_momentum) << "\n";
    o << "ae.batch = " << ae_batch << "\n";
    o << "ae.supervised = " << (ae_supervised ? 1 : 0) << "\n";
    o << "ae.augment = " << (ae_augment ? 1 : 0) << "\n";
    o << "ae.input = " << ae_input << "\n";
    o << "sweep.enabled = " << (sweep_enabled ? 1 : 0) << "\n";
    o << "sweep.dims = " << sweep_dims << "\n";
    o << "sweep.epochs = " << sweep_epochs << "\n";
    o << "sweep.folds = " << sweep_folds << "\n";
    o << "umap.k = " << umap_k << "\n";
    o << "umap.min_dist = " << num(umap_min_dist) << "\n";
    o << "umap.epochs = " << umap_epochs << "\n";
    o << "umap.input = " << umap_input << "\n";
    o << "traverse.pc = " << traverse_pc << "\n";
    o << "traverse.steps = " << traverse_steps << "\n";
    return o.str();
  }

  static ExperimentConfig parse_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const size_t eq = line.find('=');
      if (eq == std::string::npos) {
        bool blank = true;
        for (char ch : line) blank &= std::isspace(uint8_t(ch)) != 0;
        if (blank) continue;
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
      }
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_string(text);
  }
};

}  // namespace onh::harness
