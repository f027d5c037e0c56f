#include "llab/config.hpp"

#include <fstream>
#include <set>

namespace llab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed,
                std::vector<std::string>& errors) {
  if (!j.is_object()) {
    errors.push_back(where + ": expected an object");
    return;
  }
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) errors.push_back(where + ": unknown key '" + key + "'");
}

DatasetKind parse_kind(const std::string& s, std::vector<std::string>& errors) {
  if (s == "synthetic-blobs") return DatasetKind::SyntheticBlobs;
  if (s == "synthetic-spirals") return DatasetKind::SyntheticSpirals;
  if (s == "idx-images") return DatasetKind::IdxImages;
  if (s == "cifar-binary") return DatasetKind::CifarBinary;
  errors.push_back("dataset.kind: unknown kind '" + s + "'");
  return DatasetKind::SyntheticBlobs;
}

std::string kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::SyntheticBlobs: return "synthetic-blobs";
    case DatasetKind::SyntheticSpirals: return "synthetic-spirals";
    case DatasetKind::IdxImages: return "idx-images";
    case DatasetKind::CifarBinary: return "cifar-binary";
  }
  return "synthetic-blobs";
}

LrKind parse_lr_kind(const std::string& s, std::vector<std::string>& errors) {
  if (s == "constant") return LrKind::Constant;
  if (s == "step-milestones") return LrKind::StepMilestones;
  if (s == "linear-warmup-then-cosine") return LrKind::WarmupCosine;
  errors.push_back("recipe.lr.kind: unknown kind '" + s + "'");
  return LrKind::Constant;
}

std::string lr_kind_name(LrKind k) {
  switch (k) {
    case LrKind::Constant: return "constant";
    case LrKind::StepMilestones: return "step-milestones";
    case LrKind::WarmupCosine: return "linear-warmup-then-cosine";
  }
  return "constant";
}

}  // namespace

ExperimentConfig parse_config_json(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig c;

  check_keys(j, "config",
             {"model", "dataset", "recipe", "algorithm", "grid", "spectrum", "count_discovery",
              "schedule_restart_local", "output_dir", "workers"},
             errors);

  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"name", "input_shape", "n_classes"}, errors);
    if (m.is_object()) {
      c.model_name = m.value("name", c.model_name);
      if (m.contains("input_shape")) c.input_shape = m["input_shape"].get<std::vector<int>>();
      c.n_classes = m.value("n_classes", c.n_classes);
    }
  }

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, "dataset",
               {"kind", "n_classes", "n_train", "n_test", "seed", "dim", "cluster_std",
                "center_scale", "spiral_noise", "train_images", "train_labels", "test_images",
                "test_labels", "train_file", "test_file", "norm_mean", "norm_std",
                "flatten_images"},
               errors);
    if (d.is_object()) {
      if (d.contains("kind")) c.dataset.kind = parse_kind(d["kind"].get<std::string>(), errors);
      c.dataset.n_classes = d.value("n_classes", c.dataset.n_classes);
      c.dataset.n_train = d.value("n_train", c.dataset.n_train);
      c.dataset.n_test = d.value("n_test", c.dataset.n_test);
      c.dataset.seed = d.value("seed", c.dataset.seed);
      c.dataset.dim = d.value("dim", c.dataset.dim);
      c.dataset.cluster_std = d.value("cluster_std", c.dataset.cluster_std);
      c.dataset.center_scale = d.value("center_scale", c.dataset.center_scale);
      c.dataset.spiral_noise = d.value("spiral_noise", c.dataset.spiral_noise);
      c.dataset.train_images = d.value("train_images", c.dataset.train_images);
      c.dataset.train_labels = d.value("train_labels", c.dataset.train_labels);
      c.dataset.test_images = d.value("test_images", c.dataset.test_images);
      c.dataset.test_labels = d.value("test_labels", c.dataset.test_labels);
      c.dataset.train_file = d.value("train_file", c.dataset.train_file);
      c.dataset.test_file = d.value("test_file", c.dataset.test_file);
      c.dataset.norm_mean = d.value("norm_mean", c.dataset.norm_mean);
      c.dataset.norm_std = d.value("norm_std", c.dataset.norm_std);
      c.dataset.flatten_images = d.value("flatten_images", c.dataset.flatten_images);
    }
  }

  if (j.contains("recipe")) {
    const auto& r = j["recipe"];
    check_keys(r, "recipe", {"epochs", "batch_size", "momentum", "weight_decay", "lr"}, errors);
    if (r.is_object()) {
      c.recipe.epochs = r.value("epochs", c.recipe.epochs);
      c.recipe.batch_size = r.value("batch_size", c.recipe.batch_size);
      c.recipe.momentum = r.value("momentum", c.recipe.momentum);
      c.recipe.weight_decay = r.value("weight_decay", c.recipe.weight_decay);
      if (r.contains("lr")) {
        const auto& lr = r["lr"];
        check_keys(lr, "recipe.lr", {"kind", "base", "milestones", "decay", "warmup_epochs"},
                   errors);
        if (lr.is_object()) {
          if (lr.contains("kind")) c.recipe.lr.kind = parse_lr_kind(lr["kind"].get<std::string>(), errors);
          c.recipe.lr.base = lr.value("base", c.recipe.lr.base);
          if (lr.contains("milestones"))
            c.recipe.lr.milestones = lr["milestones"].get<std::vector<int>>();
          c.recipe.lr.decay = lr.value("decay", c.recipe.lr.decay);
          c.recipe.lr.warmup_epochs = lr.value("warmup_epochs", c.recipe.lr.warmup_epochs);
        }
      }
    }
  }
  c.recipe.lr.total_epochs = c.recipe.epochs;

  if (j.contains("algorithm")) c.algorithm = j["algorithm"].get<std::string>();

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    check_keys(g, "grid", {"R", "k", "I", "seeds"}, errors);
    if (g.is_object()) {
      if (g.contains("R")) c.r_grid = g["R"].get<std::vector<double>>();
      if (g.contains("k")) c.k_grid = g["k"].get<std::vector<int>>();
      if (g.contains("I")) c.i_grid = g["I"].get<std::vector<int>>();
      if (g.contains("seeds")) c.seeds = g["seeds"].get<std::vector<uint64_t>>();
    }
  }

  if (j.contains("spectrum")) {
    const auto& s = j["spectrum"];
    check_keys(s, "spectrum",
               {"n_probes", "lanczos_steps", "bins", "probe_seed", "eps_rel", "restricted", "k",
                "R"},
               errors);
    if (s.is_object()) {
      c.spectrum.slq.n_probes = s.value("n_probes", c.spectrum.slq.n_probes);
      c.spectrum.slq.lanczos_steps = s.value("lanczos_steps", c.spectrum.slq.lanczos_steps);
      c.spectrum.slq.bins = s.value("bins", c.spectrum.slq.bins);
      c.spectrum.slq.probe_seed = s.value("probe_seed", c.spectrum.slq.probe_seed);
      c.spectrum.eps_rel = s.value("eps_rel", c.spectrum.eps_rel);
      c.spectrum.restricted = s.value("restricted", c.spectrum.restricted);
      if (s.contains("k")) c.spectrum.k_list = s["k"].get<std::vector<int>>();
      if (s.contains("R")) c.spectrum.r_list = s["R"].get<std::vector<double>>();
    }
  }

  c.count_discovery = j.value("count_discovery", c.count_discovery);
  c.schedule_restart_local = j.value("schedule_restart_local", c.schedule_restart_local);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.workers = j.value("workers", c.workers);

  // Constraint validation: collect everything, then fail once.
  if (c.algorithm != "vanilla" && c.algorithm != "ilot" && c.algorithm != "rise")
    errors.push_back("algorithm: must be one of vanilla, ilot, rise");
  if (c.model_name != "mlp-small" && c.model_name != "mlp-wide" && c.model_name != "conv-small")
    errors.push_back("model.name: must be one of mlp-small, mlp-wide, conv-small");
  if (c.n_classes < 2) errors.push_back("model.n_classes: must be >= 2");
  if (c.recipe.epochs < 0) errors.push_back("recipe.epochs: must be >= 0");
  if (c.recipe.batch_size < 1) errors.push_back("recipe.batch_size: must be >= 1");
  if (!(c.recipe.lr.base > 0.0)) errors.push_back("recipe.lr.base: must be > 0");
  if (c.recipe.lr.kind == LrKind::StepMilestones &&
      !(c.recipe.lr.decay > 0.0 && c.recipe.lr.decay <= 1.0))
    errors.push_back("recipe.lr.decay: must be in (0, 1] for step-milestones");
  if (c.r_grid.empty()) errors.push_back("grid.R: must be non-empty");
  if (c.k_grid.empty()) errors.push_back("grid.k: must be non-empty");
  if (c.i_grid.empty()) errors.push_back("grid.I: must be non-empty");
  if (c.seeds.empty()) errors.push_back("grid.seeds: must be non-empty");
  for (double r : c.r_grid)
    if (!(r > 0.0 && r <= 100.0)) errors.push_back("grid.R: value " + std::to_string(r) + " must be in (0, 100]");
  for (int k : c.k_grid) {
    if (k < 0) errors.push_back("grid.k: value " + std::to_string(k) + " must be >= 0");
    if (k > c.recipe.epochs)
      errors.push_back("grid.k: value " + std::to_string(k) + " exceeds recipe.epochs");
  }
  for (int i : c.i_grid)
    if (i < 1) errors.push_back("grid.I: value " + std::to_string(i) + " must be >= 1");
  for (double r : c.spectrum.r_list)
    if (!(r > 0.0 && r <= 100.0)) errors.push_back("spectrum.R: value " + std::to_string(r) + " must be in (0, 100]");
  for (int k : c.spectrum.k_list) {
    if (k < 0) errors.push_back("spectrum.k: value must be >= 0");
    if (k > c.recipe.epochs) errors.push_back("spectrum.k: value " + std::to_string(k) + " exceeds recipe.epochs");
  }
  if (c.spectrum.slq.n_probes < 1) errors.push_back("spectrum.n_probes: must be >= 1");
  if (c.spectrum.slq.lanczos_steps < 1) errors.push_back("spectrum.lanczos_steps: must be >= 1");
  if (c.spectrum.slq.bins < 1) errors.push_back("spectrum.bins: must be >= 1");
  if (c.workers < 1) errors.push_back("workers: must be >= 1");
  if (c.dataset.kind == DatasetKind::IdxImages &&
      (c.dataset.train_images.empty() || c.dataset.train_labels.empty() ||
       c.dataset.test_images.empty() || c.dataset.test_labels.empty()))
    errors.push_back("dataset: idx-images requires train/test image and label paths");
  if (c.dataset.kind == DatasetKind::CifarBinary &&
      (c.dataset.train_file.empty() || c.dataset.test_file.empty()))
    errors.push_back("dataset: cifar-binary requires train_file and test_file");

  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw Error(msg);
  }
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config_json(j);
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"name", c.model_name}, {"input_shape", c.input_shape}, {"n_classes", c.n_classes}};
  json d{{"kind", kind_name(c.dataset.kind)},
         {"n_classes", c.dataset.n_classes},
         {"n_train", c.dataset.n_train},
         {"n_test", c.dataset.n_test},
         {"seed", c.dataset.seed},
         {"norm_mean", c.dataset.norm_mean},
         {"norm_std", c.dataset.norm_std},
         {"flatten_images", c.dataset.flatten_images}};
  switch (c.dataset.kind) {
    case DatasetKind::SyntheticBlobs:
      d["dim"] = c.dataset.dim;
      d["cluster_std"] = c.dataset.cluster_std;
      d["center_scale"] = c.dataset.center_scale;
      break;
    case DatasetKind::SyntheticSpirals:
      d["spiral_noise"] = c.dataset.spiral_noise;
      break;
    case DatasetKind::IdxImages:
      d["train_images"] = c.dataset.train_images;
      d["train_labels"] = c.dataset.train_labels;
      d["test_images"] = c.dataset.test_images;
      d["test_labels"] = c.dataset.test_labels;
      break;
    case DatasetKind::CifarBinary:
      d["train_file"] = c.dataset.train_file;
      d["test_file"] = c.dataset.test_file;
      break;
  }
  j["dataset"] = d;
  j["recipe"] = {{"epochs", c.recipe.epochs},
                 {"batch_size", c.recipe.batch_size},
                 {"momentum", c.recipe.momentum},
                 {"weight_decay", c.recipe.weight_decay},
                 {"lr",
                  {{"kind", lr_kind_name(c.recipe.lr.kind)},
                   {"base", c.recipe.lr.base},
                   {"milestones", c.recipe.lr.milestones},
                   {"decay", c.recipe.lr.decay},
                   {"warmup_epochs", c.recipe.lr.warmup_epochs}}}};
  j["algorithm"] = c.algorithm;
  j["grid"] = {{"R", c.r_grid}, {"k", c.k_grid}, {"I", c.i_grid}, {"seeds", c.seeds}};
  j["spectrum"] = {{"n_probes", c.spectrum.slq.n_probes},
                   {"lanczos_steps", c.spectrum.slq.lanczos_steps},
                   {"bins", c.spectrum.slq.bins},
                   {"probe_seed", c.spectrum.slq.probe_seed},
                   {"eps_rel", c.spectrum.eps_rel},
                   {"restricted", c.spectrum.restricted},
                   {"k", c.spectrum.k_list},
                   {"R", c.spectrum.r_list}};
  j["count_discovery"] = c.count_discovery;
  j["schedule_restart_local"] = c.schedule_restart_local;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  return j;
}

}  // namespace llab
