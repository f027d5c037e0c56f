#include "llab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace llab {

namespace {

using nlohmann::json;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

std::string cell_stem(const GridCell& c) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "run_%s_R%g_k%d_I%d_seed%llu", c.algorithm.c_str(), c.r_percent,
                c.k, c.iterations, static_cast<unsigned long long>(c.seed));
  return buf;
}

json ledger_to_json(const FlopLedger& ledger) {
  auto phase = [](const PhaseFlops& p) {
    return json{{"fwd", p.fwd}, {"act_grad", p.act_grad}, {"w_grad", p.w_grad}, {"epochs", p.epochs}};
  };
  return json{{"warmup", phase(ledger.warmup)},
              {"discovery", phase(ledger.discovery)},
              {"retrain", phase(ledger.retrain)}};
}

struct CellOutcome {
  GridCell cell;
  bool failed = false;
  std::string error;
  double accuracy = 0.0;
  uint64_t backprop_flops = 0;
  double wall_clock_sec = 0.0;
  json result_json;
  Mask mask;
};

CellOutcome run_cell(const ExperimentConfig& config, const ModelSpec& model,
                     const DataPair& data, uint64_t dataset_hash, const GridCell& cell,
                     const std::filesystem::path& out_dir) {
  CellOutcome out;
  out.cell = cell;

  TrainRecipe recipe = config.recipe;
  recipe.seed = cell.seed;
  const auto w0 = init_params(model, cell.seed);

  DispatchResult dispatch;
  if (cell.algorithm == "vanilla") {
    TrainOptions opts;
    opts.phase = Phase::Retrain;
    dispatch.final_run = train(model, w0, recipe, data.train, data.test,
                               UpdateRule::vanilla(), opts);
    dispatch.mask = Mask::all_ones(model.param_count);
  } else {
    Method method;
    method.kind = cell.algorithm == "rise" ? Method::Kind::Rise : Method::Kind::Ilot;
    method.r_percent = cell.r_percent;
    method.iterations = std::max(1, cell.iterations);
    CheckpointStore store(out_dir / "checkpoints" /
                          ("seed_" + std::to_string(cell.seed)));
    dispatch = warmup_and_dispatch(model, w0, cell.k, recipe, data.train, data.test, method,
                                   &store, config.schedule_restart_local);
  }

  const RunResult& run = dispatch.final_run;
  out.accuracy = run.test_accuracy;
  out.backprop_flops = run.ledger.backprop_total(config.count_discovery);
  out.wall_clock_sec = run.wall_clock_sec;
  out.mask = dispatch.mask;

  json j;
  j["algorithm"] = cell.algorithm;
  j["R"] = cell.r_percent;
  j["k"] = cell.k;
  j["I"] = cell.iterations;
  j["seed"] = cell.seed;
  j["final_test_accuracy"] = run.test_accuracy;
  j["train_loss"] = run.train_loss;
  j["test_loss"] = run.test_loss;
  j["test_acc"] = run.test_acc;
  j["ledger"] = ledger_to_json(run.ledger);
  j["ledger_mode"] = config.ledger_mode();
  j["backprop_flops"] = out.backprop_flops;
  j["flops_convention"] = "FLOPs = 2 x multiply-accumulates";
  j["mask_active_count"] = dispatch.mask.active_count;
  j["param_count"] = model.param_count;
  j["wall_clock_sec"] = run.wall_clock_sec;
  j["dataset_hash"] = dataset_hash;
  j["config"] = config_to_json(config);
  out.result_json = std::move(j);
  return out;
}

void write_aggregate_csv(const std::filesystem::path& path,
                         const std::vector<CellOutcome>& outcomes, const std::string& ledger_mode) {
  std::ofstream f(path);
  f << "algorithm,R,k,I,seed,backprop_flops,final_test_accuracy,ledger_mode,wall_clock_sec\n";
  for (const auto& o : outcomes) {
    if (o.failed) continue;
    f << o.cell.algorithm << ',' << fmt(o.cell.r_percent) << ',' << o.cell.k << ','
      << o.cell.iterations << ',' << o.cell.seed << ',' << o.backprop_flops << ','
      << fmt(o.accuracy) << ',' << ledger_mode << ',' << fmt(o.wall_clock_sec) << '\n';
  }
}

void write_pareto_csv(const std::filesystem::path& path,
                      const std::vector<std::tuple<std::string, double, int, uint64_t, uint64_t,
                                                   double>>& rows) {
  // rows: (algorithm, R, k, seed, flops, accuracy)
  std::vector<std::pair<uint64_t, double>> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) pts.emplace_back(std::get<4>(r), std::get<5>(r));
  std::ofstream f(path);
  f << "backprop_flops,final_test_accuracy,dominated,algorithm,R,k,seed\n";
  if (pts.empty()) return;
  for (const auto& p : pareto_points(pts)) {
    const auto& r = rows[p.index];
    f << p.flops << ',' << fmt(p.accuracy) << ',' << (p.dominated ? 1 : 0) << ','
      << std::get<0>(r) << ',' << fmt(std::get<1>(r)) << ',' << std::get<2>(r) << ','
      << std::get<3>(r) << '\n';
  }
}

}  // namespace

std::filesystem::path resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("LLAB_OUTPUT_ROOT")) return std::filesystem::path(root) / p;
  return p;
}

std::vector<GridCell> grid_cells(const ExperimentConfig& config) {
  std::vector<GridCell> cells;
  if (config.algorithm == "vanilla") {
    for (uint64_t s : config.seeds) cells.push_back({"vanilla", 100.0, 0, 0, s});
    return cells;
  }
  const std::vector<int> i_values =
      config.algorithm == "ilot" ? config.i_grid : std::vector<int>{0};  // RISE has no I axis
  for (double r : config.r_grid)
    for (int k : config.k_grid)
      for (int i : i_values)
        for (uint64_t s : config.seeds) cells.push_back({config.algorithm, r, k, i, s});
  return cells;
}

int run_grid(const ExperimentConfig& config, const std::filesystem::path& out_dir, int workers) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream echo(out_dir / "config_resolved.json");
    echo << config_to_json(config).dump(2) << '\n';
  }

  const ModelSpec model = build_model(config.model_name, config.input_shape, config.n_classes);
  const DataPair data = load_dataset(config.dataset);
  const uint64_t dataset_hash = data.train.content_hash() ^ (data.test.content_hash() << 1);

  const auto cells = grid_cells(config);
  std::vector<CellOutcome> outcomes(cells.size());

  // Cells sharing a seed share a checkpoint store; run each seed's cells
  // sequentially (k ascending so warm-up checkpoints accumulate) and
  // seeds in parallel.
  std::map<uint64_t, std::vector<size_t>> by_seed;
  for (size_t i = 0; i < cells.size(); ++i) by_seed[cells[i].seed].push_back(i);
  for (auto& [seed, idxs] : by_seed)
    std::stable_sort(idxs.begin(), idxs.end(),
                     [&](size_t a, size_t b) { return cells[a].k < cells[b].k; });

  std::vector<std::vector<size_t>> groups;
  for (auto& [seed, idxs] : by_seed) groups.push_back(idxs);
  std::mutex next_mutex;
  size_t next_group = 0;
  auto worker = [&]() {
    for (;;) {
      size_t g;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next_group >= groups.size()) return;
        g = next_group++;
      }
      for (size_t i : groups[g]) {
        try {
          outcomes[i] = run_cell(config, model, data, dataset_hash, cells[i], out_dir);
        } catch (const std::exception& e) {
          outcomes[i].cell = cells[i];
          outcomes[i].failed = true;
          outcomes[i].error = e.what();
        }
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(groups.size())));
  std::vector<std::thread> threads;
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  // All writes in deterministic grid order.
  int failures = 0;
  std::vector<std::tuple<std::string, double, int, uint64_t, uint64_t, double>> pareto_rows;
  for (const auto& o : outcomes) {
    const std::string stem = cell_stem(o.cell);
    if (o.failed) {
      ++failures;
      json fail{{"algorithm", o.cell.algorithm}, {"R", o.cell.r_percent}, {"k", o.cell.k},
                {"I", o.cell.iterations}, {"seed", o.cell.seed}, {"error", o.error}};
      std::ofstream f(out_dir / (stem + ".failed.json"));
      f << fail.dump(2) << '\n';
      continue;
    }
    std::ofstream f(out_dir / (stem + ".json"));
    f << o.result_json.dump(2) << '\n';
    MaskProvenance prov{o.cell.r_percent, o.cell.iterations, o.cell.k};
    save_mask(out_dir / (stem + ".mask"), o.mask, prov);
    pareto_rows.emplace_back(o.cell.algorithm, o.cell.r_percent, o.cell.k, o.cell.seed,
                             o.backprop_flops, o.accuracy);
  }
  write_aggregate_csv(out_dir / "aggregate.csv", outcomes, config.ledger_mode());
  write_pareto_csv(out_dir / "pareto.csv", pareto_rows);
  return failures;
}

namespace {

json spectrum_cell_json(const SpectrumCell& cell, uint64_t seed, const SlqSettings& slq) {
  json j;
  j["seed"] = seed;
  j["k"] = cell.k;
  j["reference"] = cell.reference;
  if (!cell.reference) j["R"] = cell.r_percent;
  j["n_probes"] = cell.estimate.n_probes;
  j["lanczos_steps"] = cell.estimate.lanczos_steps;
  j["probe_seed"] = cell.estimate.probe_seed;
  j["lambda_min"] = cell.estimate.lambda_min;
  j["lambda_max"] = cell.estimate.lambda_max;
  j["bin_edges"] = cell.estimate.bin_edges;
  j["mass"] = cell.estimate.mass;
  json probes = json::array();
  for (const auto& p : cell.estimate.probes)
    probes.push_back({{"ritz_values", p.values}, {"weights", p.weights}});
  j["probes"] = probes;
  j["flatness"] = {{"near_zero_mass", cell.report.near_zero_mass},
                   {"lambda_min", cell.report.lambda_min},
                   {"lambda_max", cell.report.lambda_max},
                   {"eps_rel", cell.report.eps_rel},
                   {"degenerate", cell.report.degenerate}};
  j["settings"] = {{"n_probes", slq.n_probes}, {"lanczos_steps", slq.lanczos_steps},
                   {"bins", slq.bins}, {"probe_seed", slq.probe_seed}};
  return j;
}

}  // namespace

void run_spectrum(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                  const std::vector<int>& k_list_in, const std::vector<double>& r_list_in) {
  std::filesystem::create_directories(out_dir);
  const auto k_list = k_list_in.empty() ? config.spectrum.k_list : k_list_in;
  const auto r_list = r_list_in.empty() ? config.spectrum.r_list : r_list_in;
  for (int k : k_list)
    if (k < 0 || k > config.recipe.epochs) throw Error("spectrum k out of range");
  for (double r : r_list)
    if (!(r > 0.0 && r <= 100.0)) throw Error("spectrum R out of range (0, 100]");

  const ModelSpec model = build_model(config.model_name, config.input_shape, config.n_classes);
  const DataPair data = load_dataset(config.dataset);

  std::ofstream table(out_dir / "flatness_table.csv");
  table << "seed,k,R,reference,near_zero_mass,lambda_min,lambda_max,eps_rel,degenerate\n";

  for (uint64_t seed : config.seeds) {
    TrainRecipe recipe = config.recipe;
    recipe.seed = seed;
    const auto w0 = init_params(model, seed);
    CheckpointStore store(out_dir / "checkpoints" / ("seed_" + std::to_string(seed)));
    const auto table_cells =
        spectrum_experiment(model, w0, k_list, r_list, recipe, data.train, data.test,
                            config.spectrum.slq, config.spectrum.eps_rel, &store,
                            config.spectrum.restricted);
    for (const auto& cell : table_cells) {
      char name[128];
      if (cell.reference)
        std::snprintf(name, sizeof(name), "spectrum_seed%llu_k%d_ref.json",
                      static_cast<unsigned long long>(seed), cell.k);
      else
        std::snprintf(name, sizeof(name), "spectrum_seed%llu_k%d_R%g.json",
                      static_cast<unsigned long long>(seed), cell.k, cell.r_percent);
      std::ofstream f(out_dir / name);
      f << spectrum_cell_json(cell, seed, config.spectrum.slq).dump(2) << '\n';
      table << seed << ',' << cell.k << ',' << fmt(cell.reference ? 100.0 : cell.r_percent) << ','
            << (cell.reference ? 1 : 0) << ',' << fmt(cell.report.near_zero_mass) << ','
            << fmt(cell.report.lambda_min) << ',' << fmt(cell.report.lambda_max) << ','
            << fmt(cell.report.eps_rel) << ',' << (cell.report.degenerate ? 1 : 0) << '\n';
    }
  }
}

namespace {

std::vector<json> load_run_jsons(const std::filesystem::path& dir, const std::string& prefix,
                                 const std::string& suffix) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0 &&
        name.find(".failed.") == std::string::npos)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<json> out;
  for (const auto& p : files) {
    std::ifstream f(p);
    out.push_back(json::parse(f));
  }
  return out;
}

}  // namespace

void write_pareto(const std::filesystem::path& result_dir) {
  const auto runs = load_run_jsons(result_dir, "run_", ".json");
  if (runs.empty()) throw Error("no run results in " + result_dir.string());
  std::vector<std::tuple<std::string, double, int, uint64_t, uint64_t, double>> rows;
  for (const auto& r : runs)
    rows.emplace_back(r["algorithm"].get<std::string>(), r["R"].get<double>(), r["k"].get<int>(),
                      r["seed"].get<uint64_t>(), r["backprop_flops"].get<uint64_t>(),
                      r["final_test_accuracy"].get<double>());
  write_pareto_csv(result_dir / "pareto.csv", rows);
}

void emit_plot_data(const std::filesystem::path& result_dir) {
  const auto runs = load_run_jsons(result_dir, "run_", ".json");
  const auto spectra = load_run_jsons(result_dir, "spectrum_", ".json");
  if (runs.empty() && spectra.empty())
    throw Error("no runs or spectra in " + result_dir.string());

  if (!runs.empty()) {
    std::ofstream f(result_dir / "scatter.csv");
    // log10 column mirrors the log-scale zoom view: same data, flagged.
    f << "algorithm,R,k,I,seed,backprop_flops,final_test_accuracy,log10_backprop_flops,"
         "ledger_mode\n";
    for (const auto& r : runs) {
      const auto flops = r["backprop_flops"].get<uint64_t>();
      f << r["algorithm"].get<std::string>() << ',' << fmt(r["R"].get<double>()) << ','
        << r["k"].get<int>() << ',' << r["I"].get<int>() << ',' << r["seed"].get<uint64_t>() << ','
        << flops << ',' << fmt(r["final_test_accuracy"].get<double>()) << ','
        << fmt(flops > 0 ? std::log10(static_cast<double>(flops)) : 0.0) << ','
        << r["ledger_mode"].get<std::string>() << '\n';
    }
  }
  for (const auto& s : spectra) {
    char name[128];
    if (s["reference"].get<bool>())
      std::snprintf(name, sizeof(name), "hist_seed%llu_k%d_ref.csv",
                    static_cast<unsigned long long>(s["seed"].get<uint64_t>()), s["k"].get<int>());
    else
      std::snprintf(name, sizeof(name), "hist_seed%llu_k%d_R%g.csv",
                    static_cast<unsigned long long>(s["seed"].get<uint64_t>()), s["k"].get<int>(),
                    s["R"].get<double>());
    std::ofstream f(result_dir / name);
    f << "bin_lo,bin_hi,mass\n";
    const auto edges = s["bin_edges"].get<std::vector<double>>();
    const auto mass = s["mass"].get<std::vector<double>>();
    for (size_t b = 0; b < mass.size(); ++b)
      f << fmt(edges[b]) << ',' << fmt(edges[b + 1]) << ',' << fmt(mass[b]) << '\n';
  }
}

}  // namespace llab
