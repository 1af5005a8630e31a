// Command-line driver wiring the simulators, trigger synthesis, poisoning,
// victim training and the detectors. Exit codes: 0 success / no flags,
// 2 usage or configuration error, 3 detection positive.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "audiotaint/io.hpp"
#include "audiotaint/pipeline.hpp"

using namespace taint;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDetection = 3;

pipeline::RunConfig load_config(const std::string& config_path, std::uint64_t seed_flag,
                                bool seed_given, const std::string& out_flag) {
  json j = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open config file: " + config_path);
    in >> j;
  }
  pipeline::RunConfig cfg = pipeline::parse_config(j);
  if (seed_given) cfg.seed = seed_flag;
  if (!out_flag.empty()) cfg.output_dir = out_flag;
  return cfg;
}

void print_summary(const std::string& name, const std::vector<double>& values) {
  double lo = values.front(), hi = values.front();
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::cout << name << ": terminal=" << io::fmt(values.back()) << " min=" << io::fmt(lo)
            << " max=" << io::fmt(hi) << " n=" << values.size() << "\n";
}

int cmd_simulate(const std::string& kind, const pipeline::RunConfig& cfg) {
  const std::vector<std::string> kinds{"cir", "bates", "execution", "hft", "fluid", "diffuse"};
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    std::cerr << "unknown simulation kind '" << kind << "'; valid kinds:";
    for (const auto& k : kinds) std::cerr << ' ' << k;
    std::cerr << "\n";
    return kExitUsage;
  }
  io::ArtifactIndex index(cfg.output_dir, "simulate " + kind, cfg.seed);

  if (kind == "cir") {
    const auto path = finance::simulate_cir(cfg.cir, cfg.seed);
    io::write_path_csv(path, index.path("cir.csv"));
    index.add("trace", "cir.csv");
    print_summary("cir", path.values);
  } else if (kind == "bates") {
    const auto paths = finance::simulate_bates(cfg.bates, cfg.seed);
    io::write_path_csv(paths.price, index.path("bates_price.csv"));
    io::write_path_csv(paths.variance, index.path("bates_variance.csv"));
    index.add("price", "bates_price.csv");
    index.add("variance", "bates_variance.csv");
    print_summary("bates", paths.price.values);
  } else if (kind == "execution") {
    const auto tr = finance::simulate_execution(cfg.execution, cfg.seed);
    io::write_execution_csv(tr, index.path("execution.csv"));
    index.add("trace", "execution.csv");
    print_summary("execution", tr.price.values);
  } else if (kind == "hft") {
    // Seeded mid-price random walk plus constant quoted spread.
    Rng rng(cfg.seed);
    std::vector<double> prices{cfg.hft.start_price};
    for (int i = 1; i < cfg.hft.n_trades; ++i)
      prices.push_back(prices.back() + cfg.hft.volatility * rng.normal());
    std::vector<double> spreads(prices.size(), cfg.hft.spread);
    const auto tr = finance::simulate_hft(prices, spreads, mix64(cfg.seed) + 1);
    io::write_series_csv(tr.profits, "trade,profit", index.path("hft_profits.csv"));
    io::write_series_csv(tr.slippage, "trade,slippage", index.path("hft_slippage.csv"));
    json j;
    j["cumulative_profit"] = tr.cumulative_profit;
    j["cumulative_slippage"] = tr.cumulative_slippage;
    auto out = io::open_out(index.path("hft_summary.json"));
    out << j.dump(2) << '\n';
    index.add("profits", "hft_profits.csv");
    index.add("slippage", "hft_slippage.csv");
    index.add("summary", "hft_summary.json");
    print_summary("hft", tr.profits);
  } else if (kind == "fluid") {
    auto field = fluid::initialize_system(cfg.fluid_run.grid);
    for (int s = 0; s < cfg.fluid_run.steps; ++s) {
      field = fluid::navier_stokes_step(field, cfg.fluid_run.grid, cfg.fluid_run.params);
      if (cfg.fluid_run.smooth_weight > 0.0) {
        field.u = fluid::laplacian_smooth(field.u, cfg.fluid_run.smooth_weight);
        field.v = fluid::laplacian_smooth(field.v, cfg.fluid_run.smooth_weight);
        field.w = fluid::laplacian_smooth(field.w, cfg.fluid_run.smooth_weight);
      }
    }
    io::write_field_csv(field, index.path("field.csv"));
    io::write_field_binary(field, index.path("field.bin"));
    index.add("field_csv", "field.csv");
    index.add("field_bin", "field.bin");
    print_summary("fluid.u", field.u.data());
  } else {  // diffuse
    const auto schedule = diffusion::make_linear_schedule(
        cfg.diffusion.steps, cfg.diffusion.beta_start, cfg.diffusion.beta_end);
    auto s = schedule;
    s.prior_mean = cfg.diffusion.prior_mean;
    const auto tr = diffusion::reverse_sample(s, cfg.diffusion.x_init, cfg.seed);
    io::write_series_csv(tr.states, "t,x", index.path("diffusion.csv"));
    index.add("trace", "diffusion.csv");
    print_summary("diffuse", tr.states);
  }
  index.write();
  return kExitOk;
}

int cmd_attack(const pipeline::RunConfig& cfg) {
  io::ArtifactIndex index(cfg.output_dir, "attack", cfg.seed);

  dataset::Dataset full;
  if (cfg.poison.manifest.empty()) {
    full = synthetic::make_synthetic_dataset(cfg.poison.synthetic, mix64(cfg.seed) ^ 0xdb17ull);
    io::write_dataset(full, index.path("dataset"), index.path("dataset_manifest.jsonl"));
    index.add("dataset_manifest", "dataset_manifest.jsonl");
  } else {
    if (!std::filesystem::exists(cfg.poison.manifest))
      throw std::invalid_argument("dataset manifest does not exist: " + cfg.poison.manifest);
    full = io::load_dataset(cfg.poison.manifest, cfg.poison.n_classes);
  }

  const auto result = pipeline::run_attack(cfg, full, cfg.seed);

  {
    auto out = io::open_out(index.path("trigger.json"));
    out << io::trigger_to_json(result.payload).dump(2) << '\n';
  }
  io::write_trigger_wav(result.payload, index.path("trigger.wav"));
  io::write_dataset(result.train_poisoned, index.path("poisoned"),
                    index.path("poisoned_manifest.jsonl"));
  {
    auto out = io::open_out(index.path("model.json"));
    out << io::model_to_json(result.trained.model).dump() << '\n';
  }
  io::write_trajectory_csv(result.trained.trajectory, index.path("trajectory.csv"));
  io::write_series_csv(result.v_stream, "snapshot,V", index.path("v_stream.csv"));
  {
    json j;
    j["ba"] = result.metrics.benign_accuracy;
    j["asr"] = result.metrics.attack_success_rate;
    j["poison_rate"] = cfg.poison.spec.poison_rate;
    j["target_label"] = cfg.poison.spec.target_label;
    j["seed"] = cfg.seed;
    auto out = io::open_out(index.path("metrics.json"));
    out << j.dump(2) << '\n';
  }
  index.add("trigger", "trigger.json");
  index.add("trigger_wav", "trigger.wav");
  index.add("poisoned_manifest", "poisoned_manifest.jsonl");
  index.add("model", "model.json");
  index.add("trajectory", "trajectory.csv");
  index.add("v_stream", "v_stream.csv");
  index.add("metrics", "metrics.json");
  index.write();

  std::cout << "attack: ba=" << io::fmt(result.metrics.benign_accuracy)
            << " asr=" << io::fmt(result.metrics.attack_success_rate)
            << " poisoned=" << result.poisoned_indices.size() << "\n";
  return kExitOk;
}

int cmd_detect(const std::string& input, const std::string& mode,
               const pipeline::RunConfig& cfg) {
  if (mode != "lyapunov" && mode != "ablation") {
    std::cerr << "unknown detect mode '" << mode << "'; valid modes: lyapunov ablation\n";
    return kExitUsage;
  }
  io::ArtifactIndex index(cfg.output_dir, "detect " + mode, cfg.seed);

  std::vector<double> values;
  try {
    values = io::read_value_csv(input);
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  if (values.size() < 2) {
    std::cerr << "detect: need at least 2 input values, got " << values.size() << "\n";
    return kExitUsage;
  }

  bool positive = false;
  if (mode == "lyapunov") {
    const auto rep = lyapunov::detect(values, cfg.detect.confidence, cfg.seed,
                                      cfg.detect.n_resamples);
    io::write_detection_csv(rep, index.path("detection.csv"));
    auto out = io::open_out(index.path("detection.json"));
    out << io::detection_report_json(rep).dump(2) << '\n';
    index.add("report_csv", "detection.csv");
    index.add("report_json", "detection.json");
    positive = rep.any_flag();
    std::cout << "detect lyapunov: n=" << values.size() << " mean=" << io::fmt(rep.mean_v)
              << " flags=" << (positive ? "yes" : "no") << "\n";
  } else {
    const double tau = cfg.ablation.tau_given
                           ? cfg.ablation.cfg.tau
                           : anomaly::threshold_from_benign(values, cfg.ablation.tau_quantile);
    std::vector<bool> flags(values.size());
    int n_flags = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      flags[i] = values[i] > tau;
      n_flags += flags[i] ? 1 : 0;
    }
    auto out = io::open_out(index.path("ablation_flags.csv"));
    out << "index,score,flag\n";
    for (std::size_t i = 0; i < values.size(); ++i)
      out << i << ',' << io::fmt(values[i]) << ',' << (flags[i] ? 1 : 0) << '\n';
    json j;
    j["tau"] = tau;
    j["n_flags"] = n_flags;
    auto jout = io::open_out(index.path("ablation_summary.json"));
    jout << j.dump(2) << '\n';
    index.add("flags", "ablation_flags.csv");
    index.add("summary", "ablation_summary.json");
    positive = n_flags > 0;
    std::cout << "detect ablation: n=" << values.size() << " tau=" << io::fmt(tau)
              << " flags=" << n_flags << "\n";
  }
  index.write();
  return positive ? kExitDetection : kExitOk;
}

int cmd_ablate(const pipeline::RunConfig& cfg) {
  io::ArtifactIndex index(cfg.output_dir, "ablate", cfg.seed);

  dataset::Dataset full;
  if (cfg.poison.manifest.empty()) {
    full = synthetic::make_synthetic_dataset(cfg.poison.synthetic, mix64(cfg.seed) ^ 0xdb17ull);
  } else {
    if (!std::filesystem::exists(cfg.poison.manifest))
      throw std::invalid_argument("dataset manifest does not exist: " + cfg.poison.manifest);
    full = io::load_dataset(cfg.poison.manifest, cfg.poison.n_classes);
  }

  const auto payload = pipeline::build_trigger(cfg, full, cfg.seed);
  auto [mixed, poisoned_idx] =
      dataset::poison_dataset(full, cfg.poison.spec, payload, mix64(cfg.seed) + 10);

  std::vector<int> benign_idx;
  {
    std::vector<bool> is_poisoned(full.samples.size(), false);
    for (int i : poisoned_idx) is_poisoned[i] = true;
    for (std::size_t i = 0; i < full.samples.size(); ++i)
      if (!is_poisoned[i]) benign_idx.push_back(static_cast<int>(i));
  }

  const auto r = pipeline::run_ablation(cfg.ablation, mixed, benign_idx, poisoned_idx,
                                        mix64(cfg.seed) + 77);

  io::write_ablation_csv(r.recon_losses, r.lof, r.recon_flags, index.path("ablation_scores.csv"));
  io::write_pca_csv(r.pca_coords, r.recon_flags, index.path("pca_coords.csv"));
  {
    json j;
    j["tau"] = r.tau;
    j["recall"] = r.accuracy.recall;
    j["false_positive_rate"] = r.accuracy.false_positive_rate;
    j["n_poisoned"] = poisoned_idx.size();
    auto out = io::open_out(index.path("ablation_metrics.json"));
    out << j.dump(2) << '\n';
  }
  index.add("scores", "ablation_scores.csv");
  index.add("pca", "pca_coords.csv");
  index.add("metrics", "ablation_metrics.json");
  index.write();

  std::cout << "ablate: tau=" << io::fmt(r.tau) << " recall=" << io::fmt(r.accuracy.recall)
            << " fpr=" << io::fmt(r.accuracy.false_positive_rate) << "\n";
  return kExitOk;
}

int cmd_report(const std::string& dir) {
  const auto manifest = (std::filesystem::path(dir) / "manifest.json").string();
  std::ifstream in(manifest);
  if (!in) {
    std::cerr << "report: no manifest.json under " << dir << "\n";
    return kExitUsage;
  }
  json j;
  in >> j;
  std::cout << "run: " << j.value("command", "?") << " (seed " << j.value("seed", 0) << ")\n";
  for (const auto& [kind, name] : j.at("artifacts").items())
    std::cout << "  " << kind << ": " << name << "\n";
  const auto metrics = (std::filesystem::path(dir) / "metrics.json").string();
  std::ifstream min(metrics);
  if (min) {
    json m;
    min >> m;
    std::cout << "metrics: ba=" << m.value("ba", 0.0) << " asr=" << m.value("asr", 0.0) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audiotaint: simulation-driven audio poisoning toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, kind, mode = "lyapunov", input, report_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "global random seed")->each([&](const std::string&) {
      seed_given = true;
    });
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* sim = app.add_subcommand("simulate", "run one simulator and export its trace");
  sim->add_option("kind", kind, "cir | bates | execution | hft | fluid | diffuse")->required();
  add_common(sim);

  auto* attack = app.add_subcommand("attack", "poison, train and evaluate end to end");
  add_common(attack);

  auto* detect = app.add_subcommand("detect", "flag poisoning from a value stream");
  detect->add_option("input", input, "CSV of V values or reconstruction scores")->required();
  detect->add_option("--mode", mode, "lyapunov | ablation");
  add_common(detect);

  auto* ablate = app.add_subcommand("ablate", "autoencoder + clustering detection run");
  add_common(ablate);

  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("dir", report_dir, "output directory of a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const pipeline::RunConfig cfg = load_config(config_path, seed, seed_given, out_dir);
    if (sim->parsed()) return cmd_simulate(kind, cfg);
    if (attack->parsed()) return cmd_attack(cfg);
    if (detect->parsed()) return cmd_detect(input, mode, cfg);
    if (ablate->parsed()) return cmd_ablate(cfg);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
