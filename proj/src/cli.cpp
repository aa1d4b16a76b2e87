#include "ballot/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ballot/config.hpp"
#include "ballot/data_io.hpp"
#include "ballot/error.hpp"
#include "ballot/pipeline.hpp"
#include "ballot/report.hpp"

namespace fs = std::filesystem;

namespace ballot {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) return parse_config(nlohmann::json::object());
  return load_config(path);
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PersistenceError("cannot create directory " + dir.string() + ": " + ec.message());
}

ReportFile base_report(const RunConfig& cfg, const NetworkParams& net) {
  ReportFile r;
  r.seed = cfg.train.seed;
  r.config = config_to_json(cfg);
  r.layers = net.specs;
  return r;
}

void write_snapshots(const RunArtifacts& art, const fs::path& dir) {
  make_dir(dir);
  save_checkpoint(art.theta0, dir / "theta_0.bltc");
  save_checkpoint(art.theta_k, dir / "theta_k.bltc");
  save_checkpoint(art.theta_final, dir / "theta_E.bltc");
}

int cmd_train(const std::string& config_path, const fs::path& out) {
  const RunConfig cfg = config_or_default(config_path);
  const DataSplit data = prepare_data(cfg.data);
  const RunArtifacts art = train_dense(cfg.train, data);
  make_dir(out);
  write_snapshots(art, out / "checkpoints");
  ReportFile report = base_report(cfg, art.theta_final);
  report.results.push_back(summarize("dense", art.dense_report, art.wall_time_s));
  write_report(report, out / "report.json");
  return kExitOk;
}

int cmd_prune(const std::string& method_name, const std::string& config_path, const fs::path& out) {
  RunConfig cfg = config_or_default(config_path);
  if (!method_name.empty()) cfg.method = prune_method_from_string(method_name);
  const DataSplit data = prepare_data(cfg.data);
  const RunArtifacts art = train_dense(cfg.train, data);
  const PruneResult result = run_method(cfg.method, cfg.train, data, art);
  make_dir(out);
  write_snapshots(art, out / "checkpoints");
  save_checkpoint(result.final_params, out / "checkpoints" / "final.bltc");
  ReportFile report = base_report(cfg, art.theta_final);
  report.results.push_back(summarize("dense", art.dense_report, art.wall_time_s));
  report.results.push_back(summarize(result));
  write_report(report, out / "report.json");
  return kExitOk;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& data_path, const std::string& label_column,
                 std::optional<std::size_t> classes, const fs::path& out) {
  const NetworkParams net = load_checkpoint(checkpoint);
  const std::size_t net_classes = net.specs.back().d_out;
  const Dataset data = load_csv(data_path, label_column, classes.value_or(net_classes));
  if (data.dim() != net.specs.front().d_in) {
    throw DataError("data has " + std::to_string(data.dim()) + " feature columns, checkpoint expects " +
                    std::to_string(net.specs.front().d_in));
  }
  const EvalReport report = evaluate(net, nullptr, data);
  ReportFile file;
  file.seed = net.seed;
  file.config = {{"checkpoint", checkpoint.string()}, {"data", data_path.string()},
                 {"label_column", label_column}};
  file.layers = net.specs;
  file.results.push_back(summarize("evaluate", report, 0.0));
  make_dir(out);
  write_report(file, out / "report.json");
  return kExitOk;
}

int cmd_gen_data(const std::string& config_path, const fs::path& out) {
  const RunConfig cfg = config_or_default(config_path);
  if (cfg.data.csv_path) throw ConfigError("data.csv: gen-data needs a synthetic data section");
  cfg.data.validate();
  if (out.has_parent_path()) make_dir(out.parent_path());
  write_csv(gen_synthetic(cfg.data.synthetic), out);
  return kExitOk;
}

std::size_t thread_count() {
  const char* env = std::getenv("BALLOT_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("BALLOT_THREADS: expected a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(n);
}

constexpr PruneMethod kAllMethods[] = {PruneMethod::ballot, PruneMethod::lth, PruneMethod::magnitude,
                                       PruneMethod::random};

// One seed's dense run plus every method; written to its own directory.
std::vector<AggregateRow> run_seed(const RunConfig& base, const DataSplit& data, std::uint64_t seed,
                                   const fs::path& dir) {
  RunConfig cfg = base;
  cfg.train.seed = seed;
  const RunArtifacts art = train_dense(cfg.train, data);
  ReportFile report = base_report(cfg, art.theta_final);
  std::vector<AggregateRow> rows;
  report.results.push_back(summarize("dense", art.dense_report, art.wall_time_s));
  rows.push_back({"dense", seed, report.results.back()});
  for (PruneMethod m : kAllMethods) {
    report.results.push_back(summarize(run_method(m, cfg.train, data, art)));
    rows.push_back({to_string(m), seed, report.results.back()});
  }
  make_dir(dir);
  write_report(report, dir / "report.json");
  return rows;
}

int cmd_experiment(std::size_t seeds, const std::string& config_path, const fs::path& out) {
  if (seeds == 0) throw UsageError("--seeds must be at least 1");
  const RunConfig cfg = config_or_default(config_path);
  const DataSplit data = prepare_data(cfg.data);
  const std::size_t workers = std::min(thread_count(), seeds);
  make_dir(out / "runs");

  std::vector<std::vector<AggregateRow>> per_seed(seeds);
  std::vector<std::exception_ptr> errors(seeds);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds; i = next++) {
      const std::uint64_t seed = cfg.train.seed + i;
      try {
        per_seed[i] = run_seed(cfg, data, seed, out / "runs" / ("seed_" + std::to_string(seed)));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<AggregateRow> rows;
  for (auto& r : per_seed) rows.insert(rows.end(), r.begin(), r.end());
  write_text(out / "aggregate.csv", aggregate_csv(std::move(rows)));
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Fairness-aware neural network pruning", "ballot"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  std::string out;
  std::string method;
  std::string checkpoint;
  std::string data_path;
  std::string label_column = "label";
  std::size_t classes = 0;
  std::size_t seeds = 1;

  auto* train = app.add_subcommand("train", "Dense training; writes checkpoints and a report");
  train->add_option("--config", config_path, "Config JSON (defaults when omitted)");
  train->add_option("--out", out, "Output directory")->required();

  auto* prune = app.add_subcommand("prune", "Dense training followed by one pruning method");
  prune->add_option("--method", method, "ballot | lth | magnitude | random");
  prune->add_option("--config", config_path, "Config JSON");
  prune->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on a CSV dataset");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data_path, "CSV with a header row")->required();
  eval->add_option("--label-column", label_column, "Name of the label column");
  eval->add_option("--classes", classes, "Class count (defaults to the network's output width)");
  eval->add_option("--out", out, "Output directory")->required();

  auto* experiment = app.add_subcommand("experiment", "Dense plus all methods over several seeds");
  experiment->add_option("--seeds", seeds, "Number of consecutive seeds starting at the config seed");
  experiment->add_option("--config", config_path, "Config JSON");
  experiment->add_option("--out", out, "Output directory")->required();

  auto* gen = app.add_subcommand("gen-data", "Export the synthetic dataset as CSV");
  gen->add_option("--config", config_path, "Config JSON");
  gen->add_option("--out", out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    std::cout << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(config_path, out);
    if (*prune) {
      if (!method.empty()) {
        try {
          prune_method_from_string(method);
        } catch (const ConfigError& e) {
          std::cerr << "error: " << e.what() << "\n\n" << prune->help();
          return kExitConfig;
        }
      }
      return cmd_prune(method, config_path, out);
    }
    if (*eval) {
      return cmd_evaluate(checkpoint, data_path, label_column,
                          classes == 0 ? std::nullopt : std::optional<std::size_t>(classes), out);
    }
    if (*experiment) return cmd_experiment(seeds, config_path, out);
    if (*gen) return cmd_gen_data(config_path, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    if (const auto* inf = dynamic_cast<const InfeasibleError*>(&e)) {
      std::cerr << "minimum achievable retention: " << inf->min_retention() << "\n";
    }
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const PersistenceError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace ballot
