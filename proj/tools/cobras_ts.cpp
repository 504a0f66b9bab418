// Command-line front end: batch clustering, cross-validated evaluation, parameter
// sweeps, CBF generation, DTW matrix precomputation and the interactive HTTP service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "cobras_ts/engine.hpp"
#include "cobras_ts/eval.hpp"
#include "cobras_ts/service/http_api.hpp"

namespace {

using namespace cobras;

struct DataOptions {
  std::string path;
  std::string delimiter = "auto";
  std::string distmat;
};

struct ConfigOptions {
  std::string refiner = "dtw-spectral";
  std::size_t budget = 50;
  double gamma = 0.5;
  std::string window = "0.1";
  std::uint64_t seed = 0;
  bool no_normalize = false;

  EngineConfig build() const {
    EngineConfig c;
    c.refiner = parse_refiner(refiner);
    c.budget = budget;
    c.gamma = gamma;
    c.window = WarpingWindow::parse(window);
    c.rng_seed = seed;
    c.normalize = !no_normalize;
    c.validate();
    return c;
  }
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "UCR-format dataset (label first, then values)")->required();
  cmd->add_option("--delimiter", d.delimiter, "auto, comma, tab or whitespace");
}

void add_config_options(CLI::App* cmd, ConfigOptions& c) {
  cmd->add_option("--refiner", c.refiner, "dtw-spectral or kshape");
  cmd->add_option("--budget", c.budget, "maximum number of queries");
  cmd->add_option("--gamma", c.gamma, "affinity exp(-gamma * d)");
  cmd->add_option("--window", c.window, "Sakoe-Chiba band as a fraction of the length, or 'full'");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_flag("--no-normalize", c.no_normalize, "run DTW on raw rather than z-normalized series");
}

Dataset load(const DataOptions& d) { return load_ucr(d.path, parse_delimiter(d.delimiter)); }

std::shared_ptr<const DistanceMatrix> load_distmat(const DataOptions& d, const Dataset& ds) {
  if (d.distmat.empty()) return nullptr;
  auto dm = std::make_shared<DistanceMatrix>(read_distance_matrix(d.distmat));
  if (dm->size() != ds.size()) throw PreconditionError("distance matrix size does not match the dataset");
  return dm;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  for (std::string tok; std::getline(ss, tok, ',');) out.push_back(std::stod(tok));
  return out;
}

httplib::Server* running_server = nullptr;

void stop_server(int) {
  if (running_server) running_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-based active clustering of time series"};
  app.require_subcommand(1);

  // cluster
  DataOptions cluster_data;
  ConfigOptions cluster_cfg;
  std::string oracle_kind = "labels", replay_log, cluster_out, log_out;
  auto* cluster = app.add_subcommand("cluster", "one run with the label or replay oracle");
  add_data_options(cluster, cluster_data);
  add_config_options(cluster, cluster_cfg);
  cluster->add_option("--distmat", cluster_data.distmat, "precomputed DTW matrix from 'distmat'");
  cluster->add_option("--oracle", oracle_kind, "labels or replay")->check(CLI::IsMember({"labels", "replay"}));
  cluster->add_option("--log", replay_log, "constraint log CSV to replay");
  cluster->add_option("--out", cluster_out, "write the JSON result here instead of stdout");
  cluster->add_option("--log-out", log_out, "write the constraint log CSV here");

  // evaluate
  DataOptions eval_data;
  ConfigOptions eval_cfg;
  std::size_t folds = 10;
  std::uint64_t fold_seed = 0;
  unsigned threads = 0;
  std::string curves_out, summary_out;
  auto* evaluate = app.add_subcommand("evaluate", "cross-validated ARI-vs-queries curves");
  add_data_options(evaluate, eval_data);
  add_config_options(evaluate, eval_cfg);
  evaluate->add_option("--distmat", eval_data.distmat, "precomputed DTW matrix from 'distmat'");
  evaluate->add_option("--folds", folds, "number of folds");
  evaluate->add_option("--fold-seed", fold_seed, "seed of the fold assignment");
  evaluate->add_option("--threads", threads, "worker threads (0 = all cores)");
  evaluate->add_option("--out", curves_out, "write the curves CSV here instead of stdout");
  evaluate->add_option("--summary", summary_out, "write the JSON summary here instead of stderr");

  // sweep
  DataOptions sweep_data;
  ConfigOptions sweep_cfg;
  std::string gammas = "0.1,0.5,1,2", windows = "0.05,0.1,0.2,full", sweep_out;
  std::size_t sweep_folds = 10;
  std::uint64_t sweep_fold_seed = 0;
  auto* sweep = app.add_subcommand("sweep", "final mean ARI over a gamma x window grid");
  add_data_options(sweep, sweep_data);
  add_config_options(sweep, sweep_cfg);
  sweep->add_option("--gammas", gammas, "comma-separated gamma values");
  sweep->add_option("--windows", windows, "comma-separated window values ('full' allowed)");
  sweep->add_option("--folds", sweep_folds, "number of folds");
  sweep->add_option("--fold-seed", sweep_fold_seed, "seed of the fold assignment");
  sweep->add_option("--out", sweep_out, "write the CSV grid here instead of stdout");

  // gen-cbf
  CbfParams cbf;
  cbf.noise_std = 1.0;
  std::string cbf_out;
  auto* gen = app.add_subcommand("gen-cbf", "generate a Cylinder-Bell-Funnel dataset");
  gen->add_option("--per-class", cbf.per_class_count, "series per class");
  gen->add_option("--length", cbf.length, "series length");
  gen->add_option("--noise", cbf.noise_std, "standard deviation of the additive noise");
  gen->add_option("--seed", cbf.rng_seed, "random seed");
  gen->add_option("--out", cbf_out, "output file (stdout when omitted)");

  // distmat
  DataOptions dm_data;
  std::string dm_window = "0.1", dm_out;
  bool dm_csv = false, dm_raw = false;
  unsigned dm_threads = 0;
  auto* distmat = app.add_subcommand("distmat", "precompute the pairwise DTW matrix");
  add_data_options(distmat, dm_data);
  distmat->add_option("--window", dm_window, "Sakoe-Chiba band fraction or 'full'");
  distmat->add_flag("--no-normalize", dm_raw, "use raw rather than z-normalized series");
  distmat->add_option("--threads", dm_threads, "worker threads (0 = all cores)");
  distmat->add_option("--out", dm_out, "output file")->required();
  distmat->add_flag("--csv", dm_csv, "write CSV instead of the binary format");

  // serve
  std::string data_dir = "data", session_dir = "sessions";
  int port = service::port_from_env();
  std::string host = "0.0.0.0";
  auto* serve = app.add_subcommand("serve", "HTTP service for interactive sessions");
  serve->add_option("--data-dir", data_dir, "dataset registry directory");
  serve->add_option("--session-dir", session_dir, "session files directory");
  serve->add_option("--port", port, "listen port (default: COBRAS_PORT or 8080)");
  serve->add_option("--host", host, "listen address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cluster) {
      const Dataset ds = load(cluster_data);
      const EngineConfig config = cluster_cfg.build();
      std::unique_ptr<Oracle> oracle;
      std::unique_ptr<LabelOracle> fallback;
      if (oracle_kind == "replay") {
        if (replay_log.empty()) throw PreconditionError("--oracle replay needs --log");
        oracle = std::make_unique<ReplayOracle>(ConstraintStore::parse_log_csv(read_text(replay_log)));
      } else {
        oracle = std::make_unique<LabelOracle>(ds.labels());
      }
      auto ws = std::make_shared<const Workspace>(ds, config, load_distmat(cluster_data, ds));
      Engine engine(ws, config, std::vector<bool>(ds.size(), true));
      const RunResult result = engine.run(*oracle);

      nlohmann::json out = {{"dataset", ds.name()},
                            {"config", to_json(config)},
                            {"termination", to_string(result.termination)},
                            {"queries_used", result.queries_used},
                            {"cluster_count", result.clustering.cluster_count()},
                            {"labels", result.clustering.labels(ds.size())},
                            {"clustering", to_json(result.clustering)}};
      if (ds.has_labels())
        out["final_ari"] = eval::ari(std::span<const std::string>(ds.labels()), result.clustering.labels(ds.size()));
      if (!log_out.empty()) write_text(log_out, constraint_log_csv(result.log));
      write_text(cluster_out, out.dump(2) + "\n");
    } else if (*evaluate) {
      const Dataset ds = load(eval_data);
      const EngineConfig config = eval_cfg.build();
      const auto split = eval::make_folds(ds, folds, fold_seed);
      const auto result = eval::evaluate(ds, config, split, threads, load_distmat(eval_data, ds));
      auto summary = eval::summary_json(result, config, split);
      summary["kshape_baseline_ari"] = eval::kshape_baseline(ds, ds.class_count(), config.rng_seed);
      write_text(curves_out, eval::curves_csv(result));
      if (summary_out.empty())
        std::cerr << summary.dump(2) << "\n";
      else
        write_text(summary_out, summary.dump(2) + "\n");
    } else if (*sweep) {
      const Dataset ds = load(sweep_data);
      const EngineConfig base = sweep_cfg.build();
      const auto g = parse_doubles(gammas);
      std::vector<WarpingWindow> w;
      std::stringstream ss(windows);
      for (std::string tok; std::getline(ss, tok, ',');) w.push_back(WarpingWindow::parse(tok));
      const auto grid = eval::sweep(ds, base, g, w, eval::make_folds(ds, sweep_folds, sweep_fold_seed));
      write_text(sweep_out, eval::sweep_csv(grid));
    } else if (*gen) {
      write_text(cbf_out, format_ucr(generate_cbf(cbf)));
    } else if (*distmat) {
      Dataset ds = load(dm_data);
      if (!dm_raw) ds = ds.z_normalized();
      const auto dm = distance_matrix(ds, WarpingWindow::parse(dm_window), dm_threads);
      if (dm_csv)
        write_text(dm_out, distance_matrix_csv(dm));
      else
        write_distance_matrix(dm, dm_out);
    } else if (*serve) {
      service::SessionManager manager(data_dir, session_dir);
      const auto resumed = manager.resume_all();
      service::HttpApi api(manager);
      httplib::Server server;
      api.bind(server);
      running_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cerr << "listening on " << host << ":" << port << " (" << resumed << " sessions resumed)\n";
      if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
