// Copyright 2026 The concmeasure Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 infeasible.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "concmeasure/concmeasure.hpp"

namespace concmeasure::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kSchemaVersion = 1;

struct DataOptions {
  std::string format = "csv";
  std::vector<std::string> train, test, data;
  double split_fraction = 0.8;
  std::string synthetic;
  std::size_t synthetic_n = 1, synthetic_m = 1000, synthetic_test_m = 0;
  double sigma = 1.0;
  std::size_t train_limit = 0;
};

struct RunOptions {
  std::string metric;
  double alpha = 0.01;
  double epsilon = 0.0;
  std::size_t T = 10;
  std::size_t k_density = 50;
  double delta_bin = 0.005;
  std::size_t kmeans_iters = 30;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double center_fraction = 1.0;
  double cert_delta = 0.05;
  std::string output, probe_log, trace;
};

struct Splits {
  Dataset train;
  Dataset test;
};

inline Dataset load_any(const std::string& format, const std::vector<std::string>& paths) {
  if (paths.empty()) throw ParameterError("no input");
  if (format == "cifar") {
    std::vector<std::filesystem::path> ps(paths.begin(), paths.end());
    return load_cifar_binary(ps);
  }
  if (paths.size() != 1) throw ParameterError(format + " input takes exactly one file per split");
  if (format == "idx") return load_idx(paths.front());
  if (format == "csv") return load_csv(paths.front());
  throw ParameterError("unknown format '" + format + "' (expected idx, cifar or csv)");
}

inline Dataset limit_points(Dataset ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  std::vector<std::size_t> idx(limit);
  for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
  return ds.subset(idx, ds.source_tag() + ":first" + std::to_string(limit));
}

/// Resolves the data flags into train/test sets. Synthetic sets draw train
/// and test from sub-seeds 101 and 102 of --seed.
inline Splits load_splits(const DataOptions& d, std::uint64_t seed) {
  auto finish = [&](Dataset train, Dataset test) {
    return Splits{limit_points(std::move(train), d.train_limit), std::move(test)};
  };
  if (!d.synthetic.empty()) {
    const std::size_t test_m = d.synthetic_test_m ? d.synthetic_test_m : d.synthetic_m;
    if (d.synthetic == "uniform")
      return finish(gen_uniform_cube(d.synthetic_n, d.synthetic_m, sub_seed(seed, 101)),
                    gen_uniform_cube(d.synthetic_n, test_m, sub_seed(seed, 102)));
    if (d.synthetic == "gaussian")
      return finish(gen_gaussian(d.synthetic_n, d.synthetic_m, d.sigma, sub_seed(seed, 101)),
                    gen_gaussian(d.synthetic_n, test_m, d.sigma, sub_seed(seed, 102)));
    throw ParameterError("unknown synthetic distribution '" + d.synthetic + "'");
  }
  if (!d.train.empty()) {
    Dataset train = load_any(d.format, d.train);
    if (d.test.empty()) return finish(train, train);
    return finish(std::move(train), load_any(d.format, d.test));
  }
  if (!d.data.empty()) {
    auto [train, test] = split(load_any(d.format, d.data), SplitOptions{d.split_fraction, seed});
    return finish(std::move(train), std::move(test));
  }
  throw ParameterError("no input: pass --train, --data or --synthetic");
}

inline nlohmann::ordered_json describe(const Dataset& ds) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ds.content_hash()));
  return {{"source", ds.source_tag()}, {"m", ds.size()}, {"n", ds.dim()}, {"content_hash", hash}};
}

inline nlohmann::ordered_json echo_config(const DataOptions& d, const RunOptions& r) {
  nlohmann::ordered_json j;
  j["metric"] = r.metric;
  j["alpha"] = r.alpha;
  j["epsilon"] = r.epsilon;
  j["T"] = r.T;
  j["k_density"] = r.k_density;
  j["delta_bin"] = r.delta_bin;
  j["kmeans_iters"] = r.kmeans_iters;
  j["restarts"] = r.restarts;
  j["seed"] = r.seed;
  j["center_fraction"] = r.center_fraction;
  j["certificate_delta"] = r.cert_delta;
  j["format"] = d.format;
  j["train"] = d.train;
  j["test"] = d.test;
  j["data"] = d.data;
  j["split_fraction"] = d.split_fraction;
  j["synthetic"] = d.synthetic;
  j["synthetic_n"] = d.synthetic_n;
  j["synthetic_m"] = d.synthetic_m;
  j["synthetic_test_m"] = d.synthetic_test_m;
  j["sigma"] = d.sigma;
  j["train_limit"] = d.train_limit;
  return j;
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

inline LinfConfig linf_config(const RunOptions& r, std::size_t T) {
  LinfConfig c;
  c.alpha = r.alpha;
  c.epsilon_inf = r.epsilon;
  c.T = T;
  c.k_density = r.k_density;
  c.delta_bin = r.delta_bin;
  c.kmeans_iters = r.kmeans_iters;
  c.restarts = r.restarts;
  c.seed = r.seed;
  c.threads = r.threads;
  return c;
}

inline L2Config l2_config(const RunOptions& r, std::size_t T) {
  L2Config c;
  c.alpha = r.alpha;
  c.epsilon_2 = r.epsilon;
  c.T = T;
  c.seed = r.seed;
  c.threads = r.threads;
  c.center_fraction = r.center_fraction;
  return c;
}

inline std::optional<KnnTable> density_table_from_cache(const Dataset& train, std::size_t k,
                                                        unsigned threads) {
  const char* dir = std::getenv("CONC_CACHE_DIR");
  if (dir == nullptr || *dir == '\0' || k >= train.size()) return std::nullopt;
  const MetricTree tree(train, Metric::L1);
  return cached_knn_table(dir, tree, k, threads);
}

/// Runs one search and packages the estimate. Throws InfeasibleError when
/// no region with train risk >= alpha exists.
inline ConcentrationEstimate estimate(const Splits& s, const RunOptions& r, std::size_t T,
                                      std::string* side_csv = nullptr) {
  ConcentrationEstimate e;
  e.alpha = r.alpha;
  e.epsilon = r.epsilon;
  e.T = T;
  if (r.metric == "linf") {
    const auto table = density_table_from_cache(s.train, r.k_density, r.threads);
    const auto res = run_linf(s.train, s.test, linf_config(r, T), table ? &*table : nullptr);
    e.metric = Metric::LINF;
    e.risk_train = res.risk_train;
    e.advrisk_train = res.advrisk_train;
    e.risk_test = res.risk_test;
    e.advrisk_test = res.advrisk_test;
    e.region = res.region;
    e.best_q = res.best_q;
    e.restart_stats = res.restart_stats;
    if (side_csv) *side_csv = probes_to_csv(res.probes);
  } else if (r.metric == "l2") {
    const auto res = run_l2(s.train, s.test, l2_config(r, T));
    e.metric = Metric::L2;
    e.risk_train = res.risk_train;
    e.advrisk_train = res.advrisk_train;
    e.risk_test = res.risk_test;
    e.advrisk_test = res.advrisk_test;
    e.region = res.region;
    if (side_csv) *side_csv = trace_to_csv(res.trace);
  } else {
    throw ParameterError("--metric must be linf or l2");
  }
  e.feasible = e.risk_train >= r.alpha;
  if (!e.feasible) throw InfeasibleError("no region reaches training risk >= alpha");
  return e;
}

inline nlohmann::ordered_json report_header(const std::string& command, const DataOptions& d,
                                            const RunOptions& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["config"] = echo_config(d, r);
  return j;
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline int cmd_measure(const DataOptions& d, const RunOptions& r, std::ostream& out) {
  const Splits s = load_splits(d, r.seed);
  auto report = report_header("measure", d, r);
  report["data"] = {{"train", describe(s.train)}, {"test", describe(s.test)}};
  try {
    std::string side;
    const auto e = estimate(s, r, r.T, &side);
    report["infeasible"] = false;
    if (const auto* cr = std::get_if<RectComplementRegion>(&e.region))
      report["degenerate"] = cr->base_rects.empty();
    report["estimate"] = to_json(e);
    const PenaltyParams p{static_cast<double>(s.train.dim()), static_cast<double>(r.T),
                          static_cast<double>(std::max<std::size_t>(2, s.train.size())),
                          r.cert_delta};
    auto cert = to_json(generalization_certificate(e.advrisk_train, p));
    cert["n"] = s.train.dim();
    cert["m"] = s.train.size();
    cert["T"] = r.T;
    report["certificate"] = cert;
    report["intrinsic_robustness"] = {
        {"upper_estimate", intrinsic_robustness(e.advrisk_test)},
        {"basis", "1 - test advrisk of the found region"},
        {"applies_to", "classifiers with risk >= alpha"}};
    report["assumptions"] = {"the data space is treated as an admissible metric probability space"};
    write_text(r.output, dump(report), out);
    if (r.metric == "linf" && !r.probe_log.empty()) write_text(r.probe_log, side, out);
    if (r.metric == "l2" && !r.trace.empty()) write_text(r.trace, side, out);
    return kExitOk;
  } catch (const InfeasibleError& ex) {
    report["infeasible"] = true;
    report["reason"] = ex.what();
    write_text(r.output, dump(report), out);
    return kExitInfeasible;
  }
}

inline int cmd_sweep_q(const DataOptions& d, const RunOptions& r, std::ostream& out) {
  if (r.metric != "linf" && !r.metric.empty())
    throw ParameterError("sweep-q applies to the linf search only");
  const Splits s = load_splits(d, r.seed);
  const auto rows = sweep_q(s.train, &s.test, linf_config(r, r.T));
  std::string csv = "q,feasible,risk,advrisk,risk_test,advrisk_test\n";
  for (const auto& row : rows)
    csv += format_double(row.q) + ',' + (row.feasible ? "1" : "0") + ',' + format_double(row.risk) +
           ',' + format_double(row.advrisk) + ',' + format_double(*row.risk_test) + ',' +
           format_double(*row.advrisk_test) + '\n';
  write_text(r.output, csv, out);
  return kExitOk;
}

inline int cmd_sweep_T(const DataOptions& d, const RunOptions& r, const std::vector<std::size_t>& Ts,
                       std::ostream& out) {
  if (Ts.empty()) throw ParameterError("--T-list is empty");
  const Splits s = load_splits(d, r.seed);
  std::string csv = "T,risk_train,advrisk_train,risk_test,advrisk_test\n";
  for (auto T : Ts) {
    try {
      const auto e = estimate(s, r, T);
      csv += std::to_string(T) + ',' + format_double(e.risk_train) + ',' +
             format_double(e.advrisk_train) + ',' + format_double(e.risk_test) + ',' +
             format_double(e.advrisk_test) + '\n';
    } catch (const InfeasibleError&) {
      csv += std::to_string(T) + ",,,,\n";
    }
  }
  write_text(r.output, csv, out);
  return kExitOk;
}

inline int cmd_bound(double n, double T, double m, double delta, double h_emp, bool json,
                     std::ostream& out) {
  const PenaltyParams p{n, T, m, delta};
  const auto cert = generalization_certificate(h_emp, p);
  if (json) {
    auto j = to_json(cert);
    j["n"] = n;
    j["T"] = T;
    j["m"] = m;
    j["log_penalty"] = log_complexity_penalty(p);
    out << dump(j);
  } else {
    out << "penalty     = " << format_double(cert.penalty) << "\n"
        << "log penalty = " << format_double(log_complexity_penalty(p)) << "\n"
        << "confidence  = " << format_double(cert.confidence) << "\n"
        << "1 - confidence = " << format_double(1.0 - cert.confidence) << "\n"
        << cert.statement() << "\n";
  }
  return kExitOk;
}

inline int cmd_convert(double n, double eps_inf, bool json, std::ostream& out) {
  const double eps2 = eps_convert(n, eps_inf);
  if (json) {
    out << dump({{"n", n}, {"eps_inf", eps_inf}, {"eps_2", eps2}});
  } else {
    char rounded[64];
    std::snprintf(rounded, sizeof rounded, "%.4f", eps2);
    out << "eps_2 = " << rounded << " (" << format_double(eps2) << ")\n";
  }
  return kExitOk;
}

inline int cmd_oracle(const DataOptions& d, const RunOptions& r, const std::string& family,
                      bool compare, std::ostream& out) {
  const Splits s = load_splits(d, r.seed);
  auto report = report_header("oracle", d, r);
  report["family"] = family;
  report["data"] = describe(s.train);
  OracleResult res;
  if (family == "balls")
    res = brute_force_balls(s.train, r.alpha, r.epsilon, r.T);
  else if (family == "rects")
    res = brute_force_rects(s.train, r.alpha, r.epsilon, r.T);
  else
    throw ParameterError("--family must be balls or rects");
  report["feasible"] = res.feasible;
  report["optimal_advrisk"] = res.optimal_advrisk;
  report["optimal_risk"] = res.optimal_risk;
  report["candidates_examined"] = res.candidates_examined;
  report["optimal_region"] = std::visit([](const auto& g) { return region_to_json(g); }, res.optimal_region);
  if (!res.rect_lo.empty()) report["rect_bounds"] = {{"lo", res.rect_lo}, {"hi", res.rect_hi}};
  if (compare && res.feasible) {
    double heuristic;
    if (family == "balls") {
      heuristic = run_l2(s.train, s.train, l2_config(r, r.T)).advrisk_train;
    } else {
      heuristic = run_linf(s.train, s.train, linf_config(r, r.T)).advrisk_train;
    }
    report["heuristic_advrisk"] = heuristic;
    report["oracle_dominates"] = res.optimal_advrisk <= heuristic;
  }
  out << dump(report);
  return res.feasible ? kExitOk : kExitInfeasible;
}

inline int cmd_knn_cache(const DataOptions& d, const RunOptions& r, std::size_t k,
                         std::string cache_dir, std::ostream& out) {
  if (cache_dir.empty()) {
    const char* env = std::getenv("CONC_CACHE_DIR");
    if (env == nullptr || *env == '\0') throw ParameterError("set --cache-dir or CONC_CACHE_DIR");
    cache_dir = env;
  }
  const Splits s = load_splits(d, r.seed);
  const Metric metric = metric_from_string(r.metric.empty() ? "l1" : r.metric);
  const MetricTree tree(s.train, metric);
  cached_knn_table(cache_dir, tree, k, r.threads);
  out << knn_cache_path(cache_dir, s.train, metric, k).string() << "\n";
  return kExitOk;
}

inline void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--format", d.format, "input format: idx, cifar or csv")
      ->check(CLI::IsMember({"idx", "cifar", "csv"}));
  app->add_option("--train", d.train, "training file(s)");
  app->add_option("--test", d.test, "test file(s)");
  app->add_option("--data", d.data, "single file(s) split by --split");
  app->add_option("--split", d.split_fraction, "training fraction for --data");
  app->add_option("--synthetic", d.synthetic, "uniform or gaussian");
  app->add_option("--synthetic-n", d.synthetic_n, "synthetic dimension");
  app->add_option("--synthetic-m", d.synthetic_m, "synthetic training size");
  app->add_option("--synthetic-test-m", d.synthetic_test_m, "synthetic test size (default: same)");
  app->add_option("--sigma", d.sigma, "synthetic gaussian standard deviation");
  app->add_option("--train-limit", d.train_limit, "keep only the first N training points");
}

inline void add_run_options(CLI::App* app, RunOptions& r) {
  app->add_option("--metric", r.metric, "linf or l2")->check(CLI::IsMember({"linf", "l2", "l1"}));
  app->add_option("--alpha", r.alpha, "risk threshold");
  app->add_option("--epsilon", r.epsilon, "perturbation budget");
  app->add_option("-T,--T,--rects,--balls", r.T, "number of rectangles / balls");
  app->add_option("--k-density", r.k_density, "neighbor rank for density ordering");
  app->add_option("--delta-bin", r.delta_bin, "bisection precision over q");
  app->add_option("--kmeans-iters", r.kmeans_iters, "k-means iteration cap");
  app->add_option("--restarts", r.restarts, "random restarts of the linf search");
  app->add_option("--seed", r.seed, "master seed");
  app->add_option("--threads", r.threads, "worker threads (0 = all cores)");
  app->add_option("--center-fraction", r.center_fraction, "fraction of centers tried (l2 smoke runs)");
  app->add_option("--delta", r.cert_delta, "deviation for the generalization certificate");
  app->add_option("-o,--output", r.output, "report / CSV path (default stdout)");
  app->add_option("--probe-log", r.probe_log, "linf probe log CSV");
  app->add_option("--trace", r.trace, "l2 per-step trace CSV");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Empirical concentration of measure under l-infinity and l2 perturbations"};
  app.require_subcommand(1);

  DataOptions data;
  RunOptions run;

  auto* measure = app.add_subcommand("measure", "search a robust error region and report it");
  add_data_options(measure, data);
  add_run_options(measure, run);
  measure->get_option("--metric")->required();
  measure->get_option("--epsilon")->required();

  auto* sweepq = app.add_subcommand("sweep-q", "risk and advrisk over the covered fraction q");
  add_data_options(sweepq, data);
  add_run_options(sweepq, run);

  std::vector<std::size_t> t_list;
  auto* sweept = app.add_subcommand("sweep-T", "full search for each T");
  add_data_options(sweept, data);
  add_run_options(sweept, run);
  sweept->add_option("--T-list", t_list, "comma-separated T values")->delimiter(',')->required();
  sweept->get_option("--metric")->required();

  double bn = 0, bT = 1, bm = 2, bdelta = 0, bh = 0;
  bool json = false;
  auto* bound = app.add_subcommand("bound", "complexity penalty and generalization certificate");
  bound->add_option("--n", bn, "dimension")->required();
  bound->add_option("--T", bT, "primitives per region")->required();
  bound->add_option("--m", bm, "sample count")->required();
  bound->add_option("--delta", bdelta, "deviation")->required();
  bound->add_option("--h-emp", bh, "empirical concentration to certify");
  bound->add_flag("--json", json, "machine-readable output");

  double cn = 0, ceps = 0;
  auto* convert = app.add_subcommand("convert", "equal-volume l2 budget for an linf budget");
  convert->add_option("--n", cn, "dimension")->required();
  convert->add_option("--eps-inf", ceps, "l-infinity budget")->required();
  convert->add_flag("--json", json, "machine-readable output");

  std::string family;
  bool compare = false;
  auto* oracle = app.add_subcommand("oracle", "exhaustive optimum on a tiny dataset");
  add_data_options(oracle, data);
  add_run_options(oracle, run);
  oracle->add_option("--family", family, "balls or rects")->required();
  oracle->add_flag("--compare", compare, "also run the heuristic search and compare");

  std::size_t cache_k = 50;
  std::string cache_dir;
  auto* knn = app.add_subcommand("knn-cache", "precompute the k-NN table into the cache");
  add_data_options(knn, data);
  add_run_options(knn, run);
  knn->add_option("--k", cache_k, "neighbors per point");
  knn->add_option("--cache-dir", cache_dir, "cache directory (default $CONC_CACHE_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*measure) return cmd_measure(data, run, out);
    if (*sweepq) return cmd_sweep_q(data, run, out);
    if (*sweept) return cmd_sweep_T(data, run, t_list, out);
    if (*bound) return cmd_bound(bn, bT, bm, bdelta, bh, json, out);
    if (*convert) return cmd_convert(cn, ceps, json, out);
    if (*oracle) return cmd_oracle(data, run, family, compare, out);
    if (*knn) return cmd_knn_cache(data, run, cache_k, cache_dir, out);
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace concmeasure::cli
