#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asvgp/bench.hpp"
#include "asvgp/csv.hpp"
#include "asvgp/model_file.hpp"
#include "asvgp/optimize.hpp"
#include "asvgp/synth.hpp"
#include "json.hpp"

namespace asvgp::cli {

struct CsvFlags {
  std::string delimiter = ",";
  bool header = false;

  csv::Options options() const {
    if (delimiter.size() != 1) throw InvalidConfiguration("delimiter must be a single character");
    return {delimiter == "\\t" ? '\t' : delimiter[0], header};
  }
};

inline void add_csv_flags(CLI::App* app, CsvFlags& f) {
  app->add_option("--delimiter", f.delimiter, "Field delimiter")->capture_default_str();
  app->add_flag("--header", f.header, "First line is a header");
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfiguration("cannot open '" + path + "'");
  return in;
}

/// Writes to `path`, or to `fallback` for "" and "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      out_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw InvalidConfiguration("cannot open '" + path + "' for writing");
      out_ = file_.get();
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
};

inline nlohmann::json hyper_json(const MaternHyper& h) {
  nlohmann::json j;
  std::vector<double> l, v;
  for (std::size_t d = 0; d < h.log_lengthscale.size(); ++d) l.push_back(h.lengthscale(d));
  for (std::size_t d = 0; d < h.log_variance.size(); ++d) v.push_back(h.variance(d));
  j["lengthscale"] = l;
  j["variance"] = v;
  j["noise"] = h.noise();
  return j;
}

inline nlohmann::json report_json(const FitOutcome& o) {
  const auto& r = o.report;
  nlohmann::json j;
  j["n"] = o.result.stats.n;
  j["num_features"] = o.result.features.space.num_features();
  j["structure"] = to_string(o.result.features.space.structure());
  j["family"] = to_string(o.result.features.family);
  j["initial_elbo"] = r.initial_elbo;
  j["final_elbo"] = r.final_elbo;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["termination"] = r.termination;
  j["precompute_seconds"] = r.precompute_seconds;
  j["optimize_seconds"] = r.optimize_seconds;
  j["total_seconds"] = r.precompute_seconds + r.optimize_seconds;
  j["data_passes"] = r.data_passes;
  j["jitter"] = r.jitter;
  j["elbo_trace"] = r.elbo_trace;
  j["final_gradient"] = r.final_gradient;
  j["hyper"] = hyper_json(o.result.hyper);
  return j;
}

struct FitFlags {
  std::string data, out, report, kernel = "matern32", structure = "1d";
  std::vector<std::size_t> num_basis{50};
  std::size_t max_iters = 1000, shards = 1;
  double grad_tol = 1e-6, f_tol = 1e-12;
  std::uint64_t seed = 0;
  CsvFlags csv;
};

inline int cmd_fit(const FitFlags& f, std::ostream& out) {
  auto in = open_input(f.data);
  const csv::Table t = csv::read_table(in, f.csv.options(), true);
  FitConfig cfg;
  cfg.family = family_from_string(f.kernel);
  cfg.structure = structure_from_string(f.structure);
  cfg.num_basis = f.num_basis;
  cfg.max_iters = f.max_iters;
  cfg.grad_tol = f.grad_tol;
  cfg.f_tol = f.f_tol;
  cfg.seed = f.seed;
  cfg.num_shards = f.shards;
  const FitOutcome o = fit(DataView{t.x, t.dims, t.y}, cfg);
  save_model(o.result, f.out);
  Output rep(f.report, out);
  rep.stream() << report_json(o).dump(2) << "\n";
  return 0;
}

struct PredictFlags {
  std::string model, data, out;
  CsvFlags csv;
};

/// Streams predictions row by row: inputs, mean, variance. Extra columns
/// beyond the model's input dimension are ignored.
inline int cmd_predict(const PredictFlags& f, std::ostream& stdout_) {
  const FitResult fit = load_model(f.model);
  const std::size_t d = fit.features.space.input_dims();
  auto in = open_input(f.data);
  csv::Reader reader(in, f.csv.options());
  Output o(f.out, stdout_);
  std::ostream& os = o.stream();
  const char delim = f.csv.options().delimiter;
  for (std::size_t i = 0; i < d; ++i) os << 'x' << i << delim;
  os << "mean" << delim << "variance\n";
  std::vector<double> row;
  while (reader.next(row)) {
    if (row.size() < d) {
      throw InvalidData("line " + std::to_string(reader.line()) + ": expected " + std::to_string(d) + " input columns",
                        reader.rows() - 1);
    }
    const Prediction p = predict_point(fit, std::span<const double>(row.data(), d));
    for (std::size_t i = 0; i < d; ++i) {
      csv::write_number(os, row[i]);
      os << delim;
    }
    csv::write_number(os, p.mean);
    os << delim;
    csv::write_number(os, p.variance);
    os << '\n';
  }
  os.flush();
  if (!os) throw InvalidConfiguration("failed writing predictions");
  return 0;
}

struct EvalFlags {
  std::string model, data, out;
  CsvFlags csv;
};

inline int cmd_eval(const EvalFlags& f, std::ostream& stdout_) {
  const FitResult fit = load_model(f.model);
  const std::size_t d = fit.features.space.input_dims();
  auto in = open_input(f.data);
  const csv::Table t = csv::read_table(in, f.csv.options(), true);
  if (t.dims != d) throw DimensionMismatch("evaluation data has " + std::to_string(t.dims) + " input columns, model has " +
                                           std::to_string(d));
  const Predictions p = predict(fit, t.x);
  const Metrics m = metrics(t.y, p.mean, p.variance, fit.hyper.noise());
  nlohmann::json j{{"mse", m.mse}, {"nlpd", m.nlpd}, {"n", t.y.size()}};
  Output o(f.out, stdout_);
  o.stream() << j.dump(2) << "\n";
  return 0;
}

struct BenchFlags {
  std::vector<std::size_t> n_values{100000, 400000, 1600000};
  std::vector<std::size_t> m_values{1024, 4096, 16384};
  std::size_t m_for_n = 1000, n_for_m = 100000;
  std::uint64_t seed = 0;
  std::string out, kernel = "matern32";
};

inline int cmd_bench(const BenchFlags& f, std::ostream& stdout_) {
  const auto rows = bench::sweep(f.n_values, f.m_for_n, f.m_values, f.n_for_m, f.seed, family_from_string(f.kernel));
  Output o(f.out, stdout_);
  bench::write_csv(o.stream(), rows);
  return 0;
}

struct SynthFlags {
  std::size_t n = 10000;
  double noise = 0.2;
  std::uint64_t seed = 0;
  std::string out;
  bool header = false;
};

inline int cmd_synth(const SynthFlags& f, std::ostream& stdout_) {
  const synth::Dataset d = synth::test_function_data(f.n, f.noise, f.seed);
  Output o(f.out, stdout_);
  std::ostream& os = o.stream();
  if (f.header) os << "x,y\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    csv::write_number(os, d.x[i]);
    os << ',';
    csv::write_number(os, d.y[i]);
    os << '\n';
  }
  return 0;
}

/// Entry point; returns the process exit code (0 on success, nonzero on any error).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Banded sparse variational GP regression with B-spline inducing features"};
  app.require_subcommand(1);

  FitFlags fit_f;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to CSV data (D input columns then the target)");
  fit_cmd->add_option("--data", fit_f.data, "Training CSV")->required();
  fit_cmd->add_option("--out", fit_f.out, "Model file to write")->required();
  fit_cmd->add_option("--report", fit_f.report, "Write the JSON report here instead of stdout");
  fit_cmd->add_option("--kernel", fit_f.kernel, "matern12 or matern32")
      ->check(CLI::IsMember({"matern12", "matern32"}))
      ->capture_default_str();
  fit_cmd->add_option("--structure", fit_f.structure, "1d, separable2d or additive")
      ->check(CLI::IsMember({"1d", "separable2d", "additive"}))
      ->capture_default_str();
  fit_cmd->add_option("--num-basis", fit_f.num_basis, "Basis size, one value or one per dimension")
      ->capture_default_str();
  fit_cmd->add_option("--max-iters", fit_f.max_iters, "Optimizer iteration limit")->capture_default_str();
  fit_cmd->add_option("--grad-tol", fit_f.grad_tol, "Gradient infinity-norm tolerance (per datum)")
      ->capture_default_str();
  fit_cmd->add_option("--f-tol", fit_f.f_tol, "Relative objective change treated as a stall (0 disables)")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit_f.seed, "Seed (recorded; fitting is deterministic)")->capture_default_str();
  fit_cmd->add_option("--shards", fit_f.shards, "Threads for the statistics pass")->capture_default_str();
  add_csv_flags(fit_cmd, fit_f.csv);

  PredictFlags pred_f;
  auto* pred_cmd = app.add_subcommand("predict", "Predict mean and variance for query rows");
  pred_cmd->add_option("--model", pred_f.model, "Model file")->required();
  pred_cmd->add_option("--data", pred_f.data, "Query CSV")->required();
  pred_cmd->add_option("--out", pred_f.out, "Output CSV (default stdout)");
  add_csv_flags(pred_cmd, pred_f.csv);

  EvalFlags eval_f;
  auto* eval_cmd = app.add_subcommand("eval", "Report MSE and NLPD on labelled data");
  eval_cmd->add_option("--model", eval_f.model, "Model file")->required();
  eval_cmd->add_option("--data", eval_f.data, "Labelled CSV")->required();
  eval_cmd->add_option("--out", eval_f.out, "Output JSON (default stdout)");
  add_csv_flags(eval_cmd, eval_f.csv);

  BenchFlags bench_f;
  auto* bench_cmd = app.add_subcommand("bench", "Time precompute against N and the bound against M");
  bench_cmd->add_option("--n-values", bench_f.n_values, "Data sizes for the precompute sweep")->capture_default_str();
  bench_cmd->add_option("--m-values", bench_f.m_values, "Basis sizes for the bound sweep")->capture_default_str();
  bench_cmd->add_option("--m-for-n", bench_f.m_for_n, "Basis size during the N sweep")->capture_default_str();
  bench_cmd->add_option("--n-for-m", bench_f.n_for_m, "Data size during the M sweep")->capture_default_str();
  bench_cmd->add_option("--kernel", bench_f.kernel, "matern12 or matern32")
      ->check(CLI::IsMember({"matern12", "matern32"}))
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_f.seed, "Data seed")->capture_default_str();
  bench_cmd->add_option("--out", bench_f.out, "Output CSV (default stdout)");

  SynthFlags synth_f;
  auto* synth_cmd = app.add_subcommand("synth", "Write noisy samples of the periodic benchmark function");
  synth_cmd->add_option("--n", synth_f.n, "Number of rows")->capture_default_str();
  synth_cmd->add_option("--noise", synth_f.noise, "Noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--seed", synth_f.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_f.out, "Output CSV (default stdout)");
  synth_cmd->add_flag("--header", synth_f.header, "Write a header line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return e.get_exit_code() == 0 ? 0 : (code == 0 ? 2 : code);
  }

  try {
    if (*fit_cmd) return cmd_fit(fit_f, out);
    if (*pred_cmd) return cmd_predict(pred_f, out);
    if (*eval_cmd) return cmd_eval(eval_f, out);
    if (*bench_cmd) return cmd_bench(bench_f, out);
    if (*synth_cmd) return cmd_synth(synth_f, out);
  } catch (const InvalidData& e) {
    err << "error: invalid data: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 5;
  }
  return 1;
}

}  // namespace asvgp::cli
