// Command-line front end: estimate a conditional covariance matrix from a
// CSV file, or run the synthetic-model studies (rate, coverage, hoeffding,
// simulate). Outputs are machine-first (JSON / CSV), written atomically.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "condcov/errors.hpp"
#include "condcov/estimator.hpp"
#include "condcov/io.hpp"
#include "condcov/simulate.hpp"

namespace {

using condcov::ConfigError;

struct CommonOptions {
  std::string config_path;
  std::optional<double> confidence;
  std::optional<int> basis_m;
  std::optional<int> quad_order;
  std::optional<double> clip_lo;
  std::optional<double> clip_hi;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Flat key=value file; '#' starts a comment. Flags win over file keys.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config file line " + std::to_string(line_no) +
                        ": expected key=value");
    auto trim = [](std::string s) {
      const auto bb = s.find_first_not_of(" \t");
      const auto ee = s.find_last_not_of(" \t");
      return bb == std::string::npos ? std::string() : s.substr(bb, ee - bb + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text);

template <>
double parse_value<double>(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text +
                      "' as a real number");
  }
}

template <>
long parse_value<long>(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text +
                      "' as an integer");
  }
}

condcov::EstimatorConfig build_config(const CommonOptions& opts,
                                      std::uint64_t* seed_out) {
  std::map<std::string, std::string> file;
  if (!opts.config_path.empty()) file = read_config_file(opts.config_path);

  condcov::EstimatorConfig cfg;
  auto file_double = [&](const char* key) -> std::optional<double> {
    auto it = file.find(key);
    if (it == file.end()) return std::nullopt;
    return parse_value<double>(key, it->second);
  };
  auto file_long = [&](const char* key) -> std::optional<long> {
    auto it = file.find(key);
    if (it == file.end()) return std::nullopt;
    return parse_value<long>(key, it->second);
  };

  const double confidence =
      opts.confidence.value_or(file_double("confidence").value_or(0.95));
  if (!(confidence > 0.0 && confidence < 1.0))
    throw ConfigError("confidence must lie strictly between 0 and 1");
  cfg.delta = 1.0 - confidence;

  const long order =
      opts.quad_order.value_or(file_long("quad-order").value_or(24));
  cfg.quad_order = static_cast<int>(order);

  const std::optional<long> basis_m =
      opts.basis_m ? std::optional<long>(*opts.basis_m) : file_long("basis-m");
  if (basis_m) cfg.size_rule = condcov::SizeRule::fixed(static_cast<int>(*basis_m));

  cfg.clip.lo = opts.clip_lo.value_or(file_double("clip-lo").value_or(1e-3));
  cfg.clip.hi = opts.clip_hi.value_or(file_double("clip-hi").value_or(50.0));

  std::uint64_t seed;
  if (opts.seed) {
    seed = *opts.seed;
  } else if (auto s = file_long("seed")) {
    seed = static_cast<std::uint64_t>(*s);
  } else {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  cfg.seed = seed;
  if (seed_out) *seed_out = seed;

  if (opts.threads) cfg.threads = *opts.threads;
  else if (auto t = file_long("threads")) cfg.threads = static_cast<int>(*t);

  cfg.validate();
  return cfg;
}

std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<long> split_longs(const std::string& csv) {
  std::vector<long> out;
  for (const auto& tok : split_names(csv))
    out.push_back(parse_value<long>("--n", tok));
  return out;
}

condcov::ModelSpec make_model(const std::string& name, int p,
                              const std::string& beta_csv, double sigma) {
  condcov::ModelSpec model = condcov::ModelSpec::by_name(name, p);
  if (model.kind == condcov::ModelSpec::Kind::independent_uniform)
    return model;
  Eigen::VectorXd beta = model.beta;
  if (!beta_csv.empty()) {
    const auto toks = split_names(beta_csv);
    if (static_cast<int>(toks.size()) != p)
      throw ConfigError("--beta needs exactly p entries");
    for (int k = 0; k < p; ++k)
      beta(k) = parse_value<double>("--beta", toks[k]);
  }
  if (model.kind == condcov::ModelSpec::Kind::truncated_linear)
    return condcov::ModelSpec::truncated_linear(p, beta, sigma);
  model.beta = beta;
  model.sigma = sigma;
  model.y_lo = -(1.0 + 2.2 * sigma);
  model.y_hi = 1.0 + 2.2 * sigma;
  model.validate();
  return model;
}

int run_estimate(const std::string& input, const std::string& x_csv,
                 const std::string& y_name, const std::string& out_path,
                 const CommonOptions& opts) {
  std::uint64_t seed = 0;
  const condcov::EstimatorConfig cfg = build_config(opts, &seed);
  const condcov::Dataset data =
      condcov::ingest_csv(input, split_names(x_csv), y_name);
  const condcov::MatrixEstimate est =
      condcov::estimate_matrix(data.x, data.y, cfg);
  condcov::write_file_atomic(out_path, condcov::to_json(est, cfg));
  std::cout << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional covariance matrix estimation"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string input, x_csv, y_name, out_path, summary_path;
  std::string model_name = "independent", n_csv, beta_csv;
  long n_single = 1000;
  int reps = 200, p = 2;
  double sigma = 0.5;

  auto add_common = [&opts](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path,
                    "flat key=value configuration file");
    cmd->add_option("--confidence", opts.confidence,
                    "CI confidence level in (0,1), default 0.95");
    cmd->add_option("--basis-m", opts.basis_m, "fixed basis size");
    cmd->add_option("--quad-order", opts.quad_order,
                    "quadrature order per axis, default 24");
    cmd->add_option("--clip-lo", opts.clip_lo, "pilot clip floor");
    cmd->add_option("--clip-hi", opts.clip_hi, "pilot clip ceiling");
    cmd->add_option("--seed", opts.seed, "master seed (drawn if absent)");
    cmd->add_option("--threads", opts.threads, "worker threads (0 = auto)");
  };

  CLI::App* est = app.add_subcommand("estimate", "estimate from a CSV file");
  est->add_option("--input", input, "input CSV path")->required();
  est->add_option("--x", x_csv, "comma-separated predictor columns")
      ->required();
  est->add_option("--y", y_name, "response column")->required();
  est->add_option("--out", out_path, "output JSON path")->required();
  add_common(est);

  CLI::App* sim = app.add_subcommand("simulate", "draw from a model");
  sim->add_option("--model", model_name, "independent | linear | nonlinear");
  sim->add_option("--n", n_single, "sample size");
  sim->add_option("--p", p, "number of predictors");
  sim->add_option("--beta", beta_csv, "comma-separated link direction");
  sim->add_option("--sigma", sigma, "noise scale");
  sim->add_option("--out", out_path, "output CSV path")->required();
  add_common(sim);

  CLI::App* rate = app.add_subcommand("rate", "MSE rate study over an n grid");
  rate->add_option("--model", model_name);
  rate->add_option("--n", n_csv, "comma-separated n grid")->required();
  rate->add_option("--reps", reps, "replications per grid point");
  rate->add_option("--p", p);
  rate->add_option("--beta", beta_csv);
  rate->add_option("--sigma", sigma);
  rate->add_option("--out", out_path, "records CSV path");
  rate->add_option("--summary", summary_path, "summary JSON path");
  add_common(rate);

  CLI::App* cov = app.add_subcommand("coverage", "CI coverage study");
  cov->add_option("--model", model_name);
  cov->add_option("--n", n_single, "sample size");
  cov->add_option("--reps", reps, "replications");
  cov->add_option("--p", p);
  cov->add_option("--beta", beta_csv);
  cov->add_option("--sigma", sigma);
  cov->add_option("--out", out_path, "records CSV path");
  cov->add_option("--summary", summary_path, "summary JSON path");
  add_common(cov);

  CLI::App* hoef = app.add_subcommand(
      "hoeffding", "orthogonality diagnostic of the U-statistic parts");
  hoef->add_option("--model", model_name);
  hoef->add_option("--n", n_single, "sample size");
  hoef->add_option("--reps", reps, "replications");
  hoef->add_option("--p", p);
  hoef->add_option("--out", out_path, "summary JSON path");
  add_common(hoef);

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed())
      return run_estimate(input, x_csv, y_name, out_path, opts);

    std::uint64_t seed = 0;
    const condcov::EstimatorConfig cfg = build_config(opts, &seed);
    const condcov::ModelSpec model = make_model(model_name, p, beta_csv, sigma);

    if (sim->parsed()) {
      const condcov::Sample sample = condcov::generate(model, n_single, seed);
      std::string csv;
      for (int c = 0; c < model.p; ++c)
        csv += "x" + std::to_string(c + 1) + ",";
      csv += "y\n";
      nlohmann::json num;
      for (long r = 0; r < n_single; ++r) {
        for (int c = 0; c < model.p; ++c) {
          num = sample.x(r, c);
          csv += num.dump() + ",";
        }
        num = sample.y(r);
        csv += num.dump() + "\n";
      }
      condcov::write_file_atomic(out_path, csv);
      std::cout << out_path << "\n";
      return 0;
    }

    if (rate->parsed()) {
      const std::vector<long> grid = split_longs(n_csv);
      const condcov::StudyResult result =
          condcov::rate_study(model, 1, std::min(2, model.p), grid, reps, cfg,
                              seed);
      if (out_path.empty()) out_path = "rate_study.csv";
      if (summary_path.empty()) summary_path = "rate_study.json";
      condcov::write_file_atomic(out_path, condcov::study_csv(result));
      condcov::write_file_atomic(summary_path,
                                 condcov::study_summary_json(result, "rate"));
      std::cout << out_path << "\n" << summary_path << "\n";
      return 0;
    }

    if (cov->parsed()) {
      const condcov::StudyResult result = condcov::coverage_study(
          model, 1, std::min(2, model.p), n_single, reps, cfg.delta, cfg,
          seed);
      if (out_path.empty()) out_path = "coverage_study.csv";
      if (summary_path.empty()) summary_path = "coverage_study.json";
      condcov::write_file_atomic(out_path, condcov::study_csv(result));
      condcov::write_file_atomic(
          summary_path, condcov::study_summary_json(result, "coverage"));
      std::cout << out_path << "\n" << summary_path << "\n";
      return 0;
    }

    if (hoef->parsed()) {
      const condcov::HoeffdingResult result =
          condcov::hoeffding_diagnostic(model, n_single, reps, cfg, seed);
      nlohmann::json j{{"command", "hoeffding"},
                       {"cov_estimate", result.cov_estimate},
                       {"cov_se", result.cov_se},
                       {"u_mean", result.u_mean},
                       {"u_se", result.u_se},
                       {"linear_mean", result.linear_mean},
                       {"linear_se", result.linear_se},
                       {"reps", result.reps},
                       {"seed", seed}};
      if (out_path.empty()) out_path = "hoeffding_study.json";
      condcov::write_file_atomic(out_path, j.dump(2) + "\n");
      std::cout << out_path << "\n";
      return 0;
    }
  } catch (const condcov::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const condcov::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const condcov::Error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
