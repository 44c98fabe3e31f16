// robustgp command-line front end: dataset generation, outlier diagnosis,
// model fitting/prediction, and benchmark grids with machine-readable output.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <robustgp/conjugate_gp.hpp>
#include <robustgp/data_bench.hpp>
#include <robustgp/laplace.hpp>
#include <robustgp/mcmc.hpp>
#include <robustgp/projection_stats.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace robustgp;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct ExperimentConfig {
  std::string dataset = "neal";  // neal | friedman | csv
  std::string data_path;
  std::string target_column = "y";
  bool standardize = false;
  int n = 100;
  int replicates = 10;
  std::string noise = "student-t:10";
  std::string noise_grid;
  std::string models = "gp,huber-la";
  std::string model = "huber-la";
  double b = 1.5;
  double epsilon = 0.45;
  int restarts = 5;
  int max_iters = 500;
  int total = 10000;
  int burn_in = -1;  // default: min(2000, total/5)
  int thin = 4;
  int chains = 2;
  int kfold = 0;
  int seeds = 5;
  std::uint64_t seed = 1;
  std::string out_dir = ".";

  int effective_burn_in() const {
    return burn_in >= 0 ? burn_in : std::min(2000, total / 5);
  }
  json echo() const {
    return json{{"dataset", dataset},       {"data", data_path},
                {"target", target_column},  {"standardize", standardize},
                {"n", n},                   {"replicates", replicates},
                {"noise", noise},           {"noise_grid", noise_grid},
                {"models", models},         {"model", model},
                {"b", b},                   {"eps", epsilon},
                {"restarts", restarts},     {"max_iters", max_iters},
                {"total", total},           {"burn_in", effective_burn_in()},
                {"thin", thin},             {"chains", chains},
                {"kfold", kfold},           {"seeds", seeds},
                {"seed", seed},             {"out", out_dir}};
  }
};

struct RunManifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::map<std::string, double> wall_clock;
  json metrics = json::array();
  std::vector<std::string> files;

  void write(const fs::path& dir) const {
    for (const auto& f : files) {
      const fs::path p = dir / f;
      if (!fs::exists(p) || fs::file_size(p) == 0)
        throw IoError("manifest: emitted file missing or empty: " + p.string());
    }
    json doc{{"schema_version", 1},
             {"command", command},
             {"library_version", kVersion},
             {"seed", seed},
             {"config", config},
             {"wall_clock_seconds", wall_clock},
             {"metrics", metrics},
             {"files", files},
             {"results_table_columns",
              {"dataset", "noise", "model", "seed", "case", "rmse", "mae", "nlp", "status"}}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("manifest: cannot write " + (dir / "manifest.json").string());
    out << doc.dump(2) << "\n";
  }
};

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

fs::path ensure_out_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("output directory is not writable: " + dir.string());
  return dir;
}

void write_dataset_csv(const fs::path& path, const Dataset& d, const VectorXi* mask) {
  std::vector<std::string> cols;
  for (Index k = 0; k < d.dim(); ++k) cols.push_back("x" + std::to_string(k + 1));
  cols.push_back("y");
  if (mask) cols.push_back("is_outlier");
  MatrixXd values(d.n(), static_cast<Index>(cols.size()));
  values.leftCols(d.dim()) = d.X;
  values.col(d.dim()) = d.y;
  if (mask) values.col(d.dim() + 1) = mask->cast<double>();
  write_csv(path.string(), cols, values);
}

// ---- model runners --------------------------------------------------------

struct FittedOutputs {
  PredictiveDistribution pred;
  json hyper;
  std::optional<ChainOutput> chain;
};

OptimizerSettings optimizer_settings(const ExperimentConfig& cfg, std::uint64_t seed) {
  OptimizerSettings opt;
  opt.restarts = cfg.restarts;
  opt.max_iters = cfg.max_iters;
  opt.seed = seed;
  return opt;
}

HuberConfig huber_config(const ExperimentConfig& cfg) {
  HuberConfig h;
  h.b = cfg.b;
  h.epsilon = cfg.epsilon;
  if (!(h.b > 0.0)) throw ConfigError("--b must be positive");
  if (!(h.epsilon >= 0.0 && h.epsilon < 1.0)) throw ConfigError("--eps must lie in [0, 1)");
  return h;
}

FittedOutputs run_model(const std::string& model, const ExperimentConfig& cfg,
                        const Dataset& train, const MatrixXd& test_X,
                        std::uint64_t seed) {
  FittedOutputs out;
  if (model == "gp") {
    const ConjugateModel m = fit_ml2(train, optimizer_settings(cfg, seed));
    out.pred = predict(m, test_X, true);
    out.hyper = {{"model", "gp"},
                 {"noise_var", m.noise_var},
                 {"amplitude", m.params.amplitude},
                 {"length_scales", std::vector<double>(m.params.length_scales.begin(),
                                                       m.params.length_scales.end())},
                 {"center", m.center},
                 {"log_evidence", m.log_evidence},
                 {"converged", m.converged}};
    if (!m.converged) out.hyper["note"] = "iteration cap reached; best iterate returned";
  } else if (model == "huber-la") {
    const RobustWeighting rw = default_weighting(train.X);
    const HuberGpModel m =
        optimize_hyperparams(train, huber_config(cfg), rw, optimizer_settings(cfg, seed));
    out.pred = predict_laplace(m, test_X, true);
    out.hyper = {{"model", "huber-la"},
                 {"sigma", m.cfg.sigma},
                 {"scale_s", m.posterior.scale},
                 {"amplitude", m.params.amplitude},
                 {"length_scales", std::vector<double>(m.params.length_scales.begin(),
                                                       m.params.length_scales.end())},
                 {"b", m.cfg.b},
                 {"eps", m.cfg.epsilon},
                 {"center", m.center},
                 {"log_evidence", m.posterior.log_evidence},
                 {"converged", m.opt_converged && m.posterior.converged}};
    if (!m.opt_converged) out.hyper["note"] = "iteration cap reached; best iterate returned";
  } else if (model == "huber-mcmc") {
    const RobustWeighting rw = default_weighting(train.X);
    ChainSettings settings;
    settings.total = cfg.total;
    settings.burn_in = cfg.effective_burn_in();
    settings.thin = cfg.thin;
    settings.chains = cfg.chains;
    settings.seed = seed;
    const ChainOutput chain = run_chain(train, huber_config(cfg), rw, settings);
    out.pred = predictive_average(chain, test_X, true);
    json ess = json::object(), rhat = json::object(), accept = json::object();
    for (std::size_t k = 0; k < chain.coord_names.size(); ++k) {
      ess[chain.coord_names[k]] = chain.ess(static_cast<Index>(k));
      rhat[chain.coord_names[k]] = chain.split_rhat(static_cast<Index>(k));
    }
    for (std::size_t k = 0; k < chain.acceptance_names.size(); ++k) {
      const double a = chain.acceptance(static_cast<Index>(k));
      if (!std::isnan(a)) accept[chain.acceptance_names[k]] = a;
    }
    out.hyper = {{"model", "huber-mcmc"},
                 {"b", cfg.b},
                 {"eps", cfg.epsilon},
                 {"center", chain.center},
                 {"chains", chain.chains},
                 {"retained_per_chain", chain.per_chain},
                 {"posterior_mean_sigma_g2", chain.samples.col(0).mean()},
                 {"posterior_mean_tau", chain.samples.col(2).mean()},
                 {"ess", ess},
                 {"split_rhat", rhat},
                 {"acceptance", accept}};
    out.chain = chain;
  } else {
    throw ConfigError("--model: unknown model '" + model + "'");
  }
  return out;
}

// ---- dataset assembly ------------------------------------------------------

struct NamedData {
  Dataset train;
  Dataset test;  // with targets when available
  VectorXi mask;
  std::string label;
};

NamedData make_synthetic(const ExperimentConfig& cfg, const NoiseSpec& noise,
                         std::uint64_t seed, int replicate) {
  NamedData nd;
  if (cfg.dataset == "neal") {
    GeneratedData gd = gen_neal(cfg.n, noise, neal_default_plan(), seed);
    nd.train = std::move(gd.train);
    nd.test = std::move(gd.test);
    nd.mask = std::move(gd.outlier_mask);
    nd.label = "neal";
  } else if (cfg.dataset == "friedman") {
    auto reps = gen_friedman(cfg.replicates, cfg.n, noise, friedman_default_plan(), seed);
    if (replicate < 0 || replicate >= static_cast<int>(reps.size()))
      throw ConfigError("--replicate out of range");
    nd.train = std::move(reps[replicate].train);
    nd.test = std::move(reps[replicate].test);
    nd.mask = std::move(reps[replicate].outlier_mask);
    nd.label = "friedman";
  } else {
    throw ConfigError("--dataset: expected neal or friedman, got '" + cfg.dataset + "'");
  }
  return nd;
}

// ---- subcommands -----------------------------------------------------------

int cmd_generate(const ExperimentConfig& cfg) {
  const double t0 = now_seconds();
  const fs::path dir = ensure_out_dir(cfg);
  const NoiseSpec noise = NoiseSpec::parse(cfg.noise);

  RunManifest manifest;
  manifest.command = "generate";
  manifest.config = cfg.echo();
  manifest.seed = cfg.seed;

  if (cfg.dataset == "neal") {
    const GeneratedData gd = gen_neal(cfg.n, noise, neal_default_plan(), cfg.seed);
    write_dataset_csv(dir / "train.csv", gd.train, &gd.outlier_mask);
    write_dataset_csv(dir / "test.csv", gd.test, nullptr);
    manifest.files = {"train.csv", "test.csv"};
  } else if (cfg.dataset == "friedman") {
    const auto reps =
        gen_friedman(cfg.replicates, cfg.n, noise, friedman_default_plan(), cfg.seed);
    for (std::size_t r = 0; r < reps.size(); ++r) {
      char name[32];
      std::snprintf(name, sizeof(name), "train_r%02zu.csv", r);
      write_dataset_csv(dir / name, reps[r].train, &reps[r].outlier_mask);
      manifest.files.push_back(name);
    }
    write_dataset_csv(dir / "test.csv", reps[0].test, nullptr);
    manifest.files.push_back("test.csv");
  } else {
    throw ConfigError("--dataset: generate supports neal or friedman");
  }

  manifest.wall_clock["total"] = now_seconds() - t0;
  manifest.write(dir);
  std::cout << "generated " << cfg.dataset << " into " << dir.string() << "\n";
  return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg) {
  const double t0 = now_seconds();
  const fs::path dir = ensure_out_dir(cfg);

  Dataset data;
  if (!cfg.data_path.empty()) {
    data = load_csv(cfg.data_path, cfg.target_column, cfg.standardize).data;
  } else {
    data = make_synthetic(cfg, NoiseSpec::parse(cfg.noise), cfg.seed, 0).train;
  }

  const RobustWeighting rw = default_weighting(data.X);
  MatrixXd values(data.n(), 6);
  for (Index i = 0; i < data.n(); ++i) {
    values(i, 0) = static_cast<double>(i);
    values(i, 1) = rw.ps(i);
    values(i, 2) = rw.weights(i);
    values(i, 3) = static_cast<double>(rw.dof(i));
    values(i, 4) = rw.thresholds(i);
    values(i, 5) = rw.squared_regime ? 1.0 : 0.0;
  }
  write_csv((dir / "diagnostics.csv").string(),
            {"index", "ps", "weight", "nu", "threshold", "squared_regime"}, values);

  RunManifest manifest;
  manifest.command = "diagnose";
  manifest.config = cfg.echo();
  manifest.seed = cfg.seed;
  manifest.files = {"diagnostics.csv"};
  manifest.wall_clock["total"] = now_seconds() - t0;
  manifest.write(dir);
  std::cout << "diagnosed " << data.n() << " points; "
            << (rw.weights.array() < 1.0).count() << " downweighted\n";
  return 0;
}

int cmd_fit(const ExperimentConfig& cfg) {
  const double t0 = now_seconds();
  const fs::path dir = ensure_out_dir(cfg);

  NamedData nd;
  if (!cfg.data_path.empty()) {
    const LoadedCsv loaded = load_csv(cfg.data_path, cfg.target_column, cfg.standardize);
    nd.train = loaded.data;
    nd.test = loaded.data;  // in-sample predictions when no test file is given
    nd.label = "csv";
  } else {
    nd = make_synthetic(cfg, NoiseSpec::parse(cfg.noise), cfg.seed, 0);
  }
  const double t_data = now_seconds();

  const FittedOutputs fit = run_model(cfg.model, cfg, nd.train, nd.test.X, cfg.seed);
  const double t_fit = now_seconds();

  // predictions table: x*..., mean, var, lo2sd, hi2sd
  {
    std::vector<std::string> cols;
    for (Index k = 0; k < nd.test.dim(); ++k) cols.push_back("x" + std::to_string(k + 1));
    cols.insert(cols.end(), {"mean", "var", "lo2sd", "hi2sd"});
    MatrixXd values(nd.test.n(), nd.test.dim() + 4);
    values.leftCols(nd.test.dim()) = nd.test.X;
    values.col(nd.test.dim()) = fit.pred.mean;
    values.col(nd.test.dim() + 1) = fit.pred.var;
    const VectorXd sd2 = 2.0 * fit.pred.var.cwiseSqrt();
    values.col(nd.test.dim() + 2) = fit.pred.mean - sd2;
    values.col(nd.test.dim() + 3) = fit.pred.mean + sd2;
    write_csv((dir / "predictions.csv").string(), cols, values);
  }

  RunManifest manifest;
  manifest.command = "fit";
  manifest.config = cfg.echo();
  manifest.seed = cfg.seed;
  manifest.files = {"predictions.csv", "hyperparams.json", "metrics.csv"};

  {
    std::ofstream out(dir / "hyperparams.json");
    out << fit.hyper.dump(2) << "\n";
  }

  const MetricsReport rep = metrics(fit.pred, nd.test.y);
  {
    MatrixXd mrow(1, 4);
    mrow << rep.rmse, rep.mae, rep.nlp, static_cast<double>(rep.n);
    write_csv((dir / "metrics.csv").string(), {"rmse", "mae", "nlp", "n"}, mrow);
    manifest.metrics.push_back(
        {{"model", cfg.model}, {"rmse", rep.rmse}, {"mae", rep.mae}, {"nlp", rep.nlp}});
  }

  if (fit.chain) {
    const ChainOutput& chain = *fit.chain;
    std::vector<std::string> cols = {"chain", "sample"};
    cols.insert(cols.end(), chain.coord_names.begin(), chain.coord_names.end());
    MatrixXd values(chain.samples.rows(), chain.samples.cols() + 2);
    for (Index t = 0; t < chain.samples.rows(); ++t) {
      values(t, 0) = static_cast<double>(t / chain.per_chain);
      values(t, 1) = static_cast<double>(t % chain.per_chain);
    }
    values.rightCols(chain.samples.cols()) = chain.samples;
    write_csv((dir / "chain.csv").string(), cols, values);
    manifest.files.push_back("chain.csv");
  }

  manifest.wall_clock["data"] = t_data - t0;
  manifest.wall_clock["fit_predict"] = t_fit - t_data;
  manifest.wall_clock["total"] = now_seconds() - t0;
  manifest.write(dir);

  const bool converged = !fit.hyper.contains("converged") ||
                         fit.hyper["converged"].get<bool>();
  std::cout << cfg.model << " rmse=" << format_double(rep.rmse)
            << " mae=" << format_double(rep.mae) << " nlp=" << format_double(rep.nlp)
            << (converged ? "" : " [not converged]") << "\n";
  return converged ? 0 : kExitNumerical;
}

struct BenchCell {
  std::string dataset, noise, model, case_label;
  std::uint64_t seed = 0;
  int replicate = -1;
  int fold = -1;
};

int cmd_bench(const ExperimentConfig& cfg) {
  const double t0 = now_seconds();
  const fs::path dir = ensure_out_dir(cfg);
  const std::vector<std::string> models = split_list(cfg.models, ',');
  if (models.empty()) throw ConfigError("--models: need at least one model");

  std::vector<BenchCell> cells;
  std::optional<LoadedCsv> csv_data;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> folds;

  if (cfg.dataset == "csv" || !cfg.data_path.empty()) {
    if (cfg.data_path.empty()) throw ConfigError("--data: csv benchmarks need a file");
    if (cfg.kfold < 2) throw ConfigError("--kfold: csv benchmarks need k >= 2");
    csv_data = load_csv(cfg.data_path, cfg.target_column, cfg.standardize);
    folds = kfold_split(static_cast<int>(csv_data->data.n()), cfg.kfold, cfg.seed);
    for (const auto& model : models)
      for (int f = 0; f < cfg.kfold; ++f) {
        char label[16];
        std::snprintf(label, sizeof(label), "fold%02d", f);
        cells.push_back({"csv", "-", model, label, cfg.seed, -1, f});
      }
  } else if (cfg.dataset == "friedman") {
    for (const auto& model : models)
      for (int r = 0; r < cfg.replicates; ++r) {
        char label[16];
        std::snprintf(label, sizeof(label), "r%02d", r);
        cells.push_back({"friedman", cfg.noise, model, label, cfg.seed, r, -1});
      }
  } else if (cfg.dataset == "neal") {
    const std::string grid = cfg.noise_grid.empty() ? cfg.noise : cfg.noise_grid;
    for (const auto& noise : split_list(grid, ';'))
      for (const auto& model : models)
        for (int s = 0; s < cfg.seeds; ++s)
          cells.push_back({"neal", noise, model, "-", cfg.seed + s, -1, -1});
  } else {
    throw ConfigError("--dataset: bench supports neal, friedman, or csv");
  }

  struct Row {
    BenchCell cell;
    MetricsReport rep{};
    std::string status = "ok";
  };
  std::vector<Row> rows(cells.size());

  auto run_cell = [&](std::size_t i) {
    Row row;
    row.cell = cells[i];
    try {
      ExperimentConfig cell_cfg = cfg;
      cell_cfg.noise = row.cell.noise == "-" ? cfg.noise : row.cell.noise;
      NamedData nd;
      if (row.cell.fold >= 0) {
        const auto& [train_idx, test_idx] = folds[row.cell.fold];
        const Dataset& all = csv_data->data;
        nd.train.X.resize(static_cast<Index>(train_idx.size()), all.dim());
        nd.train.y.resize(static_cast<Index>(train_idx.size()));
        for (std::size_t r = 0; r < train_idx.size(); ++r) {
          nd.train.X.row(static_cast<Index>(r)) = all.X.row(train_idx[r]);
          nd.train.y(static_cast<Index>(r)) = all.y(train_idx[r]);
        }
        nd.test.X.resize(static_cast<Index>(test_idx.size()), all.dim());
        nd.test.y.resize(static_cast<Index>(test_idx.size()));
        for (std::size_t r = 0; r < test_idx.size(); ++r) {
          nd.test.X.row(static_cast<Index>(r)) = all.X.row(test_idx[r]);
          nd.test.y(static_cast<Index>(r)) = all.y(test_idx[r]);
        }
      } else {
        cell_cfg.dataset = row.cell.dataset;
        nd = make_synthetic(cell_cfg, NoiseSpec::parse(cell_cfg.noise), row.cell.seed,
                            std::max(row.cell.replicate, 0));
      }
      const std::uint64_t fit_seed =
          stream_seed(row.cell.seed, 7000 + static_cast<std::uint64_t>(i));
      const FittedOutputs fit =
          run_model(row.cell.model, cell_cfg, nd.train, nd.test.X, fit_seed);
      row.rep = metrics(fit.pred, nd.test.y);
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      row.status = "error: " + msg;
      row.rep = {std::nan(""), std::nan(""), std::nan(""), 0};
    }
    rows[i] = std::move(row);
  };

  const int pool = std::min<int>(effective_threads(0), static_cast<int>(cells.size()));
  if (pool <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futs;
    for (int t = 0; t < pool; ++t)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
          run_cell(i);
      }));
    for (auto& f : futs) f.get();
  }

  // long-format results table
  {
    std::ofstream out(dir / "results.csv");
    if (!out) throw IoError("cannot write results.csv");
    out << "dataset,noise,model,seed,case,rmse,mae,nlp,status\n";
    for (const auto& row : rows) {
      out << row.cell.dataset << "," << row.cell.noise << "," << row.cell.model << ","
          << row.cell.seed << "," << row.cell.case_label << ","
          << format_double(row.rep.rmse) << "," << format_double(row.rep.mae) << ","
          << format_double(row.rep.nlp) << "," << row.status << "\n";
    }
  }

  // per-cell median summary
  {
    std::map<std::string, std::vector<const Row*>> groups;
    std::vector<std::string> order;
    for (const auto& row : rows) {
      const std::string key =
          row.cell.dataset + "," + row.cell.noise + "," + row.cell.model;
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(&row);
    }
    auto median_of = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return n == 0 ? std::nan("")
                    : (n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
    };
    std::ofstream out(dir / "summary.csv");
    if (!out) throw IoError("cannot write summary.csv");
    out << "dataset,noise,model,n_runs,rmse_median,mae_median,nlp_median\n";
    for (const auto& key : order) {
      std::vector<double> rmse, mae, nlp;
      for (const Row* r : groups[key]) {
        if (r->status != "ok") continue;
        rmse.push_back(r->rep.rmse);
        mae.push_back(r->rep.mae);
        nlp.push_back(r->rep.nlp);
      }
      out << key << "," << rmse.size() << "," << format_double(median_of(rmse)) << ","
          << format_double(median_of(mae)) << "," << format_double(median_of(nlp)) << "\n";
    }
  }

  RunManifest manifest;
  manifest.command = "bench";
  manifest.config = cfg.echo();
  manifest.seed = cfg.seed;
  manifest.files = {"results.csv", "summary.csv"};
  for (const auto& row : rows)
    if (row.status == "ok")
      manifest.metrics.push_back({{"dataset", row.cell.dataset},
                                  {"noise", row.cell.noise},
                                  {"model", row.cell.model},
                                  {"seed", row.cell.seed},
                                  {"case", row.cell.case_label},
                                  {"rmse", row.rep.rmse},
                                  {"mae", row.rep.mae},
                                  {"nlp", row.rep.nlp}});
  manifest.wall_clock["total"] = now_seconds() - t0;
  manifest.write(dir);

  std::size_t failures = 0;
  for (const auto& row : rows)
    if (row.status != "ok") ++failures;
  std::cout << "bench: " << rows.size() << " runs, " << failures << " failed; results in "
            << (dir / "results.csv").string() << "\n";
  return 0;
}

void add_common(CLI::App* sub, ExperimentConfig& cfg) {
  sub->add_option("--dataset", cfg.dataset, "neal | friedman | csv");
  sub->add_option("--data", cfg.data_path, "CSV input path");
  sub->add_option("--target", cfg.target_column, "target column name (CSV input)");
  sub->add_flag("--standardize", cfg.standardize, "median/MAD-standardize CSV inputs");
  sub->add_option("--n", cfg.n, "training points for synthetic datasets");
  sub->add_option("--replicates", cfg.replicates, "Friedman replicate count");
  sub->add_option("--noise", cfg.noise,
                  "noise spec: normal:m,sd | student-t:dof | laplace:loc,scale | "
                  "cauchy[:loc,scale] | none");
  sub->add_option("--seed", cfg.seed, "master seed");
  sub->add_option("--out", cfg.out_dir, "output directory");
  sub->configurable();  // allow a [subcommand] section in the config file
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust Gaussian process regression (Huber likelihood) toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file with [subcommand] sections; flags win");

  ExperimentConfig cfg;

  CLI::App* gen = app.add_subcommand("generate", "write benchmark datasets");
  add_common(gen, cfg);

  CLI::App* diag = app.add_subcommand("diagnose", "projection-statistics outlier report");
  add_common(diag, cfg);

  CLI::App* fit = app.add_subcommand("fit", "fit a model and predict");
  add_common(fit, cfg);
  fit->add_option("--model", cfg.model, "gp | huber-la | huber-mcmc");
  fit->add_option("--b", cfg.b, "Huber threshold");
  fit->add_option("--eps", cfg.epsilon, "contamination fraction");
  fit->add_option("--restarts", cfg.restarts, "optimizer restarts");
  fit->add_option("--max-iters", cfg.max_iters, "optimizer iteration cap");
  fit->add_option("--total", cfg.total, "MCMC sweeps");
  fit->add_option("--burn-in", cfg.burn_in, "MCMC burn-in (default min(2000, total/5))");
  fit->add_option("--thin", cfg.thin, "MCMC thinning");
  fit->add_option("--chains", cfg.chains, "MCMC chains");

  CLI::App* bench = app.add_subcommand("bench", "run a dataset x noise x model grid");
  add_common(bench, cfg);
  bench->add_option("--models", cfg.models, "comma-separated model list");
  bench->add_option("--noise-grid", cfg.noise_grid, "semicolon-separated noise specs");
  bench->add_option("--seeds", cfg.seeds, "seeds per cell (neal)");
  bench->add_option("--kfold", cfg.kfold, "fold count for CSV benchmarks");
  bench->add_option("--b", cfg.b, "Huber threshold");
  bench->add_option("--eps", cfg.epsilon, "contamination fraction");
  bench->add_option("--restarts", cfg.restarts, "optimizer restarts");
  bench->add_option("--max-iters", cfg.max_iters, "optimizer iteration cap");
  bench->add_option("--total", cfg.total, "MCMC sweeps");
  bench->add_option("--burn-in", cfg.burn_in, "MCMC burn-in");
  bench->add_option("--thin", cfg.thin, "MCMC thinning");
  bench->add_option("--chains", cfg.chains, "MCMC chains");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(cfg);
    if (diag->parsed()) return cmd_diagnose(cfg);
    if (fit->parsed()) return cmd_fit(cfg);
    if (bench->parsed()) return cmd_bench(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
