#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robustgp/errors.hpp"
#include "robustgp/rng.hpp"
#include "robustgp/types.hpp"

namespace robustgp {

enum class NoiseFamily { none, normal, student_t, laplace, cauchy };

/// Additive-error specification. Parameters by family:
/// normal: mean, sd; student_t: dof; laplace: location, scale;
/// cauchy: location, scale.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::normal;
  double p1 = 0.0;
  double p2 = 1.0;

  void validate() const;
  /// Parses "normal:0.01,0.08", "student-t:10", "laplace:0,0.1",
  /// "cauchy[:loc,scale]", "none".
  static NoiseSpec parse(const std::string& text);
  std::string str() const;
};

/// One replaced observation: a leverage point gets new input coordinates
/// (whole row, or a single coordinate when coord >= 0) and optionally a new
/// response. Bad leverage points count as ground-truth outliers.
struct LeveragePoint {
  Index index = 0;
  VectorXd x;
  Index coord = -1;
  std::optional<double> y;
  bool bad = true;
};

struct ContaminationPlan {
  std::vector<Index> vertical_indices;
  double vertical_magnitude = 10.0;
  std::vector<LeveragePoint> leverage;
  int random_count = 0;  // Friedman-style random response outliers
  double random_mean = 10.0;
  double random_sd = 3.0;

  void validate(Index n, Index d) const;
};

ContaminationPlan neal_default_plan();
ContaminationPlan friedman_default_plan();

struct GeneratedData {
  Dataset train;
  VectorXi outlier_mask;  // 1 for planted vertical/bad-leverage/random outliers
  Dataset test;           // noise-free truth
};

/// y = 0.3 + 0.4 x + 0.5 sin(2.7 x) + 1.1 / (1 + x^2)
double neal_truth(double x);

/// Training inputs are a shuffled stratified draw (60% on [-1.4, 1.4],
/// 40% on [-2.7, 2.3]); the test grid is 541 points spanning [-2.7, 5].
GeneratedData gen_neal(int n, const NoiseSpec& noise, const ContaminationPlan& plan,
                       std::uint64_t seed);

/// f(x) = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5; inputs 6..10 inert.
double friedman_truth(const VectorXd& x);

/// Replicated Friedman datasets on [0,1]^10 sharing one 10000-point
/// noise-free test set; replicate r uses the stream-split seed.
std::vector<GeneratedData> gen_friedman(int replicates, int n, const NoiseSpec& noise,
                                        const ContaminationPlan& plan, std::uint64_t seed);

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  double nlp = 0.0;
  Index n = 0;
};

/// RMSE, MAE, and mean negative log Gaussian predictive density (the
/// predictive variance is expected noise-inclusive).
MetricsReport metrics(const PredictiveDistribution& pred, const VectorXd& ystar);

VectorXd sample_noise(const NoiseSpec& spec, Index n, RandomStream& rng);

/// Shuffled k-fold partition; fold sizes differ by at most one.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(int n, int k,
                                                                       std::uint64_t seed);

// ---- CSV ----------------------------------------------------------------

/// Shortest round-trip decimal representation.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> columns;
  MatrixXd values;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const MatrixXd& values);

/// Per-column input standardization (median center, 1.4826 MAD scale).
struct Standardization {
  VectorXd center;
  VectorXd scale;
  MatrixXd apply(const MatrixXd& X) const;
  MatrixXd invert(const MatrixXd& Z) const;
};

struct LoadedCsv {
  Dataset data;
  std::vector<std::string> input_columns;
  std::string target_column;
  std::optional<Standardization> standardization;
};

LoadedCsv load_csv(const std::string& path, const std::string& target_column,
                   bool standardize);

}  // namespace robustgp
