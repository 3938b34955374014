#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskbn/dataset.hpp"
#include "riskbn/dataset_io.hpp"
#include "riskbn/graph.hpp"
#include "riskbn/inference.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Independent random holdouts: every repetition draws its own test set.
struct FoldPlan {
  int repetitions = 10;
  std::size_t holdout_size = 30;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

/// Throws ConfigError if holdout_size is 0 or >= m, or repetitions < 1.
FoldPlan split_folds(std::size_t m, int repetitions, std::size_t holdout_size, std::uint64_t seed,
                     std::vector<std::string>* warnings = nullptr);

/// {0.1, 0.2, ..., 0.9}
std::vector<double> default_thresholds();

/// Posterior and ground truth per (sample, output variable), row-major.
struct PredictionSet {
  std::vector<std::string> variables;
  std::vector<double> probabilities;
  std::vector<std::uint8_t> truth;

  std::size_t sample_count() const {
    return variables.empty() ? 0 : probabilities.size() / variables.size();
  }
  void add_sample(std::span<const double> probs, std::span<const std::uint8_t> actual);
};

struct ThresholdRow {
  double threshold = 0.0;
  double accuracy = 0.0;
  std::optional<double> precision;  // nullopt when every sample was excluded
  std::optional<double> recall;
  std::size_t precision_excluded = 0;  // samples with nothing predicted true
  std::size_t recall_excluded = 0;     // samples with nothing actually true
};

struct ThresholdMetrics {
  std::vector<ThresholdRow> rows;

  double mean_accuracy() const;
  /// Mean over thresholds where the value is defined.
  std::optional<double> mean_precision() const;
  std::optional<double> mean_recall() const;
};

/// Ranking scores of the top-k list. `precision` divides the number of true
/// variables in the list by the list length (k, or |V_o| when that is
/// smaller), `recall` divides it by the number of true variables of the sample.
struct RankingRow {
  std::size_t k = 0;
  double precision = 0.0;
  std::optional<double> recall;
  std::size_t recall_excluded = 0;
};

struct RankingMetrics {
  std::vector<RankingRow> rows;  // k = 1..k_max
  const RankingRow* at(std::size_t k) const;
};

/// Sums per-sample metric terms. Merging is associative and order-independent.
class MetricAccumulator {
 public:
  MetricAccumulator(std::vector<double> thresholds, std::size_t k_max);

  void add(std::span<const std::string> variables, std::span<const double> probs,
           std::span<const std::uint8_t> truth);
  void merge(const MetricAccumulator& other);

  std::size_t samples() const { return samples_; }
  ThresholdMetrics threshold_metrics() const;
  RankingMetrics ranking_metrics() const;

 private:
  std::vector<double> thresholds_;
  std::size_t k_max_;
  std::size_t samples_ = 0;
  std::size_t cells_ = 0;
  std::vector<double> correct_, precision_sum_, recall_sum_;
  std::vector<std::size_t> precision_n_, recall_n_;
  std::vector<double> rank_precision_sum_, rank_recall_sum_;
  std::vector<std::size_t> rank_recall_n_;
};

/// acc(t), pre(t), rec(t) for each threshold. Throws MetricError for an empty V_o.
ThresholdMetrics threshold_metrics(const PredictionSet& predictions,
                                   std::span<const double> thresholds);

/// Ranking scores for k = 1..k_max, k_max <= |V_o|. Ties rank by variable name.
RankingMetrics ranking_metrics(const PredictionSet& predictions, std::size_t k_max);

/// Produces the train and test datasets of one fold.
class FoldSource {
 public:
  using Materialize =
      std::function<std::pair<BinaryDataset, BinaryDataset>(std::span<const std::size_t>,
                                                            std::span<const std::size_t>)>;

  FoldSource(std::size_t size, std::string digest, Materialize materialize)
      : size_(size), digest_(std::move(digest)), materialize_(std::move(materialize)) {}

  /// Row subsets of an already binarized dataset.
  static FoldSource prepared(BinaryDataset ds);
  /// Raw survey; discretization is refit on each training split.
  static FoldSource survey(SurveyData data);

  std::size_t size() const { return size_; }
  const std::string& digest() const { return digest_; }
  std::pair<BinaryDataset, BinaryDataset> materialize(std::span<const std::size_t> train,
                                                      std::span<const std::size_t> test) const {
    return materialize_(train, test);
  }

 private:
  std::size_t size_;
  std::string digest_;
  Materialize materialize_;
};

/// What a training split yields: a fitted network (absent for the baseline),
/// the output variables and, for the baseline, its fixed prediction.
struct FoldModel {
  std::optional<BayesianNetwork> network;
  std::vector<std::string> outputs;
  PosteriorReport baseline;
};

/// Builds and fits on the training rows only. Throws SpecError when V_o ends
/// up empty after filtering.
FoldModel train_fold(const BinaryDataset& train, const ArchitectureSpec& spec, UseCase use_case,
                     double alpha);

struct ValidationOptions {
  double alpha = 1.0;
  InferenceMethod method = InferenceMethod::automatic;
  SamplerConfig sampler{0};
  InferenceOptions inference;
  std::vector<double> thresholds = default_thresholds();
  std::size_t k_max = 10;
};

struct EvaluationReport {
  std::string architecture;
  std::string title;
  UseCase use_case = UseCase::diagnostic;
  std::string dataset_digest;
  int repetitions = 0;
  std::size_t holdout_size = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> output_counts;  // |V_o| per repetition
  std::size_t evaluated_samples = 0;
  ThresholdMetrics thresholds;
  RankingMetrics ranking;
  double mean_inference_ms = 0.0;
  std::size_t exact_inferences = 0;
  std::size_t gibbs_inferences = 0;
  std::vector<std::string> warnings;

  double mean_output_count() const;
};

/// Cross-validates one (architecture, use case) pair. Evidence for each test
/// sample is every non-output graph variable at its observed value, except
/// indicators of context factors the sample left unknown.
EvaluationReport run_cross_validation(const FoldSource& source, const ArchitectureSpec& spec,
                                      UseCase use_case, const FoldPlan& plan,
                                      const ValidationOptions& options);

Json report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const Json& j);

/// Header plus one row mirroring the internal-validation table columns.
std::string report_table_csv(std::span<const EvaluationReport> reports);
/// One row per threshold.
std::string report_curves_csv(const EvaluationReport& report);

}  // namespace riskbn
