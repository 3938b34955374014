#include "riskbn/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>

#include "riskbn/error.hpp"

namespace riskbn {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

FoldPlan split_folds(std::size_t m, int repetitions, std::size_t holdout_size, std::uint64_t seed,
                     std::vector<std::string>* warnings) {
  if (repetitions < 1) throw ConfigError("at least one repetition is required");
  if (holdout_size == 0) throw ConfigError("holdout size must be positive");
  if (holdout_size >= m) {
    throw ConfigError("holdout size " + std::to_string(holdout_size) +
                      " must be smaller than the sample count " + std::to_string(m));
  }
  if (holdout_size == m - 1 && warnings) {
    warnings->push_back("holdout leaves a single training sample");
  }

  FoldPlan plan;
  plan.repetitions = repetitions;
  plan.holdout_size = holdout_size;
  plan.seed = seed;
  for (int r = 0; r < repetitions; ++r) {
    std::mt19937_64 rng(mix(seed ^ mix(static_cast<std::uint64_t>(r) + 1)));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates; written out so plans are identical across standard libraries.
    for (std::size_t i = 0; i < holdout_size; ++i) {
      const std::size_t span = m - i;
      const std::size_t j = i + static_cast<std::size_t>(rng() % span);
      std::swap(order[i], order[j]);
    }
    Fold fold;
    fold.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout_size));
    fold.train.assign(order.begin() + static_cast<std::ptrdiff_t>(holdout_size), order.end());
    std::sort(fold.test.begin(), fold.test.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 9; ++i) t.push_back(i / 10.0);
  return t;
}

void PredictionSet::add_sample(std::span<const double> probs, std::span<const std::uint8_t> actual) {
  if (probs.size() != variables.size() || actual.size() != variables.size()) {
    throw ContractError("prediction row does not match the output variables");
  }
  probabilities.insert(probabilities.end(), probs.begin(), probs.end());
  truth.insert(truth.end(), actual.begin(), actual.end());
}

double ThresholdMetrics::mean_accuracy() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.accuracy;
  return s / static_cast<double>(rows.size());
}

namespace {

std::optional<double> mean_defined(const std::vector<ThresholdRow>& rows,
                                   std::optional<double> ThresholdRow::*field) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.*field) {
      s += *(r.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace

std::optional<double> ThresholdMetrics::mean_precision() const {
  return mean_defined(rows, &ThresholdRow::precision);
}

std::optional<double> ThresholdMetrics::mean_recall() const {
  return mean_defined(rows, &ThresholdRow::recall);
}

const RankingRow* RankingMetrics::at(std::size_t k) const {
  for (const auto& r : rows) {
    if (r.k == k) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// MetricAccumulator

MetricAccumulator::MetricAccumulator(std::vector<double> thresholds, std::size_t k_max)
    : thresholds_(std::move(thresholds)),
      k_max_(k_max),
      correct_(thresholds_.size(), 0.0),
      precision_sum_(thresholds_.size(), 0.0),
      recall_sum_(thresholds_.size(), 0.0),
      precision_n_(thresholds_.size(), 0),
      recall_n_(thresholds_.size(), 0),
      rank_precision_sum_(k_max, 0.0),
      rank_recall_sum_(k_max, 0.0),
      rank_recall_n_(k_max, 0) {}

void MetricAccumulator::add(std::span<const std::string> variables, std::span<const double> probs,
                            std::span<const std::uint8_t> truth) {
  const std::size_t n = variables.size();
  if (n == 0) throw MetricError("no output variables to evaluate");
  if (probs.size() != n || truth.size() != n) {
    throw ContractError("prediction row does not match the output variables");
  }
  ++samples_;
  cells_ += n;

  std::size_t actual = 0;
  for (auto e : truth) actual += e ? 1 : 0;

  for (std::size_t ti = 0; ti < thresholds_.size(); ++ti) {
    const double t = thresholds_[ti];
    std::size_t predicted = 0;
    std::size_t hits = 0;
    std::size_t agree = 0;
    for (std::size_t v = 0; v < n; ++v) {
      const bool said = probs[v] > t;
      const bool is = truth[v] != 0;
      predicted += said;
      hits += said && is;
      agree += said == is;
    }
    correct_[ti] += static_cast<double>(agree);
    if (predicted > 0) {
      precision_sum_[ti] += static_cast<double>(hits) / static_cast<double>(predicted);
      ++precision_n_[ti];
    }
    if (actual > 0) {
      recall_sum_[ti] += static_cast<double>(hits) / static_cast<double>(actual);
      ++recall_n_[ti];
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return variables[a] < variables[b];
  });
  std::size_t hits = 0;
  for (std::size_t k = 1; k <= k_max_; ++k) {
    if (k <= n) hits += truth[order[k - 1]] ? 1 : 0;
    const std::size_t length = std::min(k, n);
    rank_precision_sum_[k - 1] += static_cast<double>(hits) / static_cast<double>(length);
    if (actual > 0) {
      rank_recall_sum_[k - 1] += static_cast<double>(hits) / static_cast<double>(actual);
      ++rank_recall_n_[k - 1];
    }
  }
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  if (other.thresholds_ != thresholds_ || other.k_max_ != k_max_) {
    throw ContractError("cannot merge accumulators with different settings");
  }
  samples_ += other.samples_;
  cells_ += other.cells_;
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    correct_[i] += other.correct_[i];
    precision_sum_[i] += other.precision_sum_[i];
    recall_sum_[i] += other.recall_sum_[i];
    precision_n_[i] += other.precision_n_[i];
    recall_n_[i] += other.recall_n_[i];
  }
  for (std::size_t k = 0; k < k_max_; ++k) {
    rank_precision_sum_[k] += other.rank_precision_sum_[k];
    rank_recall_sum_[k] += other.rank_recall_sum_[k];
    rank_recall_n_[k] += other.rank_recall_n_[k];
  }
}

ThresholdMetrics MetricAccumulator::threshold_metrics() const {
  ThresholdMetrics m;
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    ThresholdRow row;
    row.threshold = thresholds_[i];
    row.accuracy = cells_ ? correct_[i] / static_cast<double>(cells_) : 0.0;
    if (precision_n_[i]) row.precision = precision_sum_[i] / static_cast<double>(precision_n_[i]);
    if (recall_n_[i]) row.recall = recall_sum_[i] / static_cast<double>(recall_n_[i]);
    row.precision_excluded = samples_ - precision_n_[i];
    row.recall_excluded = samples_ - recall_n_[i];
    m.rows.push_back(row);
  }
  return m;
}

RankingMetrics MetricAccumulator::ranking_metrics() const {
  RankingMetrics m;
  for (std::size_t k = 1; k <= k_max_; ++k) {
    RankingRow row;
    row.k = k;
    row.precision = samples_ ? rank_precision_sum_[k - 1] / static_cast<double>(samples_) : 0.0;
    if (rank_recall_n_[k - 1]) {
      row.recall = rank_recall_sum_[k - 1] / static_cast<double>(rank_recall_n_[k - 1]);
    }
    row.recall_excluded = samples_ - rank_recall_n_[k - 1];
    m.rows.push_back(row);
  }
  return m;
}

namespace {

MetricAccumulator accumulate(const PredictionSet& p, std::vector<double> thresholds,
                             std::size_t k_max) {
  const std::size_t n = p.variables.size();
  if (n == 0) throw MetricError("no output variables to evaluate");
  if (p.probabilities.size() != p.truth.size() || p.probabilities.size() % n != 0) {
    throw ContractError("predictions and truth are not aligned");
  }
  MetricAccumulator acc(std::move(thresholds), k_max);
  for (std::size_t s = 0; s < p.sample_count(); ++s) {
    acc.add(p.variables, std::span(p.probabilities).subspan(s * n, n),
            std::span(p.truth).subspan(s * n, n));
  }
  return acc;
}

}  // namespace

ThresholdMetrics threshold_metrics(const PredictionSet& predictions,
                                   std::span<const double> thresholds) {
  return accumulate(predictions, {thresholds.begin(), thresholds.end()}, 0).threshold_metrics();
}

RankingMetrics ranking_metrics(const PredictionSet& predictions, std::size_t k_max) {
  if (k_max > predictions.variables.size()) {
    throw ContractError("ranking length exceeds the number of output variables");
  }
  return accumulate(predictions, {}, k_max).ranking_metrics();
}

// ---------------------------------------------------------------------------
// Fold sources

FoldSource FoldSource::prepared(BinaryDataset ds) {
  const std::size_t m = ds.sample_count();
  std::string digest = ds.provenance().source_digest;
  auto shared = std::make_shared<const BinaryDataset>(std::move(ds));
  return FoldSource(m, std::move(digest),
                    [shared](std::span<const std::size_t> train, std::span<const std::size_t> test) {
                      return std::pair(shared->subset(train), shared->subset(test));
                    });
}

FoldSource FoldSource::survey(SurveyData data) {
  const std::size_t m = data.records.size();
  std::string digest = data.digest;
  auto shared = std::make_shared<const SurveyData>(std::move(data));
  return FoldSource(
      m, std::move(digest),
      [shared](std::span<const std::size_t> train, std::span<const std::size_t> test) {
        std::vector<SurveyRecord> train_records;
        std::vector<SurveyRecord> test_records;
        for (auto i : train) train_records.push_back(shared->records.at(i));
        for (auto i : test) test_records.push_back(shared->records.at(i));
        std::vector<std::string> warnings;
        const auto disc = fit_discretizations(train_records, shared->schema, &warnings);
        auto train_ds = binarize(train_records, shared->schema, disc, shared->digest);
        auto test_ds = binarize(test_records, shared->schema, disc, shared->digest);
        return std::pair(std::move(train_ds), std::move(test_ds));
      });
}

// ---------------------------------------------------------------------------
// Cross-validation

FoldModel train_fold(const BinaryDataset& train, const ArchitectureSpec& spec, UseCase use_case,
                     double alpha) {
  FoldModel model;
  const Tag out = output_tag(use_case);
  if (spec.baseline) {
    const auto outputs = baseline_outputs(train, spec, use_case);
    for (auto v : outputs) model.outputs.push_back(train.variable(v).name);
    if (model.outputs.empty()) {
      throw SpecError("no " + out.code() + " variable survives the node filter; lower f(" +
                      out.code() + ")");
    }
    model.baseline = baseline_predict(train, outputs);
    return model;
  }
  Dag dag = build_graph(train, spec);
  for (auto v : dag.nodes_with_tag(out)) model.outputs.push_back(dag.node(v).name);
  if (model.outputs.empty()) {
    throw SpecError("architecture '" + spec.name + "' leaves no " + out.code() +
                    " nodes after filtering; lower f(" + out.code() + ")");
  }
  model.network = fit_mle(dag, train, alpha, spec.weight_mode);
  return model;
}

double EvaluationReport::mean_output_count() const {
  if (output_counts.empty()) return 0.0;
  double s = 0.0;
  for (auto c : output_counts) s += static_cast<double>(c);
  return s / static_cast<double>(output_counts.size());
}

EvaluationReport run_cross_validation(const FoldSource& source, const ArchitectureSpec& spec,
                                      UseCase use_case, const FoldPlan& plan,
                                      const ValidationOptions& options) {
  spec.validate();
  if (plan.folds.empty()) throw ConfigError("fold plan has no repetitions");
  options.sampler.validate();

  EvaluationReport report;
  report.architecture = spec.name;
  report.title = std::string(architecture_title(spec.name));
  report.use_case = use_case;
  report.dataset_digest = source.digest();
  report.repetitions = plan.repetitions;
  report.holdout_size = plan.holdout_size;
  report.seed = plan.seed;

  MetricAccumulator total(options.thresholds, options.k_max);
  double elapsed_ms = 0.0;
  std::size_t inferences = 0;

  for (std::size_t rep = 0; rep < plan.folds.size(); ++rep) {
    const auto& fold = plan.folds[rep];
    for (auto t : fold.test) {
      if (std::binary_search(fold.train.begin(), fold.train.end(), t)) {
        throw ContractError("fold plan leaks test rows into training");
      }
    }
    auto [train, test] = source.materialize(fold.train, fold.test);
    FoldModel model = train_fold(train, spec, use_case, options.alpha);
    report.output_counts.push_back(model.outputs.size());

    std::vector<std::size_t> truth_cols;
    for (const auto& name : model.outputs) truth_cols.push_back(test.index_of(name));

    std::vector<std::size_t> evidence_nodes;
    std::vector<std::size_t> evidence_cols;
    if (model.network) {
      const Dag& dag = model.network->dag();
      const Tag out = output_tag(use_case);
      for (std::size_t v = 0; v < dag.node_count(); ++v) {
        if (dag.node(v).tag == out) continue;
        evidence_nodes.push_back(v);
        evidence_cols.push_back(test.index_of(dag.node(v).name));
      }
    }

    std::vector<double> probs(model.outputs.size());
    std::vector<std::uint8_t> truth(model.outputs.size());
    for (std::size_t s = 0; s < test.sample_count(); ++s) {
      for (std::size_t i = 0; i < truth_cols.size(); ++i) truth[i] = test.value(s, truth_cols[i]);
      if (!model.network) {
        for (std::size_t i = 0; i < model.outputs.size(); ++i) {
          probs[i] = model.baseline.probability(model.outputs[i]);
        }
      } else {
        // Indicators of a factor answered "unknown" stay unobserved.
        const auto unknown = test.unknown_factors(s);
        Evidence evidence;
        for (std::size_t i = 0; i < evidence_nodes.size(); ++i) {
          const auto& node = model.network->dag().node(evidence_nodes[i]);
          if (!node.factor.empty() &&
              std::find(unknown.begin(), unknown.end(), node.factor) != unknown.end()) {
            continue;
          }
          evidence.set(node.name, test.value(s, evidence_cols[i]));
        }
        SamplerConfig cfg = options.sampler;
        cfg.seed = mix(options.sampler.seed ^ mix((rep << 32) ^ s));
        const auto start = std::chrono::steady_clock::now();
        const auto posterior =
            infer(*model.network, evidence, model.outputs, cfg, options.method, options.inference);
        elapsed_ms +=
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        ++inferences;
        if (posterior.method == "gibbs") ++report.gibbs_inferences;
        else ++report.exact_inferences;
        for (std::size_t i = 0; i < model.outputs.size(); ++i) {
          probs[i] = posterior.posteriors.at(model.outputs[i]);
        }
      }
      total.add(model.outputs, probs, truth);
    }
  }

  report.evaluated_samples = total.samples();
  report.thresholds = total.threshold_metrics();
  report.ranking = total.ranking_metrics();
  report.mean_inference_ms = inferences ? elapsed_ms / static_cast<double>(inferences) : 0.0;
  const std::size_t min_outputs =
      *std::min_element(report.output_counts.begin(), report.output_counts.end());
  if (min_outputs < options.k_max) {
    report.warnings.push_back("some repetitions have fewer than " +
                              std::to_string(options.k_max) +
                              " output variables; their rankings are shorter than k");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Json optional_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

std::optional<double> optional_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string cell(std::optional<double> x, const char* fmt = "%.4f") {
  if (!x) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, *x);
  return buf;
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

Json report_to_json(const EvaluationReport& r) {
  Json thresholds = Json::array();
  for (const auto& row : r.thresholds.rows) {
    thresholds.push_back({{"t", row.threshold},
                          {"acc", row.accuracy},
                          {"pre", optional_json(row.precision)},
                          {"rec", optional_json(row.recall)},
                          {"pre_excluded", row.precision_excluded},
                          {"rec_excluded", row.recall_excluded}});
  }
  Json ranking = Json::array();
  for (const auto& row : r.ranking.rows) {
    ranking.push_back({{"k", row.k},
                       {"rank_precision", row.precision},
                       {"rank_recall", optional_json(row.recall)},
                       {"rank_recall_excluded", row.recall_excluded}});
  }
  const RankingRow* at5 = r.ranking.at(5);
  return {{"architecture", r.architecture},
          {"title", r.title},
          {"use_case", to_string(r.use_case)},
          {"dataset_digest", r.dataset_digest},
          {"repetitions", r.repetitions},
          {"holdout_size", r.holdout_size},
          {"seed", r.seed},
          {"output_counts", r.output_counts},
          {"mean_output_count", r.mean_output_count()},
          {"evaluated_samples", r.evaluated_samples},
          {"thresholds", std::move(thresholds)},
          {"ranking", std::move(ranking)},
          {"summary",
           {{"mean_acc", r.thresholds.mean_accuracy()},
            {"mean_rec", optional_json(r.thresholds.mean_recall())},
            {"mean_pre", optional_json(r.thresholds.mean_precision())},
            {"rank_precision_at_5", at5 ? Json(at5->precision) : Json(nullptr)},
            {"rank_recall_at_5", at5 ? optional_json(at5->recall) : Json(nullptr)}}},
          {"mean_inference_ms", r.mean_inference_ms},
          {"exact_inferences", r.exact_inferences},
          {"gibbs_inferences", r.gibbs_inferences},
          {"warnings", r.warnings}};
}

EvaluationReport report_from_json(const Json& j) {
  try {
    EvaluationReport r;
    r.architecture = j.at("architecture").get<std::string>();
    r.title = j.value("title", "");
    r.use_case = use_case_from_string(j.at("use_case").get<std::string>());
    r.dataset_digest = j.value("dataset_digest", "");
    r.repetitions = j.value("repetitions", 0);
    r.holdout_size = j.value("holdout_size", std::size_t{0});
    r.seed = j.value("seed", std::uint64_t{0});
    r.output_counts = j.value("output_counts", std::vector<std::size_t>{});
    r.evaluated_samples = j.value("evaluated_samples", std::size_t{0});
    for (const auto& row : j.at("thresholds")) {
      ThresholdRow t;
      t.threshold = row.at("t").get<double>();
      t.accuracy = row.at("acc").get<double>();
      t.precision = optional_from(row, "pre");
      t.recall = optional_from(row, "rec");
      t.precision_excluded = row.value("pre_excluded", std::size_t{0});
      t.recall_excluded = row.value("rec_excluded", std::size_t{0});
      r.thresholds.rows.push_back(t);
    }
    for (const auto& row : j.at("ranking")) {
      RankingRow k;
      k.k = row.at("k").get<std::size_t>();
      k.precision = row.at("rank_precision").get<double>();
      k.recall = optional_from(row, "rank_recall");
      k.recall_excluded = row.value("rank_recall_excluded", std::size_t{0});
      r.ranking.rows.push_back(k);
    }
    r.mean_inference_ms = j.value("mean_inference_ms", 0.0);
    r.exact_inferences = j.value("exact_inferences", std::size_t{0});
    r.gibbs_inferences = j.value("gibbs_inferences", std::size_t{0});
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string report_table_csv(std::span<const EvaluationReport> reports) {
  std::string out =
      "use_case,architecture,title,dataset,n_outputs,mean_acc,mean_rec,mean_pre,"
      "rank_precision_at_5,rank_recall_at_5\n";
  for (const auto& r : reports) {
    const RankingRow* at5 = r.ranking.at(5);
    out += std::string(to_string(r.use_case)) + "," + csv_text(r.architecture) + "," +
           csv_text(r.title) + "," + r.dataset_digest.substr(0, 12) + "," +
           cell(r.mean_output_count(), "%.1f") + "," + cell(r.thresholds.mean_accuracy()) + "," +
           cell(r.thresholds.mean_recall()) + "," + cell(r.thresholds.mean_precision()) + "," +
           (at5 ? cell(at5->precision) : "") + "," + (at5 ? cell(at5->recall) : "") + "\n";
  }
  return out;
}

std::string report_curves_csv(const EvaluationReport& r) {
  std::string out = "threshold,accuracy,precision,recall,precision_excluded,recall_excluded\n";
  for (const auto& row : r.thresholds.rows) {
    out += cell(row.threshold, "%.1f") + "," + cell(row.accuracy) + "," + cell(row.precision) +
           "," + cell(row.recall) + "," + std::to_string(row.precision_excluded) + "," +
           std::to_string(row.recall_excluded) + "\n";
  }
  return out;
}

}  // namespace riskbn
