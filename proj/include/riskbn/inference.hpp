#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskbn/dataset.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

/// Observed values for a subset of network variables, keyed by name.
struct Evidence {
  std::map<std::string, bool, std::less<>> values;

  Evidence& set(std::string name, bool value) {
    values[std::move(name)] = value;
    return *this;
  }
  bool contains(std::string_view name) const { return values.find(name) != values.end(); }
  bool empty() const { return values.empty(); }
};

/// Gibbs sampler settings. The seed has no default.
struct SamplerConfig {
  explicit SamplerConfig(std::uint64_t seed_) : seed(seed_) {}

  int chains = 4;
  int burn_in = 1000;
  int samples_per_chain = 5000;
  std::uint64_t seed;
  bool parallel = true;

  std::size_t retained() const {
    return static_cast<std::size_t>(chains > 0 ? chains : 0) *
           static_cast<std::size_t>(samples_per_chain > 0 ? samples_per_chain : 0);
  }
  /// Throws ConfigError when no samples would be retained.
  void validate() const;
};

struct SamplerDiagnostics {
  int chains = 0;
  int burn_in = 0;
  int samples_per_chain = 0;
  std::uint64_t seed = 0;
  std::size_t sampled_nodes = 0;  // free variables after pruning

  bool operator==(const SamplerDiagnostics&) const = default;
};

enum class InferenceMethod { automatic, exact, gibbs };

std::string_view to_string(InferenceMethod method);
InferenceMethod inference_method_from_string(std::string_view text);

struct PosteriorReport {
  std::map<std::string, double> posteriors;  // P(v = true | evidence) per target
  std::map<std::string, bool> clamped;       // evidence as observed
  std::string method;                        // "exact", "gibbs" or "baseline"
  std::optional<SamplerDiagnostics> sampler;

  /// Target posterior, or 1/0 for a clamped evidence variable.
  double probability(std::string_view name) const;

  bool operator==(const PosteriorReport&) const = default;
};

struct InferenceOptions {
  /// Largest set of jointly enumerated free variables.
  std::size_t exact_node_guard = 22;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Exact posteriors by enumeration. Nodes that are not ancestors of a target
/// or an evidence variable are summed out analytically, and the remaining free
/// variables are enumerated per independent component; each component must fit
/// the node guard (TooLargeForExactError otherwise).
PosteriorReport infer_exact(const BayesianNetwork& bn, const Evidence& evidence,
                            std::span<const std::string> targets, const InferenceOptions& opts = {});

/// Gibbs sampling with evidence clamped. Chains use independent streams derived
/// from the seed, so the result does not depend on thread scheduling.
PosteriorReport infer_gibbs(const BayesianNetwork& bn, const Evidence& evidence,
                            std::span<const std::string> targets, const SamplerConfig& cfg,
                            const InferenceOptions& opts = {});

/// Exact when every component fits the guard, Gibbs otherwise.
PosteriorReport infer(const BayesianNetwork& bn, const Evidence& evidence,
                      std::span<const std::string> targets, const SamplerConfig& cfg,
                      InferenceMethod method = InferenceMethod::automatic,
                      const InferenceOptions& opts = {});

struct RankedItem {
  std::string variable;
  double probability = 0.0;

  bool operator==(const RankedItem&) const = default;
};

/// Targets by descending probability (ties by name), at most k, dropping
/// entries with probability <= t.
std::vector<RankedItem> predict_ranking(const PosteriorReport& report, std::size_t k, double t);

/// Relative frequency of each output variable, ignoring any evidence.
PosteriorReport baseline_predict(const BinaryDataset& ds, std::span<const std::size_t> outputs);
PosteriorReport baseline_predict(const BinaryDataset& ds, const Tag& output_tag);

}  // namespace riskbn
