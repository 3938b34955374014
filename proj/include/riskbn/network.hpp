#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "riskbn/dataset.hpp"
#include "riskbn/graph.hpp"

namespace riskbn {

/// P(node = true | parent configuration). Bit i of a configuration index is
/// the value of parents[i].
struct Cpt {
  std::size_t node = 0;
  std::vector<std::size_t> parents;
  std::vector<double> table;

  bool operator==(const Cpt&) const = default;
};

struct FitMeta {
  std::size_t samples = 0;
  double alpha = 1.0;
  WeightMode weight_mode = WeightMode::inverse_rank;

  bool operator==(const FitMeta&) const = default;
};

inline constexpr std::size_t kMaxParents = 24;

/// A DAG with one CPT per node. Immutable after construction.
class BayesianNetwork {
 public:
  BayesianNetwork() = default;
  /// Throws ContractError if the CPTs do not match the DAG one-to-one, a table
  /// has the wrong size, or an entry lies outside [0, 1].
  BayesianNetwork(Dag dag, std::vector<Cpt> cpts, FitMeta meta = {});

  const Dag& dag() const { return dag_; }
  std::size_t size() const { return dag_.node_count(); }
  const Cpt& cpt(std::size_t node) const { return cpts_.at(node); }
  std::span<const Cpt> cpts() const { return cpts_; }
  const FitMeta& fit_meta() const { return meta_; }

  std::size_t config_index(std::size_t node, std::span<const std::uint8_t> assignment) const {
    const auto& parents = cpts_[node].parents;
    std::size_t index = 0;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (assignment[parents[i]]) index |= std::size_t{1} << i;
    }
    return index;
  }

  /// P(X_node = assignment[node] | pa(X_node) as in assignment).
  double conditional(std::size_t node, std::span<const std::uint8_t> assignment) const {
    const double p = cpts_[node].table[config_index(node, assignment)];
    return assignment[node] ? p : 1.0 - p;
  }

  bool operator==(const BayesianNetwork&) const = default;

 private:
  Dag dag_;
  std::vector<Cpt> cpts_;
  FitMeta meta_;
};

/// Maximum-likelihood CPTs with Laplace smoothing:
/// (count(X ∧ pa=c) + alpha) / (count(pa=c) + 2 alpha). With alpha = 0 and an
/// unseen configuration the entry is 0.5.
BayesianNetwork fit_mle(const Dag& dag, const BinaryDataset& ds, double alpha,
                        WeightMode weight_mode = WeightMode::inverse_rank);

/// Product of the per-node conditionals. The assignment must cover every node
/// (in DAG node order); anything else is a ContractError.
double joint_probability(const BayesianNetwork& bn, std::span<const std::uint8_t> assignment);

/// Sum over samples of log joint_probability; -inf if any sample has probability 0.
double log_likelihood(const BayesianNetwork& bn, const BinaryDataset& ds);

/// Ancestral sampling. Variables are the DAG nodes, in node order.
BinaryDataset forward_sample(const BayesianNetwork& bn, std::size_t count, std::uint64_t seed);

}  // namespace riskbn
