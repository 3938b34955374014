#include "riskbn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "riskbn/error.hpp"

namespace riskbn {

BayesianNetwork::BayesianNetwork(Dag dag, std::vector<Cpt> cpts, FitMeta meta)
    : dag_(std::move(dag)), meta_(meta) {
  const std::size_t n = dag_.node_count();
  if (cpts.size() != n) throw ContractError("expected one CPT per node");
  cpts_.resize(n);
  std::vector<bool> seen(n, false);
  for (auto& c : cpts) {
    if (c.node >= n || seen[c.node]) throw ContractError("CPTs must cover every node exactly once");
    seen[c.node] = true;
    std::vector<std::size_t> sorted = c.parents;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != dag_.parents(c.node)) {
      throw ContractError("CPT parents of '" + dag_.node(c.node).name + "' do not match the DAG");
    }
    if (c.parents.size() > kMaxParents) {
      throw ContractError("node '" + dag_.node(c.node).name + "' has too many parents");
    }
    if (c.table.size() != (std::size_t{1} << c.parents.size())) {
      throw ContractError("CPT of '" + dag_.node(c.node).name + "' has the wrong size");
    }
    for (double p : c.table) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ContractError("CPT entry outside [0,1] at '" + dag_.node(c.node).name + "'");
      }
    }
    const auto node = c.node;
    cpts_[node] = std::move(c);
  }
}

BayesianNetwork fit_mle(const Dag& dag, const BinaryDataset& ds, double alpha,
                        WeightMode weight_mode) {
  if (!(alpha >= 0.0)) throw ContractError("smoothing must be nonnegative");
  const std::size_t n = dag.node_count();
  std::vector<std::size_t> column(n);
  for (std::size_t i = 0; i < n; ++i) column[i] = ds.index_of(dag.node(i).name);

  std::vector<Cpt> cpts;
  cpts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& parents = dag.parents(i);
    if (parents.size() > kMaxParents) {
      throw ContractError("node '" + dag.node(i).name + "' has " +
                          std::to_string(parents.size()) + " parents; apply a parent cap");
    }
    const std::size_t configs = std::size_t{1} << parents.size();
    std::vector<double> total(configs, 0.0);
    std::vector<double> positive(configs, 0.0);
    for (std::size_t s = 0; s < ds.sample_count(); ++s) {
      std::size_t c = 0;
      for (std::size_t k = 0; k < parents.size(); ++k) {
        if (ds.value(s, column[parents[k]])) c |= std::size_t{1} << k;
      }
      total[c] += 1.0;
      if (ds.value(s, column[i])) positive[c] += 1.0;
    }
    Cpt cpt;
    cpt.node = i;
    cpt.parents = parents;
    cpt.table.resize(configs);
    for (std::size_t c = 0; c < configs; ++c) {
      const double denom = total[c] + 2.0 * alpha;
      cpt.table[c] = denom > 0.0 ? (positive[c] + alpha) / denom : 0.5;
    }
    cpts.push_back(std::move(cpt));
  }
  return BayesianNetwork(dag, std::move(cpts), {ds.sample_count(), alpha, weight_mode});
}

double joint_probability(const BayesianNetwork& bn, std::span<const std::uint8_t> assignment) {
  if (assignment.size() != bn.size()) {
    throw ContractError("assignment covers " + std::to_string(assignment.size()) + " of " +
                        std::to_string(bn.size()) + " nodes");
  }
  double p = 1.0;
  for (std::size_t i = 0; i < bn.size(); ++i) {
    if (assignment[i] > 1) throw ContractError("assignment entries must be 0 or 1");
    p *= bn.conditional(i, assignment);
  }
  return p;
}

double log_likelihood(const BayesianNetwork& bn, const BinaryDataset& ds) {
  const std::size_t n = bn.size();
  std::vector<std::size_t> column(n);
  for (std::size_t i = 0; i < n; ++i) column[i] = ds.index_of(bn.dag().node(i).name);

  std::vector<std::uint8_t> row(n);
  double total = 0.0;
  for (std::size_t s = 0; s < ds.sample_count(); ++s) {
    for (std::size_t i = 0; i < n; ++i) row[i] = ds.value(s, column[i]) ? 1 : 0;
    const double p = joint_probability(bn, row);
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(p);
  }
  return total;
}

BinaryDataset forward_sample(const BayesianNetwork& bn, std::size_t count, std::uint64_t seed) {
  const std::size_t n = bn.size();
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> samples(count * n, 0);
  for (std::size_t s = 0; s < count; ++s) {
    std::span<std::uint8_t> row(samples.data() + s * n, n);
    for (auto v : bn.dag().topological_order()) {
      const double p = bn.cpt(v).table[bn.config_index(v, row)];
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      row[v] = u < p ? 1 : 0;
    }
  }
  std::vector<VariableDescriptor> vars(bn.dag().nodes().begin(), bn.dag().nodes().end());
  return BinaryDataset(std::move(vars), std::move(samples));
}

}  // namespace riskbn
