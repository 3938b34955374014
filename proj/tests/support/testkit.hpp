#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "riskbn/dataset.hpp"
#include "riskbn/graph.hpp"
#include "riskbn/inference.hpp"
#include "riskbn/network.hpp"

namespace testkit {

riskbn::VariableDescriptor var(const std::string& name, const riskbn::Tag& tag = riskbn::tags::problem);

/// Hand-specified network: node names, edges by name, tables in config order.
riskbn::BayesianNetwork make_network(const std::vector<std::string>& names,
                                     const std::vector<std::pair<std::string, std::string>>& edges,
                                     const std::vector<std::vector<double>>& tables);

/// Random DAG over n nodes (at most max_parents parents each) whose CPTs are
/// fitted with alpha = 1 on a small sample of a random ground-truth network.
riskbn::BayesianNetwork random_network(std::mt19937_64& rng, std::size_t n,
                                       std::size_t max_parents = 3);

/// Brute-force conditioning on the full joint table. Uses only the CPT tables.
std::vector<double> naive_posteriors(const riskbn::BayesianNetwork& bn,
                                     const riskbn::Evidence& evidence,
                                     const std::vector<std::string>& targets, double* z = nullptr);

/// Sum of the joint over all 2^n assignments, computed from the tables directly.
double naive_total_mass(const riskbn::BayesianNetwork& bn);

/// Random evidence over a random subset of the non-target nodes.
riskbn::Evidence random_evidence(std::mt19937_64& rng, const riskbn::BayesianNetwork& bn,
                                 const std::vector<std::string>& targets, double fraction);

/// Result of checking text against a DOT digraph grammar subset.
struct DotCheck {
  bool ok = false;
  std::string error;
  std::size_t node_statements = 0;
  std::size_t edge_statements = 0;
  std::size_t penwidth_edges = 0;
};
DotCheck check_dot(const std::string& text);

/// Survey vocabularies with the published per-type answer counts.
riskbn::Schema layout_2018_schema();
riskbn::Schema layout_2014_schema();

/// Random valid records for any schema: up to 5 triples, distinct ranks.
std::vector<riskbn::SurveyRecord> random_records(std::mt19937_64& rng, const riskbn::Schema& schema,
                                                 std::size_t count, double unknown_rate = 0.0);

/// Records from a known problem -> cause mechanism. Problem j mostly causes
/// cause 2j, sometimes 2j+1.
riskbn::Schema problem_cause_schema(std::size_t problems);
std::vector<riskbn::SurveyRecord> problem_cause_records(std::mt19937_64& rng, std::size_t problems,
                                                        std::size_t count);

}  // namespace testkit
