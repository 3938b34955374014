#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "riskbn/dataset.hpp"
#include "riskbn/dataset_io.hpp"
#include "riskbn/evaluation.hpp"
#include "riskbn/graph.hpp"
#include "riskbn/inference.hpp"
#include "riskbn/network.hpp"

namespace riskbn {

/// Infinite thresholds are written as the string "inf".
Json spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const Json& j);

Json dag_to_json(const Dag& dag);
Dag dag_from_json(const Json& j);

/// CPT tables keep their stored parent order, so the round trip is exact.
Json network_to_json(const BayesianNetwork& bn);
BayesianNetwork network_from_json(const Json& j);

/// A trained model as stored on disk and served.
struct ModelRegistryEntry {
  std::string model_id;
  std::string architecture;
  UseCase use_case = UseCase::diagnostic;
  std::string dataset_digest;
  std::string built_at;
  ArchitectureSpec spec;
  std::optional<BayesianNetwork> network;  // absent for the baseline
  PosteriorReport baseline;                // relative frequencies, baseline only
  std::vector<std::string> outputs;
  std::vector<VariableDescriptor> variables;  // every variable of the model
  std::optional<EvaluationReport> evaluation;

  bool is_baseline() const { return !network.has_value(); }
  const VariableDescriptor* find_variable(std::string_view name) const;
};

/// Builds the graph, fits the CPTs and collects V_o. Throws SpecError when V_o is empty.
ModelRegistryEntry build_model(const BinaryDataset& ds, const ArchitectureSpec& spec,
                               UseCase use_case, double alpha, std::string model_id,
                               std::string built_at);

Json model_to_json(const ModelRegistryEntry& model);
ModelRegistryEntry model_from_json(const Json& j);

void save_model(const std::filesystem::path& path, const ModelRegistryEntry& model);
ModelRegistryEntry load_model(const std::filesystem::path& path);

/// ISO 8601 UTC, second resolution.
std::string utc_timestamp_now();

}  // namespace riskbn
