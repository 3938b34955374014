#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riskbn/dataset.hpp"

namespace riskbn {

struct TypePair {
  Tag from;
  Tag to;

  auto operator<=>(const TypePair&) const = default;
};

enum class UseCase { diagnostic, predictive };

std::string_view to_string(UseCase use_case);
UseCase use_case_from_string(std::string_view text);

/// C for diagnostic reasoning, P for predictive reasoning.
Tag output_tag(UseCase use_case);

/// Declarative network layout: every variable of `from` gets an edge to every
/// variable of `to`, subject to the occurrence filters.
struct ArchitectureSpec {
  std::string name;
  std::vector<TypePair> pairs;
  std::map<Tag, double> node_filter;       // f; missing tags use default_node_filter
  std::map<TypePair, double> edge_filter;  // g; missing pairs use default_edge_filter
  double default_node_filter = 5.0;
  double default_edge_filter = 3.0;
  WeightMode weight_mode = WeightMode::inverse_rank;
  std::optional<int> parent_cap;
  bool baseline = false;

  double node_threshold(const Tag& tag) const;
  double edge_threshold(const TypePair& pair) const;
  /// Tags in order of first mention.
  std::vector<Tag> mentioned_tags() const;

  /// Throws SpecError on a cyclic type graph, duplicate pairs, negative
  /// thresholds or a parent cap below 1.
  void validate() const;

  bool operator==(const ArchitectureSpec&) const = default;
};

/// Every edge reversed; the name gets an "inverse" marker.
ArchitectureSpec inverted(const ArchitectureSpec& spec);

/// Parent cap of the predefined architectures; keeps CPTs tractable on survey data.
inline constexpr int kDefaultParentCap = 15;

/// A0 (baseline) through A8. Context tags feed the "with context" variants.
ArchitectureSpec predefined_architecture(std::string_view code, std::span<const Tag> context_tags = {});
/// Same, with context tags taken from the dataset. A1/A2 need CC and EC.
ArchitectureSpec predefined_architecture(std::string_view code, const BinaryDataset& ds);

std::string_view architecture_title(std::string_view code);

struct Edge {
  std::size_t from;
  std::size_t to;
  double support = 0.0;

  bool operator==(const Edge&) const = default;
};

/// Directed acyclic graph over binary variables.
class Dag {
 public:
  Dag() = default;
  /// Throws ContractError on self-loops, duplicate edges, dangling endpoints or cycles.
  Dag(std::vector<VariableDescriptor> nodes, std::vector<Edge> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const VariableDescriptor> nodes() const { return nodes_; }
  const VariableDescriptor& node(std::size_t i) const { return nodes_.at(i); }
  std::span<const Edge> edges() const { return edges_; }
  std::optional<std::size_t> find(std::string_view name) const;

  /// Parent indices in ascending node order.
  const std::vector<std::size_t>& parents(std::size_t node) const { return parents_.at(node); }
  const std::vector<std::size_t>& children(std::size_t node) const { return children_.at(node); }
  std::optional<double> edge_support(std::size_t from, std::size_t to) const;

  /// Parents before children; ties by node index.
  const std::vector<std::size_t>& topological_order() const { return topo_; }

  /// Node indices carrying `tag`.
  std::vector<std::size_t> nodes_with_tag(const Tag& tag) const;

  bool operator==(const Dag& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_;
  }

 private:
  std::vector<VariableDescriptor> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

/// Node and pair supports for a fixed set of dataset variables, computed in
/// one pass over the records. Agrees with weighted_count().
class SupportIndex {
 public:
  SupportIndex(const BinaryDataset& ds, WeightMode mode, std::span<const std::size_t> variables);

  double node(std::size_t variable) const;
  double pair(std::size_t a, std::size_t b) const;

 private:
  std::size_t local(std::size_t variable) const;

  std::vector<std::size_t> local_of_;  // dataset index -> local index or npos
  std::size_t size_ = 0;
  std::vector<double> matrix_;
};

/// Dataset indices of every variable whose tag is mentioned by the spec and
/// whose support reaches f(tag).
std::vector<std::size_t> select_nodes(const BinaryDataset& ds, const ArchitectureSpec& spec);

/// Adds every (v_i, v_j) edge of every pair whose co-occurrence support reaches g.
Dag build_edges(const BinaryDataset& ds, const ArchitectureSpec& spec,
                std::span<const std::size_t> nodes);

/// Keeps the `cap` strongest parents of every node (ties by parent name).
Dag enforce_parent_cap(const Dag& dag, int cap);

/// select_nodes + build_edges + the spec's parent cap.
Dag build_graph(const BinaryDataset& ds, const ArchitectureSpec& spec);

/// Output variables V_o: dataset variables of the use case's tag with support
/// reaching f(tag). Used for the baseline, which has no graph.
std::vector<std::size_t> baseline_outputs(const BinaryDataset& ds, const ArchitectureSpec& spec,
                                          UseCase use_case);

/// Graphviz digraph; edge pen width is proportional to support.
std::string export_dot(const Dag& dag);

}  // namespace riskbn
