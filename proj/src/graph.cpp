#include "riskbn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <set>

#include "riskbn/error.hpp"

namespace riskbn {

std::string_view to_string(UseCase use_case) {
  return use_case == UseCase::diagnostic ? "diagnostic" : "predictive";
}

UseCase use_case_from_string(std::string_view text) {
  if (text == "diagnostic" || text == "D") return UseCase::diagnostic;
  if (text == "predictive" || text == "P") return UseCase::predictive;
  throw SpecError("unknown use case '" + std::string(text) + "'");
}

Tag output_tag(UseCase use_case) {
  return use_case == UseCase::diagnostic ? tags::cause : tags::problem;
}

// ---------------------------------------------------------------------------
// ArchitectureSpec

double ArchitectureSpec::node_threshold(const Tag& tag) const {
  auto it = node_filter.find(tag);
  return it == node_filter.end() ? default_node_filter : it->second;
}

double ArchitectureSpec::edge_threshold(const TypePair& pair) const {
  auto it = edge_filter.find(pair);
  return it == edge_filter.end() ? default_edge_filter : it->second;
}

std::vector<Tag> ArchitectureSpec::mentioned_tags() const {
  std::vector<Tag> out;
  auto add = [&](const Tag& t) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  };
  for (const auto& p : pairs) {
    add(p.from);
    add(p.to);
  }
  return out;
}

void ArchitectureSpec::validate() const {
  if (parent_cap && *parent_cap < 1) throw SpecError("parent cap must be at least 1");
  if (std::isnan(default_node_filter) || default_node_filter < 0 ||
      std::isnan(default_edge_filter) || default_edge_filter < 0) {
    throw SpecError("filter thresholds must be nonnegative");
  }
  for (const auto& [tag, f] : node_filter) {
    if (std::isnan(f) || f < 0) throw SpecError("node filter for " + tag.code() + " is negative");
  }
  for (const auto& [pair, g] : edge_filter) {
    if (std::isnan(g) || g < 0) {
      throw SpecError("edge filter for (" + pair.from.code() + "," + pair.to.code() +
                      ") is negative");
    }
  }
  if (baseline) {
    if (!pairs.empty()) throw SpecError("baseline architecture must not declare pairs");
    return;
  }
  std::set<TypePair> seen;
  for (const auto& p : pairs) {
    if (p.from.empty() || p.to.empty()) throw SpecError("empty tag in architecture pair");
    if (!seen.insert(p).second) {
      throw SpecError("duplicate pair (" + p.from.code() + "," + p.to.code() + ")");
    }
  }

  // Kahn's algorithm on the type-level graph.
  const auto tags_list = mentioned_tags();
  std::map<Tag, int> indegree;
  for (const auto& t : tags_list) indegree[t] = 0;
  for (const auto& p : pairs) ++indegree[p.to];
  std::vector<Tag> ready;
  for (const auto& [t, d] : indegree) {
    if (d == 0) ready.push_back(t);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    Tag t = ready.back();
    ready.pop_back();
    ++visited;
    for (const auto& p : pairs) {
      if (p.from == t && --indegree[p.to] == 0) ready.push_back(p.to);
    }
  }
  if (visited != tags_list.size()) {
    throw SpecError("architecture '" + name + "' has a cyclic type graph");
  }
}

ArchitectureSpec inverted(const ArchitectureSpec& spec) {
  ArchitectureSpec out = spec;
  out.pairs.clear();
  for (const auto& p : spec.pairs) out.pairs.push_back({p.to, p.from});
  out.edge_filter.clear();
  for (const auto& [p, g] : spec.edge_filter) out.edge_filter[{p.to, p.from}] = g;
  out.name = spec.name + "-inverse";
  return out;
}

std::string_view architecture_title(std::string_view code) {
  if (code == "A0") return "Baseline";
  if (code == "A1") return "Kalinowski";
  if (code == "A2") return "Inverse Kalinowski";
  if (code == "A3") return "Survey";
  if (code == "A4") return "Inverse Survey";
  if (code == "A5") return "Simple";
  if (code == "A6") return "Simple with context";
  if (code == "A7") return "Inverse Simple";
  if (code == "A8") return "Inverse Simple with context";
  return "Custom";
}

ArchitectureSpec predefined_architecture(std::string_view code, std::span<const Tag> context_tags) {
  using namespace tags;
  ArchitectureSpec spec;
  spec.name = std::string(code);
  spec.parent_cap = kDefaultParentCap;

  auto simple = [&](bool with_context) {
    std::vector<TypePair> pairs = {{problem, cause}, {problem, effect}};
    if (with_context) {
      for (const auto& t : context_tags) pairs.push_back({t, problem});
    }
    return pairs;
  };
  auto reverse = [](std::vector<TypePair> pairs) {
    for (auto& p : pairs) std::swap(p.from, p.to);
    return pairs;
  };
  const std::vector<TypePair> kalinowski = {
      {cause_category, cause}, {cause, problem}, {problem, effect}, {effect, effect_category}};
  const std::vector<TypePair> survey = {{cause, problem}, {problem, effect}};

  if (code == "A0") {
    spec.baseline = true;
  } else if (code == "A1") {
    spec.pairs = kalinowski;
  } else if (code == "A2") {
    spec.pairs = reverse(kalinowski);
  } else if (code == "A3") {
    spec.pairs = survey;
  } else if (code == "A4") {
    spec.pairs = reverse(survey);
  } else if (code == "A5") {
    spec.pairs = simple(false);
  } else if (code == "A6") {
    spec.pairs = simple(true);
  } else if (code == "A7") {
    spec.pairs = reverse(simple(false));
  } else if (code == "A8") {
    spec.pairs = reverse(simple(true));
  } else {
    throw SpecError("unknown architecture code '" + std::string(code) + "'");
  }
  spec.validate();
  return spec;
}

ArchitectureSpec predefined_architecture(std::string_view code, const BinaryDataset& ds) {
  std::vector<Tag> context;
  for (const auto& t : ds.tags()) {
    if (!is_core_tag(t)) context.push_back(t);
  }
  if (code == "A1" || code == "A2") {
    const auto present = ds.tags();
    for (const auto& needed : {tags::cause_category, tags::effect_category}) {
      if (std::find(present.begin(), present.end(), needed) == present.end()) {
        throw SpecError(std::string(code) + " needs " + needed.code() +
                        " variables, which the dataset does not provide");
      }
    }
  }
  return predefined_architecture(code, context);
}

// ---------------------------------------------------------------------------
// Dag

Dag::Dag(std::vector<VariableDescriptor> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  const std::size_t n = nodes_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!by_name_.emplace(nodes_[i].name, i).second) {
      throw ContractError("duplicate node '" + nodes_[i].name + "'");
    }
  }
  parents_.assign(n, {});
  children_.assign(n, {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges_) {
    if (e.from >= n || e.to >= n) throw ContractError("edge endpoint is not a node");
    if (e.from == e.to) throw ContractError("self-loop on '" + nodes_[e.from].name + "'");
    if (!seen.emplace(e.from, e.to).second) {
      throw ContractError("duplicate edge " + nodes_[e.from].name + " -> " + nodes_[e.to].name);
    }
    parents_[e.to].push_back(e.from);
    children_[e.from].push_back(e.to);
  }
  for (auto& p : parents_) std::sort(p.begin(), p.end());
  for (auto& c : children_) std::sort(c.begin(), c.end());

  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = parents_[i].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const auto v = ready.top();
    ready.pop();
    topo_.push_back(v);
    for (auto c : children_[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (topo_.size() != n) throw ContractError("graph contains a cycle");
}

std::optional<std::size_t> Dag::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> Dag::edge_support(std::size_t from, std::size_t to) const {
  for (const auto& e : edges_) {
    if (e.from == from && e.to == to) return e.support;
  }
  return std::nullopt;
}

std::vector<std::size_t> Dag::nodes_with_tag(const Tag& tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].tag == tag) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Supports

SupportIndex::SupportIndex(const BinaryDataset& ds, WeightMode mode,
                           std::span<const std::size_t> variables)
    : local_of_(ds.variable_count(), std::numeric_limits<std::size_t>::max()),
      size_(variables.size()),
      matrix_(variables.size() * variables.size(), 0.0) {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i] >= ds.variable_count()) throw ContractError("variable index out of range");
    local_of_[variables[i]] = i;
  }
  if (mode == WeightMode::inverse_rank && !ds.has_rank_annotations() && !ds.empty()) {
    throw ContractError("inverse-rank weighting needs a dataset with rank annotations");
  }

  std::vector<std::size_t> record_level;
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (ds.variable(variables[i]).record_level()) record_level.push_back(i);
  }

  std::vector<std::size_t> present;
  auto accumulate = [&](double w) {
    for (auto a : present) {
      for (auto b : present) matrix_[a * size_ + b] += w;
    }
  };

  for (std::size_t s = 0; s < ds.sample_count(); ++s) {
    if (mode == WeightMode::occurrence) {
      present.clear();
      for (std::size_t i = 0; i < variables.size(); ++i) {
        if (ds.value(s, variables[i])) present.push_back(i);
      }
      accumulate(1.0);
      continue;
    }
    for (const auto& t : ds.triples(s)) {
      present.clear();
      for (auto v : t.variables) {
        const auto l = local_of_[v];
        if (l != std::numeric_limits<std::size_t>::max()) present.push_back(l);
      }
      for (auto l : record_level) {
        if (ds.value(s, variables[l])) present.push_back(l);
      }
      accumulate(inverse_rank(t.rank));
    }
  }
}

std::size_t SupportIndex::local(std::size_t variable) const {
  if (variable >= local_of_.size() || local_of_[variable] == std::numeric_limits<std::size_t>::max()) {
    throw ContractError("variable not covered by this support index");
  }
  return local_of_[variable];
}

double SupportIndex::node(std::size_t variable) const {
  const auto l = local(variable);
  return matrix_[l * size_ + l];
}

double SupportIndex::pair(std::size_t a, std::size_t b) const {
  return matrix_[local(a) * size_ + local(b)];
}

// ---------------------------------------------------------------------------
// Construction

namespace {

std::vector<std::size_t> candidates(const BinaryDataset& ds, const std::vector<Tag>& wanted) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.variable_count(); ++i) {
    if (std::find(wanted.begin(), wanted.end(), ds.variable(i).tag) != wanted.end()) {
      out.push_back(i);
    }
  }
  return out;
}

void require_tags(const BinaryDataset& ds, const std::vector<Tag>& wanted) {
  const auto present = ds.tags();
  for (const auto& t : wanted) {
    if (std::find(present.begin(), present.end(), t) == present.end()) {
      throw SpecError("dataset has no variables of type " + t.code());
    }
  }
}

std::vector<std::size_t> filter_by_support(const BinaryDataset& ds, const ArchitectureSpec& spec,
                                           const std::vector<Tag>& wanted) {
  require_tags(ds, wanted);
  const auto cand = candidates(ds, wanted);
  const SupportIndex supports(ds, spec.weight_mode, cand);
  std::vector<std::size_t> kept;
  for (auto v : cand) {
    if (supports.node(v) >= spec.node_threshold(ds.variable(v).tag)) kept.push_back(v);
  }
  return kept;
}

}  // namespace

std::vector<std::size_t> select_nodes(const BinaryDataset& ds, const ArchitectureSpec& spec) {
  spec.validate();
  return filter_by_support(ds, spec, spec.mentioned_tags());
}

std::vector<std::size_t> baseline_outputs(const BinaryDataset& ds, const ArchitectureSpec& spec,
                                          UseCase use_case) {
  spec.validate();
  return filter_by_support(ds, spec, {output_tag(use_case)});
}

Dag build_edges(const BinaryDataset& ds, const ArchitectureSpec& spec,
                std::span<const std::size_t> nodes) {
  spec.validate();
  std::vector<std::size_t> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<VariableDescriptor> descriptors;
  std::map<std::size_t, std::size_t> node_of;
  for (auto v : sorted) {
    node_of.emplace(v, descriptors.size());
    descriptors.push_back(ds.variable(v));
  }

  const SupportIndex supports(ds, spec.weight_mode, sorted);
  std::vector<Edge> edges;
  for (const auto& pair : spec.pairs) {
    const double g = spec.edge_threshold(pair);
    for (auto a : sorted) {
      if (ds.variable(a).tag != pair.from) continue;
      for (auto b : sorted) {
        if (ds.variable(b).tag != pair.to) continue;
        const double w = supports.pair(a, b);
        if (w >= g) edges.push_back({node_of.at(a), node_of.at(b), w});
      }
    }
  }
  try {
    return Dag(std::move(descriptors), std::move(edges));
  } catch (const ContractError& e) {
    throw InternalError(std::string("graph construction produced an invalid DAG: ") + e.what());
  }
}

Dag enforce_parent_cap(const Dag& dag, int cap) {
  if (cap < 1) throw ContractError("parent cap must be at least 1");
  std::vector<std::vector<const Edge*>> incoming(dag.node_count());
  for (const auto& e : dag.edges()) incoming[e.to].push_back(&e);

  std::set<const Edge*> keep;
  for (auto& in : incoming) {
    std::sort(in.begin(), in.end(), [&](const Edge* x, const Edge* y) {
      if (x->support != y->support) return x->support > y->support;
      return dag.node(x->from).name < dag.node(y->from).name;
    });
    const std::size_t n = std::min<std::size_t>(in.size(), static_cast<std::size_t>(cap));
    keep.insert(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::vector<Edge> edges;
  for (const auto& e : dag.edges()) {
    if (keep.contains(&e)) edges.push_back(e);
  }
  return Dag(std::vector<VariableDescriptor>(dag.nodes().begin(), dag.nodes().end()),
             std::move(edges));
}

Dag build_graph(const BinaryDataset& ds, const ArchitectureSpec& spec) {
  if (spec.baseline) throw SpecError("the baseline architecture has no graph");
  const auto nodes = select_nodes(ds, spec);
  Dag dag = build_edges(ds, spec, nodes);
  if (spec.parent_cap) dag = enforce_parent_cap(dag, *spec.parent_cap);
  return dag;
}

// ---------------------------------------------------------------------------
// DOT

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string_view fill_for(const Tag& tag) {
  if (tag == tags::problem) return "#f4cccc";
  if (tag == tags::cause) return "#cfe2f3";
  if (tag == tags::effect) return "#d9ead3";
  if (tag == tags::cause_category || tag == tags::effect_category) return "#fff2cc";
  return "#eeeeee";
}

}  // namespace

std::string export_dot(const Dag& dag) {
  if (dag.node_count() == 0) return "digraph {\n}\n";

  double max_support = 0.0;
  for (const auto& e : dag.edges()) max_support = std::max(max_support, e.support);

  std::string out = "digraph {\n";
  out += "  node [shape=box, style=\"rounded,filled\"];\n";
  for (const auto& v : dag.nodes()) {
    out += "  " + quote(v.name) + " [label=" + quote(v.tag.code() + ": " + v.label) +
           ", fillcolor=" + quote(fill_for(v.tag)) + "];\n";
  }
  for (const auto& e : dag.edges()) {
    double width = max_support > 0 ? 5.0 * e.support / max_support : 1.0;
    width = std::max(width, 0.25);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", width);
    char weight[64];
    std::snprintf(weight, sizeof weight, "%g", e.support);
    out += "  " + quote(dag.node(e.from).name) + " -> " + quote(dag.node(e.to).name) +
           " [penwidth=" + buf + ", tooltip=" + quote(std::string("support ") + weight) + "];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace riskbn
