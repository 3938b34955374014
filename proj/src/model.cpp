#include "riskbn/model.hpp"

#include <cmath>
#include <ctime>
#include <limits>

#include "riskbn/error.hpp"

namespace riskbn {

namespace {

Json threshold_json(double x) { return std::isinf(x) ? Json("inf") : Json(x); }

double threshold_from(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw SpecError("threshold must be a number or \"inf\"");
  }
  if (!j.is_number()) throw SpecError("threshold must be a number or \"inf\"");
  return j.get<double>();
}

TypePair pair_from(const Json& j) {
  if (j.is_array() && j.size() == 2) {
    return {Tag(j.at(0).get<std::string>()), Tag(j.at(1).get<std::string>())};
  }
  if (j.is_object()) return {Tag(j.at("from").get<std::string>()), Tag(j.at("to").get<std::string>())};
  throw SpecError("type pair must be [from, to] or {from, to}");
}

}  // namespace

Json spec_to_json(const ArchitectureSpec& spec) {
  Json pairs = Json::array();
  for (const auto& p : spec.pairs) pairs.push_back({p.from.code(), p.to.code()});
  Json nodes = Json::object();
  for (const auto& [tag, f] : spec.node_filter) nodes[tag.code()] = threshold_json(f);
  Json edges = Json::array();
  for (const auto& [p, g] : spec.edge_filter) {
    edges.push_back({{"from", p.from.code()}, {"to", p.to.code()}, {"g", threshold_json(g)}});
  }
  Json j = {{"name", spec.name},
            {"baseline", spec.baseline},
            {"pairs", std::move(pairs)},
            {"node_filter", std::move(nodes)},
            {"edge_filter", std::move(edges)},
            {"default_node_filter", threshold_json(spec.default_node_filter)},
            {"default_edge_filter", threshold_json(spec.default_edge_filter)},
            {"weight_mode", to_string(spec.weight_mode)}};
  j["parent_cap"] = spec.parent_cap ? Json(*spec.parent_cap) : Json(nullptr);
  return j;
}

ArchitectureSpec spec_from_json(const Json& j) {
  try {
    ArchitectureSpec spec;
    spec.name = j.value("name", "custom");
    spec.baseline = j.value("baseline", false);
    if (j.contains("pairs")) {
      for (const auto& p : j.at("pairs")) spec.pairs.push_back(pair_from(p));
    }
    if (j.contains("node_filter")) {
      for (const auto& [tag, f] : j.at("node_filter").items()) spec.node_filter[Tag(tag)] = threshold_from(f);
    }
    if (j.contains("edge_filter")) {
      for (const auto& e : j.at("edge_filter")) spec.edge_filter[pair_from(e)] = threshold_from(e.at("g"));
    }
    if (j.contains("default_node_filter")) spec.default_node_filter = threshold_from(j.at("default_node_filter"));
    if (j.contains("default_edge_filter")) spec.default_edge_filter = threshold_from(j.at("default_edge_filter"));
    if (j.contains("weight_mode")) {
      spec.weight_mode = weight_mode_from_string(j.at("weight_mode").get<std::string>());
    }
    if (j.contains("parent_cap") && !j.at("parent_cap").is_null()) {
      spec.parent_cap = j.at("parent_cap").get<int>();
    }
    spec.validate();
    return spec;
  } catch (const Json::exception& e) {
    throw SpecError(std::string("malformed architecture spec: ") + e.what());
  }
}

Json dag_to_json(const Dag& dag) {
  Json nodes = Json::array();
  for (const auto& v : dag.nodes()) nodes.push_back(descriptor_to_json(v));
  Json edges = Json::array();
  for (const auto& e : dag.edges()) {
    edges.push_back({{"from", dag.node(e.from).name}, {"to", dag.node(e.to).name}, {"support", e.support}});
  }
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

namespace {

std::size_t node_index(const std::map<std::string, std::size_t>& index, const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) throw SchemaError("model refers to unknown node '" + name + "'");
  return it->second;
}

}  // namespace

Dag dag_from_json(const Json& j) {
  try {
    std::vector<VariableDescriptor> nodes;
    std::map<std::string, std::size_t> index;
    for (const auto& n : j.at("nodes")) {
      nodes.push_back(descriptor_from_json(n));
      if (!index.emplace(nodes.back().name, nodes.size() - 1).second) {
        throw SchemaError("duplicate node '" + nodes.back().name + "'");
      }
    }
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      edges.push_back({node_index(index, e.at("from").get<std::string>()),
                       node_index(index, e.at("to").get<std::string>()),
                       e.value("support", 0.0)});
    }
    return Dag(std::move(nodes), std::move(edges));
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed graph: ") + e.what());
  }
}

Json network_to_json(const BayesianNetwork& bn) {
  Json j = dag_to_json(bn.dag());
  Json cpts = Json::array();
  for (const auto& c : bn.cpts()) {
    std::vector<std::string> parents;
    for (auto p : c.parents) parents.push_back(bn.dag().node(p).name);
    cpts.push_back({{"node", bn.dag().node(c.node).name}, {"parents", parents}, {"table", c.table}});
  }
  j["cpts"] = std::move(cpts);
  const auto& m = bn.fit_meta();
  j["fit_meta"] = {{"samples", m.samples}, {"alpha", m.alpha}, {"weight_mode", to_string(m.weight_mode)}};
  return j;
}

BayesianNetwork network_from_json(const Json& j) {
  Dag dag = dag_from_json(j);
  try {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dag.node_count(); ++i) index[dag.node(i).name] = i;
    std::vector<Cpt> cpts;
    for (const auto& c : j.at("cpts")) {
      Cpt cpt;
      cpt.node = node_index(index, c.at("node").get<std::string>());
      for (const auto& p : c.at("parents")) cpt.parents.push_back(node_index(index, p.get<std::string>()));
      cpt.table = c.at("table").get<std::vector<double>>();
      cpts.push_back(std::move(cpt));
    }
    FitMeta meta;
    const auto& m = j.at("fit_meta");
    meta.samples = m.value("samples", std::size_t{0});
    meta.alpha = m.value("alpha", 1.0);
    meta.weight_mode = weight_mode_from_string(m.value("weight_mode", "inverse-rank"));
    return BayesianNetwork(std::move(dag), std::move(cpts), meta);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed network: ") + e.what());
  }
}

const VariableDescriptor* ModelRegistryEntry::find_variable(std::string_view name) const {
  for (const auto& v : variables) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

ModelRegistryEntry build_model(const BinaryDataset& ds, const ArchitectureSpec& spec,
                               UseCase use_case, double alpha, std::string model_id,
                               std::string built_at) {
  if (model_id.empty()) throw ConfigError("model id must not be empty");
  FoldModel fitted = train_fold(ds, spec, use_case, alpha);
  ModelRegistryEntry m;
  m.model_id = std::move(model_id);
  m.architecture = spec.name;
  m.use_case = use_case;
  m.dataset_digest = ds.provenance().source_digest;
  m.built_at = std::move(built_at);
  m.spec = spec;
  m.outputs = fitted.outputs;
  if (fitted.network) {
    const auto nodes = fitted.network->dag().nodes();
    m.variables.assign(nodes.begin(), nodes.end());
    m.network = std::move(fitted.network);
  } else {
    for (const auto& name : m.outputs) m.variables.push_back(ds.variable(ds.index_of(name)));
    m.baseline = std::move(fitted.baseline);
  }
  return m;
}

Json model_to_json(const ModelRegistryEntry& m) {
  Json j = {{"format", "riskbn-model"},
            {"version", 1},
            {"model_id", m.model_id},
            {"architecture", m.architecture},
            {"use_case", to_string(m.use_case)},
            {"dataset_digest", m.dataset_digest},
            {"built_at", m.built_at},
            {"spec", spec_to_json(m.spec)},
            {"outputs", m.outputs}};
  if (m.network) {
    j["network"] = network_to_json(*m.network);
  } else {
    Json vars = Json::array();
    for (const auto& v : m.variables) vars.push_back(descriptor_to_json(v));
    j["variables"] = std::move(vars);
    j["baseline_frequencies"] = m.baseline.posteriors;
  }
  j["evaluation"] = m.evaluation ? report_to_json(*m.evaluation) : Json(nullptr);
  return j;
}

ModelRegistryEntry model_from_json(const Json& j) {
  try {
    if (j.value("format", "") != "riskbn-model") throw SchemaError("not a model file");
    ModelRegistryEntry m;
    m.model_id = j.at("model_id").get<std::string>();
    m.architecture = j.at("architecture").get<std::string>();
    m.use_case = use_case_from_string(j.at("use_case").get<std::string>());
    m.dataset_digest = j.value("dataset_digest", "");
    m.built_at = j.value("built_at", "");
    m.spec = spec_from_json(j.at("spec"));
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    if (j.contains("network") && !j.at("network").is_null()) {
      m.network = network_from_json(j.at("network"));
      const auto nodes = m.network->dag().nodes();
      m.variables.assign(nodes.begin(), nodes.end());
    } else {
      for (const auto& v : j.at("variables")) m.variables.push_back(descriptor_from_json(v));
      m.baseline.method = "baseline";
      m.baseline.posteriors = j.at("baseline_frequencies").get<std::map<std::string, double>>();
    }
    for (const auto& name : m.outputs) {
      if (!m.find_variable(name)) throw SchemaError("output '" + name + "' is not a model variable");
    }
    if (j.contains("evaluation") && !j.at("evaluation").is_null()) {
      m.evaluation = report_from_json(j.at("evaluation"));
    }
    return m;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelRegistryEntry& model) {
  write_file(path, model_to_json(model).dump(1) + "\n");
}

ModelRegistryEntry load_model(const std::filesystem::path& path) {
  return model_from_json(parse_json(read_file(path)));
}

std::string utc_timestamp_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace riskbn
