#include "riskbn/service.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "httplib.h"
#include "riskbn/error.hpp"

namespace riskbn {

// ---------------------------------------------------------------------------
// Registry

void Registry::add(ModelRegistryEntry model) {
  const std::string id = model.model_id;
  if (id.empty()) throw ConfigError("model id must not be empty");
  auto entry = std::make_shared<const ModelRegistryEntry>(std::move(model));
  if (!models_.emplace(id, std::move(entry)).second) {
    throw ConfigError("duplicate model id '" + id + "'");
  }
}

void Registry::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_directory(path)) {
    add(load_model(path));
    return;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const Json j = parse_json(read_file(f));
    if (j.is_object() && j.value("format", "") == "riskbn-model") add(model_from_json(j));
  }
}

const ModelRegistryEntry* Registry::find(std::string_view model_id) const {
  auto it = models_.find(model_id);
  return it == models_.end() ? nullptr : it->second.get();
}

std::vector<const ModelRegistryEntry*> Registry::entries() const {
  std::vector<const ModelRegistryEntry*> out;
  for (const auto& [id, m] : models_) out.push_back(m.get());
  return out;
}

// ---------------------------------------------------------------------------
// Handlers

namespace {

HttpResult json_result(int status, const Json& body) { return {status, "application/json", body.dump()}; }

HttpResult error_result(int status, std::string code, std::string message,
                        const ModelRegistryEntry* model = nullptr, Json extra = Json::object()) {
  Json body = {{"error", std::move(code)}, {"message", std::move(message)}};
  if (model) {
    body["model_id"] = model->model_id;
    body["dataset_digest"] = model->dataset_digest;
  }
  for (auto& [k, v] : extra.items()) body[k] = v;
  return json_result(status, body);
}

Json metrics_summary(const ModelRegistryEntry& m) {
  if (!m.evaluation) return nullptr;
  const auto& r = *m.evaluation;
  const RankingRow* at5 = r.ranking.at(5);
  auto opt = [](const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); };
  return {{"mean_acc", r.thresholds.mean_accuracy()},
          {"mean_rec", opt(r.thresholds.mean_recall())},
          {"mean_pre", opt(r.thresholds.mean_precision())},
          {"rank_precision_at_5", at5 ? Json(at5->precision) : Json(nullptr)},
          {"rank_recall_at_5", at5 ? opt(at5->recall) : Json(nullptr)},
          {"mean_output_count", r.mean_output_count()}};
}

HttpResult list_models(const Registry& registry) {
  Json out = Json::array();
  for (const auto* m : registry.entries()) {
    out.push_back({{"model_id", m->model_id},
                   {"architecture", m->architecture},
                   {"title", architecture_title(m->architecture)},
                   {"use_case", to_string(m->use_case)},
                   {"dataset_digest", m->dataset_digest},
                   {"built_at", m->built_at},
                   {"baseline", m->is_baseline()},
                   {"metrics_summary", metrics_summary(*m)}});
  }
  return json_result(200, out);
}

HttpResult list_variables(const ModelRegistryEntry& m) {
  const Tag out_tag = output_tag(m.use_case);
  std::vector<Tag> order = {tags::problem, tags::cause, tags::effect, tags::cause_category,
                            tags::effect_category};
  for (const auto& v : m.variables) {
    if (std::find(order.begin(), order.end(), v.tag) == order.end()) order.push_back(v.tag);
  }
  Json groups = Json::array();
  for (const auto& tag : order) {
    Json vars = Json::array();
    for (const auto& v : m.variables) {
      if (v.tag != tag) continue;
      Json j = descriptor_to_json(v);
      j["output"] = v.tag == out_tag;
      vars.push_back(std::move(j));
    }
    if (vars.empty()) continue;
    groups.push_back({{"tag", tag.code()}, {"output", tag == out_tag}, {"variables", std::move(vars)}});
  }
  return json_result(200, {{"model_id", m.model_id},
                           {"dataset_digest", m.dataset_digest},
                           {"use_case", to_string(m.use_case)},
                           {"output_tag", out_tag.code()},
                           {"groups", std::move(groups)}});
}

HttpResult graph_dot(const ModelRegistryEntry& m) {
  const std::string dot = m.network ? export_dot(m.network->dag()) : export_dot(Dag{});
  return {200, "text/vnd.graphviz", dot};
}

HttpResult metrics(const ModelRegistryEntry& m) {
  if (!m.evaluation) {
    return error_result(404, "no_evaluation", "model '" + m.model_id + "' has no evaluation report", &m);
  }
  Json body = report_to_json(*m.evaluation);
  body["model_id"] = m.model_id;
  body["dataset_digest"] = m.dataset_digest;
  return json_result(200, body);
}

}  // namespace

std::variant<PredictRequest, HttpResult> parse_predict_request(const ModelRegistryEntry& model,
                                                               std::string_view body) {
  Json j;
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    j = Json::object();
  } else {
    j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) return error_result(400, "bad_request", "request body is not valid JSON", &model);
  }
  if (!j.is_object()) return error_result(400, "bad_request", "request body must be an object", &model);

  PredictRequest req;
  if (j.contains("k")) {
    const auto& k = j.at("k");
    if (!k.is_number_integer() || k.get<long long>() < 1) {
      return error_result(422, "invalid_field", "k must be a positive integer", &model, {{"field", "k"}});
    }
    req.k = k.get<std::size_t>();
  }
  if (j.contains("threshold")) {
    const auto& t = j.at("threshold");
    if (!t.is_number() || !(t.get<double>() >= 0.0 && t.get<double>() <= 1.0)) {
      return error_result(422, "invalid_field", "threshold must be a number in [0, 1]", &model,
                          {{"field", "threshold"}});
    }
    req.threshold = t.get<double>();
  }
  if (j.contains("seed") && !j.at("seed").is_null()) {
    const auto& s = j.at("seed");
    if (!s.is_number_unsigned()) {
      return error_result(422, "invalid_field", "seed must be a nonnegative integer", &model,
                          {{"field", "seed"}});
    }
    req.seed = s.get<std::uint64_t>();
  }
  if (j.contains("evidence")) {
    const auto& ev = j.at("evidence");
    if (!ev.is_array()) {
      return error_result(422, "invalid_field", "evidence must be a list", &model, {{"field", "evidence"}});
    }
    const Tag out_tag = output_tag(model.use_case);
    for (const auto& item : ev) {
      if (!item.is_object() || !item.contains("variable") || !item.at("variable").is_string() ||
          !item.contains("value") || !item.at("value").is_boolean()) {
        return error_result(422, "invalid_field",
                            "evidence items need a variable name and a boolean value", &model,
                            {{"field", "evidence"}});
      }
      const auto name = item.at("variable").get<std::string>();
      const bool value = item.at("value").get<bool>();
      const VariableDescriptor* v = model.find_variable(name);
      if (!v) {
        return error_result(422, "unknown_variable", "'" + name + "' is not a variable of this model",
                            &model, {{"variable", name}});
      }
      if (v->tag == out_tag) {
        return error_result(422, "output_variable",
                            "'" + name + "' is an output of this use case and cannot be evidence",
                            &model, {{"variable", name}});
      }
      auto it = req.evidence.values.find(name);
      if (it != req.evidence.values.end() && it->second != value) {
        return error_result(422, "conflicting_evidence", "'" + name + "' is given both values", &model,
                            {{"variable", name}});
      }
      req.evidence.set(name, value);
    }
  }
  return req;
}

Json predict(const ModelRegistryEntry& model, const PredictRequest& request,
             const ServiceOptions& options) {
  const std::uint64_t seed = request.seed.value_or(options.default_seed);
  PosteriorReport report;
  if (model.network) {
    SamplerConfig cfg(seed);
    cfg.chains = options.chains;
    cfg.burn_in = options.burn_in;
    cfg.samples_per_chain = options.samples_per_chain;
    InferenceOptions opts;
    opts.deadline = std::chrono::steady_clock::now() + options.timeout;
    report = infer(*model.network, request.evidence, model.outputs, cfg, InferenceMethod::automatic, opts);
  } else {
    report = model.baseline;
  }

  const auto ranking = predict_ranking(report, request.k, request.threshold);
  Json items = Json::array();
  for (const auto& r : ranking) {
    const VariableDescriptor* v = model.find_variable(r.variable);
    items.push_back({{"variable", r.variable},
                     {"label", v ? v->label : r.variable},
                     {"probability", r.probability}});
  }
  const std::size_t listed = std::min(request.k, report.posteriors.size());

  Json diag = {{"method", report.method},
               {"evidence_count", request.evidence.values.size()},
               {"output_count", model.outputs.size()},
               {"seed", seed}};
  if (report.sampler) {
    diag["sampler"] = {{"chains", report.sampler->chains},
                       {"burn_in", report.sampler->burn_in},
                       {"samples_per_chain", report.sampler->samples_per_chain},
                       {"sampled_nodes", report.sampler->sampled_nodes}};
  }
  return {{"model_id", model.model_id},
          {"dataset_digest", model.dataset_digest},
          {"use_case", to_string(model.use_case)},
          {"ranking", std::move(items)},
          {"cutoff", {{"k", request.k}, {"t", request.threshold}}},
          {"suppressed", listed - ranking.size()},
          {"diagnostics", std::move(diag)}};
}

namespace {

HttpResult handle_predict(const ModelRegistryEntry& m, const ServiceOptions& options,
                          std::string_view body) {
  auto parsed = parse_predict_request(m, body);
  if (auto* err = std::get_if<HttpResult>(&parsed)) return *err;
  try {
    return json_result(200, predict(m, std::get<PredictRequest>(parsed), options));
  } catch (const ImpossibleEvidenceError& e) {
    return error_result(422, "impossible_evidence", e.what(), &m);
  } catch (const TimeoutError& e) {
    return error_result(504, "timeout", e.what(), &m);
  } catch (const Error& e) {
    return error_result(500, "inference_failed", e.what(), &m);
  }
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    const std::size_t j = std::min(path.find('/', i), path.size());
    parts.push_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

}  // namespace

HttpResult route(const Registry& registry, const ServiceOptions& options, std::string_view method,
                 std::string_view path, std::string_view body) {
  const auto parts = split_path(path.substr(0, path.find('?')));
  if (parts.empty() || parts[0] != "models" || parts.size() > 3) {
    return error_result(404, "not_found", "no route for " + std::string(path));
  }
  auto expect = [&](std::string_view m) { return method == m; };
  if (parts.size() == 1) {
    return expect("GET") ? list_models(registry)
                         : error_result(405, "method_not_allowed", "use GET");
  }
  const ModelRegistryEntry* model = registry.find(parts[1]);
  if (!model) {
    return error_result(404, "unknown_model", "no model '" + std::string(parts[1]) + "'", nullptr,
                        {{"model_id", std::string(parts[1])}});
  }
  if (parts.size() == 2) return error_result(404, "not_found", "no route for " + std::string(path), model);

  const auto leaf = parts[2];
  if (leaf == "predict") {
    return expect("POST") ? handle_predict(*model, options, body)
                          : error_result(405, "method_not_allowed", "use POST", model);
  }
  const bool known = leaf == "variables" || leaf == "graph.dot" || leaf == "metrics";
  if (!known) return error_result(404, "not_found", "no route for " + std::string(path), model);
  if (!expect("GET")) return error_result(405, "method_not_allowed", "use GET", model);
  if (leaf == "variables") return list_variables(*model);
  if (leaf == "graph.dot") return graph_dot(*model);
  return metrics(*model);
}

BindAddress parse_bind_address(std::string_view text) {
  BindAddress out;
  std::string_view port_text = text;
  const auto colon = text.rfind(':');
  if (colon != std::string_view::npos) {
    if (colon > 0) out.host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  int port = -1;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    throw ConfigError("invalid bind address '" + std::string(text) + "'");
  }
  out.port = port;
  return out;
}

BindAddress bind_address_from_env() {
  const char* env = std::getenv("RISKBN_BIND");
  if (!env || !*env) return {};
  return parse_bind_address(env);
}

// ---------------------------------------------------------------------------
// HTTP server

struct HttpServer::Impl {
  const Registry& registry;
  ServiceOptions options;
  httplib::Server server;

  Impl(const Registry& r, ServiceOptions o) : registry(r), options(o) {}
};

HttpServer::HttpServer(const Registry& registry, ServiceOptions options)
    : impl_(std::make_unique<Impl>(registry, options)) {
  auto& svr = impl_->server;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  auto handler = [impl = impl_.get()](const httplib::Request& req, httplib::Response& res) {
    const HttpResult r = route(impl->registry, impl->options, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  svr.Get(".*", handler);
  svr.Post(".*", handler);
  svr.Put(".*", handler);
  svr.Delete(".*", handler);
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unexpected failure";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(Json{{"error", "internal"}, {"message", what}}.dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const BindAddress& address) {
  auto& svr = impl_->server;
  if (address.port == 0) {
    const int port = svr.bind_to_any_port(address.host);
    if (port < 0) throw ConfigError("cannot bind " + address.host);
    return port;
  }
  if (!svr.bind_to_port(address.host, address.port)) {
    throw ConfigError("cannot bind " + address.host + ":" + std::to_string(address.port));
  }
  return address.port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace riskbn
