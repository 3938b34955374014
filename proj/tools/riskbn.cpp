#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "riskbn/dataset.hpp"
#include "riskbn/dataset_io.hpp"
#include "riskbn/error.hpp"
#include "riskbn/evaluation.hpp"
#include "riskbn/graph.hpp"
#include "riskbn/inference.hpp"
#include "riskbn/model.hpp"
#include "riskbn/service.hpp"

namespace fs = std::filesystem;
using namespace riskbn;

namespace {

struct SpecFlags {
  std::string arch;
  std::optional<int> cap;
  bool no_cap = false;
  std::vector<std::string> node_filters;  // TAG=F
  std::vector<std::string> edge_filters;  // FROM,TO=G
  std::optional<double> default_f;
  std::optional<double> default_g;
  std::optional<std::string> weight;

  void add_to(CLI::App* app, bool arch_required) {
    auto* a = app->add_option("--arch", arch, "architecture code A0..A8 or a JSON spec file");
    if (arch_required) a->required();
    auto* c = app->add_option("--cap", cap, "maximum number of parents per node")->check(CLI::PositiveNumber);
    app->add_flag("--no-cap", no_cap, "lift the parent cap")->excludes(c);
    app->add_option("--f", node_filters, "node filter override TAG=F (repeatable)");
    app->add_option("--g", edge_filters, "edge filter override FROM,TO=G (repeatable)");
    app->add_option("--default-f", default_f, "node filter for tags without an override");
    app->add_option("--default-g", default_g, "edge filter for pairs without an override");
    app->add_option("--weight", weight, "support weighting: occurrence or inverse-rank");
  }
};

double parse_threshold(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) throw ConfigError("invalid threshold '" + text + "'");
  return x;
}

ArchitectureSpec resolve_spec(const SpecFlags& flags, const BinaryDataset* ds,
                              std::span<const Tag> context) {
  ArchitectureSpec spec;
  if (fs::is_regular_file(flags.arch)) {
    spec = spec_from_json(parse_json(read_file(flags.arch)));
  } else if (ds) {
    spec = predefined_architecture(flags.arch, *ds);
  } else {
    spec = predefined_architecture(flags.arch, context);
  }
  if (flags.cap) spec.parent_cap = *flags.cap;
  if (flags.no_cap) spec.parent_cap.reset();
  if (flags.default_f) spec.default_node_filter = *flags.default_f;
  if (flags.default_g) spec.default_edge_filter = *flags.default_g;
  if (flags.weight) spec.weight_mode = weight_mode_from_string(*flags.weight);
  for (const auto& item : flags.node_filters) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("node filter must look like TAG=F");
    spec.node_filter[Tag(item.substr(0, eq))] = parse_threshold(item.substr(eq + 1));
  }
  for (const auto& item : flags.edge_filters) {
    const auto eq = item.find('=');
    const auto comma = item.find(',');
    if (eq == std::string::npos || comma == std::string::npos || comma > eq) {
      throw ConfigError("edge filter must look like FROM,TO=G");
    }
    spec.edge_filter[{Tag(item.substr(0, comma)), Tag(item.substr(comma + 1, eq - comma - 1))}] =
        parse_threshold(item.substr(eq + 1));
  }
  spec.validate();
  return spec;
}

struct LoadedData {
  std::optional<BinaryDataset> prepared;
  std::optional<SurveyData> raw;
};

LoadedData load_any(const std::string& path, const std::string& schema_path) {
  LoadedData out;
  if (fs::path(path).extension() == ".json") {
    const Json j = parse_json(read_file(path));
    if (is_prepared_dataset(j)) {
      out.prepared = dataset_from_json(j);
      return out;
    }
  }
  std::optional<Schema> schema;
  if (!schema_path.empty()) schema = load_schema(schema_path);
  out.raw = load_raw(path, schema);
  return out;
}

BinaryDataset binarize_all(const SurveyData& data, std::vector<std::string>* warnings) {
  const auto disc = fit_discretizations(data.records, data.schema, warnings);
  return binarize(data.records, data.schema, disc, data.digest);
}

std::vector<Tag> context_tags(const Schema& schema) {
  std::vector<Tag> out;
  for (const auto& f : schema.context) {
    if (!is_core_tag(f.tag)) out.push_back(f.tag);
  }
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

struct SamplerFlags {
  int chains = 4;
  int burn_in = 1000;
  int samples = 5000;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--chains", chains, "Gibbs chains")->check(CLI::PositiveNumber);
    app->add_option("--burn-in", burn_in, "Gibbs burn-in sweeps per chain")->check(CLI::NonNegativeNumber);
    app->add_option("--samples", samples, "retained Gibbs sweeps per chain")->check(CLI::PositiveNumber);
    app->add_option("--sampler-seed", seed, "Gibbs seed");
  }
};

HttpServer* active_server = nullptr;

extern "C" void on_signal(int) {
  if (active_server) active_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian-network risk prediction from requirements-engineering survey data"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "binarize a raw survey file");
  std::string prep_input, prep_schema, prep_out;
  prepare->add_option("--input", prep_input, "raw survey (.json or .csv)")->required()->check(CLI::ExistingFile);
  prepare->add_option("--schema", prep_schema, "schema file; required for CSV input")->check(CLI::ExistingFile);
  prepare->add_option("--out", prep_out, "binarized dataset file")->required();

  // train
  auto* train = app.add_subcommand("train", "build, fit and serialize one model");
  std::string train_data, train_schema, train_out, train_id, train_built_at, train_dot, train_eval;
  std::string train_use_case;
  double train_alpha = 1.0;
  SpecFlags train_spec;
  train->add_option("--dataset", train_data, "binarized dataset or raw survey")->required()->check(CLI::ExistingFile);
  train->add_option("--schema", train_schema, "schema for a raw survey")->check(CLI::ExistingFile);
  train_spec.add_to(train, true);
  train->add_option("--use-case", train_use_case, "diagnostic or predictive")->required();
  train->add_option("--alpha", train_alpha, "Laplace smoothing")->check(CLI::NonNegativeNumber);
  train->add_option("--out", train_out, "model file")->required();
  train->add_option("--model-id", train_id, "registry id; defaults to ARCH-USECASE");
  train->add_option("--built-at", train_built_at, "build timestamp; defaults to now (UTC)");
  train->add_option("--dot", train_dot, "also write the graph in DOT format");
  train->add_option("--evaluation", train_eval, "attach an evaluation report JSON")->check(CLI::ExistingFile);

  // validate
  auto* validate = app.add_subcommand("validate", "cross-validate architectures");
  std::string val_data, val_schema, val_json, val_table, val_curves, val_method = "auto";
  std::vector<std::string> val_archs;
  std::vector<std::string> val_use_cases;
  int val_reps = 10;
  std::size_t val_holdout = 30;
  std::uint64_t val_seed = 0;
  double val_alpha = 1.0;
  SpecFlags val_spec;
  SamplerFlags val_sampler;
  validate->add_option("--dataset", val_data, "binarized dataset or raw survey")->required()->check(CLI::ExistingFile);
  validate->add_option("--schema", val_schema, "schema for a raw survey")->check(CLI::ExistingFile);
  val_spec.add_to(validate, false);
  validate->add_option("--archs", val_archs, "several architectures in one run");
  validate->add_option("--use-case", val_use_cases, "diagnostic and/or predictive")->required();
  validate->add_option("--reps", val_reps, "repetitions")->check(CLI::PositiveNumber);
  validate->add_option("--holdout", val_holdout, "test samples per repetition")->check(CLI::PositiveNumber);
  validate->add_option("--seed", val_seed, "fold seed");
  validate->add_option("--alpha", val_alpha, "Laplace smoothing")->check(CLI::NonNegativeNumber);
  validate->add_option("--method", val_method, "auto, exact or gibbs");
  validate->add_option("--json", val_json, "report JSON (an array when several runs)");
  validate->add_option("--table", val_table, "summary CSV, one row per run");
  validate->add_option("--curves", val_curves, "directory for per-threshold CSV files");
  val_sampler.add_to(validate);

  // serve
  auto* serve = app.add_subcommand("serve", "serve registered models over HTTP");
  std::vector<std::string> serve_models;
  std::string serve_bind;
  double serve_timeout = 600.0;
  std::uint64_t serve_seed = 0;
  SamplerFlags serve_sampler;
  serve->add_option("--models", serve_models, "model files or directories")->required();
  serve->add_option("--bind", serve_bind, "host:port; defaults to RISKBN_BIND or 127.0.0.1:8080");
  serve->add_option("--timeout", serve_timeout, "inference timeout in seconds")->check(CLI::PositiveNumber);
  serve->add_option("--seed", serve_seed, "seed for requests that carry none");
  serve_sampler.add_to(serve);

  // predict
  auto* pred = app.add_subcommand("predict", "rank outputs for one evidence set");
  std::string pred_model, pred_request;
  std::vector<std::string> pred_evidence;
  std::size_t pred_k = 5;
  double pred_t = 0.3;
  std::optional<std::uint64_t> pred_seed;
  bool pred_json = false;
  SamplerFlags pred_sampler;
  pred->add_option("--model", pred_model, "model file")->required()->check(CLI::ExistingFile);
  pred->add_option("--evidence", pred_evidence, "NAME=true|false (repeatable)");
  pred->add_option("--request", pred_request, "PredictRequest JSON file")->check(CLI::ExistingFile);
  pred->add_option("-k", pred_k, "ranking length")->check(CLI::PositiveNumber);
  pred->add_option("-t,--threshold", pred_t, "probability cutoff")->check(CLI::Range(0.0, 1.0));
  pred->add_option("--seed", pred_seed, "sampler seed");
  pred->add_flag("--json", pred_json, "print the full response");
  pred_sampler.add_to(pred);

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      std::vector<std::string> warnings;
      const auto data = load_any(prep_input, prep_schema);
      if (!data.raw) throw ConfigError("input is already a binarized dataset");
      const auto ds = binarize_all(*data.raw, &warnings);
      print_warnings(warnings);
      write_file(prep_out, dataset_to_json(ds).dump(1) + "\n");
      std::cout << "records " << ds.sample_count() << " variables " << ds.variable_count() << "\n";
      return 0;
    }

    if (train->parsed()) {
      std::vector<std::string> warnings;
      auto data = load_any(train_data, train_schema);
      const BinaryDataset ds = data.prepared ? *data.prepared : binarize_all(*data.raw, &warnings);
      print_warnings(warnings);
      const UseCase uc = use_case_from_string(train_use_case);
      const ArchitectureSpec spec = resolve_spec(train_spec, &ds, {});
      if (train_id.empty()) train_id = spec.name + "-" + std::string(to_string(uc));
      if (train_built_at.empty()) train_built_at = utc_timestamp_now();
      auto model = build_model(ds, spec, uc, train_alpha, train_id, train_built_at);
      if (!train_eval.empty()) model.evaluation = report_from_json(parse_json(read_file(train_eval)));
      save_model(train_out, model);
      const std::size_t nodes = model.network ? model.network->dag().node_count() : 0;
      const std::size_t edges = model.network ? model.network->dag().edge_count() : 0;
      if (!train_dot.empty()) {
        write_file(train_dot, model.network ? export_dot(model.network->dag()) : export_dot(Dag{}));
      }
      std::cout << "model " << model.model_id << " nodes " << nodes << " edges " << edges
                << " outputs " << model.outputs.size() << "\n";
      return 0;
    }

    if (validate->parsed()) {
      std::vector<std::string> warnings;
      auto data = load_any(val_data, val_schema);
      std::optional<FoldSource> source;
      std::vector<Tag> context;
      std::optional<BinaryDataset> full;
      if (data.prepared) {
        full = *data.prepared;
        source = FoldSource::prepared(*data.prepared);
      } else {
        context = context_tags(data.raw->schema);
        full = binarize_all(*data.raw, &warnings);
        source = FoldSource::survey(*data.raw);
      }
      if (!val_spec.arch.empty()) val_archs.insert(val_archs.begin(), val_spec.arch);
      if (val_archs.empty()) throw ConfigError("give --arch or --archs");

      ValidationOptions opts;
      opts.alpha = val_alpha;
      opts.method = inference_method_from_string(val_method);
      opts.sampler = SamplerConfig(val_sampler.seed);
      opts.sampler.chains = val_sampler.chains;
      opts.sampler.burn_in = val_sampler.burn_in;
      opts.sampler.samples_per_chain = val_sampler.samples;

      const FoldPlan plan = split_folds(source->size(), val_reps, val_holdout, val_seed, &warnings);
      print_warnings(warnings);
      std::vector<EvaluationReport> reports;
      for (const auto& uc_text : val_use_cases) {
        const UseCase uc = use_case_from_string(uc_text);
        for (const auto& arch : val_archs) {
          SpecFlags flags = val_spec;
          flags.arch = arch;
          const ArchitectureSpec spec = resolve_spec(flags, &*full, context);
          auto report = run_cross_validation(*source, spec, uc, plan, opts);
          print_warnings(report.warnings);
          const auto rec = report.thresholds.mean_recall();
          const auto pre = report.thresholds.mean_precision();
          std::printf("%s %-10s acc %.3f rec %s pre %s outputs %.1f\n", std::string(to_string(uc)).c_str(),
                      spec.name.c_str(), report.thresholds.mean_accuracy(),
                      rec ? std::to_string(*rec).substr(0, 5).c_str() : "n/a",
                      pre ? std::to_string(*pre).substr(0, 5).c_str() : "n/a", report.mean_output_count());
          reports.push_back(std::move(report));
        }
      }
      if (!val_json.empty()) {
        Json out;
        if (reports.size() == 1) {
          out = report_to_json(reports.front());
        } else {
          out = Json::array();
          for (const auto& r : reports) out.push_back(report_to_json(r));
        }
        write_file(val_json, out.dump(1) + "\n");
      }
      if (!val_table.empty()) write_file(val_table, report_table_csv(reports));
      if (!val_curves.empty()) {
        fs::create_directories(val_curves);
        for (const auto& r : reports) {
          const std::string name = r.architecture + "-" + std::string(to_string(r.use_case)) + ".csv";
          write_file(fs::path(val_curves) / name, report_curves_csv(r));
        }
      }
      return 0;
    }

    ServiceOptions service_opts;
    auto apply_sampler = [&](const SamplerFlags& s) {
      service_opts.chains = s.chains;
      service_opts.burn_in = s.burn_in;
      service_opts.samples_per_chain = s.samples;
      service_opts.default_seed = s.seed;
    };

    if (serve->parsed()) {
      apply_sampler(serve_sampler);
      service_opts.default_seed = serve_seed;
      service_opts.timeout = std::chrono::milliseconds(static_cast<long long>(serve_timeout * 1000.0));
      Registry registry;
      for (const auto& m : serve_models) registry.load(m);
      if (registry.size() == 0) throw ConfigError("no models to serve");
      const BindAddress address = serve_bind.empty() ? bind_address_from_env() : parse_bind_address(serve_bind);
      HttpServer server(registry, service_opts);
      const int port = server.bind(address);
      std::cout << "serving " << registry.size() << " model(s) on " << address.host << ":" << port
                << std::endl;
      active_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      active_server = nullptr;
      return 0;
    }

    if (pred->parsed()) {
      apply_sampler(pred_sampler);
      const ModelRegistryEntry model = load_model(pred_model);
      Json request = pred_request.empty() ? Json::object() : parse_json(read_file(pred_request));
      if (!request.is_object()) throw ConfigError("request file must hold a JSON object");
      if (!request.contains("evidence")) request["evidence"] = Json::array();
      for (const auto& item : pred_evidence) {
        const auto eq = item.rfind('=');
        const std::string value = eq == std::string::npos ? "" : item.substr(eq + 1);
        if (value != "true" && value != "false") throw ConfigError("evidence must look like NAME=true|false");
        request["evidence"].push_back({{"variable", item.substr(0, eq)}, {"value", value == "true"}});
      }
      if (pred->count("-k") || !request.contains("k")) request["k"] = pred_k;
      if (pred->count("--threshold") || !request.contains("threshold")) request["threshold"] = pred_t;
      if (pred_seed) request["seed"] = *pred_seed;

      auto parsed = parse_predict_request(model, request.dump());
      if (auto* err = std::get_if<HttpResult>(&parsed)) {
        std::cerr << "error: " << parse_json(err->body).value("message", "invalid request") << "\n";
        return 1;
      }
      const Json response = predict(model, std::get<PredictRequest>(parsed), service_opts);
      if (pred_json) {
        std::cout << response.dump(1) << "\n";
        return 0;
      }
      int rank = 0;
      for (const auto& item : response.at("ranking")) {
        const double p = item.at("probability").get<double>();
        std::printf("%d %3.0f%% %.4f %s\n", ++rank, std::round(p * 100.0), p,
                    item.at("variable").get<std::string>().c_str());
      }
      if (response.at("ranking").empty()) std::printf("no output above threshold %g\n", pred_t);
      return 0;
    }
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
