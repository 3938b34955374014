#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "riskbn/model.hpp"

namespace riskbn {

/// Immutable after startup; lookups are safe from any thread.
class Registry {
 public:
  /// Throws ConfigError on a duplicate model id.
  void add(ModelRegistryEntry model);
  /// Loads one model file, or every *.json model file of a directory.
  void load(const std::filesystem::path& path);

  const ModelRegistryEntry* find(std::string_view model_id) const;
  std::vector<const ModelRegistryEntry*> entries() const;
  std::size_t size() const { return models_.size(); }

 private:
  std::map<std::string, std::shared_ptr<const ModelRegistryEntry>, std::less<>> models_;
};

struct ServiceOptions {
  std::chrono::milliseconds timeout{600'000};
  std::uint64_t default_seed = 0;
  int chains = 4;
  int burn_in = 1000;
  int samples_per_chain = 5000;
};

struct PredictRequest {
  Evidence evidence;
  std::size_t k = 5;
  double threshold = 0.3;
  std::optional<std::uint64_t> seed;
};

struct HttpResult {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Parses and checks a request body against a model. Errors come back as a
/// 4xx HttpResult instead of a request.
std::variant<PredictRequest, HttpResult> parse_predict_request(const ModelRegistryEntry& model,
                                                               std::string_view body);

/// Full response body, without timing so identical requests give identical bytes.
Json predict(const ModelRegistryEntry& model, const PredictRequest& request,
             const ServiceOptions& options);

/// Dispatches one request. Every route of the HTTP interface goes through here.
HttpResult route(const Registry& registry, const ServiceOptions& options, std::string_view method,
                 std::string_view path, std::string_view body);

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// "host:port", ":port" or "port".
BindAddress parse_bind_address(std::string_view text);
/// RISKBN_BIND when set, otherwise the default address.
BindAddress bind_address_from_env();

/// Thin HTTP wrapper around route().
class HttpServer {
 public:
  HttpServer(const Registry& registry, ServiceOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Returns the bound port; port 0 picks a free one. Throws ConfigError on failure.
  int bind(const BindAddress& address);
  /// Blocks until stop().
  void listen();
  /// Returns once listen() accepts connections.
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace riskbn
