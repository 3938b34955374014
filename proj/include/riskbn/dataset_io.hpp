#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "riskbn/dataset.hpp"

namespace riskbn {

using Json = nlohmann::json;

/// Raw survey: schema plus validated records.
struct SurveyData {
  Schema schema;
  std::vector<SurveyRecord> records;
  std::string digest;  // SHA-256 of the source bytes
};

std::string sha256_hex(std::string_view bytes);

Json schema_to_json(const Schema& schema);
Schema schema_from_json(const Json& j);

/// Dataset document: {"schema": {...}, "records": [...]}. If `schema` is
/// given it replaces the embedded one. Throws ParseError (with line),
/// SchemaError for undeclared names and ValidationError for bad rows.
SurveyData parse_survey_json(std::string_view text, const Schema* schema = nullptr);

/// One row per record with columns id, <context factor names>, and
/// problem_1..5 / cause_1..5 / effect_1..5 / rank_1..5.
std::vector<SurveyRecord> parse_survey_csv(std::string_view text, const Schema& schema);

Json survey_to_json(const Schema& schema, std::span<const SurveyRecord> records);

/// Reads a .json dataset document or, with a schema, a .csv file.
SurveyData load_raw(const std::filesystem::path& path, const std::optional<Schema>& schema = {});

/// Accepts either a bare schema object or a document with a "schema" key.
Schema load_schema(const std::filesystem::path& path);

Json descriptor_to_json(const VariableDescriptor& v);
VariableDescriptor descriptor_from_json(const Json& j);

Json discretization_to_json(const DiscretizationSpec& disc);
DiscretizationSpec discretization_from_json(const Json& j);

Json dataset_to_json(const BinaryDataset& ds);
BinaryDataset dataset_from_json(const Json& j);

/// True when `j` looks like a prepared (binarized) dataset document.
bool is_prepared_dataset(const Json& j);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Parses JSON text, mapping syntax errors to ParseError with a line number.
Json parse_json(std::string_view text);

}  // namespace riskbn
