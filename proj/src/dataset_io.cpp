#include "riskbn/dataset_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>

#include "riskbn/error.hpp"

namespace riskbn {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw InternalError("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ConfigError("write to '" + path.string() + "' failed");
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(
                              std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError(e.what(), line);
  }
}

// ---------------------------------------------------------------------------
// Schema

Json schema_to_json(const Schema& schema) {
  Json j;
  j["problems"] = schema.problems;
  j["causes"] = schema.causes;
  j["effects"] = schema.effects;
  j["categories"] = {{"cause", schema.cause_categories}, {"effect", schema.effect_categories}};
  Json ctx = Json::array();
  for (const auto& f : schema.context) {
    Json jf = {{"name", f.name}, {"tag", f.tag.code()}, {"type", to_string(f.type)}};
    if (!f.levels.empty()) jf["levels"] = f.levels;
    if (f.type == FactorType::continuous) jf["intervals"] = f.intervals;
    ctx.push_back(std::move(jf));
  }
  j["context"] = std::move(ctx);
  return j;
}

Schema schema_from_json(const Json& j) {
  try {
    Schema s;
    s.problems = j.value("problems", std::vector<std::string>{});
    s.causes = j.value("causes", std::vector<std::string>{});
    s.effects = j.value("effects", std::vector<std::string>{});
    if (j.contains("categories")) {
      const auto& cats = j.at("categories");
      s.cause_categories =
          cats.value("cause", std::map<std::string, std::vector<std::string>>{});
      s.effect_categories =
          cats.value("effect", std::map<std::string, std::vector<std::string>>{});
    }
    for (const auto& jf : j.value("context", Json::array())) {
      ContextFactor f;
      f.name = jf.at("name").get<std::string>();
      f.tag = Tag(jf.at("tag").get<std::string>());
      f.type = factor_type_from_string(jf.at("type").get<std::string>());
      f.levels = jf.value("levels", std::vector<std::string>{});
      f.intervals = jf.value("intervals", 0);
      s.context.push_back(std::move(f));
    }
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

Schema load_schema(const std::filesystem::path& path) {
  Json j = parse_json(read_file(path));
  if (j.contains("schema")) return schema_from_json(j.at("schema"));
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// Survey records

namespace {

bool is_unknown_text(std::string_view s) {
  return s.empty() || s == "unknown" || s == "NA" || s == "n/a";
}

ContextValue context_from_json(const Json& v, const ContextFactor* f) {
  if (v.is_null()) return std::monostate{};
  if (v.is_string() && v.get<std::string>() == "unknown") return std::monostate{};
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) {
    if (f && f->type == FactorType::binary && v.is_number_integer()) {
      const auto x = v.get<long long>();
      if (x == 0 || x == 1) return x == 1;
    }
    return v.get<double>();
  }
  if (v.is_string()) return v.get<std::string>();
  throw Error("unsupported context value " + v.dump());
}

Json context_to_json(const ContextValue& v) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else {
          return x;
        }
      },
      v);
}

std::optional<std::string> optional_name(const Json& t, const char* key) {
  if (!t.contains(key) || t.at(key).is_null()) return std::nullopt;
  auto s = t.at(key).get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

void validate_all(const Schema& schema, const std::vector<SurveyRecord>& records,
                  std::vector<RowDiagnostic> diagnostics) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool undeclared = false;
    if (auto msg = check_record(schema, records[i], &undeclared)) {
      if (undeclared) {
        throw SchemaError("row " + std::to_string(i) + " (id " + records[i].id + "): " + *msg);
      }
      diagnostics.push_back({i, records[i].id, *msg});
    }
  }
  if (!diagnostics.empty()) {
    std::sort(diagnostics.begin(), diagnostics.end(),
              [](const auto& a, const auto& b) { return a.row < b.row; });
    throw ValidationError(std::move(diagnostics));
  }
}

}  // namespace

SurveyData parse_survey_json(std::string_view text, const Schema* schema) {
  Json doc = parse_json(text);
  if (!doc.is_object()) throw ParseError("dataset document must be a JSON object", 1);

  SurveyData data;
  data.digest = sha256_hex(text);
  if (schema) {
    data.schema = *schema;
    data.schema.validate();
  } else if (doc.contains("schema")) {
    data.schema = schema_from_json(doc.at("schema"));
  } else {
    throw SchemaError("dataset document has no schema and none was supplied");
  }

  const Json& rows = doc.contains("records") ? doc.at("records") : Json::array();
  if (!rows.is_array()) throw ParseError("\"records\" must be an array", 0);

  std::vector<RowDiagnostic> diagnostics;
  std::vector<SurveyRecord> good;
  std::vector<std::size_t> good_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Json& row = rows[i];
    SurveyRecord rec;
    try {
      rec.id = row.contains("id") ? (row.at("id").is_string() ? row.at("id").get<std::string>()
                                                               : row.at("id").dump())
                                  : std::to_string(i);
      const Json context = row.value("context", Json::object());
      for (const auto& [name, value] : context.items()) {
        rec.context.emplace(name, context_from_json(value, data.schema.find_factor(name)));
      }
      for (const auto& t : row.value("triples", Json::array())) {
        Triple tr;
        tr.problem = t.at("problem").get<std::string>();
        tr.cause = optional_name(t, "cause");
        tr.effect = optional_name(t, "effect");
        tr.rank = t.at("rank").get<int>();
        rec.triples.push_back(std::move(tr));
      }
    } catch (const std::exception& e) {
      diagnostics.push_back({i, rec.id, std::string("unparseable record: ") + e.what()});
      continue;
    }
    good.push_back(std::move(rec));
    good_rows.push_back(i);
  }

  // Re-number diagnostics from check_record against original row positions.
  try {
    validate_all(data.schema, good, {});
  } catch (const ValidationError& e) {
    for (auto d : e.rows()) {
      d.row = good_rows[d.row];
      diagnostics.push_back(std::move(d));
    }
  }
  if (!diagnostics.empty()) {
    std::sort(diagnostics.begin(), diagnostics.end(),
              [](const auto& a, const auto& b) { return a.row < b.row; });
    throw ValidationError(std::move(diagnostics));
  }
  data.records = std::move(good);
  return data;
}

Json survey_to_json(const Schema& schema, std::span<const SurveyRecord> records) {
  Json rows = Json::array();
  for (const auto& r : records) {
    Json ctx = Json::object();
    for (const auto& [name, value] : r.context) ctx[name] = context_to_json(value);
    Json triples = Json::array();
    for (const auto& t : r.triples) {
      Json jt = {{"problem", t.problem}, {"rank", t.rank}};
      jt["cause"] = t.cause ? Json(*t.cause) : Json(nullptr);
      jt["effect"] = t.effect ? Json(*t.effect) : Json(nullptr);
      triples.push_back(std::move(jt));
    }
    rows.push_back({{"id", r.id}, {"context", std::move(ctx)}, {"triples", std::move(triples)}});
  }
  return {{"schema", schema_to_json(schema)}, {"records", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// CSV

namespace {

// RFC 4180 style: quoted fields may contain commas, quotes ("") and newlines.
std::vector<std::pair<std::size_t, std::vector<std::string>>> split_csv(std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw ParseError("stray quote inside unquoted field", line);
        quoted = true;
        any = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          fields.push_back(std::move(field));
          rows.emplace_back(row_line, std::move(fields));
        }
        fields.clear();
        field.clear();
        any = false;
        ++line;
        row_line = line;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line);
  if (any || !field.empty()) {
    fields.push_back(std::move(field));
    rows.emplace_back(row_line, std::move(fields));
  }
  return rows;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

ContextValue context_from_text(const std::string& raw, const ContextFactor& f, std::size_t line) {
  if (is_unknown_text(raw)) return std::monostate{};
  switch (f.type) {
    case FactorType::binary: {
      const auto s = lower(raw);
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw ParseError("factor '" + f.name + "': '" + raw + "' is not a boolean", line);
    }
    case FactorType::categorical:
    case FactorType::ordinal:
      return raw;
    case FactorType::continuous: {
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), x);
      if (ec != std::errc() || ptr != raw.data() + raw.size()) {
        throw ParseError("factor '" + f.name + "': '" + raw + "' is not a number", line);
      }
      return x;
    }
  }
  return std::monostate{};
}

}  // namespace

std::vector<SurveyRecord> parse_survey_csv(std::string_view text, const Schema& schema) {
  schema.validate();
  auto rows = split_csv(text);
  if (rows.empty()) throw ParseError("CSV input has no header", 1);

  const auto& header = rows.front().second;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(trim(header[i]), i).second) {
      throw ParseError("duplicate column '" + header[i] + "'", rows.front().first);
    }
  }
  for (const auto& [name, pos] : col) {
    if (name == "id" || schema.find_factor(name)) continue;
    bool triple_col = false;
    for (int k = 1; k <= static_cast<int>(kMaxTriples); ++k) {
      for (const char* p : {"problem_", "cause_", "effect_", "rank_"}) {
        if (name == std::string(p) + std::to_string(k)) triple_col = true;
      }
    }
    if (!triple_col) throw SchemaError("CSV column '" + name + "' is not declared by the schema");
  }

  std::vector<SurveyRecord> records;
  std::vector<RowDiagnostic> diagnostics;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, fields] = rows[r];
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line);
    }
    auto cell = [&](const std::string& name) -> std::string {
      auto it = col.find(name);
      return it == col.end() ? std::string{} : trim(fields[it->second]);
    };
    SurveyRecord rec;
    rec.id = col.contains("id") ? cell("id") : std::to_string(r - 1);
    for (const auto& f : schema.context) {
      if (col.contains(f.name)) rec.context.emplace(f.name, context_from_text(cell(f.name), f, line));
    }
    std::string problem_error;
    for (int k = 1; k <= static_cast<int>(kMaxTriples); ++k) {
      const auto ks = std::to_string(k);
      std::string problem = cell("problem_" + ks);
      std::string rank = cell("rank_" + ks);
      std::string cause = cell("cause_" + ks);
      std::string effect = cell("effect_" + ks);
      if (problem.empty()) {
        if (!cause.empty() || !effect.empty() || !rank.empty()) {
          problem_error = "triple " + ks + " has no problem";
        }
        continue;
      }
      Triple t;
      t.problem = problem;
      if (!cause.empty()) t.cause = cause;
      if (!effect.empty()) t.effect = effect;
      int value = 0;
      auto [ptr, ec] = std::from_chars(rank.data(), rank.data() + rank.size(), value);
      if (rank.empty() || ec != std::errc() || ptr != rank.data() + rank.size()) {
        problem_error = "triple " + ks + " has no integer rank";
        continue;
      }
      t.rank = value;
      rec.triples.push_back(std::move(t));
    }
    if (!problem_error.empty()) diagnostics.push_back({r - 1, rec.id, problem_error});
    records.push_back(std::move(rec));
  }
  validate_all(schema, records, std::move(diagnostics));
  return records;
}

SurveyData load_raw(const std::filesystem::path& path, const std::optional<Schema>& schema) {
  const std::string text = read_file(path);
  if (path.extension() == ".csv") {
    if (!schema) throw SchemaError("CSV input '" + path.string() + "' needs a schema file");
    SurveyData data;
    data.schema = *schema;
    data.records = parse_survey_csv(text, *schema);
    data.digest = sha256_hex(text);
    return data;
  }
  return parse_survey_json(text, schema ? &*schema : nullptr);
}

// ---------------------------------------------------------------------------
// Prepared datasets

Json descriptor_to_json(const VariableDescriptor& v) {
  Json j = {{"name", v.name}, {"tag", v.tag.code()}, {"kind", to_string(v.kind)},
            {"label", v.label}};
  if (!v.factor.empty()) j["factor"] = v.factor;
  if (!v.level.empty()) j["level"] = v.level;
  if (v.kind == SourceKind::context_interval) {
    j["lower"] = v.lower ? Json(*v.lower) : Json(nullptr);
    j["upper"] = v.upper ? Json(*v.upper) : Json(nullptr);
  }
  return j;
}

VariableDescriptor descriptor_from_json(const Json& j) {
  VariableDescriptor v;
  v.name = j.at("name").get<std::string>();
  v.tag = Tag(j.at("tag").get<std::string>());
  v.kind = source_kind_from_string(j.value("kind", "answer-indicator"));
  v.label = j.value("label", v.name);
  v.factor = j.value("factor", "");
  v.level = j.value("level", "");
  if (j.contains("lower") && !j.at("lower").is_null()) v.lower = j.at("lower").get<double>();
  if (j.contains("upper") && !j.at("upper").is_null()) v.upper = j.at("upper").get<double>();
  return v;
}

Json discretization_to_json(const DiscretizationSpec& disc) {
  Json j = Json::object();
  for (const auto& [name, spec] : disc.factors) {
    j[name] = {{"requested_count", spec.requested_count},
               {"interval_count", spec.interval_count()},
               {"breakpoints", spec.breakpoints},
               {"observed_min", spec.observed_min},
               {"observed_max", spec.observed_max}};
  }
  return j;
}

DiscretizationSpec discretization_from_json(const Json& j) {
  DiscretizationSpec disc;
  for (const auto& [name, js] : j.items()) {
    IntervalSpec spec;
    spec.requested_count = js.at("requested_count").get<int>();
    spec.breakpoints = js.at("breakpoints").get<std::vector<double>>();
    spec.observed_min = js.at("observed_min").get<double>();
    spec.observed_max = js.at("observed_max").get<double>();
    if (!std::is_sorted(spec.breakpoints.begin(), spec.breakpoints.end()) ||
        std::adjacent_find(spec.breakpoints.begin(), spec.breakpoints.end()) !=
            spec.breakpoints.end()) {
      throw SchemaError("breakpoints of '" + name + "' are not strictly increasing");
    }
    disc.factors.emplace(name, std::move(spec));
  }
  return disc;
}

bool is_prepared_dataset(const Json& j) {
  return j.is_object() && j.contains("variables") && j.contains("samples");
}

Json dataset_to_json(const BinaryDataset& ds) {
  Json vars = Json::array();
  for (const auto& v : ds.variables()) vars.push_back(descriptor_to_json(v));

  Json samples = Json::array();
  for (std::size_t s = 0; s < ds.sample_count(); ++s) {
    std::string bits;
    bits.reserve(ds.variable_count());
    for (auto b : ds.sample(s)) bits.push_back(b ? '1' : '0');
    Json row = {{"id", ds.record_id(s)}, {"bits", std::move(bits)}};
    if (ds.has_rank_annotations()) {
      Json triples = Json::array();
      for (const auto& t : ds.triples(s)) {
        triples.push_back({{"rank", t.rank}, {"variables", t.variables}});
      }
      row["triples"] = std::move(triples);
    }
    const auto unknown = ds.unknown_factors(s);
    if (!unknown.empty()) row["unknown"] = std::vector<std::string>(unknown.begin(), unknown.end());
    samples.push_back(std::move(row));
  }

  const auto& prov = ds.provenance();
  return {{"format", "riskbn-binary-dataset"},
          {"version", 1},
          {"variables", std::move(vars)},
          {"samples", std::move(samples)},
          {"provenance",
           {{"source_digest", prov.source_digest},
            {"discretization", discretization_to_json(prov.discretization)},
            {"warnings", prov.warnings}}}};
}

BinaryDataset dataset_from_json(const Json& j) {
  try {
    std::vector<VariableDescriptor> vars;
    for (const auto& jv : j.at("variables")) vars.push_back(descriptor_from_json(jv));
    const std::size_t n = vars.size();

    std::vector<std::uint8_t> samples;
    std::vector<std::string> ids;
    std::vector<std::vector<TripleRef>> triples;
    std::vector<std::vector<std::string>> unknown;
    bool annotated = false;
    bool any_unknown = false;
    for (const auto& row : j.at("samples")) {
      if (row.contains("triples")) annotated = true;
      if (row.contains("unknown")) any_unknown = true;
    }
    for (const auto& row : j.at("samples")) {
      const auto bits = row.at("bits").get<std::string>();
      if (bits.size() != n) throw SchemaError("sample bit string length mismatch");
      for (char c : bits) {
        if (c != '0' && c != '1') throw SchemaError("sample bits must be 0 or 1");
        samples.push_back(c == '1' ? 1 : 0);
      }
      ids.push_back(row.at("id").get<std::string>());
      if (annotated) {
        std::vector<TripleRef> refs;
        for (const auto& t : row.value("triples", Json::array())) {
          refs.push_back({t.at("rank").get<int>(), t.at("variables").get<std::vector<std::size_t>>()});
        }
        triples.push_back(std::move(refs));
      }
      if (any_unknown) unknown.push_back(row.value("unknown", std::vector<std::string>{}));
    }

    Provenance prov;
    if (j.contains("provenance")) {
      const auto& jp = j.at("provenance");
      prov.source_digest = jp.value("source_digest", "");
      if (jp.contains("discretization")) {
        prov.discretization = discretization_from_json(jp.at("discretization"));
      }
      prov.warnings = jp.value("warnings", std::vector<std::string>{});
    }
    return BinaryDataset(std::move(vars), std::move(samples), std::move(ids), std::move(triples),
                         std::move(unknown), std::move(prov));
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed dataset file: ") + e.what());
  }
}

}  // namespace riskbn
