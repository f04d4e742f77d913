#include "tokendiff/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace tokendiff {
namespace {

constexpr const char* kCodebookMagic = "tokendiff-codebook v1";
constexpr const char* kDatasetMagic = "tokendiff-dataset v1";
constexpr const char* kTokensMagic = "tokendiff-tokens v1";
constexpr const char* kModelMagic = "tokendiff-model v1";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t begin = 0;
  while (begin <= s.size()) {
    const size_t end = s.find(sep, begin);
    if (end == std::string::npos) {
      out.push_back(s.substr(begin));
      break;
    }
    out.push_back(s.substr(begin, end - begin));
    begin = end + 1;
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("bad decimal value '" + s + "'");
  return v;
}

int64_t parse_int(const std::string& s) {
  int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("bad integer value '" + s + "'");
  return v;
}

uint64_t parse_u64(const std::string& s, int base = 10) {
  uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("bad unsigned value '" + s + "'");
  return v;
}

/// Parses "magic vN key=value key=value ..." headers.
std::map<std::string, std::string> parse_header(const std::string& line, const char* magic) {
  if (line.rfind(magic, 0) != 0) throw IoError(std::string("expected header '") + magic + "'");
  std::map<std::string, std::string> fields;
  std::istringstream in(line.substr(std::strlen(magic)));
  std::string token;
  while (in >> token) {
    const size_t eq = token.find('=');
    if (eq == std::string::npos) throw IoError("bad header field '" + token + "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

const std::string& header_field(const std::map<std::string, std::string>& fields,
                                const std::string& key) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw IoError("missing header field '" + key + "'");
  return it->second;
}

std::string join_i64(std::span<const int64_t> values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string join_tokens(std::span<const int32_t> values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += values[i] == kMaskToken ? "M" : std::to_string(values[i]);
  }
  return out;
}

std::vector<int64_t> parse_i64_list(const std::string& s) {
  std::vector<int64_t> out;
  if (s.empty()) return out;
  for (const std::string& item : split(s, ',')) out.push_back(parse_int(item));
  return out;
}

std::vector<int32_t> parse_token_list(const std::string& s) {
  std::vector<int32_t> out;
  for (const std::string& item : split(s, ','))
    out.push_back(item == "M" ? kMaskToken : static_cast<int32_t>(parse_int(item)));
  return out;
}

std::string field_value(const std::string& field, const char* name) {
  const std::string prefix = std::string(name) + "=";
  if (field.rfind(prefix, 0) != 0) throw IoError("expected field '" + prefix + "...'");
  return field.substr(prefix.size());
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw IoError("failed to format double");
  return std::string(buf, ptr);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string codebook_to_text(const Codebook& cb) {
  std::string out = std::string(kCodebookMagic) + " k=" + std::to_string(cb.size()) +
                    " d=" + std::to_string(cb.dim()) + " seed=" + std::to_string(cb.seed) + "\n";
  for (int i = 0; i < cb.size(); ++i) {
    for (int d = 0; d < cb.dim(); ++d) {
      if (d) out += ' ';
      out += format_double(cb.entries(i, d));
    }
    out += '\n';
  }
  return out;
}

Codebook codebook_from_text(const std::string& text) {
  const std::vector<std::string> lines = lines_of(text);
  if (lines.empty()) throw IoError("empty codebook file");
  const auto header = parse_header(lines[0], kCodebookMagic);
  const int k = static_cast<int>(parse_int(header_field(header, "k")));
  const int d = static_cast<int>(parse_int(header_field(header, "d")));
  const uint64_t seed = parse_u64(header_field(header, "seed"));
  if (static_cast<int>(lines.size()) != k + 1)
    throw IoError("codebook row count does not match header");
  Eigen::MatrixXd entries(k, d);
  for (int i = 0; i < k; ++i) {
    std::istringstream in(lines[i + 1]);
    std::string value;
    for (int c = 0; c < d; ++c) {
      if (!(in >> value)) throw IoError("codebook row " + std::to_string(i) + " too short");
      entries(i, c) = parse_double(value);
    }
    if (in >> value) throw IoError("codebook row " + std::to_string(i) + " too long");
  }
  return make_codebook(std::move(entries), seed);
}

void write_codebook(const std::filesystem::path& path, const Codebook& cb) {
  atomic_write_text(path, codebook_to_text(cb));
}

Codebook read_codebook(const std::filesystem::path& path) {
  return codebook_from_text(read_text(path));
}

std::string dataset_to_text(std::span<const TrainingRecord> records, int num_tokens) {
  std::string out = std::string(kDatasetMagic) + " k=" + std::to_string(num_tokens) +
                    " records=" + std::to_string(records.size()) + "\n";
  for (const TrainingRecord& rec : records) {
    out += std::to_string(rec.condition);
    out += '\t';
    out += join_tokens(rec.tokens);
    out += '\n';
  }
  return out;
}

Dataset dataset_from_text(const std::string& text) {
  const std::vector<std::string> lines = lines_of(text);
  if (lines.empty()) throw IoError("empty dataset file");
  const auto header = parse_header(lines[0], kDatasetMagic);
  Dataset ds;
  ds.num_tokens = static_cast<int>(parse_int(header_field(header, "k")));
  const int64_t expected = parse_int(header_field(header, "records"));
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> fields = split(lines[i], '\t');
    if (fields.size() != 2) throw IoError("bad dataset record on line " + std::to_string(i + 1));
    TrainingRecord rec;
    rec.condition = static_cast<int32_t>(parse_int(fields[0]));
    rec.tokens = parse_token_list(fields[1]);
    ds.records.push_back(std::move(rec));
  }
  if (static_cast<int64_t>(ds.records.size()) != expected)
    throw IoError("dataset record count does not match header");
  return ds;
}

void write_dataset(const std::filesystem::path& path, std::span<const TrainingRecord> records,
                   int num_tokens) {
  atomic_write_text(path, dataset_to_text(records, num_tokens));
}

Dataset read_dataset(const std::filesystem::path& path) {
  return dataset_from_text(read_text(path));
}

std::string tokens_to_text(std::span<const TokenRecord> records, int num_tokens) {
  std::string out = std::string(kTokensMagic) + " k=" + std::to_string(num_tokens) + "\n";
  char digest[17];
  for (const TokenRecord& rec : records) {
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(rec.plan_digest));
    out += "seed=" + std::to_string(rec.seed);
    out += "\tplan=" + std::string(digest);
    out += "\tboundaries=" + join_i64(rec.boundaries);
    out += "\tconditions=";
    for (size_t i = 0; i < rec.conditions.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(rec.conditions[i]);
    }
    out += "\ttokens=" + join_tokens(rec.tokens);
    out += '\n';
  }
  return out;
}

TokenFile tokens_from_text(const std::string& text) {
  const std::vector<std::string> lines = lines_of(text);
  if (lines.empty()) throw IoError("empty token file");
  const auto header = parse_header(lines[0], kTokensMagic);
  TokenFile file;
  file.num_tokens = static_cast<int>(parse_int(header_field(header, "k")));
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> fields = split(lines[i], '\t');
    if (fields.size() != 5) throw IoError("bad token record on line " + std::to_string(i + 1));
    TokenRecord rec;
    rec.seed = parse_u64(field_value(fields[0], "seed"));
    rec.plan_digest = parse_u64(field_value(fields[1], "plan"), 16);
    rec.boundaries = parse_i64_list(field_value(fields[2], "boundaries"));
    for (const std::string& c : split(field_value(fields[3], "conditions"), ','))
      rec.conditions.push_back(static_cast<int32_t>(parse_int(c)));
    rec.tokens = parse_token_list(field_value(fields[4], "tokens"));
    file.records.push_back(std::move(rec));
  }
  return file;
}

void write_tokens(const std::filesystem::path& path, std::span<const TokenRecord> records,
                  int num_tokens) {
  atomic_write_text(path, tokens_to_text(records, num_tokens));
}

TokenFile read_tokens(const std::filesystem::path& path) {
  return tokens_from_text(read_text(path));
}

TokenRecord token_record_from_sequence(const TokenSequence& seq, uint64_t seed, uint64_t digest) {
  TokenRecord rec;
  rec.seed = seed;
  rec.plan_digest = digest;
  // interior separators only; the final boundary equals the token count
  rec.boundaries.assign(seq.boundaries.begin(), seq.boundaries.end() - 1);
  rec.tokens = seq.tokens;
  for (int64_t s = 0; s < seq.segment_count(); ++s)
    rec.conditions.push_back(seq.conditions[seq.segment_begin(s)]);
  return rec;
}

TokenSequence sequence_from_token_record(const TokenRecord& record) {
  TokenSequence seq;
  seq.tokens = record.tokens;
  seq.boundaries = record.boundaries;
  seq.boundaries.push_back(static_cast<int64_t>(record.tokens.size()));
  if (record.conditions.size() != seq.boundaries.size())
    throw IoError("token record condition count does not match segment count");
  seq.conditions.resize(record.tokens.size());
  for (size_t s = 0; s < seq.boundaries.size(); ++s) {
    const int64_t begin = s == 0 ? 0 : seq.boundaries[s - 1];
    for (int64_t p = begin; p < seq.boundaries[s]; ++p)
      seq.conditions[static_cast<size_t>(p)] = record.conditions[s];
  }
  seq.validate();
  return seq;
}

std::string model_to_text(const TabularDenoiser& model) {
  const int k = model.num_tokens();
  std::string out = std::string(kModelMagic) + " v=" + std::to_string(model.condition_vocab()) +
                    " b=" + std::to_string(model.step_buckets()) + " k=" + std::to_string(k) +
                    " t=" + std::to_string(model.t_steps()) +
                    " mask=" + std::to_string(model.mask_feature()) +
                    " edge=" + std::to_string(model.edge_feature()) + "\n";
  out.reserve(out.size() + static_cast<size_t>(model.param_count()) * 3);
  const std::span<const double> params = model.params();
  for (int64_t i = 0; i < model.param_count(); ++i) {
    out += format_double(params[static_cast<size_t>(i)]);
    out += (i % k == k - 1) ? '\n' : ' ';
  }
  return out;
}

TabularDenoiser model_from_text(const std::string& text) {
  size_t line_end = text.find('\n');
  if (line_end == std::string::npos) throw IoError("empty model file");
  const auto header = parse_header(text.substr(0, line_end), kModelMagic);
  const int v = static_cast<int>(parse_int(header_field(header, "v")));
  const int b = static_cast<int>(parse_int(header_field(header, "b")));
  const int k = static_cast<int>(parse_int(header_field(header, "k")));
  const int t = static_cast<int>(parse_int(header_field(header, "t")));
  TabularDenoiser model(v, b, k, t);
  if (static_cast<int>(parse_int(header_field(header, "mask"))) != model.mask_feature() ||
      static_cast<int>(parse_int(header_field(header, "edge"))) != model.edge_feature())
    throw IoError("model sentinel ids do not match the table layout");

  std::span<double> params = model.params();
  const char* p = text.data() + line_end + 1;
  const char* end = text.data() + text.size();
  for (int64_t i = 0; i < model.param_count(); ++i) {
    while (p < end && (*p == ' ' || *p == '\n')) ++p;
    double value = 0.0;
    const auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc()) throw IoError("model file truncated at parameter " + std::to_string(i));
    params[static_cast<size_t>(i)] = value;
    p = next;
  }
  while (p < end && (*p == ' ' || *p == '\n')) ++p;
  if (p != end) throw IoError("model file has trailing data");
  return model;
}

void write_model(const std::filesystem::path& path, const TabularDenoiser& model) {
  atomic_write_text(path, model_to_text(model));
}

TabularDenoiser read_model(const std::filesystem::path& path) {
  return model_from_text(read_text(path));
}

uint64_t plan_digest(const GenerationPlan& plan) {
  uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](uint64_t v) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (v >> (8 * byte)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<uint64_t>(plan.segments.size()));
  for (const PlanSegment& seg : plan.segments) {
    mix(static_cast<uint64_t>(seg.condition));
    mix(static_cast<uint64_t>(seg.length));
  }
  mix(static_cast<uint64_t>(plan.t_independent));
  uint64_t guidance_bits = 0;
  std::memcpy(&guidance_bits, &plan.guidance, sizeof(double));
  mix(guidance_bits);
  return h;
}

}  // namespace tokendiff
