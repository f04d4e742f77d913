#include "tokendiff/config.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tokendiff/errors.hpp"

namespace tokendiff {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const char* section,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown config key '") + section + "." + key + "'");
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& into) {
  if (obj.contains(key)) into = obj.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (codebook.k < 2) throw ConfigError("codebook.k must be >= 2");
  if (codebook.d < 1) throw ConfigError("codebook.d must be >= 1");
  if (codebook.clusters < 1 || codebook.clusters > codebook.k)
    throw ConfigError("codebook.clusters must lie in [1, codebook.k]");
  if (schedule.t_steps < 1) throw ConfigError("schedule.t_steps must be >= 1");
  if (!(schedule.gamma_max > 0.0 && schedule.gamma_max < 1.0))
    throw ConfigError("schedule.gamma_max must lie in (0, 1)");
  if (!(schedule.alpha_min > 0.0 && schedule.alpha_min < 1.0 - schedule.gamma_max))
    throw ConfigError("schedule.alpha_min must lie in (0, 1 - gamma_max)");
  if (sampler.guidance_single < 0.0 || sampler.guidance_multi < 0.0)
    throw ConfigError("guidance scales must be >= 0");
  if (sampler.t_independent < 0 || sampler.t_independent > schedule.t_steps)
    throw ConfigError("sampler.t_independent must lie in [0, schedule.t_steps]");
  if (training.lambda < 0.0) throw ConfigError("training.lambda must be >= 0");
  if (training.learning_rate <= 0.0) throw ConfigError("training.learning_rate must be > 0");
  if (training.epochs < 1) throw ConfigError("training.epochs must be >= 1");
  if (!(training.null_prob >= 0.0 && training.null_prob <= 1.0))
    throw ConfigError("training.null_prob must lie in [0, 1]");
  if (training.step_buckets < 1) throw ConfigError("training.step_buckets must be >= 1");
  if (metrics.fps <= 0.0) throw ConfigError("metrics.fps must be > 0");
  if (metrics.half_width < 1) throw ConfigError("metrics.half_width must be >= 1");
  if (metrics.epsilon <= 0.0) throw ConfigError("metrics.epsilon must be > 0");
  if (dataset.conditions < 1) throw ConfigError("dataset.conditions must be >= 1");
  if (dataset.sequences_per_condition < 1)
    throw ConfigError("dataset.sequences_per_condition must be >= 1");
  if (dataset.tokens_per_sequence < 1)
    throw ConfigError("dataset.tokens_per_sequence must be >= 1");
  if (plan.segment_count < 1) throw ConfigError("plan.segment_count must be >= 1");
  if (plan.segment_length < 1) throw ConfigError("plan.segment_length must be >= 1");
}

std::string RunConfig::to_json() const {
  json j;
  j["codebook"] = {{"k", codebook.k},
                   {"d", codebook.d},
                   {"clusters", codebook.clusters},
                   {"seed", codebook.seed}};
  j["schedule"] = {{"t_steps", schedule.t_steps},
                   {"gamma_max", schedule.gamma_max},
                   {"alpha_min", schedule.alpha_min},
                   {"eta", schedule.eta},
                   {"eta_multi", schedule.eta_multi}};
  j["sampler"] = {{"guidance_single", sampler.guidance_single},
                  {"guidance_multi", sampler.guidance_multi},
                  {"t_independent", sampler.t_independent}};
  j["training"] = {{"lambda", training.lambda},
                   {"learning_rate", training.learning_rate},
                   {"epochs", training.epochs},
                   {"null_prob", training.null_prob},
                   {"step_buckets", training.step_buckets}};
  j["metrics"] = {{"fps", metrics.fps},
                  {"half_width", metrics.half_width},
                  {"epsilon", metrics.epsilon}};
  j["dataset"] = {{"conditions", dataset.conditions},
                  {"sequences_per_condition", dataset.sequences_per_condition},
                  {"tokens_per_sequence", dataset.tokens_per_sequence}};
  j["plan"] = {{"segment_count", plan.segment_count}, {"segment_length", plan.segment_length}};
  j["paths"] = {{"codebook", paths.codebook},
                {"dataset", paths.dataset},
                {"model", paths.model},
                {"tokens", paths.tokens},
                {"report", paths.report}};
  return j.dump(2) + "\n";
}

uint64_t RunConfig::digest() const {
  const std::string canon = to_json();
  uint64_t h = 1469598103934665603ULL;
  for (const char c : canon) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {
RunConfig parse_json_unchecked(const std::string& text);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig cfg = parse_json_unchecked(text);
  cfg.validate();
  return cfg;
}

namespace {
RunConfig parse_json_unchecked(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  try {
    reject_unknown(j, "", {"codebook", "schedule", "sampler", "training", "metrics", "dataset",
                           "plan", "paths"});
    if (j.contains("codebook")) {
      const json& s = j["codebook"];
      reject_unknown(s, "codebook", {"k", "d", "clusters", "seed"});
      read_field(s, "k", cfg.codebook.k);
      read_field(s, "d", cfg.codebook.d);
      read_field(s, "clusters", cfg.codebook.clusters);
      read_field(s, "seed", cfg.codebook.seed);
    }
    if (j.contains("schedule")) {
      const json& s = j["schedule"];
      reject_unknown(s, "schedule", {"t_steps", "gamma_max", "alpha_min", "eta", "eta_multi"});
      read_field(s, "t_steps", cfg.schedule.t_steps);
      read_field(s, "gamma_max", cfg.schedule.gamma_max);
      read_field(s, "alpha_min", cfg.schedule.alpha_min);
      read_field(s, "eta", cfg.schedule.eta);
      read_field(s, "eta_multi", cfg.schedule.eta_multi);
    }
    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      reject_unknown(s, "sampler", {"guidance_single", "guidance_multi", "t_independent"});
      read_field(s, "guidance_single", cfg.sampler.guidance_single);
      read_field(s, "guidance_multi", cfg.sampler.guidance_multi);
      read_field(s, "t_independent", cfg.sampler.t_independent);
    }
    if (j.contains("training")) {
      const json& s = j["training"];
      reject_unknown(s, "training",
                     {"lambda", "learning_rate", "epochs", "null_prob", "step_buckets"});
      read_field(s, "lambda", cfg.training.lambda);
      read_field(s, "learning_rate", cfg.training.learning_rate);
      read_field(s, "epochs", cfg.training.epochs);
      read_field(s, "null_prob", cfg.training.null_prob);
      read_field(s, "step_buckets", cfg.training.step_buckets);
    }
    if (j.contains("metrics")) {
      const json& s = j["metrics"];
      reject_unknown(s, "metrics", {"fps", "half_width", "epsilon"});
      read_field(s, "fps", cfg.metrics.fps);
      read_field(s, "half_width", cfg.metrics.half_width);
      read_field(s, "epsilon", cfg.metrics.epsilon);
    }
    if (j.contains("dataset")) {
      const json& s = j["dataset"];
      reject_unknown(s, "dataset",
                     {"conditions", "sequences_per_condition", "tokens_per_sequence"});
      read_field(s, "conditions", cfg.dataset.conditions);
      read_field(s, "sequences_per_condition", cfg.dataset.sequences_per_condition);
      read_field(s, "tokens_per_sequence", cfg.dataset.tokens_per_sequence);
    }
    if (j.contains("plan")) {
      const json& s = j["plan"];
      reject_unknown(s, "plan", {"segment_count", "segment_length"});
      read_field(s, "segment_count", cfg.plan.segment_count);
      read_field(s, "segment_length", cfg.plan.segment_length);
    }
    if (j.contains("paths")) {
      const json& s = j["paths"];
      reject_unknown(s, "paths", {"codebook", "dataset", "model", "tokens", "report"});
      read_field(s, "codebook", cfg.paths.codebook);
      read_field(s, "dataset", cfg.paths.dataset);
      read_field(s, "model", cfg.paths.model);
      read_field(s, "tokens", cfg.paths.tokens);
      read_field(s, "report", cfg.paths.report);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  return cfg;
}
}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file '" + file.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void RunConfig::apply_override(const std::string& key_value) {
  const size_t eq = key_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + key_value + "' is not of the form section.key=value");
  const std::string path = key_value.substr(0, eq);
  const std::string value = key_value.substr(eq + 1);
  const size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override key '" + path + "' is not of the form section.key");

  // Route the override through the JSON loader so typing and unknown-key
  // rules stay in one place.
  json j = json::parse(to_json());
  json& section = j[path.substr(0, dot)];
  const std::string key = path.substr(dot + 1);
  if (!section.contains(key)) throw ConfigError("unknown config key '" + path + "'");
  json& slot = section[key];
  try {
    if (slot.is_string()) {
      slot = value;
    } else if (slot.is_number_float()) {
      slot = std::stod(value);
    } else {
      slot = static_cast<int64_t>(std::stoll(value));
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse override value '" + value + "' for '" + path + "'");
  }
  // Full validation runs once after all overrides are in.
  *this = parse_json_unchecked(j.dump());
}

void RunConfig::apply_environment() {
  // TOKENDIFF_<SECTION>_<KEY>, e.g. TOKENDIFF_SCHEDULE_ETA=0.25.
  const json j = json::parse(to_json());
  for (const auto& [section, body] : j.items()) {
    for (const auto& [key, value] : body.items()) {
      std::string name = "TOKENDIFF_" + section + "_" + key;
      for (char& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (const char* env = std::getenv(name.c_str()))
        apply_override(section + "." + key + "=" + env);
    }
  }
}

}  // namespace tokendiff
