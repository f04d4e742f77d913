#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tokendiff {

/// Full run configuration with the project defaults. Loaded from a JSON
/// file; every key is validated and unknown keys are rejected. Override
/// precedence: explicit CLI flags and --set > environment variables
/// (TOKENDIFF_<SECTION>_<KEY>) > config file > defaults.
struct RunConfig {
  struct CodebookParams {
    int k = 32;
    int d = 8;
    int clusters = 4;
    uint64_t seed = 7;
  } codebook;

  struct ScheduleParams {
    int t_steps = 100;
    double gamma_max = 0.9;
    double alpha_min = 1e-4;
    double eta = 0.5;        // single-motion transition scale
    double eta_multi = 0.25; // multi-motion transition scale
  } schedule;

  struct SamplerParams {
    double guidance_single = 4.0;
    double guidance_multi = 2.0;
    int t_independent = 90;
  } sampler;

  struct TrainingParams {
    double lambda = 5e-4;
    double learning_rate = 0.1;
    int epochs = 200;
    double null_prob = 0.1;
    int step_buckets = 10;
  } training;

  struct MetricsParams {
    double fps = 20.0;
    int half_width = 40;  // total transition-window width in frames
    double epsilon = 1e-12;
  } metrics;

  struct DatasetParams {
    int conditions = 2;
    int sequences_per_condition = 50;
    int tokens_per_sequence = 12;
  } dataset;

  struct PlanParams {
    int segment_count = 4;
    int segment_length = 12;
  } plan;

  struct Paths {
    std::string codebook = "codebook.txt";
    std::string dataset = "dataset.txt";
    std::string model = "model.txt";
    std::string tokens = "tokens.txt";
    std::string report = "report.txt";
  } paths;

  /// Re-validates every module constraint; throws ConfigError.
  void validate() const;

  /// Stable digest of the effective configuration (for run manifests and
  /// determinism checks).
  uint64_t digest() const;

  std::string to_json() const;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& file);

  /// Applies one dotted-path override, e.g. "schedule.eta=0.25".
  void apply_override(const std::string& key_value);

  /// Applies TOKENDIFF_* environment overrides.
  void apply_environment();
};

}  // namespace tokendiff
