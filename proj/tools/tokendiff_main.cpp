// tokendiff: discrete-diffusion token sequence generation over a synthetic
// codebook. Subcommands cover codebook/dataset creation, corruption dumps,
// training, single and two-phase multi-segment generation, evaluation and
// a transition-matrix audit. Outputs are deterministic per seed; stdout
// carries data, stderr diagnostics.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tokendiff/config.hpp"
#include "tokendiff/dataset.hpp"
#include "tokendiff/io.hpp"
#include "tokendiff/metrics.hpp"
#include "tokendiff/sampler.hpp"
#include "tokendiff/training.hpp"

namespace {

using namespace tokendiff;
namespace fs = std::filesystem;

constexpr const char* kVersion = "tokendiff 1.0";

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "JSON config file");
  cmd->add_option("--set", args.overrides, "override, e.g. --set schedule.eta=0.25")->take_all();
  cmd->add_option("--seed", args.seed, "root seed for this command");
  cmd->add_option("--out", args.out, "output file (default: print to stdout)");
}

RunConfig effective_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_file.empty()) cfg = RunConfig::load(args.config_file);
  cfg.apply_environment();
  for (const std::string& kv : args.overrides) cfg.apply_override(kv);
  cfg.validate();
  return cfg;
}

/// Emits to --out (with a manifest beside it) or stdout.
void emit(const CommonArgs& args, const RunConfig& cfg, const std::string& command, uint64_t seed,
          const std::string& content, std::chrono::steady_clock::time_point started) {
  if (args.out.empty()) {
    std::cout << content;
    return;
  }
  atomic_write_text(args.out, content);
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  char digest[17];
  std::snprintf(digest, sizeof(digest), "%016llx", static_cast<unsigned long long>(cfg.digest()));
  nlohmann::json manifest{
      {"command", command},
      {"version", kVersion},
      {"seed", seed},
      {"config_digest", std::string(digest)},
      {"wall_clock_ms", elapsed.count()},
      {"timestamp", std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count()}};
  atomic_write_text(args.out + ".manifest.json", manifest.dump(2) + "\n");
  std::cerr << command << ": wrote " << args.out << "\n";
}

Codebook load_or_make_codebook(const RunConfig& cfg, const std::string& path) {
  const std::string file = path.empty() ? cfg.paths.codebook : path;
  if (fs::exists(file)) return read_codebook(file);
  return generate_synthetic_codebook(cfg.codebook.k, cfg.codebook.d, cfg.codebook.clusters,
                                     cfg.codebook.seed);
}

NoiseSchedule schedule_from(const RunConfig& cfg, double eta) {
  return NoiseSchedule::linear(cfg.schedule.t_steps, cfg.schedule.gamma_max,
                               cfg.schedule.alpha_min, eta);
}

TransitionModel transitions_from(const RunConfig& cfg, const Codebook& cb, double eta) {
  return TransitionModel::dynamic(schedule_from(cfg, eta), distance_rank_matrix(cb));
}

GenerationPlan default_plan(const RunConfig& cfg, uint64_t seed) {
  GenerationPlan plan;
  for (int i = 0; i < cfg.plan.segment_count; ++i)
    plan.segments.push_back(
        {1 + static_cast<int32_t>(i % cfg.dataset.conditions), cfg.plan.segment_length});
  plan.t_independent = cfg.sampler.t_independent;
  plan.guidance = cfg.sampler.guidance_multi;
  plan.seed = seed;
  return plan;
}

GenerationPlan parse_segments(const std::string& segment_list, GenerationPlan plan) {
  // "cond:len,cond:len,..."
  plan.segments.clear();
  std::istringstream in(segment_list);
  std::string item;
  while (std::getline(in, item, ',')) {
    const size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ParameterError("segment '" + item + "' is not of the form cond:len");
    plan.segments.push_back({static_cast<int32_t>(std::stol(item.substr(0, colon))),
                             std::stoll(item.substr(colon + 1))});
  }
  if (plan.segments.empty()) throw ParameterError("empty --segments list");
  return plan;
}

std::string token_list(std::span<const int32_t> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += tokens[i] == kMaskToken ? "M" : std::to_string(tokens[i]);
  }
  return out;
}

// --- subcommands ------------------------------------------------------------

int run_make_codebook(const CommonArgs& args) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const uint64_t seed = args.seed.value_or(cfg.codebook.seed);
  const Codebook cb =
      generate_synthetic_codebook(cfg.codebook.k, cfg.codebook.d, cfg.codebook.clusters, seed);
  emit(args, cfg, "make-codebook", seed, codebook_to_text(cb), started);
  return 0;
}

int run_make_dataset(const CommonArgs& args, const std::string& codebook_path) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const uint64_t seed = args.seed.value_or(0);
  const Codebook cb = load_or_make_codebook(cfg, codebook_path);
  const std::vector<TrainingRecord> records =
      make_synthetic_dataset(cb, cfg.dataset.conditions, cfg.dataset.sequences_per_condition,
                             cfg.dataset.tokens_per_sequence, seed);
  emit(args, cfg, "make-dataset", seed, dataset_to_text(records, cb.size()), started);
  return 0;
}

int run_train(const CommonArgs& args, const std::string& codebook_path,
              const std::string& dataset_path) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const uint64_t seed = args.seed.value_or(0);
  const Codebook cb = load_or_make_codebook(cfg, codebook_path);
  const Dataset ds = read_dataset(dataset_path.empty() ? cfg.paths.dataset : dataset_path);
  if (ds.num_tokens != cb.size())
    throw ParameterError("dataset token count does not match the codebook");
  for (const TrainingRecord& rec : ds.records)
    if (rec.condition < 1 || rec.condition > cfg.dataset.conditions)
      throw ParameterError("dataset condition " + std::to_string(rec.condition) +
                           " outside 1.." + std::to_string(cfg.dataset.conditions));

  const TransitionModel transitions = transitions_from(cfg, cb, cfg.schedule.eta);
  TabularDenoiser model(cfg.dataset.conditions, cfg.training.step_buckets, cb.size(),
                        cfg.schedule.t_steps);
  TrainOptions options;
  options.epochs = cfg.training.epochs;
  options.learning_rate = cfg.training.learning_rate;
  options.null_prob = cfg.training.null_prob;
  options.lambda = cfg.training.lambda;
  options.seed = seed;
  const TrainResult result = train_tabular(model, ds.records, transitions, options);
  std::cerr << "train: initial loss " << format_double(result.epoch_losses.front())
            << ", final loss " << format_double(result.epoch_losses.back()) << "\n";
  emit(args, cfg, "train", seed, model_to_text(model), started);
  return 0;
}

int run_corrupt(const CommonArgs& args, const std::string& input_path,
                const std::string& codebook_path, int t) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const uint64_t seed = args.seed.value_or(0);
  const Codebook cb = load_or_make_codebook(cfg, codebook_path);
  const Dataset ds = read_dataset(input_path.empty() ? cfg.paths.dataset : input_path);
  if (t < 0 || t > cfg.schedule.t_steps)
    throw ParameterError("corruption step outside 0.." + std::to_string(cfg.schedule.t_steps));

  for (size_t r = 0; r < ds.records.size(); ++r)
    for (const int32_t tok : ds.records[r].tokens)
      if (tok == kMaskToken)
        throw InvalidStateError("MASK token in input record " + std::to_string(r));

  std::string out = "tokendiff-corrupt v1 k=" + std::to_string(cb.size()) +
                    " t=" + std::to_string(t) + " seed=" + std::to_string(seed) + "\n";
  const TransitionModel transitions = transitions_from(cfg, cb, cfg.schedule.eta);
  RngStream rng(seed);
  int64_t masked = 0;
  int64_t total = 0;
  for (const TrainingRecord& rec : ds.records) {
    TokenSequence before = TokenSequence::single(rec.tokens, rec.condition);
    const TokenSequence after = t == 0 ? before : transitions.forward_sample(before, t, rng);
    for (int32_t tok : after.tokens) masked += tok == kMaskToken ? 1 : 0;
    total += after.size();
    out += std::to_string(rec.condition) + "\tbefore=" + token_list(before.tokens) +
           "\tafter=" + token_list(after.tokens) + "\n";
  }
  std::cerr << "corrupt: mask fraction " << format_double(static_cast<double>(masked) / total)
            << "\n";
  emit(args, cfg, "corrupt", seed, out, started);
  return 0;
}

int run_generate(const CommonArgs& args, const std::string& codebook_path,
                 const std::string& model_path, int condition, int length) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const uint64_t seed = args.seed.value_or(0);
  const Codebook cb = load_or_make_codebook(cfg, codebook_path);
  const TabularDenoiser model = read_model(model_path.empty() ? cfg.paths.model : model_path);
  if (model.num_tokens() != cb.size())
    throw ParameterError("model token count does not match the codebook");
  const TransitionModel transitions = transitions_from(cfg, cb, cfg.schedule.eta);

  const int64_t len = length > 0 ? length : cfg.plan.segment_length;
  // A single motion is segment 1 of a one-segment plan.
  RngStream rng = RngStream(seed).substream(1);
  const TokenSequence seq = generate_single(condition, len, model, transitions,
                                            cfg.sampler.guidance_single, rng);
  GenerationPlan plan;
  plan.segments = {{static_cast<int32_t>(condition), len}};
  plan.t_independent = cfg.schedule.t_steps;
  plan.guidance = cfg.sampler.guidance_single;
  plan.seed = seed;
  const TokenRecord rec = token_record_from_sequence(seq, seed, plan_digest(plan));
  emit(args, cfg, "generate", seed, tokens_to_text({&rec, 1}, cb.size()), started);
  return 0;
}

int run_generate_multi(const CommonArgs& args, const std::string& codebook_path,
                       const std::string& model_path, const std::string& segments) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const uint64_t seed = args.seed.value_or(0);
  const Codebook cb = load_or_make_codebook(cfg, codebook_path);
  const TabularDenoiser model = read_model(model_path.empty() ? cfg.paths.model : model_path);
  if (model.num_tokens() != cb.size())
    throw ParameterError("model token count does not match the codebook");
  const TransitionModel transitions = transitions_from(cfg, cb, cfg.schedule.eta_multi);

  GenerationPlan plan = default_plan(cfg, seed);
  if (!segments.empty()) plan = parse_segments(segments, plan);
  for (const PlanSegment& seg : plan.segments)
    if (seg.condition < 1 || seg.condition > model.condition_vocab())
      throw ParameterError("segment condition " + std::to_string(seg.condition) +
                           " outside 1.." + std::to_string(model.condition_vocab()));

  const TokenSequence seq = generate_multi(plan, model, transitions);
  const TokenRecord rec = token_record_from_sequence(seq, seed, plan_digest(plan));
  emit(args, cfg, "generate-multi", seed, tokens_to_text({&rec, 1}, cb.size()), started);
  return 0;
}

int run_evaluate(const CommonArgs& args, const std::string& tokens_path,
                 const std::string& codebook_path, const std::string& ref_path,
                 const std::string& profile_path) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const uint64_t seed = args.seed.value_or(0);
  const Codebook cb = load_or_make_codebook(cfg, codebook_path);
  const TokenFile file = read_tokens(tokens_path.empty() ? cfg.paths.tokens : tokens_path);
  if (file.num_tokens != cb.size())
    throw ParameterError("token file does not match the codebook");
  if (file.records.empty()) throw ParameterError("token file has no records");

  const double fps = cfg.metrics.fps;
  std::string out = "tokendiff-report v1 fps=" + format_double(fps) +
                    " half_width=" + std::to_string(cfg.metrics.half_width) +
                    " epsilon=" + format_double(cfg.metrics.epsilon) + "\n";

  std::vector<double> jerk_values;
  std::vector<Eigen::VectorXd> features;  // one per decoded segment
  for (size_t r = 0; r < file.records.size(); ++r) {
    const TokenSequence seq = sequence_from_token_record(file.records[r]);
    const MotionTrajectory traj = decode_tokens(seq, cb, fps);
    for (int64_t s = 0; s < seq.segment_count(); ++s) {
      const int64_t begin = 4 * seq.segment_begin(s);
      const int64_t end = 4 * seq.segment_end(s);
      MotionTrajectory segment;
      segment.fps = fps;
      segment.frames = traj.frames.middleRows(begin, end - begin);
      features.push_back(mean_pooled_feature(segment));
    }

    // Token boundaries upsample x4 into frame boundaries; the final
    // boundary is the sequence end, not a transition.
    std::vector<int64_t> frame_bounds;
    for (size_t b = 0; b + 1 < seq.boundaries.size(); ++b)
      frame_bounds.push_back(4 * seq.boundaries[b]);
    const std::vector<FrameWindow> windows =
        transition_windows(frame_bounds, traj.frame_count(), cfg.metrics.half_width);
    for (const FrameWindow& w : windows) {
      const JerkReport report = jerk(traj, w, cfg.metrics.epsilon);
      jerk_values.push_back(report.total);
      out += "jerk\trecord=" + std::to_string(r) + " window=" + std::to_string(w.begin) + ":" +
             std::to_string(w.end) + "\t" + format_double(report.total) + "\n";
    }
    if (!profile_path.empty() && r == 0) {
      const std::vector<ProfileRow> rows = motion_profile(traj);
      std::string table = "# frame  mean_speed       mean_jerk\n";
      char line[96];
      for (const ProfileRow& row : rows) {
        std::snprintf(line, sizeof(line), "%7lld  %-15.8g  %-15.8g\n",
                      static_cast<long long>(row.frame), row.mean_speed, row.mean_jerk);
        table += line;
      }
      atomic_write_text(profile_path, table);
    }
  }

  if (features.size() >= 2) {
    RngStream rng(seed);
    const int pairs = static_cast<int>(features.size() / 2);
    out += "diversity\tsegments=" + std::to_string(features.size()) +
           " pairs=" + std::to_string(pairs) + "\t" +
           format_double(diversity(features, pairs, rng)) + "\n";
  }

  if (!ref_path.empty()) {
    const Dataset ref = read_dataset(ref_path);
    if (static_cast<int>(features.size()) <= cb.dim() ||
        static_cast<int>(ref.records.size()) <= cb.dim()) {
      std::cerr << "warning: too few segments for frechet_lite in " << cb.dim()
                << " dimensions, skipping\n";
    } else {
      Eigen::MatrixXd set_a(static_cast<int64_t>(features.size()), cb.dim());
      for (size_t i = 0; i < features.size(); ++i)
        set_a.row(static_cast<int64_t>(i)) = features[i];
      Eigen::MatrixXd set_b(static_cast<int64_t>(ref.records.size()), cb.dim());
      for (size_t i = 0; i < ref.records.size(); ++i) {
        const TokenSequence seq =
            TokenSequence::single(ref.records[i].tokens, ref.records[i].condition);
        set_b.row(static_cast<int64_t>(i)) = mean_pooled_feature(decode_tokens(seq, cb, fps));
      }
      out +=
          "frechet_lite\tgenerated_vs_ref\t" + format_double(frechet_lite(set_a, set_b)) + "\n";
    }
  }

  if (!jerk_values.empty()) {
    double mean = 0.0;
    for (double v : jerk_values) mean += v;
    mean /= static_cast<double>(jerk_values.size());
    double var = 0.0;
    for (double v : jerk_values) var += (v - mean) * (v - mean);
    const double stddev =
        jerk_values.size() > 1 ? std::sqrt(var / (jerk_values.size() - 1)) : 0.0;
    out += "jerk_mean\tn=" + std::to_string(jerk_values.size()) + "\t" + format_double(mean) +
           "\n";
    out += "jerk_std\tn=" + std::to_string(jerk_values.size()) + "\t" + format_double(stddev) +
           "\n";
  }

  emit(args, cfg, "evaluate", seed, out, started);
  return 0;
}

int run_matrix_audit(const CommonArgs& args, const std::string& codebook_path) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(args);
  const Codebook cb = load_or_make_codebook(cfg, codebook_path);
  const RankMatrix ranks = distance_rank_matrix(cb);
  const int k = cb.size();

  std::string out = "tokendiff-matrix-audit v1 k=" + std::to_string(k) +
                    " t_steps=" + std::to_string(cfg.schedule.t_steps) +
                    " eta=" + format_double(cfg.schedule.eta) + "\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %4s  %-12s %-12s %-14s %-14s %-14s\n", "family", "t",
                "q_dev", "qbar_dev", "qbar_mask", "beta_min", "beta_max");
  out += line;

  for (const bool dynamic : {false, true}) {
    const NoiseSchedule sched = schedule_from(cfg, dynamic ? cfg.schedule.eta : 0.0);
    const TransitionModel model = dynamic ? TransitionModel::dynamic(sched, ranks)
                                          : TransitionModel::uniform(sched, k);
    for (int t = 1; t <= sched.steps(); ++t) {
      const Eigen::MatrixXd& q = model.step(t).probs;
      const Eigen::MatrixXd& qbar = model.cumulative(t).probs;
      const double q_dev = (q.colwise().sum().array() - 1.0).abs().maxCoeff();
      const double qbar_dev = (qbar.colwise().sum().array() - 1.0).abs().maxCoeff();
      const double mask_row = qbar(k, 0);
      double beta_min = 1.0;
      double beta_max = 0.0;
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
          if (i == j) continue;
          beta_min = std::min(beta_min, q(i, j));
          beta_max = std::max(beta_max, q(i, j));
        }
      std::snprintf(line, sizeof(line), "%-8s %4d  %-12.3e %-12.3e %-14.8e %-14.8e %-14.8e\n",
                    dynamic ? "dynamic" : "uniform", t, q_dev, qbar_dev, mask_row, beta_min,
                    beta_max);
      out += line;
    }
  }
  emit(args, cfg, "matrix-audit", args.seed.value_or(0), out, started);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-diffusion token sequence generator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonArgs common;
  std::string codebook_path, dataset_path, model_path, tokens_path, ref_path, profile_path;
  std::string segments;
  int condition = 1;
  int length = 0;
  int t_corrupt = 0;

  CLI::App* make_codebook = app.add_subcommand("make-codebook", "write a synthetic codebook");
  add_common(make_codebook, common);

  CLI::App* make_dataset = app.add_subcommand("make-dataset", "write a synthetic token corpus");
  add_common(make_dataset, common);
  make_dataset->add_option("--codebook", codebook_path, "codebook file");

  CLI::App* train = app.add_subcommand("train", "train the tabular denoiser");
  add_common(train, common);
  train->add_option("--codebook", codebook_path, "codebook file");
  train->add_option("--dataset", dataset_path, "dataset file");

  CLI::App* corrupt = app.add_subcommand("corrupt", "forward-corrupt a dataset at step t");
  add_common(corrupt, common);
  corrupt->add_option("--codebook", codebook_path, "codebook file");
  corrupt->add_option("--input", dataset_path, "dataset file to corrupt");
  corrupt->add_option("-t,--t", t_corrupt, "diffusion step (0 = identity)")->required();

  CLI::App* generate = app.add_subcommand("generate", "sample one motion");
  add_common(generate, common);
  generate->add_option("--codebook", codebook_path, "codebook file");
  generate->add_option("--model", model_path, "trained model file");
  generate->add_option("--condition", condition, "condition id (default 1)");
  generate->add_option("--length", length, "token count (default plan.segment_length)");

  CLI::App* generate_multi = app.add_subcommand("generate-multi", "two-phase multi-segment sample");
  add_common(generate_multi, common);
  generate_multi->add_option("--codebook", codebook_path, "codebook file");
  generate_multi->add_option("--model", model_path, "trained model file");
  generate_multi->add_option("--segments", segments, "plan as cond:len,cond:len,...");

  CLI::App* evaluate = app.add_subcommand("evaluate", "jerk/diversity report for generated tokens");
  add_common(evaluate, common);
  evaluate->add_option("--codebook", codebook_path, "codebook file");
  evaluate->add_option("--tokens", tokens_path, "token file to evaluate");
  evaluate->add_option("--ref", ref_path, "reference dataset for frechet_lite");
  evaluate->add_option("--profile", profile_path, "write per-frame speed/jerk table here");

  CLI::App* matrix_audit = app.add_subcommand("matrix-audit", "per-step transition matrix audit");
  add_common(matrix_audit, common);
  matrix_audit->add_option("--codebook", codebook_path, "codebook file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 1;
  }

  try {
    if (make_codebook->parsed()) return run_make_codebook(common);
    if (make_dataset->parsed()) return run_make_dataset(common, codebook_path);
    if (train->parsed()) return run_train(common, codebook_path, dataset_path);
    if (corrupt->parsed()) return run_corrupt(common, dataset_path, codebook_path, t_corrupt);
    if (generate->parsed())
      return run_generate(common, codebook_path, model_path, condition, length);
    if (generate_multi->parsed())
      return run_generate_multi(common, codebook_path, model_path, segments);
    if (evaluate->parsed())
      return run_evaluate(common, tokens_path, codebook_path, ref_path, profile_path);
    if (matrix_audit->parsed()) return run_matrix_audit(common, codebook_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const ParameterError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: domain: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
