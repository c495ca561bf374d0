// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// dsresnet: analyze | features | train | eval | infer | gradcheck
//
// Exit codes: 0 success, 1 verification or training failure, 2 usage or
// I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsresnet/audio.hpp"
#include "dsresnet/audio_examples.hpp"
#include "dsresnet/cost_analyzer.hpp"
#include "dsresnet/errors.hpp"
#include "dsresnet/model_io.hpp"
#include "dsresnet/model_zoo.hpp"
#include "dsresnet/random.hpp"
#include "dsresnet/training.hpp"

namespace {

using namespace dsresnet;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::uint64_t seed = 0;
  std::string out;
};

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IngestionError(path + ": cannot open for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (train, validation, test)");
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string model;
  int golden = 0;
  bool csv = false;
};

int run_analyze(const AnalyzeArgs& args, const Common& common) {
  const ArchitectureSpec spec = resolve_architecture(args.model);
  const CostReport report = analyze(spec);
  Output output(common.out);
  std::ostream& out = output.stream();
  if (args.csv) {
    report.print_csv(out);
  } else {
    report.print_table(out);
  }
  if (args.golden == 0) return kExitOk;

  const auto checks = verify_golden(report, args.golden);
  const GoldenTable& table = golden_table(args.golden);
  out << "\ngolden table " << args.golden << " (" << table.arch_name << ")\n";
  std::string printed_params, printed_multiplies;
  for (const auto& c : checks) {
    const char* status = c.passed ? "ok" : (c.erratum ? "erratum" : "MISMATCH");
    out << "  " << std::left << std::setw(9) << status << std::setw(20) << c.row << std::setw(16)
        << c.field << " expected " << std::setw(10) << c.expected << " got " << c.actual;
    if (!c.note.empty()) out << "  (" << c.note << ")";
    out << "\n";
    if (c.row == "Total" && c.field == "params") printed_params = c.actual;
    if (c.row == "Total" && c.field == "multiplies") printed_multiplies = c.actual;
  }
  const bool ok = all_passed(checks);
  out << "totals: " << printed_params << " / " << printed_multiplies << "\n";
  out << (ok ? "golden: PASS" : "golden: FAIL") << "\n";
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- features

struct FeaturesArgs {
  std::string wav;
  std::string data;
  int experiment = 1;
  std::string split = "train";
};

int run_features(const FeaturesArgs& args, const Common& common) {
  if (args.wav.empty() == args.data.empty()) {
    throw ConfigError("features: give exactly one of --wav or --data");
  }
  std::vector<FeatureRecord> records;
  if (!args.wav.empty()) {
    records.push_back({args.wav, 0, mfcc(load_wav(args.wav))});
  } else {
    const DatasetSplits splits = load_speech_commands(args.data, args.experiment, common.seed);
    for (const ClipRef& clip : splits.get(parse_split(args.split))) {
      const Utterance u = materialize(clip, splits.noise);
      records.push_back({clip.path, static_cast<std::uint8_t>(clip.label), mfcc(u.samples)});
    }
  }
  if (common.out.empty()) {
    for (const auto& r : records) {
      std::cout << r.path << "\t" << label_name(r.label) << "\t" << r.features.shape_string() << "\n";
    }
  } else {
    write_feature_cache(common.out, records);
    std::cout << "wrote " << records.size() << " feature maps to " << common.out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string model = "DS-ResNet18";
  int experiment = 1;
  std::string log;
  bool no_augment = false;
  TrainConfig config;
};

int run_train(TrainArgs args, const Common& common) {
  args.config.seed = common.seed;
  const ArchitectureSpec spec = resolve_architecture(args.model);
  const DatasetSplits splits = load_speech_commands(args.data, args.experiment, common.seed);
  const std::uint64_t aug_seed = derive_seed(common.seed, "augmentation");
  AudioExamples train_set(splits.train, splits.noise, aug_seed, !args.no_augment);
  AudioExamples validation_set(splits.validation, splits.noise, aug_seed, false);

  const std::string checkpoint = common.out.empty() ? "model.dsrn" : common.out;
  const std::string log_path = args.log.empty() ? checkpoint + ".csv" : args.log;
  std::ofstream log(log_path);
  if (!log) throw IngestionError(log_path + ": cannot open for writing");

  std::ostringstream sizes;
  sizes << "splits train=" << splits.train.size() << " validation=" << splits.validation.size()
        << " test=" << splits.test.size();
  std::cout << spec.name << " experiment " << args.experiment << ": " << sizes.str() << "\n";
  log << "# " << spec.name << " experiment " << args.experiment << " seed " << common.seed << " "
      << sizes.str() << "\n";
  log << "step,lr,train_loss,val_error\n";

  const TrainResult result =
      train(spec, train_set, validation_set, args.config, [&](const LogEntry& e) {
        log << e.step << "," << e.lr << "," << std::setprecision(9) << e.train_loss << ","
            << e.val_error << std::endl;
        std::cout << "step " << e.step << " lr " << e.lr << " loss " << e.train_loss
                  << " val_error " << e.val_error << std::endl;
      });
  save_model(checkpoint, result.best, result.best_step);
  std::cout << "best validation accuracy " << result.best_val_accuracy << " at step "
            << result.best_step << "; checkpoint " << checkpoint << "\n";
  if (!splits.test.empty()) {
    AudioExamples test_set(splits.test, splits.noise, aug_seed, false);
    const EvalResult eval = evaluate(result.best, test_set);
    std::cout << "test error rate " << eval.error_rate << " (" << eval.n_errors << "/"
              << eval.n_examples << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string data;
  int experiment = 1;
  std::string split = "test";
};

int run_eval(const EvalArgs& args, const Common& common) {
  const Checkpoint ckpt = load_model(args.model);
  const DatasetSplits splits = load_speech_commands(args.data, args.experiment, common.seed);
  AudioExamples examples(splits.get(parse_split(args.split)), splits.noise, common.seed, false);
  const EvalResult eval = evaluate(ckpt.params, examples);
  Output output(common.out);
  std::ostream& out = output.stream();
  out << "split " << args.split << " examples " << eval.n_examples << " errors " << eval.n_errors
      << " error_rate " << std::setprecision(6) << eval.error_rate << "\n";
  out << "confusion (rows true, columns predicted)\n";
  for (std::size_t t = 0; t < eval.confusion.size(); ++t) {
    out << std::left << std::setw(8) << label_name(static_cast<int>(t)) << std::right;
    for (std::size_t count : eval.confusion[t]) out << std::setw(6) << count;
    out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string model;
  std::string wav;
};

int run_infer(const InferArgs& args, const Common& common) {
  const Checkpoint ckpt = load_model(args.model);
  const Tensor posteriors = forward(ckpt.params, mfcc(load_wav(args.wav)));
  std::vector<std::size_t> order(posteriors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return posteriors[a] > posteriors[b]; });
  Output output(common.out);
  std::ostream& out = output.stream();
  out << "top " << label_name(static_cast<int>(order.front())) << "\n";
  out << std::fixed << std::setprecision(9);
  for (std::size_t k : order) {
    out << std::left << std::setw(8) << label_name(static_cast<int>(k)) << " " << posteriors[k] << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::string model = "DS-ResNet10";
  double tolerance = 1e-4;
  std::size_t entries = 16;
  double step = 1e-5;
};

int run_gradcheck(const GradcheckArgs& args, const Common& common) {
  const ArchitectureSpec spec = resolve_architecture(args.model);
  const ModelParams params = build(spec, common.seed);
  Rng rng(derive_seed(common.seed, "gradcheck.input"));
  Tensor input({spec.input_channels, spec.input_height, spec.input_width});
  for (double& v : input.values()) v = rng.normal();
  const int label = static_cast<int>(rng.below(spec.num_classes));

  GradCheckOptions options;
  options.step = args.step;
  options.max_entries_per_tensor = args.entries;
  options.seed = common.seed;
  const auto checks = gradient_check(params, input, label, options);
  Output output(common.out);
  std::ostream& out = output.stream();
  bool ok = true;
  for (const auto& c : checks) {
    const bool pass = c.max_rel_error <= args.tolerance;
    ok = ok && pass;
    out << (pass ? "pass " : "FAIL ") << std::left << std::setw(28) << c.name << std::right
        << std::setw(6) << c.checked << "/" << std::setw(6) << std::left << c.total << std::right
        << " max_rel_error " << std::scientific << std::setprecision(3) << c.max_rel_error
        << std::defaultfloat;
    if (c.kinks + c.unresolved_kinks > 0) out << " kinks " << c.kinks << "+" << c.unresolved_kinks;
    out << "\n";
  }
  out << (ok ? "gradcheck: PASS" : "gradcheck: FAIL") << " (tolerance " << args.tolerance << ")\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depthwise-separable ResNet keyword spotting toolkit"};
  app.require_subcommand(1);
  app.allow_config_extras(false);
  Common common;
  app.add_option("--seed", common.seed, "Master seed for every random stream")->capture_default_str();
  app.add_option("--out", common.out, "Output file (default: stdout, or model.dsrn for train)");
  app.set_config("--config", "", "key=value settings file; command-line flags take precedence");

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Parameter and multiply counts per layer");
  analyze_cmd->fallthrough();
  analyze_cmd->add_option("--model", analyze_args.model, "Preset name or architecture file")->required();
  analyze_cmd->add_option("--golden", analyze_args.golden, "Compare against published table 1, 2 or 3")
      ->check(CLI::Range(1, 3));
  analyze_cmd->add_flag("--csv", analyze_args.csv, "CSV instead of an aligned table");

  FeaturesArgs features_args;
  auto* features_cmd = app.add_subcommand("features", "MFCC features to a DSFC cache");
  features_cmd->fallthrough();
  features_cmd->add_option("--wav", features_args.wav, "Single WAV file")->check(CLI::ExistingFile);
  features_cmd->add_option("--data", features_args.data, "Speech Commands root")->check(CLI::ExistingDirectory);
  features_cmd->add_option("--experiment", features_args.experiment, "1 or 2")
      ->check(CLI::IsMember({1, 2}))->capture_default_str();
  features_cmd->add_option("--split", features_args.split, "train, validation or test")->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train and keep the best validation checkpoint");
  train_cmd->fallthrough();
  train_cmd->add_option("--data", train_args.data, "Speech Commands root")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--model", train_args.model, "Preset name or architecture file")->capture_default_str();
  train_cmd->add_option("--experiment", train_args.experiment, "1 or 2")
      ->check(CLI::IsMember({1, 2}))->capture_default_str();
  train_cmd->add_option("--log", train_args.log, "CSV log (default: <checkpoint>.csv)");
  train_cmd->add_flag("--no-augment", train_args.no_augment, "Disable time shift and noise mixing");
  TrainConfig& tc = train_args.config;
  train_cmd->add_option("--steps", tc.total_steps, "Total SGD steps")->capture_default_str();
  train_cmd->add_option("--batch-size", tc.batch_size, "Examples per step")->capture_default_str();
  train_cmd->add_option("--lr", tc.lr_initial, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--lr-decay", tc.lr_decay, "Learning-rate factor per stage")->capture_default_str();
  train_cmd->add_option("--lr-decay-every", tc.lr_decay_every, "Steps per learning-rate stage")->capture_default_str();
  train_cmd->add_option("--momentum", tc.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--weight-decay", tc.weight_decay, "L2 coefficient")->capture_default_str();
  train_cmd->add_option("--eval-every", tc.eval_every, "Steps between validation passes")->capture_default_str();
  train_cmd->add_option("--threads", tc.threads, "Gradient workers, 0 = all cores")->capture_default_str();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Error rate and confusion matrix of a checkpoint");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--model", eval_args.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_args.data, "Speech Commands root")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--experiment", eval_args.experiment, "1 or 2")
      ->check(CLI::IsMember({1, 2}))->capture_default_str();
  eval_cmd->add_option("--split", eval_args.split, "train, validation or test")->capture_default_str();

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Ranked posteriors for one WAV file");
  infer_cmd->fallthrough();
  infer_cmd->add_option("--model", infer_args.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--wav", infer_args.wav, "16 kHz mono 16-bit WAV")->required()->check(CLI::ExistingFile);

  GradcheckArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Backpropagation against central finite differences");
  grad_cmd->fallthrough();
  grad_cmd->add_option("--model", grad_args.model, "Preset name or architecture file")->capture_default_str();
  grad_cmd->add_option("--tolerance", grad_args.tolerance, "Maximum relative error per tensor")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  grad_cmd->add_option("--entries", grad_args.entries, "Entries per tensor, 0 = all")->capture_default_str();
  grad_cmd->add_option("--step", grad_args.step, "Finite-difference step")
      ->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*analyze_cmd) return run_analyze(analyze_args, common);
    if (*features_cmd) return run_features(features_args, common);
    if (*train_cmd) return run_train(train_args, common);
    if (*eval_cmd) return run_eval(eval_args, common);
    if (*infer_cmd) return run_infer(infer_args, common);
    if (*grad_cmd) return run_gradcheck(grad_args, common);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
