#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef MWR_CLI11_SINGLE_HEADER
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mwr/errors.hpp"
#include "mwr/eval.hpp"
#include "mwr/experiment.hpp"

namespace fs = std::filesystem;
using namespace mwr;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string counts_text(const Dataset& ds) {
  std::string out;
  const auto counts = class_counts(ds);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out += fmt::format("{}{}:{}", c == 0 ? "" : " ", c, counts[c]);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct PrepArgs {
  fs::path input;
  fs::path out;
  std::size_t classes = 0;
  std::vector<std::size_t> keep;
  bool balance = false;
  std::uint64_t seed = 0;
  std::optional<std::size_t> shots;
};

int run_prep(const PrepArgs& a) {
  Dataset ds = load_tsv(a.input, a.classes);
  std::cout << fmt::format("loaded {} examples ({})\n", ds.size(), counts_text(ds));
  if (!a.keep.empty()) {
    auto filtered = filter_labels(ds, a.keep);
    for (std::size_t label : filtered.absent_labels) {
      std::cerr << fmt::format("warning: kept label {} has no examples\n", label);
    }
    std::cout << fmt::format("filter: dropped {}, kept {}\n", filtered.dropped,
                             filtered.dataset.size());
    ds = std::move(filtered.dataset);
  }
  if (a.balance) {
    ds = balance_downsample(ds, a.seed);
    std::cout << fmt::format("balanced to {} examples ({})\n", ds.size(), counts_text(ds));
  }
  ensure_dir(a.out);
  write_tsv(ds, a.out / "data.tsv");
  if (a.shots) {
    const auto split = sample_few_shot(ds, {*a.shots, a.seed});
    write_tsv(split.few_shot, a.out / "few_shot.tsv");
    write_tsv(split.remainder, a.out / "remainder.tsv");
    std::cout << fmt::format("few-shot {} / remainder {}\n", split.few_shot.size(),
                             split.remainder.size());
  }
  std::cout << "wrote " << a.out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  ShiftSpec spec;
  std::uint64_t seed = 0;
  fs::path out;
};

int run_gen(const GenArgs& a) {
  a.spec.validate();
  Rng rng(a.seed);
  const auto shift = gen_synthetic_shift(a.spec, rng);
  ensure_dir(a.out);
  write_tsv(shift.source, a.out / "source.tsv");
  write_tsv(shift.target, a.out / "target.tsv");
  std::string flags;
  std::size_t flipped = 0;
  for (bool f : shift.source_flipped) {
    flags += f ? "1\n" : "0\n";
    flipped += f ? 1 : 0;
  }
  write_text(a.out / "source_flipped.txt", flags);
  std::cout << fmt::format("source {} ({} flipped), target {} -> {}\n", shift.source.size(),
                           flipped, shift.target.size(), a.out.string());
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  fs::path source;
  fs::path target;
  fs::path test;
  fs::path out;
  std::string method = "mwr";
  std::string kind = "mlp";
  std::string init = "zero";
  std::size_t classes = 2;
  BackboneConfig backbone;
  TrainSpec spec;
  std::optional<double> regulator_lr;
  bool no_clamp = false;
};

int run_train(TrainArgs a) {
  a.spec.method = parse_method(a.method);
  a.spec.arch = a.backbone.arch;
  a.spec.arch.kind = parse_backbone_kind(a.kind);
  a.spec.arch.class_count = a.classes;
  a.spec.regulator.init = parse_weight_init(a.init);
  a.spec.regulator.clamp_nonnegative = !a.no_clamp;
  a.spec.regulator.learning_rate = a.regulator_lr.value_or(a.spec.learning_rate);
  a.spec.validate();
  if (a.spec.method != Method::backbone_only && a.source.empty()) {
    throw ConfigError("--source is required for method " + a.method);
  }

  const auto emb =
      build_embedding(a.backbone.embedding_seed, a.backbone.buckets, a.spec.arch.embedding_dim);
  const auto load = [&](const fs::path& p) {
    return featurize(load_tsv(p, a.classes), emb, a.backbone.max_len);
  };
  const auto t_fs = load(a.target);
  const auto s_train = a.source.empty() ? std::vector<Sample>{} : load(a.source);
  const auto report = train(a.spec, s_train, t_fs);

  auto doc = to_json(report);
  std::cout << fmt::format("{} seed {}: final target loss {:.6f}\n", a.method, a.spec.seed,
                           report.target_loss_trace.empty() ? 0.0
                                                            : report.target_loss_trace.back());
  if (!a.test.empty()) {
    const double acc = accuracy(predict(report.final_model, load(a.test)));
    doc["test_accuracy"] = acc;
    std::cout << fmt::format("test accuracy {:.4f}\n", acc);
  }
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_text(a.out / "report.json", doc.dump(2) + "\n");
    if (!report.weight_trace.empty()) {
      write_text(a.out / "weight_trace.csv", weight_trace_csv(report.weight_trace));
    }
    std::cout << "wrote " << a.out.string() << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int status_of(const ResultsTable& table) {
  int code = kOk;
  for (const auto& r : table.rows) {
    if (r.error.empty()) continue;
    if (r.error.starts_with(kNumericalErrorPrefix)) return kNumerical;
    code = kData;
  }
  return code;
}

int run_experiment_cmd(const fs::path& config, const fs::path& out,
                       std::optional<std::size_t> permutations) {
  auto cfg = load_experiment_config(config);
  if (!out.empty()) cfg.output_dir = out;
  if (permutations) cfg.permutations = *permutations;
  const auto table = run_experiment(cfg);
  emit_results(table, cfg.output_dir);
  std::cout << summary_grid(table);
  std::cout << "wrote " << cfg.output_dir.string() << "\n";
  const int code = status_of(table);
  if (code != kOk) std::cerr << "error: some cells failed; see the error column\n";
  return code;
}

int run_report(const fs::path& results, const fs::path& out) {
  const auto table = load_results_json(results);
  if (!out.empty()) {
    emit_results(table, out);
    std::cout << "wrote " << out.string() << "\n";
  }
  std::cout << summary_grid(table);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned source weighting for few-shot text matching"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mwr 0.1.0");

  PrepArgs prep;
  auto* prep_cmd = app.add_subcommand("prep", "Load, filter, balance and split a TSV dataset");
  prep_cmd->add_option("--input", prep.input, "Input TSV (text_a, text_b, label)")
      ->required()
      ->check(CLI::ExistingFile);
  prep_cmd->add_option("--out", prep.out, "Output directory")->required();
  prep_cmd->add_option("--classes", prep.classes, "Class count (0 infers from labels)");
  prep_cmd->add_option("--keep-labels", prep.keep, "Labels to keep, relabelled in order")
      ->delimiter(',');
  prep_cmd->add_flag("--balance", prep.balance, "Downsample every class to the smallest");
  prep_cmd->add_option("--seed", prep.seed, "Sampling seed");
  prep_cmd->add_option("--shots", prep.shots, "Also split off k examples per class");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic source/target shift");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--source-size", gen.spec.source_size, "Source examples")
      ->capture_default_str();
  gen_cmd->add_option("--target-size", gen.spec.target_size, "Target examples")
      ->capture_default_str();
  gen_cmd->add_option("--keys", gen.spec.key_count, "Distinct key tokens")->capture_default_str();
  gen_cmd->add_option("--target-vocab", gen.spec.target_vocab, "Target filler vocabulary")
      ->capture_default_str();
  gen_cmd->add_option("--source-vocab", gen.spec.source_vocab, "Source-only filler vocabulary")
      ->capture_default_str();
  gen_cmd->add_option("--overlap", gen.spec.vocab_overlap,
                      "Share of source fillers drawn from target words")
      ->capture_default_str();
  gen_cmd->add_option("--min-fillers", gen.spec.min_fillers, "Fewest fillers per text")
      ->capture_default_str();
  gen_cmd->add_option("--max-fillers", gen.spec.max_fillers, "Most fillers per text")
      ->capture_default_str();
  gen_cmd->add_option("--flip", gen.spec.flip_fraction, "Share of source pairs with inverted labels")
      ->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Run one training method");
  train_cmd->add_option("--target", tr.target, "Few-shot target TSV")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--source", tr.source, "Source TSV")->check(CLI::ExistingFile);
  train_cmd->add_option("--test", tr.test, "Target test TSV")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Directory for report.json and weight_trace.csv");
  train_cmd->add_option("--method", tr.method, "backbone_only, fine_tuning, data_merging or mwr")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.spec.seed, "Run seed")->capture_default_str();
  train_cmd->add_option("--epochs", tr.spec.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--lr", tr.spec.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.spec.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--regulator-lr", tr.regulator_lr, "Weight step size (default: --lr)");
  train_cmd->add_option("--init", tr.init, "Weight initialization: zero, one or random")
      ->capture_default_str();
  train_cmd->add_flag("--no-clamp", tr.no_clamp, "Allow negative regulated weights");
  train_cmd->add_option("--kind", tr.kind, "Backbone: logistic, mlp or bilinear")
      ->capture_default_str();
  train_cmd->add_option("--classes", tr.classes, "Class count")->capture_default_str();
  train_cmd->add_option("--dim", tr.backbone.arch.embedding_dim, "Embedding dimension")
      ->capture_default_str();
  train_cmd->add_option("--hidden", tr.backbone.arch.hidden, "MLP hidden units")
      ->capture_default_str();
  train_cmd->add_option("--input-scale", tr.backbone.arch.input_scale, "Feature multiplier")
      ->capture_default_str();
  train_cmd->add_option("--buckets", tr.backbone.buckets, "Hash buckets")->capture_default_str();
  train_cmd->add_option("--embedding-seed", tr.backbone.embedding_seed, "Embedding seed")
      ->capture_default_str();
  train_cmd->add_option("--max-len", tr.backbone.max_len, "Tokens kept per text")
      ->capture_default_str();

  fs::path config;
  fs::path exp_out;
  std::optional<std::size_t> permutations;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the full grid from a config file");
  exp_cmd->add_option("--config", config, "JSON config")->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("--out", exp_out, "Override the configured output directory");
  exp_cmd->add_option("--permutations", permutations, "Override the permutation count");

  fs::path results;
  fs::path report_out;
  auto* report_cmd = app.add_subcommand("report", "Re-emit tables from results.json");
  report_cmd->add_option("--results", results, "results.json")->required();
  report_cmd->add_option("--out", report_out, "Directory to write CSV, JSON and summary into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*prep_cmd) return run_prep(prep);
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*exp_cmd) return run_experiment_cmd(config, exp_out, permutations);
    if (*report_cmd) return run_report(results, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DomainError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
