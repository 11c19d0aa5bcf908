#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "mwr/errors.hpp"
#include "mwr/experiment.hpp"
#include "temp_dir.hpp"

using namespace mwr;
using nlohmann::json;

namespace {

json small_config() {
  return json::parse(R"({
    "name": "small",
    "synthetic": {"source_size": 200, "target_size": 200, "min_fillers": 0, "max_fillers": 1,
                  "flip_fraction": 0.5},
    "backbone": {"kind": "mlp", "hidden": 8},
    "methods": ["backbone_only", "data_merging", "mwr"],
    "shots": [10],
    "seeds": [1, 2],
    "training": {"learning_rate": 0.04, "epochs": 2},
    "evaluation": {"permutations": 200}
  })");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing

TEST(Config, ParsesAndEchoes) {
  const auto cfg = parse_experiment_config(small_config(), "/base");
  EXPECT_EQ(cfg.name, "small");
  ASSERT_TRUE(cfg.synthetic);
  EXPECT_EQ(cfg.synthetic->source_size, 200U);
  EXPECT_EQ(cfg.backbone.arch.hidden, 8U);
  EXPECT_EQ(cfg.methods.size(), 3U);
  EXPECT_EQ(cfg.epochs, 2U);
  EXPECT_EQ(cfg.permutations, 200U);
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/base/results"));
  // The regulator shares the training rate unless told otherwise.
  EXPECT_EQ(cfg.train_spec(Method::mwr, 1).regulator.learning_rate, 0.04);

  const auto again = parse_experiment_config(to_json(cfg));
  EXPECT_EQ(to_json(again), to_json(cfg));
}

TEST(Config, SeparateRegulatorRate) {
  auto doc = small_config();
  doc["regulator"] = {{"learning_rate", 0.2}, {"init", "one"}, {"clamp_nonnegative", false}};
  const auto cfg = parse_experiment_config(doc);
  const auto spec = cfg.train_spec(Method::mwr, 3);
  EXPECT_EQ(spec.regulator.learning_rate, 0.2);
  EXPECT_EQ(spec.learning_rate, 0.04);
  EXPECT_EQ(spec.regulator.init, WeightInit::one);
  EXPECT_FALSE(spec.regulator.clamp_nonnegative);
  EXPECT_EQ(spec.seed, 3U);
}

TEST(Config, UnknownKeysRejected) {
  auto doc = small_config();
  doc["trainig"] = json::object();
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc["training"]["momentum"] = 0.9;
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc["synthetic"]["noise"] = 1;
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
}

TEST(Config, InvalidValuesRejected) {
  auto doc = small_config();
  doc["methods"] = json::array();
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc["seeds"] = json::array();
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc["methods"] = {"mwr", "adversarial"};
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc["training"]["epochs"] = "many";
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc["training"]["learning_rate"] = 0.0;
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc["synthetic"]["flip_fraction"] = 2.0;
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc.erase("synthetic");
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
  doc = small_config();
  doc.erase("shots");
  EXPECT_THROW(parse_experiment_config(doc), ConfigError);
}

TEST(Config, FileLoading) {
  testutil::TempDir dir;
  testutil::write_file(dir / "c.json", small_config().dump());
  const auto cfg = load_experiment_config(dir / "c.json");
  EXPECT_EQ(cfg.output_dir, dir.path() / "results");
  testutil::write_file(dir / "bad.json", "{ not json");
  EXPECT_THROW(load_experiment_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_experiment_config(dir / "missing.json"), IoError);
}

// ---------------------------------------------------------------------------
// Running

TEST(Experiment, SingleMethodTable) {
  auto doc = small_config();
  doc["methods"] = {"backbone_only"};
  const auto table = run_experiment(parse_experiment_config(doc));
  ASSERT_EQ(table.rows.size(), 2U);
  for (const auto& r : table.rows) {
    EXPECT_EQ(r.method, "backbone_only");
    EXPECT_TRUE(r.accuracy);
    EXPECT_FALSE(r.p_value);
    EXPECT_EQ(r.reference, "backbone_only");
  }
}

TEST(Experiment, DeterministicAndOrdered) {
  const auto cfg = parse_experiment_config(small_config());
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(results_csv(a), results_csv(b));
  ASSERT_EQ(a.rows.size(), 6U);
  EXPECT_EQ(a.rows[0].method, "backbone_only");
  EXPECT_EQ(a.rows[0].seed, 1U);
  EXPECT_EQ(a.rows[1].seed, 2U);
  EXPECT_EQ(a.rows[5].method, "mwr");
  // The reference is the better of the two non-mwr methods.
  for (const auto& r : a.rows) {
    EXPECT_TRUE(r.reference == "backbone_only" || r.reference == "data_merging");
    EXPECT_EQ(r.p_value.has_value(), r.method != r.reference);
  }
}

TEST(Experiment, CellsShareInitialization) {
  const auto cfg = parse_experiment_config(small_config());
  const auto data = prepare_cell(cfg, 10, 1);
  EXPECT_EQ(data.few_shot.size(), 20U);
  EXPECT_EQ(data.test.size(), 180U);
  EXPECT_EQ(data.source_flipped.size(), 200U);
  const auto cell = run_cell(cfg, data, 10, 1);
  for (const auto& rep : cell.reports) {
    EXPECT_EQ(rep.initial.params(), cell.reports.front().initial.params());
  }
}

TEST(Experiment, FailingCellBecomesErrorRows) {
  auto doc = small_config();
  doc["shots"] = {10, 500};
  const auto table = run_experiment(parse_experiment_config(doc));
  ASSERT_EQ(table.rows.size(), 12U);
  std::size_t errors = 0;
  for (const auto& r : table.rows) {
    if (r.shot == 500) {
      EXPECT_FALSE(r.accuracy);
      EXPECT_NE(r.error.find("class"), std::string::npos);
      ++errors;
    } else {
      EXPECT_TRUE(r.error.empty());
    }
  }
  EXPECT_EQ(errors, 6U);
}

TEST(Experiment, TsvInputs) {
  testutil::TempDir dir;
  ShiftSpec spec;
  spec.source_size = 120;
  spec.target_size = 80;
  spec.max_fillers = 2;
  Rng rng(4);
  const auto shift = gen_synthetic_shift(spec, rng);
  // A third class in the source exercises keep_labels.
  Dataset src = shift.source;
  src.class_count = 3;
  src.examples.push_back({"x", "y", 2});
  write_tsv(src, dir / "src.tsv");
  write_tsv(shift.target, dir / "tgt.tsv");
  json doc = {
      {"source", {{"path", "src.tsv"}, {"keep_labels", {0, 1}}, {"balance", true}}},
      {"target", {{"path", "tgt.tsv"}}},
      {"methods", {"backbone_only", "fine_tuning"}},
      {"shots", {5}},
      {"seeds", {3}},
      {"training", {{"epochs", 1}}},
      {"evaluation", {{"permutations", 50}, {"reference", "backbone_only"}}},
  };
  testutil::write_file(dir / "cfg.json", doc.dump());
  const auto cfg = load_experiment_config(dir / "cfg.json");
  const auto table = run_experiment(cfg);
  ASSERT_EQ(table.rows.size(), 2U);
  for (const auto& r : table.rows) EXPECT_TRUE(r.error.empty()) << r.error;
  EXPECT_EQ(table.rows[1].reference, "backbone_only");
}

// ---------------------------------------------------------------------------
// Output

TEST(Results, CsvRoundTripAndEmptyTable) {
  ResultsTable table;
  table.rows.push_back({"mwr", 50, 1, 0.8125, 0.0123, "fine_tuning", ""});
  table.rows.push_back({"fine_tuning", 50, 1, 0.75, std::nullopt, "fine_tuning", ""});
  table.rows.push_back({"mwr", 50, 2, std::nullopt, std::nullopt, "", "bad, \"quoted\" error"});
  EXPECT_EQ(parse_results_csv(results_csv(table)), table.rows);
  EXPECT_EQ(results_csv(ResultsTable{}), "method,shot,seed,accuracy,p_value,reference,error\n");
  EXPECT_THROW(parse_results_csv("header\na,b\n"), ParseError);
}

TEST(Results, AggregatesAreMeans) {
  ResultsTable table;
  table.rows.push_back({"mwr", 10, 1, 0.1, 0.01, "x", ""});
  table.rows.push_back({"mwr", 10, 2, 0.2, 0.5, "x", ""});
  table.rows.push_back({"mwr", 10, 3, 0.4, 0.04, "x", ""});
  table.rows.push_back({"mwr", 10, 4, std::nullopt, std::nullopt, "", "boom"});
  table.rows.push_back({"mwr", 50, 1, 0.9, std::nullopt, "", ""});
  const auto aggs = table.aggregates();
  ASSERT_EQ(aggs.size(), 2U);
  EXPECT_NEAR(aggs[0].mean_accuracy, (0.1 + 0.2 + 0.4) / 3.0, 1e-12);
  EXPECT_EQ(aggs[0].runs, 3U);
  EXPECT_EQ(aggs[0].significant, 2U);
  EXPECT_EQ(aggs[1].mean_accuracy, 0.9);
}

TEST(Results, EmitAndReload) {
  testutil::TempDir dir;
  const auto cfg = parse_experiment_config(small_config());
  const auto table = run_experiment(cfg);
  emit_results(table, dir / "out");
  const auto csv = testutil::read_file(dir / "out" / "results.csv");
  EXPECT_EQ(parse_results_csv(csv), table.rows);
  const auto back = load_results_json(dir / "out" / "results.json");
  EXPECT_EQ(back.rows, table.rows);
  EXPECT_EQ(back.config["name"], "small");
  EXPECT_EQ(back.config["synthetic"]["source_size"], 200);
  const auto summary = testutil::read_file(dir / "out" / "summary.txt");
  EXPECT_NE(summary.find("10-shot"), std::string::npos);
  EXPECT_NE(summary.find("data_merging"), std::string::npos);
  EXPECT_EQ(results_csv(back), csv);
}

TEST(Results, UnwritableDirectory) {
  testutil::TempDir dir;
  testutil::write_file(dir / "file", "x");
  EXPECT_THROW(emit_results(ResultsTable{}, dir / "file" / "sub"), IoError);
}

TEST(Results, MalformedJson) {
  testutil::TempDir dir;
  testutil::write_file(dir / "r.json", R"({"config": {}, "rows": [{"method": 3}]})");
  EXPECT_THROW(load_results_json(dir / "r.json"), DataError);
  testutil::write_file(dir / "r.json", "[");
  EXPECT_THROW(load_results_json(dir / "r.json"), DataError);
  EXPECT_THROW(load_results_json(dir / "none.json"), IoError);
}
