#include "fxbench/bench.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <memory>
#include <sstream>
#include <thread>

#include "fxbench/errors.hpp"
#include "testutil.hpp"

using namespace fxbench;
namespace tt = fxbench::test;

namespace {

EnvironmentInfo fake_env() {
  EnvironmentInfo env;
  env.cpu_model = "test-cpu";
  env.core_count = 2;
  env.total_ram_mib = 1024;
  env.os_version = "test-os";
  return env;
}

TimingRecord rec(const std::string& model, const std::string& period, double secs,
                 double mib = 10.0) {
  TimingRecord r;
  r.model_label = model;
  r.period_label = period;
  r.wall_seconds = secs;
  r.peak_memory_mib = mib;
  r.environment = fake_env();
  return r;
}

void sleep_ms(int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }

}  // namespace

TEST(SanitizeTest, ReplacesUnsafeCharacters) {
  EXPECT_EQ(sanitize_filename("sLSTM-15-1,15"), "sLSTM-15-1_15");
  EXPECT_EQ(sanitize_filename("Custom-ANN"), "Custom-ANN");
  EXPECT_EQ(sanitize_filename("a b/c\\d"), "a_b_c_d");
  EXPECT_EQ(sanitize_filename("ok-name_1.2"), "ok-name_1.2");
  EXPECT_EQ(sanitize_filename(""), "");
}

TEST(BenchModeTest, ParseAndPrintRoundTrip) {
  EXPECT_EQ(parse_bench_mode("end_to_end"), BenchMode::kEndToEnd);
  EXPECT_EQ(parse_bench_mode("predict_only"), BenchMode::kPredictOnly);
  EXPECT_EQ(to_string(BenchMode::kEndToEnd), "end_to_end");
  EXPECT_EQ(to_string(BenchMode::kPredictOnly), "predict_only");
  EXPECT_THROW(parse_bench_mode("fastest"), UsageError);
  EXPECT_THROW(parse_bench_mode(""), UsageError);
}

TEST(BenchPlanTest, ValidateRejectsEmptyAxes) {
  BenchPlan plan;
  plan.models = {"m"};
  plan.datasets = {"d"};
  EXPECT_NO_THROW(plan.validate());
  plan.models.clear();
  EXPECT_THROW(plan.validate(), UsageError);
  plan.models = {"m"};
  plan.datasets.clear();
  EXPECT_THROW(plan.validate(), UsageError);
  plan.datasets = {"d"};
  plan.repetitions = 0;
  EXPECT_THROW(plan.validate(), UsageError);
}

TEST(ProcessLockTest, SecondHolderIsTurnedAway) {
  tt::TempDir tmp;
  const std::string path = tmp.str("bench.lock");
  auto first = std::make_unique<ProcessLock>(path);
  EXPECT_EQ(first->path(), path);
  try {
    ProcessLock second(path);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("another benchmark run holds the lock"),
              std::string::npos);
  }
  first.reset();  // released on destruction
  EXPECT_NO_THROW(ProcessLock{path});
}

TEST(ProcessLockTest, UnwritableLocationFailsCleanly) {
  EXPECT_THROW(ProcessLock("/nonexistent-dir-xyz/bench.lock"), UsageError);
}

TEST(MemorySamplerTest, ReadsOwnRss) {
  const double rss = MemorySampler::current_rss_mib();
  EXPECT_GT(rss, 1.0);      // a running test binary is bigger than a megabyte
  EXPECT_LT(rss, 100000.0);  // and smaller than 100 GiB
}

TEST(MemorySamplerTest, PeakCoversAnAllocationBurst) {
  MemorySampler sampler(std::chrono::milliseconds(5));
  const double before = MemorySampler::current_rss_mib();
  sampler.start();
  {
    // ~64 MiB touched so the RSS genuinely rises
    std::vector<char> block(64 * 1024 * 1024, 1);
    for (std::size_t i = 0; i < block.size(); i += 4096) block[i] = char(i);
    sleep_ms(40);
  }
  const double peak = sampler.stop_and_peak_mib();
  EXPECT_GE(peak, before);
  EXPECT_GT(peak, before + 30.0);  // burst visible even with page-size slop
}

TEST(TimeRunTest, ReportsTheMedianRepetition) {
  tt::TempDir tmp;
  ProcessLock lock(tmp.str("l"));
  int rep = 0;
  const int sleeps_ms[] = {400, 20, 80};  // median 80, mean ~167
  TimingRecord r = time_run(
      "m", "p", 3, nullptr, [&]() { sleep_ms(sleeps_ms[rep++]); }, lock, fake_env());
  EXPECT_FALSE(r.failed);
  EXPECT_EQ(r.model_label, "m");
  EXPECT_EQ(r.period_label, "p");
  EXPECT_EQ(r.environment.cpu_model, "test-cpu");
  EXPECT_GE(r.wall_seconds, 0.078);
  EXPECT_LT(r.wall_seconds, 0.15);  // mean or max would land far above
  EXPECT_GT(r.peak_memory_mib, 0.0);
}

TEST(TimeRunTest, SetupStaysOffTheClock) {
  tt::TempDir tmp;
  ProcessLock lock(tmp.str("l"));
  TimingRecord r = time_run(
      "m", "p", 1, [&]() { sleep_ms(150); }, [&]() { sleep_ms(10); }, lock, fake_env());
  EXPECT_FALSE(r.failed);
  EXPECT_LT(r.wall_seconds, 0.1);
  EXPECT_GE(r.wall_seconds, 0.009);
}

TEST(TimeRunTest, ThrowingWorkYieldsFailedRecord) {
  tt::TempDir tmp;
  ProcessLock lock(tmp.str("l"));
  TimingRecord r = time_run(
      "m", "p", 2, nullptr, [&]() { throw DataError("bad feed"); }, lock, fake_env());
  EXPECT_TRUE(r.failed);
  EXPECT_NE(r.error.find("bad feed"), std::string::npos);
  EXPECT_EQ(r.model_label, "m");
}

TEST(TimeRunTest, RejectsZeroRepetitions) {
  tt::TempDir tmp;
  ProcessLock lock(tmp.str("l"));
  EXPECT_THROW(time_run("m", "p", 0, nullptr, []() {}, lock, fake_env()), UsageError);
}

TEST(TimingTableTest, SortsAxesAndFillsGaps) {
  // deliberately unsorted, with (a, p1) missing
  const std::vector<TimingRecord> records = {rec("b", "p2", 4.0), rec("b", "p1", 3.0),
                                             rec("a", "p2", 2.0)};
  const TimingTable table = build_timing_table(records);
  ASSERT_EQ(table.models, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(table.periods, (std::vector<std::string>{"p1", "p2"}));
  ASSERT_EQ(table.cells.size(), 4u);

  EXPECT_TRUE(table.at(0, 0).failed);
  EXPECT_EQ(table.at(0, 0).error, "no record");
  EXPECT_DOUBLE_EQ(table.at(0, 1).wall_seconds, 2.0);
  EXPECT_DOUBLE_EQ(table.at(1, 0).wall_seconds, 3.0);
  EXPECT_DOUBLE_EQ(table.at(1, 1).wall_seconds, 4.0);

  const TimingRecord* hit = table.find("b", "p2");
  ASSERT_NE(hit, nullptr);
  EXPECT_DOUBLE_EQ(hit->wall_seconds, 4.0);
  EXPECT_EQ(table.find("c", "p1"), nullptr);
  EXPECT_EQ(table.find("a", "p9"), nullptr);
}

TEST(TimingTableTest, DuplicateRecordsThrow) {
  const std::vector<TimingRecord> records = {rec("a", "p", 1.0), rec("a", "p", 2.0)};
  EXPECT_THROW(build_timing_table(records), UsageError);
}

TEST(TimingTableTest, OverallSumsOrDeclines) {
  const TimingTable table =
      build_timing_table({rec("a", "p1", 1.25), rec("a", "p2", 2.5), rec("b", "p2", 1.0)});
  const auto a = table.overall_seconds("a");
  ASSERT_TRUE(a.has_value());
  EXPECT_DOUBLE_EQ(*a, 3.75);
  EXPECT_FALSE(table.overall_seconds("b").has_value());  // (b, p1) is a gap
  EXPECT_FALSE(table.overall_seconds("zzz").has_value());
}

TEST(TimingCsvTest, GridHeaderAndFailedPlaceholders) {
  TimingRecord bad = rec("b", "p1", 0.0);
  bad.failed = true;
  bad.error = "boom";
  const TimingTable table =
      build_timing_table({rec("a", "p1", 1.5, 12.0), rec("a", "p2", 0.25, 34.5),
                          bad, rec("b", "p2", 2.0, 56.0)});
  std::ostringstream out;
  write_timing_csv(table, {"cpu: test-box"}, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# cpu: test-box");
  std::getline(in, line);
  EXPECT_EQ(line, "model,seconds_p1,seconds_p2,seconds_overall,peak_mib_p1,peak_mib_p2");
  std::getline(in, line);
  EXPECT_EQ(line, "a,1.5,0.25,1.75,12,34.5");
  std::getline(in, line);
  EXPECT_EQ(line, "b,failed,2,failed,failed,56");
}

TEST(TimingMarkdownTest, RowsCarryOverallAndPeak) {
  const TimingTable table =
      build_timing_table({rec("a", "p1", 1.5, 12.0), rec("a", "p2", 0.5, 48.0)});
  const std::string md = render_timing_markdown(table);
  EXPECT_NE(md.find("| Model | p1 (s) | p2 (s) | Overall (s) | Peak RSS (MiB) |"),
            std::string::npos);
  EXPECT_NE(md.find("| a | 1.5 | 0.5 | 2 | 48 |"), std::string::npos);
}

namespace {

QualityReport tiny_quality(const std::vector<std::string>& models) {
  std::vector<LabeledOutcome> outcomes;
  for (const std::string& m : models) {
    LabeledOutcome lo;
    lo.model = m;
    lo.period = "p1";
    lo.outcome.signal.intensity = 1.5;
    lo.outcome.signal.model_label = m;
    lo.outcome.verdict = Verdict::kSuccess;
    outcomes.push_back(lo);
    outcomes.push_back(lo);
    lo.outcome.verdict = Verdict::kFailure;
    outcomes.push_back(lo);
  }
  return aggregate(outcomes);
}

}  // namespace

TEST(PlotDataTest, PairsQualityWithTiming) {
  const TimingTable timing =
      build_timing_table({rec("a", "p1", 1.0), rec("b", "p1", 2.0)});
  const PlotData plot = render_plot_data(tiny_quality({"a", "b"}), timing);

  ASSERT_EQ(plot.figure1.size(), 2u);
  EXPECT_EQ(plot.figure1[0].model, "a");
  EXPECT_DOUBLE_EQ(plot.figure1[0].seconds, 1.0);
  ASSERT_EQ(plot.figure2.size(), 2u);
  EXPECT_EQ(plot.figure2[0].successful_overall, 2);  // 2 of 3 succeeded
  EXPECT_DOUBLE_EQ(plot.figure2[1].total_seconds, 2.0);
}

TEST(PlotDataTest, FailedCellsDropOutOfFigures) {
  TimingRecord bad = rec("a", "p2", 0.0);
  bad.failed = true;
  const TimingTable timing =
      build_timing_table({rec("a", "p1", 1.0), bad, rec("b", "p1", 2.0), rec("b", "p2", 3.0)});
  const PlotData plot = render_plot_data(tiny_quality({"a", "b"}), timing);
  // a's failed cell leaves figure1; a has no overall so figure2 keeps only b
  ASSERT_EQ(plot.figure1.size(), 3u);
  ASSERT_EQ(plot.figure2.size(), 1u);
  EXPECT_EQ(plot.figure2[0].model, "b");
  EXPECT_DOUBLE_EQ(plot.figure2[0].total_seconds, 5.0);
}

TEST(PlotDataTest, StrictAboutInputs) {
  const TimingTable timing = build_timing_table({rec("a", "p1", 1.0)});
  try {
    render_plot_data(QualityReport{}, timing);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("quality report is empty"), std::string::npos);
  }
  try {
    render_plot_data(tiny_quality({"a", "b"}), timing);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("model sets differ"), std::string::npos);
  }
}

TEST(FigureCsvTest, HeadersAndRows) {
  const TimingTable timing = build_timing_table({rec("a", "p1", 1.5)});
  const PlotData plot = render_plot_data(tiny_quality({"a"}), timing);

  std::ostringstream f1;
  write_figure1_csv(plot, {}, f1);
  EXPECT_EQ(f1.str(), "model,period,seconds\na,p1,1.5\n");

  std::ostringstream f2;
  write_figure2_csv(plot, {"note"}, f2);
  EXPECT_EQ(f2.str(), "# note\nmodel,successful_overall,total_seconds_overall\na,2,1.5\n");
}
