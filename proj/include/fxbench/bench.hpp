#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fxbench/env.hpp"
#include "fxbench/evaluation.hpp"
#include "fxbench/signal.hpp"

namespace fxbench {

enum class BenchMode { kEndToEnd, kPredictOnly };
std::string to_string(BenchMode mode);
BenchMode parse_bench_mode(const std::string& text);  // UsageError on junk

struct BenchPlan {
  std::vector<std::string> models;    // model labels, benchmark names or the ANN label
  std::vector<std::string> datasets;  // dataset labels resolved against the config
  int repetitions = 3;                // wall time reported as the median
  BenchMode mode = BenchMode::kEndToEnd;

  void validate() const;
};

struct TimingRecord {
  std::string model_label;
  std::string period_label;
  double wall_seconds = 0.0;
  double peak_memory_mib = 0.0;
  EnvironmentInfo environment;
  bool failed = false;
  std::string error;
};

// Exclusive advisory file lock so two benchmark runs never time against
// each other. Construction takes the lock or throws UsageError; the lock
// lives until destruction.
class ProcessLock {
 public:
  explicit ProcessLock(const std::string& path);
  ~ProcessLock();
  ProcessLock(const ProcessLock&) = delete;
  ProcessLock& operator=(const ProcessLock&) = delete;

  const std::string& path() const { return path_; }

 private:
  int fd_ = -1;
  std::string path_;
};

// Background thread polling /proc/self/status VmRSS. Peak is the maximum
// sample seen, plus one final reading taken at stop.
class MemorySampler {
 public:
  explicit MemorySampler(std::chrono::milliseconds period = std::chrono::milliseconds(50));
  ~MemorySampler();

  void start();
  double stop_and_peak_mib();

  static double current_rss_mib();  // 0.0 when unavailable

 private:
  struct Impl;
  Impl* impl_;
  std::chrono::milliseconds period_;
};

// Runs `work` `repetitions` times — `setup` (if set) runs before each
// repetition outside the clock — and reports the median wall time with the
// peak memory observed across the whole span. A throwing repetition yields
// a failed record instead of propagating. The lock parameter exists so a
// caller cannot time anything without holding the benchmark lock.
TimingRecord time_run(const std::string& model_label, const std::string& period_label,
                      int repetitions, const std::function<void()>& setup,
                      const std::function<void()>& work, const ProcessLock&,
                      const EnvironmentInfo& env);

// Rectangular model x period view over timing records. Missing cells are
// synthesized as failed records; duplicates are an error.
struct TimingTable {
  std::vector<std::string> models;   // sorted
  std::vector<std::string> periods;  // sorted
  std::vector<TimingRecord> cells;   // row-major, models x periods

  const TimingRecord& at(std::size_t model_idx, std::size_t period_idx) const;
  const TimingRecord* find(const std::string& model, const std::string& period) const;
  // Sum over the model's period cells; empty when any cell failed.
  std::optional<double> overall_seconds(const std::string& model) const;
};

TimingTable build_timing_table(const std::vector<TimingRecord>& records);

void write_timing_csv(const TimingTable& table,
                      const std::vector<std::string>& comment_lines, std::ostream& out);
std::string render_timing_markdown(const TimingTable& table);

// Flat datasets for redrawing the time-efficiency and quality-vs-time
// figures with any external plotter.
struct PlotData {
  struct TimePoint {
    std::string model, period;
    double seconds = 0.0;
  };
  struct OverallPoint {
    std::string model;
    long successful_overall = 0;
    double total_seconds = 0.0;
  };
  std::vector<TimePoint> figure1;
  std::vector<OverallPoint> figure2;
};

// Strict pairing: the two reports must cover the same model set and the
// quality report must be non-empty.
PlotData render_plot_data(const QualityReport& quality, const TimingTable& timing);

void write_figure1_csv(const PlotData& plot, const std::vector<std::string>& comment_lines,
                       std::ostream& out);
void write_figure2_csv(const PlotData& plot, const std::vector<std::string>& comment_lines,
                       std::ostream& out);

// "signals_<model>_<period>.csv" with anything outside [A-Za-z0-9._-]
// replaced by '_'.
std::string sanitize_filename(const std::string& raw);

struct FullConfig;

struct BenchResult {
  struct SignalSet {
    std::string model, period;
    std::vector<ForecastSignal> signals;
  };
  std::vector<TimingRecord> records;
  std::vector<SignalSet> signal_sets;
  QualityReport quality;
  EnvironmentInfo environment;
};

// Full plan execution: lock, materialize datasets, time every model x
// dataset cell, verify signals, aggregate quality.
BenchResult run_bench(const FullConfig& cfg);

// timing.csv, quality.csv, signals_*.csv, figure1.csv, figure2.csv and
// report.md under out_dir; every file opens with the environment and run
// parameters as comment lines.
void write_bench_outputs(const BenchResult& result, const FullConfig& cfg,
                         const std::string& out_dir);

}  // namespace fxbench
