#include "fxbench/bench.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fxbench/config.hpp"
#include "fxbench/errors.hpp"
#include "fxbench/lstm.hpp"
#include "fxbench/paired_ann.hpp"

namespace fxbench {

std::string to_string(BenchMode mode) {
  return mode == BenchMode::kEndToEnd ? "end_to_end" : "predict_only";
}

BenchMode parse_bench_mode(const std::string& text) {
  if (text == "end_to_end") return BenchMode::kEndToEnd;
  if (text == "predict_only") return BenchMode::kPredictOnly;
  throw UsageError("bench mode must be end_to_end or predict_only, got '" + text + "'");
}

void BenchPlan::validate() const {
  if (models.empty()) throw UsageError("bench plan lists no models");
  if (datasets.empty()) throw UsageError("bench plan lists no datasets");
  if (repetitions < 1) throw UsageError("repetitions must be >= 1");
}

ProcessLock::ProcessLock(const std::string& path) : path_(path) {
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0)
    throw UsageError("cannot open lock file " + path + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    if (err == EWOULDBLOCK)
      throw UsageError("another benchmark run holds the lock " + path);
    throw UsageError("cannot lock " + path + ": " + std::strerror(err));
  }
}

ProcessLock::~ProcessLock() {
  if (fd_ >= 0) ::close(fd_);  // releases the flock
}

struct MemorySampler::Impl {
  std::thread worker;
  std::mutex mu;
  std::condition_variable cv;
  bool stop = false;
  double peak_mib = 0.0;
};

MemorySampler::MemorySampler(std::chrono::milliseconds period)
    : impl_(new Impl), period_(period) {}

MemorySampler::~MemorySampler() {
  if (impl_->worker.joinable()) stop_and_peak_mib();
  delete impl_;
}

double MemorySampler::current_rss_mib() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmRSS:", 0) != 0) continue;
    std::istringstream fields(line.substr(6));
    long kb = 0;
    if (fields >> kb) return static_cast<double>(kb) / 1024.0;
    break;
  }
  return 0.0;
}

void MemorySampler::start() {
  impl_->stop = false;
  impl_->peak_mib = current_rss_mib();
  impl_->worker = std::thread([this]() {
    std::unique_lock<std::mutex> lock(impl_->mu);
    while (!impl_->stop) {
      impl_->cv.wait_for(lock, period_, [this]() { return impl_->stop; });
      lock.unlock();
      const double rss = current_rss_mib();
      lock.lock();
      impl_->peak_mib = std::max(impl_->peak_mib, rss);
    }
  });
}

double MemorySampler::stop_and_peak_mib() {
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->stop = true;
  }
  impl_->cv.notify_all();
  if (impl_->worker.joinable()) impl_->worker.join();
  return std::max(impl_->peak_mib, current_rss_mib());
}

TimingRecord time_run(const std::string& model_label, const std::string& period_label,
                      int repetitions, const std::function<void()>& setup,
                      const std::function<void()>& work, const ProcessLock&,
                      const EnvironmentInfo& env) {
  if (repetitions < 1) throw UsageError("repetitions must be >= 1");
  TimingRecord record;
  record.model_label = model_label;
  record.period_label = period_label;
  record.environment = env;

  MemorySampler sampler;
  sampler.start();
  std::vector<double> walls;
  walls.reserve(static_cast<std::size_t>(repetitions));
  try {
    for (int rep = 0; rep < repetitions; ++rep) {
      if (setup) setup();
      const auto begin = std::chrono::steady_clock::now();
      work();
      const auto end = std::chrono::steady_clock::now();
      walls.push_back(std::chrono::duration<double>(end - begin).count());
    }
  } catch (const std::exception& e) {
    record.failed = true;
    record.error = e.what();
    record.peak_memory_mib = sampler.stop_and_peak_mib();
    return record;
  }
  record.peak_memory_mib = sampler.stop_and_peak_mib();

  std::sort(walls.begin(), walls.end());
  const std::size_t n = walls.size();
  record.wall_seconds =
      n % 2 == 1 ? walls[n / 2] : 0.5 * (walls[n / 2 - 1] + walls[n / 2]);
  return record;
}

const TimingRecord& TimingTable::at(std::size_t model_idx, std::size_t period_idx) const {
  return cells.at(model_idx * periods.size() + period_idx);
}

const TimingRecord* TimingTable::find(const std::string& model,
                                      const std::string& period) const {
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m] != model) continue;
    for (std::size_t p = 0; p < periods.size(); ++p)
      if (periods[p] == period) return &at(m, p);
  }
  return nullptr;
}

std::optional<double> TimingTable::overall_seconds(const std::string& model) const {
  double sum = 0.0;
  bool found = false;
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m] != model) continue;
    found = true;
    for (std::size_t p = 0; p < periods.size(); ++p) {
      const TimingRecord& r = at(m, p);
      if (r.failed) return std::nullopt;
      sum += r.wall_seconds;
    }
  }
  if (!found) return std::nullopt;
  return sum;
}

TimingTable build_timing_table(const std::vector<TimingRecord>& records) {
  std::map<std::pair<std::string, std::string>, const TimingRecord*> index;
  std::set<std::string> model_set, period_set;
  for (const TimingRecord& r : records) {
    const auto key = std::make_pair(r.model_label, r.period_label);
    if (!index.emplace(key, &r).second)
      throw UsageError("duplicate timing record for " + r.model_label + " / " +
                       r.period_label);
    model_set.insert(r.model_label);
    period_set.insert(r.period_label);
  }

  TimingTable table;
  table.models.assign(model_set.begin(), model_set.end());
  table.periods.assign(period_set.begin(), period_set.end());
  for (const std::string& model : table.models)
    for (const std::string& period : table.periods) {
      const auto it = index.find({model, period});
      if (it != index.end()) {
        table.cells.push_back(*it->second);
      } else {
        TimingRecord missing;
        missing.model_label = model;
        missing.period_label = period;
        missing.failed = true;
        missing.error = "no record";
        table.cells.push_back(std::move(missing));
      }
    }
  return table;
}

namespace {

std::string format_seconds(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string quoted_csv(const std::string& s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

}  // namespace

void write_timing_csv(const TimingTable& table,
                      const std::vector<std::string>& comment_lines, std::ostream& out) {
  for (const std::string& line : comment_lines) out << "# " << line << "\n";
  out << "model";
  for (const std::string& p : table.periods) out << "," << quoted_csv("seconds_" + p);
  out << ",seconds_overall";
  for (const std::string& p : table.periods) out << "," << quoted_csv("peak_mib_" + p);
  out << "\n";
  for (std::size_t m = 0; m < table.models.size(); ++m) {
    out << quoted_csv(table.models[m]);
    for (std::size_t p = 0; p < table.periods.size(); ++p) {
      const TimingRecord& r = table.at(m, p);
      out << "," << (r.failed ? std::string("failed") : format_seconds(r.wall_seconds));
    }
    const std::optional<double> overall = table.overall_seconds(table.models[m]);
    out << "," << (overall ? format_seconds(*overall) : std::string("failed"));
    for (std::size_t p = 0; p < table.periods.size(); ++p) {
      const TimingRecord& r = table.at(m, p);
      out << "," << (r.failed ? std::string("failed") : format_seconds(r.peak_memory_mib));
    }
    out << "\n";
  }
}

std::string render_timing_markdown(const TimingTable& table) {
  std::ostringstream md;
  md << "| Model |";
  for (const std::string& p : table.periods) md << " " << p << " (s) |";
  md << " Overall (s) | Peak RSS (MiB) |\n|---|";
  for (std::size_t p = 0; p < table.periods.size(); ++p) md << "---|";
  md << "---|---|\n";
  for (std::size_t m = 0; m < table.models.size(); ++m) {
    md << "| " << table.models[m] << " |";
    double peak = 0.0;
    bool any_failed = false;
    for (std::size_t p = 0; p < table.periods.size(); ++p) {
      const TimingRecord& r = table.at(m, p);
      if (r.failed) {
        md << " failed |";
        any_failed = true;
      } else {
        md << " " << format_seconds(r.wall_seconds) << " |";
        peak = std::max(peak, r.peak_memory_mib);
      }
    }
    const std::optional<double> overall = table.overall_seconds(table.models[m]);
    md << " " << (overall ? format_seconds(*overall) : std::string("failed")) << " | "
       << (any_failed ? std::string("failed") : format_seconds(peak)) << " |\n";
  }
  return md.str();
}

PlotData render_plot_data(const QualityReport& quality, const TimingTable& timing) {
  if (quality.cells.empty()) throw UsageError("quality report is empty");
  std::set<std::string> quality_models;
  for (const QualityCell& c : quality.cells) quality_models.insert(c.model);
  const std::set<std::string> timing_models(timing.models.begin(), timing.models.end());
  if (quality_models != timing_models)
    throw UsageError("model sets differ between the quality and timing reports");

  PlotData plot;
  for (std::size_t m = 0; m < timing.models.size(); ++m)
    for (std::size_t p = 0; p < timing.periods.size(); ++p) {
      const TimingRecord& r = timing.at(m, p);
      if (!r.failed)
        plot.figure1.push_back({timing.models[m], timing.periods[p], r.wall_seconds});
    }
  for (const std::string& model : timing.models) {
    const std::optional<double> overall = timing.overall_seconds(model);
    if (!overall) continue;
    const QualityCell* cell = quality.find(model, "Overall");
    plot.figure2.push_back({model, cell ? cell->successful_all : 0, *overall});
  }
  return plot;
}

void write_figure1_csv(const PlotData& plot, const std::vector<std::string>& comment_lines,
                       std::ostream& out) {
  for (const std::string& line : comment_lines) out << "# " << line << "\n";
  out << "model,period,seconds\n";
  for (const PlotData::TimePoint& p : plot.figure1)
    out << quoted_csv(p.model) << "," << quoted_csv(p.period) << ","
        << format_seconds(p.seconds) << "\n";
}

void write_figure2_csv(const PlotData& plot, const std::vector<std::string>& comment_lines,
                       std::ostream& out) {
  for (const std::string& line : comment_lines) out << "# " << line << "\n";
  out << "model,successful_overall,total_seconds_overall\n";
  for (const PlotData::OverallPoint& p : plot.figure2)
    out << quoted_csv(p.model) << "," << p.successful_overall << ","
        << format_seconds(p.total_seconds) << "\n";
}

std::string sanitize_filename(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    const bool ok = (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') ||
                    (ch >= '0' && ch <= '9') || ch == '.' || ch == '_' || ch == '-';
    out += ok ? ch : '_';
  }
  return out;
}

BenchResult run_bench(const FullConfig& cfg) {
  cfg.validate();
  ProcessLock lock(cfg.lock_file);
  BenchResult result;
  result.environment = EnvironmentInfo::capture();

  // Everything slow and I/O-bound happens before any clock starts.
  std::vector<PriceSeries> series_list;
  for (const std::string& label : cfg.plan.datasets)
    series_list.push_back(materialize_dataset_by_label(label, cfg));

  for (const std::string& model_label : cfg.plan.models) {
    const std::uint64_t seed = model_seed(cfg, model_label);
    for (const PriceSeries& series : series_list) {
      BenchResult::SignalSet set;
      set.model = model_label;
      set.period = series.label;

      TimingRecord record;
      if (model_label == cfg.ann_label) {
        // The adaptive pass is both training and prediction, so both modes
        // time the same single pass.
        AnnPairConfig ann_cfg = cfg.ann;
        ann_cfg.seed = seed;
        record = time_run(
            model_label, series.label, cfg.plan.repetitions, nullptr,
            [&]() { set.signals = run_custom_ann(series, ann_cfg, cfg.indicators,
                                                 cfg.ann_label); },
            lock, result.environment);
      } else {
        const ModelSpec& spec = find_model_spec(model_label);
        TrainConfig tcfg = cfg.train;
        tcfg.seed = seed;
        if (cfg.plan.mode == BenchMode::kEndToEnd) {
          LstmModel model;
          std::size_t split_tick = 0;
          record = time_run(
              model_label, series.label, cfg.plan.repetitions,
              [&]() { model = build_model(spec, seed); },
              [&]() {
                const TrainingReport report = train(model, series, tcfg);
                split_tick = report.split_tick;
                set.signals = predict_signals(model, series, cfg.signal_gen, split_tick,
                                              model_label);
              },
              lock, result.environment);
        } else {
          // predict_only: fit once outside the clock, time inference alone.
          try {
            LstmModel model = build_model(spec, seed);
            const TrainingReport report = train(model, series, tcfg);
            record = time_run(
                model_label, series.label, cfg.plan.repetitions, nullptr,
                [&]() {
                  set.signals = predict_signals(model, series, cfg.signal_gen,
                                                report.split_tick, model_label);
                },
                lock, result.environment);
          } catch (const std::exception& e) {
            record.model_label = model_label;
            record.period_label = series.label;
            record.environment = result.environment;
            record.failed = true;
            record.error = e.what();
          }
        }
      }
      if (record.failed) set.signals.clear();
      result.records.push_back(std::move(record));
      result.signal_sets.push_back(std::move(set));
    }
  }

  std::vector<LabeledOutcome> outcomes;
  for (const BenchResult::SignalSet& set : result.signal_sets) {
    const PriceSeries* series = nullptr;
    for (const PriceSeries& s : series_list)
      if (s.label == set.period) series = &s;
    if (!series) continue;
    for (const SignalOutcome& outcome : verify_signals(set.signals, *series, cfg.verification))
      outcomes.push_back({set.model, set.period, outcome});
  }
  result.quality = aggregate(outcomes);
  return result;
}

void write_bench_outputs(const BenchResult& result, const FullConfig& cfg,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> comments = result.environment.comment_lines();
  for (const std::string& line : config_comment_lines(cfg)) comments.push_back(line);

  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(out_dir) / name);
    if (!out) throw DataError("cannot write " + name + " under " + out_dir);
    return out;
  };

  const TimingTable table = build_timing_table(result.records);
  {
    std::ofstream out = open("timing.csv");
    write_timing_csv(table, comments, out);
  }
  {
    std::ofstream out = open("quality.csv");
    write_quality_csv(result.quality, comments, out);
  }
  for (const BenchResult::SignalSet& set : result.signal_sets) {
    std::ofstream out = open("signals_" + sanitize_filename(set.model) + "_" +
                             sanitize_filename(set.period) + ".csv");
    write_signal_csv(set.signals, comments, out);
  }

  // Lenient plot assembly: a model that emitted no verifiable signal still
  // appears with zero successes instead of failing the bundle.
  PlotData plot;
  for (std::size_t m = 0; m < table.models.size(); ++m)
    for (std::size_t p = 0; p < table.periods.size(); ++p) {
      const TimingRecord& r = table.at(m, p);
      if (!r.failed)
        plot.figure1.push_back({table.models[m], table.periods[p], r.wall_seconds});
    }
  for (const std::string& model : table.models) {
    const std::optional<double> overall = table.overall_seconds(model);
    if (!overall) continue;
    const QualityCell* cell = result.quality.find(model, "Overall");
    plot.figure2.push_back({model, cell ? cell->successful_all : 0, *overall});
  }
  {
    std::ofstream out = open("figure1.csv");
    write_figure1_csv(plot, comments, out);
  }
  {
    std::ofstream out = open("figure2.csv");
    write_figure2_csv(plot, comments, out);
  }

  std::ofstream md = open("report.md");
  md << "# Forex forecasting benchmark\n\n## Environment\n\n";
  for (const std::string& line : result.environment.comment_lines()) md << "- " << line << "\n";
  md << "\n## Run parameters\n\n";
  for (const std::string& line : config_comment_lines(cfg)) md << "- " << line << "\n";
  md << "\n## Time efficiency\n\n"
     << render_timing_markdown(table) << "\n## Forecast quality\n\n"
     << render_quality_markdown(result.quality, cfg.decimal_comma);
  if (!md) throw DataError("cannot write report.md under " + out_dir);
}

}  // namespace fxbench
