#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fxbench/bench.hpp"
#include "fxbench/config.hpp"
#include "fxbench/errors.hpp"
#include "fxbench/evaluation.hpp"
#include "fxbench/lstm.hpp"
#include "fxbench/paired_ann.hpp"
#include "fxbench/tickdata.hpp"

namespace fs = std::filesystem;
using namespace fxbench;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
  std::string format = "csv";
};

FullConfig make_config(const GlobalOpts& g) {
  FullConfig cfg = g.config_path.empty() ? default_config() : load_config_file(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

std::vector<std::string> output_comments(const FullConfig& cfg) {
  std::vector<std::string> lines = EnvironmentInfo::capture().comment_lines();
  for (const std::string& line : config_comment_lines(cfg)) lines.push_back(line);
  return lines;
}

// --dataset takes either a label from the config or a path to a series CSV.
PriceSeries resolve_series(const std::string& dataset, const FullConfig& cfg) {
  for (const DatasetSpec& d : cfg.datasets)
    if (d.label == dataset) return materialize_dataset_by_label(dataset, cfg);
  if (fs::exists(dataset)) {
    PriceSeries series = read_series_csv_file(dataset);
    series.label = fs::path(dataset).stem().string();
    return remove_flat_areas(series);
  }
  throw UsageError("'" + dataset + "' is neither a configured dataset label nor a file");
}

void write_text_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

QualityReport evaluate_signal_files(const std::vector<std::string>& signal_files,
                                    const std::vector<std::string>& datasets,
                                    const FullConfig& cfg) {
  if (signal_files.size() != datasets.size())
    throw UsageError("--signals and --dataset must be given the same number of times");
  std::vector<LabeledOutcome> outcomes;
  for (std::size_t i = 0; i < signal_files.size(); ++i) {
    const std::vector<ForecastSignal> signals = read_signal_csv_file(signal_files[i]);
    const PriceSeries series = resolve_series(datasets[i], cfg);
    const std::vector<SignalOutcome> verified = verify_signals(signals, series, cfg.verification);
    for (const SignalOutcome& outcome : verified)
      outcomes.push_back({outcome.signal.model_label, series.label, outcome});
  }
  return aggregate(outcomes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forex tick forecasting benchmark: paired adaptive ANN vs LSTM baselines"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file (defaults baked in)");
  app.add_option("--seed", g.seed, "override the config's global seed");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--format", g.format, "report format")
      ->check(CLI::IsMember({"csv", "md"}))
      ->capture_default_str();

  int exit_code = 0;

  // ingest ------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "parse raw quote CSV, preprocess, serialize");
  std::string in_file, in_pair = "EUR/USD", in_basis = "mid", in_label, in_output;
  ingest->add_option("--input", in_file, "raw quote CSV (pair,timestamp,bid,ask)")->required();
  ingest->add_option("--pair", in_pair, "pair filter")->capture_default_str();
  ingest->add_option("--basis", in_basis, "price basis")
      ->check(CLI::IsMember({"mid", "bid", "ask"}))
      ->capture_default_str();
  ingest->add_option("--label", in_label, "series label (default: input stem)");
  ingest->add_option("--output", in_output, "output CSV (default: <out>/<label>.csv)");
  ingest->callback([&]() {
    const std::string label = in_label.empty() ? fs::path(in_file).stem().string() : in_label;
    PriceSeries raw = load_series_file(in_file, in_pair, price_basis_from_string(in_basis));
    raw.label = label;
    const PriceSeries clean = remove_flat_areas(raw);
    const fs::path out_path =
        in_output.empty() ? fs::path(g.out) / (sanitize_filename(label) + ".csv") : fs::path(in_output);
    fs::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
    write_series_csv_file(clean, out_path);
    std::printf("ingested %zu ticks -> %zu after flat-area removal -> %s\n", raw.size(),
                clean.size(), out_path.c_str());
  });

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic series");
  SynthConfig sc;
  sc.length = 6000;
  sc.label = "synth";
  std::string synth_output;
  synth->add_option("--length", sc.length, "tick count")->capture_default_str();
  synth->add_option("--start", sc.start, "starting price")->capture_default_str();
  synth->add_option("--vol", sc.vol, "per-step volatility")->capture_default_str();
  synth->add_option("--label", sc.label, "series label")->capture_default_str();
  synth->add_option("--start-ms", sc.start_timestamp_ms, "first timestamp (epoch ms)");
  synth->add_option("--step-ms", sc.step_ms, "tick spacing (ms)")->capture_default_str();
  synth->add_option("--output", synth_output, "output CSV (default: <out>/<label>.csv)");
  synth->callback([&]() {
    const FullConfig cfg = make_config(g);
    sc.seed = cfg.seed;
    const PriceSeries series = synthesize_series(sc);
    const fs::path out_path = synth_output.empty()
                                  ? fs::path(g.out) / (sanitize_filename(sc.label) + ".csv")
                                  : fs::path(synth_output);
    fs::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
    write_series_csv_file(series, out_path);
    std::printf("synthesized %zu ticks (seed %llu) -> %s\n", series.size(),
                static_cast<unsigned long long>(sc.seed), out_path.c_str());
  });

  // train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "fit one LSTM variant, save a checkpoint");
  std::string train_model, train_dataset, train_ckpt;
  train_cmd->add_option("--model", train_model, "benchmark model name")->required();
  train_cmd->add_option("--dataset", train_dataset, "dataset label or series CSV path")
      ->required();
  train_cmd->add_option("--checkpoint", train_ckpt,
                        "checkpoint path (default: <out>/checkpoint_<model>.txt)");
  train_cmd->callback([&]() {
    const FullConfig cfg = make_config(g);
    const ModelSpec& spec = find_model_spec(train_model);
    const PriceSeries series = resolve_series(train_dataset, cfg);
    LstmModel model = build_model(spec, model_seed(cfg, train_model));
    TrainConfig tcfg = cfg.train;
    tcfg.seed = model_seed(cfg, train_model);
    const TrainingReport report = train(model, series, tcfg);
    const fs::path out_path =
        train_ckpt.empty()
            ? fs::path(g.out) / ("checkpoint_" + sanitize_filename(train_model) + ".txt")
            : fs::path(train_ckpt);
    fs::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
    save_checkpoint_file(model, out_path.string());
    std::printf("trained %s on '%s' (%zu samples, split at tick %zu)\n", spec.name.c_str(),
                series.label.c_str(), report.train_samples, report.split_tick);
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
      std::printf("epoch %zu loss %.6g\n", e + 1, report.epoch_loss[e]);
    std::printf("checkpoint -> %s\n", out_path.c_str());
  });

  // run -----------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "produce forecast signals for one model");
  std::string run_model, run_dataset, run_output, run_ckpt;
  run_cmd->add_option("--model", run_model, "model label (ANN label or benchmark name)")
      ->required();
  run_cmd->add_option("--dataset", run_dataset, "dataset label or series CSV path")->required();
  run_cmd->add_option("--checkpoint", run_ckpt, "reuse trained weights (LSTM, skips training)");
  run_cmd->add_option("--output", run_output,
                      "signal CSV (default: <out>/signals_<model>_<period>.csv)");
  run_cmd->callback([&]() {
    const FullConfig cfg = make_config(g);
    const PriceSeries series = resolve_series(run_dataset, cfg);
    std::vector<ForecastSignal> signals;
    if (run_model == cfg.ann_label) {
      AnnPairConfig ann_cfg = cfg.ann;
      ann_cfg.seed = model_seed(cfg, run_model);
      signals = run_custom_ann(series, ann_cfg, cfg.indicators, cfg.ann_label);
    } else if (!run_ckpt.empty()) {
      const LstmModel model = load_checkpoint_file(run_ckpt);
      if (model.spec.name != run_model)
        throw UsageError("checkpoint holds " + model.spec.name + ", not " + run_model);
      const std::size_t split =
          static_cast<std::size_t>(static_cast<double>(series.size()) * cfg.train.train_fraction);
      signals = predict_signals(model, series, cfg.signal_gen, split, run_model);
    } else {
      const ModelSpec& spec = find_model_spec(run_model);
      TrainConfig tcfg = cfg.train;
      const LstmRunResult result = run_lstm_pipeline(series, spec, tcfg, cfg.signal_gen,
                                                     model_seed(cfg, run_model), run_model);
      signals = result.signals;
    }
    const fs::path out_path =
        run_output.empty() ? fs::path(g.out) / ("signals_" + sanitize_filename(run_model) + "_" +
                                                sanitize_filename(series.label) + ".csv")
                           : fs::path(run_output);
    fs::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write " + out_path.string());
    write_signal_csv(signals, output_comments(cfg), out);
    std::printf("%zu signals from %s on '%s' -> %s\n", signals.size(), run_model.c_str(),
                series.label.c_str(), out_path.c_str());
  });

  // evaluate / report -----------------------------------------------------
  std::vector<std::string> eval_signals, eval_datasets;
  std::string eval_output;
  auto add_eval_opts = [&](CLI::App* cmd) {
    cmd->add_option("--signals", eval_signals, "signal CSV (repeatable)")->required();
    cmd->add_option("--dataset", eval_datasets,
                    "dataset label or series CSV matching each --signals")
        ->required();
    cmd->add_option("--output", eval_output, "write the report here instead of stdout");
  };
  auto* eval_cmd =
      app.add_subcommand("evaluate", "verify saved signals and aggregate quality");
  add_eval_opts(eval_cmd);
  auto* report_cmd = app.add_subcommand("report", "render saved signal logs as a report");
  add_eval_opts(report_cmd);

  auto eval_action = [&](bool render_markdown) {
    const FullConfig cfg = make_config(g);
    const QualityReport report = evaluate_signal_files(eval_signals, eval_datasets, cfg);
    std::string text;
    if (render_markdown) {
      text = render_quality_markdown(report, cfg.decimal_comma);
    } else {
      std::ostringstream out;
      write_quality_csv(report, output_comments(cfg), out);
      text = out.str();
    }
    if (eval_output.empty()) {
      std::fputs(text.c_str(), stdout);
    } else {
      write_text_file(eval_output, text);
      std::printf("report -> %s\n", eval_output.c_str());
    }
  };
  eval_cmd->callback([&]() { eval_action(g.format == "md"); });
  report_cmd->callback([&]() { eval_action(g.format != "csv"); });

  // bench -----------------------------------------------------------------
  auto* bench_cmd =
      app.add_subcommand("bench", "run the full timing + quality plan from the config");
  std::string bench_mode;
  bench_cmd->add_option("--mode", bench_mode, "override plan mode")
      ->check(CLI::IsMember({"end_to_end", "predict_only"}));
  bench_cmd->callback([&]() {
    FullConfig cfg = make_config(g);
    if (!bench_mode.empty()) cfg.plan.mode = parse_bench_mode(bench_mode);
    const BenchResult result = run_bench(cfg);
    write_bench_outputs(result, cfg, g.out);
    const TimingTable table = build_timing_table(result.records);
    for (const std::string& model : table.models) {
      const std::optional<double> overall = table.overall_seconds(model);
      if (overall)
        std::printf("%-20s overall %10.3f s\n", model.c_str(), *overall);
      else
        std::printf("%-20s failed\n", model.c_str());
    }
    std::printf("outputs -> %s\n", g.out.c_str());
  });

  // let `fxbench bench --config x.json` work: trailing global flags climb up
  for (auto* sub : app.get_subcommands({}))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    exit_code = 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    exit_code = 2;
  } catch (const ModelError& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
    exit_code = 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    exit_code = 3;
  }
  return exit_code;
}
