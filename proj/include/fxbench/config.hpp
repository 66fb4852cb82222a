#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fxbench/bench.hpp"
#include "fxbench/evaluation.hpp"
#include "fxbench/indicators.hpp"
#include "fxbench/lstm.hpp"
#include "fxbench/paired_ann.hpp"
#include "fxbench/tickdata.hpp"

namespace fxbench {

struct SynthSpec {
  std::optional<std::uint64_t> seed;  // derived from the global seed when unset
  std::size_t length = 6000;
  double start = 1.15;
  double vol = 1e-4;
  std::int64_t start_timestamp_ms = 1633046400000;
  std::int64_t step_ms = 1000;
};

// One named price series; exactly one of file / ticks / synth is set.
struct DatasetSpec {
  std::string label;
  std::string file;       // raw quote CSV (pair,timestamp,bid,ask)
  std::string pair = "EUR/USD";
  std::string ticks;      // preprocessed timestamp_ms,mid CSV
  std::optional<SynthSpec> synth;

  void validate() const;
};

struct FullConfig {
  int schema_version = 1;
  std::uint64_t seed = 42;
  BenchPlan plan;
  std::vector<DatasetSpec> datasets;
  IndicatorConfig indicators;
  AnnPairConfig ann;
  TrainConfig train;
  SignalGenConfig signal_gen;
  VerificationConfig verification;
  bool decimal_comma = false;
  std::string lock_file = "/tmp/fxbench.lock";
  PriceBasis basis = PriceBasis::kMid;
  std::string ann_label = "Custom-ANN";

  void validate() const;
};

// Three synthetic months, all nine models, one repetition.
FullConfig default_config();

// JSON with // comments allowed; malformed content -> UsageError.
FullConfig load_config_file(const std::string& path);
FullConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const FullConfig& cfg);

// Loads/generates + preprocesses the series (flat areas removed).
// dataset_index feeds derived synth seeds so each dataset gets its own.
PriceSeries materialize_dataset(const DatasetSpec& spec, const FullConfig& cfg,
                                std::size_t dataset_index);
PriceSeries materialize_dataset_by_label(const std::string& label, const FullConfig& cfg);

// Stable per-model seed: the ANN label is slot 0 and benchmark models follow
// in table order.
std::uint64_t model_seed(const FullConfig& cfg, const std::string& model_label);

// Run parameters echoed as comment lines in every output file.
std::vector<std::string> config_comment_lines(const FullConfig& cfg);

}  // namespace fxbench
