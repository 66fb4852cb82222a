#include "fxbench/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fxbench/errors.hpp"
#include "json.hpp"

namespace fxbench {

using nlohmann::json;

void DatasetSpec::validate() const {
  if (label.empty()) throw UsageError("dataset label must not be empty");
  const int sources = (!file.empty() ? 1 : 0) + (!ticks.empty() ? 1 : 0) + (synth ? 1 : 0);
  if (sources != 1)
    throw UsageError("dataset '" + label + "' must set exactly one of file/ticks/synth");
  if (synth) {
    if (synth->length < 2) throw UsageError("synth length must be >= 2");
    if (!(synth->start > 0.0)) throw UsageError("synth start must be > 0");
    if (!(synth->vol > 0.0)) throw UsageError("synth vol must be > 0");
    if (synth->step_ms < 1) throw UsageError("synth step_ms must be >= 1");
  }
}

void FullConfig::validate() const {
  if (schema_version != 1)
    throw UsageError("unsupported schema_version " + std::to_string(schema_version));
  plan.validate();
  for (const DatasetSpec& d : datasets) d.validate();
  for (const std::string& label : plan.datasets) {
    bool found = false;
    for (const DatasetSpec& d : datasets) found = found || d.label == label;
    if (!found) throw UsageError("plan references unknown dataset '" + label + "'");
  }
  for (const std::string& model : plan.models)
    if (model != ann_label) find_model_spec(model);  // throws on junk
  indicators.validate();
  ann.validate();
  train.validate();
  verification.validate();
  if (!(signal_gen.emission_threshold >= 0.0))
    throw UsageError("emission_threshold must be >= 0");
  if (signal_gen.volatility_window < 1) throw UsageError("volatility_window must be >= 1");
  if (lock_file.empty()) throw UsageError("lock_file must not be empty");
}

FullConfig default_config() {
  FullConfig cfg;
  cfg.plan.models.push_back(cfg.ann_label);
  for (const ModelSpec& spec : lstm_model_table()) cfg.plan.models.push_back(spec.name);
  cfg.plan.repetitions = 1;

  const struct {
    const char* label;
    std::int64_t start_ms;
  } months[] = {
      {"2021-10", 1633046400000},
      {"2021-11", 1635724800000},
      {"2021-12", 1638316800000},
  };
  for (const auto& m : months) {
    DatasetSpec d;
    d.label = m.label;
    SynthSpec s;
    s.start_timestamp_ms = m.start_ms;
    d.synth = s;
    cfg.datasets.push_back(d);
    cfg.plan.datasets.push_back(m.label);
  }
  return cfg;
}

namespace {

SynthSpec synth_from_json(const json& j) {
  SynthSpec s;
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  s.length = j.value("length", s.length);
  s.start = j.value("start", s.start);
  s.vol = j.value("vol", s.vol);
  s.start_timestamp_ms = j.value("start_timestamp_ms", s.start_timestamp_ms);
  s.step_ms = j.value("step_ms", s.step_ms);
  return s;
}

json synth_to_json(const SynthSpec& s) {
  json j;
  if (s.seed) j["seed"] = *s.seed;
  j["length"] = s.length;
  j["start"] = s.start;
  j["vol"] = s.vol;
  j["start_timestamp_ms"] = s.start_timestamp_ms;
  j["step_ms"] = s.step_ms;
  return j;
}

FullConfig config_from_json(const json& j) {
  FullConfig cfg = default_config();
  if (!j.contains("schema_version"))
    throw UsageError("config is missing schema_version");
  cfg.schema_version = j.at("schema_version").get<int>();
  cfg.seed = j.value("seed", cfg.seed);
  cfg.decimal_comma = j.value("decimal_comma", cfg.decimal_comma);
  cfg.lock_file = j.value("lock_file", cfg.lock_file);
  cfg.ann_label = j.value("ann_label", cfg.ann_label);
  if (j.contains("price_basis"))
    cfg.basis = price_basis_from_string(j.at("price_basis").get<std::string>());

  if (j.contains("plan")) {
    const json& p = j.at("plan");
    if (p.contains("models")) cfg.plan.models = p.at("models").get<std::vector<std::string>>();
    if (p.contains("datasets"))
      cfg.plan.datasets = p.at("datasets").get<std::vector<std::string>>();
    cfg.plan.repetitions = p.value("repetitions", cfg.plan.repetitions);
    if (p.contains("mode")) cfg.plan.mode = parse_bench_mode(p.at("mode").get<std::string>());
  }

  if (j.contains("datasets")) {
    cfg.datasets.clear();
    for (const json& dj : j.at("datasets")) {
      DatasetSpec d;
      d.label = dj.value("label", std::string());
      d.file = dj.value("file", std::string());
      d.pair = dj.value("pair", d.pair);
      d.ticks = dj.value("ticks", std::string());
      if (dj.contains("synth")) d.synth = synth_from_json(dj.at("synth"));
      cfg.datasets.push_back(std::move(d));
    }
    if (!j.contains("plan") || !j.at("plan").contains("datasets")) {
      cfg.plan.datasets.clear();
      for (const DatasetSpec& d : cfg.datasets) cfg.plan.datasets.push_back(d.label);
    }
  }

  if (j.contains("indicators")) {
    const json& i = j.at("indicators");
    if (i.contains("ma_windows"))
      cfg.indicators.ma_windows = i.at("ma_windows").get<std::vector<int>>();
    cfg.indicators.rsi_period = i.value("rsi_period", cfg.indicators.rsi_period);
    cfg.indicators.cci_period = i.value("cci_period", cfg.indicators.cci_period);
    cfg.indicators.williams_period = i.value("williams_period", cfg.indicators.williams_period);
    cfg.indicators.ma_scale = i.value("ma_scale", cfg.indicators.ma_scale);
    cfg.indicators.osc_scale = i.value("osc_scale", cfg.indicators.osc_scale);
    cfg.indicators.cci_clamp = i.value("cci_clamp", cfg.indicators.cci_clamp);
  }

  if (j.contains("ann")) {
    const json& a = j.at("ann");
    cfg.ann.pair_count = a.value("pair_count", cfg.ann.pair_count);
    if (a.contains("hidden_layout"))
      cfg.ann.hidden_layout = a.at("hidden_layout").get<std::vector<int>>();
    cfg.ann.learning_rate = a.value("learning_rate", cfg.ann.learning_rate);
    cfg.ann.train_window = a.value("train_window", cfg.ann.train_window);
    cfg.ann.transfer_every = a.value("transfer_every", cfg.ann.transfer_every);
    cfg.ann.target_horizon = a.value("target_horizon", cfg.ann.target_horizon);
    cfg.ann.target_clamp_pips = a.value("target_clamp_pips", cfg.ann.target_clamp_pips);
    cfg.ann.pip = a.value("pip", cfg.ann.pip);
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch = t.value("batch", cfg.train.batch);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.momentum = t.value("momentum", cfg.train.momentum);
    cfg.train.grad_clip = t.value("grad_clip", cfg.train.grad_clip);
    cfg.train.train_fraction = t.value("train_fraction", cfg.train.train_fraction);
  }

  if (j.contains("signals")) {
    const json& s = j.at("signals");
    cfg.signal_gen.emission_threshold =
        s.value("emission_threshold", cfg.signal_gen.emission_threshold);
    cfg.signal_gen.volatility_window =
        s.value("volatility_window", cfg.signal_gen.volatility_window);
  }

  if (j.contains("verification")) {
    const json& v = j.at("verification");
    cfg.verification.horizon = v.value("horizon", cfg.verification.horizon);
    cfg.verification.pip = v.value("pip", cfg.verification.pip);
    cfg.verification.magnitude_per_intensity =
        v.value("magnitude_per_intensity", cfg.verification.magnitude_per_intensity);
  }

  // One emission threshold governs every model's signal stream.
  cfg.ann.emission_threshold = cfg.signal_gen.emission_threshold;
  cfg.validate();
  return cfg;
}

}  // namespace

FullConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config JSON parse error: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config field error: ") + e.what());
  }
}

FullConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json_text(const FullConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["seed"] = cfg.seed;
  j["plan"] = {{"models", cfg.plan.models},
               {"datasets", cfg.plan.datasets},
               {"repetitions", cfg.plan.repetitions},
               {"mode", to_string(cfg.plan.mode)}};
  json ds = json::array();
  for (const DatasetSpec& d : cfg.datasets) {
    json dj;
    dj["label"] = d.label;
    if (!d.file.empty()) {
      dj["file"] = d.file;
      dj["pair"] = d.pair;
    }
    if (!d.ticks.empty()) dj["ticks"] = d.ticks;
    if (d.synth) dj["synth"] = synth_to_json(*d.synth);
    ds.push_back(dj);
  }
  j["datasets"] = ds;
  j["indicators"] = {{"ma_windows", cfg.indicators.ma_windows},
                     {"rsi_period", cfg.indicators.rsi_period},
                     {"cci_period", cfg.indicators.cci_period},
                     {"williams_period", cfg.indicators.williams_period},
                     {"ma_scale", cfg.indicators.ma_scale},
                     {"osc_scale", cfg.indicators.osc_scale},
                     {"cci_clamp", cfg.indicators.cci_clamp}};
  j["ann"] = {{"pair_count", cfg.ann.pair_count},
              {"hidden_layout", cfg.ann.hidden_layout},
              {"learning_rate", cfg.ann.learning_rate},
              {"train_window", cfg.ann.train_window},
              {"transfer_every", cfg.ann.transfer_every},
              {"target_horizon", cfg.ann.target_horizon},
              {"target_clamp_pips", cfg.ann.target_clamp_pips},
              {"pip", cfg.ann.pip}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch", cfg.train.batch},
                {"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"grad_clip", cfg.train.grad_clip},
                {"train_fraction", cfg.train.train_fraction}};
  j["signals"] = {{"emission_threshold", cfg.signal_gen.emission_threshold},
                  {"volatility_window", cfg.signal_gen.volatility_window}};
  j["verification"] = {{"horizon", cfg.verification.horizon},
                       {"pip", cfg.verification.pip},
                       {"magnitude_per_intensity", cfg.verification.magnitude_per_intensity}};
  j["decimal_comma"] = cfg.decimal_comma;
  j["lock_file"] = cfg.lock_file;
  j["price_basis"] = to_string(cfg.basis);
  j["ann_label"] = cfg.ann_label;
  return j.dump(2) + "\n";
}

PriceSeries materialize_dataset(const DatasetSpec& spec, const FullConfig& cfg,
                                std::size_t dataset_index) {
  spec.validate();
  PriceSeries series;
  if (!spec.file.empty()) {
    series = load_series_file(spec.file, spec.pair, cfg.basis);
    series.label = spec.label;
  } else if (!spec.ticks.empty()) {
    series = read_series_csv_file(spec.ticks);
    series.label = spec.label;
  } else {
    SynthConfig sc;
    sc.seed = spec.synth->seed ? *spec.synth->seed : cfg.seed + 100 + dataset_index;
    sc.length = spec.synth->length;
    sc.start = spec.synth->start;
    sc.vol = spec.synth->vol;
    sc.label = spec.label;
    sc.start_timestamp_ms = spec.synth->start_timestamp_ms;
    sc.step_ms = spec.synth->step_ms;
    series = synthesize_series(sc);
  }
  return remove_flat_areas(series);
}

PriceSeries materialize_dataset_by_label(const std::string& label, const FullConfig& cfg) {
  for (std::size_t i = 0; i < cfg.datasets.size(); ++i)
    if (cfg.datasets[i].label == label) return materialize_dataset(cfg.datasets[i], cfg, i);
  throw UsageError("unknown dataset label '" + label + "'");
}

std::uint64_t model_seed(const FullConfig& cfg, const std::string& model_label) {
  if (model_label == cfg.ann_label) return cfg.seed;
  const std::vector<ModelSpec>& table = lstm_model_table();
  for (std::size_t i = 0; i < table.size(); ++i)
    if (table[i].name == model_label) return cfg.seed + 1 + i;
  throw UsageError("unknown model label '" + model_label + "'");
}

std::vector<std::string> config_comment_lines(const FullConfig& cfg) {
  char buf[96];
  std::vector<std::string> lines;
  lines.push_back("schema_version: " + std::to_string(cfg.schema_version));
  lines.push_back("seed: " + std::to_string(cfg.seed));
  lines.push_back("mode: " + to_string(cfg.plan.mode));
  lines.push_back("repetitions: " + std::to_string(cfg.plan.repetitions));
  std::snprintf(buf, sizeof buf, "emission_threshold: %g", cfg.signal_gen.emission_threshold);
  lines.push_back(buf);
  lines.push_back("verification_horizon: " + std::to_string(cfg.verification.horizon));
  std::snprintf(buf, sizeof buf, "magnitude_per_intensity_pips: %g",
                cfg.verification.magnitude_per_intensity);
  lines.push_back(buf);
  std::snprintf(buf, sizeof buf, "pip: %g", cfg.verification.pip);
  lines.push_back(buf);
  return lines;
}

}  // namespace fxbench
