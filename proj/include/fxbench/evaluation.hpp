#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fxbench/signal.hpp"
#include "fxbench/tickdata.hpp"

namespace fxbench {

struct VerificationConfig {
  int horizon = 900;                    // ticks a signal has to realize
  double pip = 1e-4;
  double magnitude_per_intensity = 1.0;  // pips required per unit of |intensity|

  void validate() const;
};

enum class Verdict { kSuccess, kFailure, kExcluded };
std::string to_string(Verdict v);

struct SignalOutcome {
  ForecastSignal signal;
  Verdict verdict = Verdict::kExcluded;
  // Best excursion in the signal's direction within the horizon, in price
  // units; negative when the price only moved against the signal.
  double realized_move = 0.0;
};

// Robust signals are the |intensity| >= 1 tier (boundary inclusive).
bool is_robust(const ForecastSignal& s);

// A signal succeeds if at any point within the horizon the mid has moved
// from the emission mid in the signal's direction by at least
// magnitude_per_intensity * |intensity| pips. Fewer than horizon future
// points -> excluded.
SignalOutcome verify_signal(const ForecastSignal& s, double emission_mid,
                            std::span<const double> future,
                            const VerificationConfig& cfg);

// Splits the series at each signal's index; signals too close to the end
// come back excluded. Signal indices must lie inside the series.
std::vector<SignalOutcome> verify_signals(const std::vector<ForecastSignal>& signals,
                                          const PriceSeries& series,
                                          const VerificationConfig& cfg);

struct LabeledOutcome {
  std::string model;
  std::string period;
  SignalOutcome outcome;
};

struct QualityCell {
  std::string model;
  std::string period;  // dataset label, or "Overall"
  long successful_all = 0;
  long total_all = 0;       // non-excluded signals
  long successful_robust = 0;
  long total_robust = 0;
  std::optional<double> sta_pct;  // rounded half-up to 2 decimals; empty if total 0
  std::optional<double> sts_pct;
};

struct QualityReport {
  std::vector<QualityCell> cells;  // sorted by model, periods then Overall

  const QualityCell* find(const std::string& model, const std::string& period) const;
};

// Counts successes per (model, period) tier pair and appends a per-model
// Overall row. Excluded outcomes never reach a numerator or denominator.
QualityReport aggregate(const std::vector<LabeledOutcome>& outcomes);

// 100*successes/total rounded half-up to 2 decimals; empty when total == 0.
std::optional<double> percent_value(long successes, long total);

// "82.05" (or "82,05" with decimal_comma), "N/A" when empty.
std::string format_percent(const std::optional<double>& pct, bool decimal_comma);

void write_quality_csv(const QualityReport& report,
                       const std::vector<std::string>& comment_lines, std::ostream& out);

// Per-period tables with STA and STS columns, Overall last.
std::string render_quality_markdown(const QualityReport& report, bool decimal_comma);

}  // namespace fxbench
