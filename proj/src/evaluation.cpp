#include "fxbench/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "fxbench/errors.hpp"

namespace fxbench {

void VerificationConfig::validate() const {
  if (horizon < 1) throw UsageError("verification horizon must be >= 1");
  if (!(pip > 0.0)) throw UsageError("pip must be > 0");
  if (!(magnitude_per_intensity >= 0.0))
    throw UsageError("magnitude_per_intensity must be >= 0");
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kSuccess: return "success";
    case Verdict::kFailure: return "failure";
    case Verdict::kExcluded: return "excluded";
  }
  return "unknown";
}

bool is_robust(const ForecastSignal& s) {
  return s.intensity <= -1.0 || s.intensity >= 1.0;
}

SignalOutcome verify_signal(const ForecastSignal& s, double emission_mid,
                            std::span<const double> future,
                            const VerificationConfig& cfg) {
  cfg.validate();
  SignalOutcome out;
  out.signal = s;
  if (future.size() < static_cast<std::size_t>(cfg.horizon)) {
    out.verdict = Verdict::kExcluded;
    return out;
  }
  const double dir = s.direction == Direction::kUp ? 1.0 : -1.0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.horizon); ++k)
    best = std::max(best, dir * (future[k] - emission_mid));
  out.realized_move = best;
  const double required = cfg.magnitude_per_intensity * std::abs(s.intensity) * cfg.pip;
  out.verdict = best >= required ? Verdict::kSuccess : Verdict::kFailure;
  return out;
}

std::vector<SignalOutcome> verify_signals(const std::vector<ForecastSignal>& signals,
                                          const PriceSeries& series,
                                          const VerificationConfig& cfg) {
  cfg.validate();
  std::vector<SignalOutcome> outcomes;
  outcomes.reserve(signals.size());
  for (const ForecastSignal& s : signals) {
    if (s.index >= series.size())
      throw DataError("signal index " + std::to_string(s.index) +
                      " lies outside series '" + series.label + "'");
    const std::size_t first = s.index + 1;
    const std::size_t avail = series.size() - first;
    std::span<const double> future(series.mids.data() + first, avail);
    outcomes.push_back(verify_signal(s, series.mids[s.index], future, cfg));
  }
  return outcomes;
}

std::optional<double> percent_value(long successes, long total) {
  if (total <= 0) return std::nullopt;
  const double pct = 100.0 * static_cast<double>(successes) / static_cast<double>(total);
  return std::floor(pct * 100.0 + 0.5) / 100.0;  // half-up at 2 decimals
}

std::string format_percent(const std::optional<double>& pct, bool decimal_comma) {
  if (!pct) return "N/A";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *pct);
  std::string s = buf;
  if (decimal_comma) {
    const std::size_t dot = s.find('.');
    if (dot != std::string::npos) s[dot] = ',';
  }
  return s;
}

const QualityCell* QualityReport::find(const std::string& model,
                                       const std::string& period) const {
  for (const QualityCell& c : cells)
    if (c.model == model && c.period == period) return &c;
  return nullptr;
}

QualityReport aggregate(const std::vector<LabeledOutcome>& outcomes) {
  struct Counts {
    long sa = 0, ta = 0, sr = 0, tr = 0;
  };
  std::map<std::pair<std::string, std::string>, Counts> cells;
  for (const LabeledOutcome& lo : outcomes) {
    if (lo.outcome.verdict == Verdict::kExcluded) continue;
    Counts& c = cells[{lo.model, lo.period}];
    const bool ok = lo.outcome.verdict == Verdict::kSuccess;
    ++c.ta;
    if (ok) ++c.sa;
    if (is_robust(lo.outcome.signal)) {
      ++c.tr;
      if (ok) ++c.sr;
    }
  }

  QualityReport report;
  std::string current_model;
  Counts overall;
  auto flush_overall = [&]() {
    if (current_model.empty()) return;
    QualityCell cell;
    cell.model = current_model;
    cell.period = "Overall";
    cell.successful_all = overall.sa;
    cell.total_all = overall.ta;
    cell.successful_robust = overall.sr;
    cell.total_robust = overall.tr;
    cell.sta_pct = percent_value(overall.sa, overall.ta);
    cell.sts_pct = percent_value(overall.sr, overall.tr);
    report.cells.push_back(std::move(cell));
    overall = Counts{};
  };
  for (const auto& [key, c] : cells) {
    if (key.first != current_model) {
      flush_overall();
      current_model = key.first;
    }
    QualityCell cell;
    cell.model = key.first;
    cell.period = key.second;
    cell.successful_all = c.sa;
    cell.total_all = c.ta;
    cell.successful_robust = c.sr;
    cell.total_robust = c.tr;
    cell.sta_pct = percent_value(c.sa, c.ta);
    cell.sts_pct = percent_value(c.sr, c.tr);
    report.cells.push_back(std::move(cell));
    overall.sa += c.sa;
    overall.ta += c.ta;
    overall.sr += c.sr;
    overall.tr += c.tr;
  }
  flush_overall();
  return report;
}

namespace {

std::string csv_quote_label(const std::string& s) {
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

void write_quality_csv(const QualityReport& report,
                       const std::vector<std::string>& comment_lines, std::ostream& out) {
  for (const std::string& line : comment_lines) out << "# " << line << "\n";
  out << "model,period,successful_all,total_all,sta_pct,successful_robust,"
         "total_robust,sts_pct\n";
  for (const QualityCell& c : report.cells) {
    out << csv_quote_label(c.model) << "," << csv_quote_label(c.period) << ","
        << c.successful_all << "," << c.total_all << ","
        << format_percent(c.sta_pct, false) << "," << c.successful_robust << ","
        << c.total_robust << "," << format_percent(c.sts_pct, false) << "\n";
  }
}

std::string render_quality_markdown(const QualityReport& report, bool decimal_comma) {
  // Collect periods in cell order, Overall forced last.
  std::vector<std::string> periods;
  for (const QualityCell& c : report.cells)
    if (c.period != "Overall" &&
        std::find(periods.begin(), periods.end(), c.period) == periods.end())
      periods.push_back(c.period);
  std::sort(periods.begin(), periods.end());
  periods.push_back("Overall");

  std::ostringstream md;
  for (const std::string& period : periods) {
    bool any = false;
    for (const QualityCell& c : report.cells)
      if (c.period == period) any = true;
    if (!any) continue;
    md << "### Forecast quality: " << period << "\n\n";
    md << "| Model | Successful | Total | STA % | Successful robust | Robust | STS % |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const QualityCell& c : report.cells) {
      if (c.period != period) continue;
      md << "| " << c.model << " | " << c.successful_all << " | " << c.total_all
         << " | " << format_percent(c.sta_pct, decimal_comma) << " | "
         << c.successful_robust << " | " << c.total_robust << " | "
         << format_percent(c.sts_pct, decimal_comma) << " |\n";
    }
    md << "\n";
  }
  return md.str();
}

}  // namespace fxbench
