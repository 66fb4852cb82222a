#include "fxbench/tickdata.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fxbench/errors.hpp"
#include "fxbench/rng.hpp"

namespace fxbench {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

int to_int(std::string_view s) {
  int value = 0;
  for (char c : s) value = value * 10 + (c - '0');
  return value;
}

double parse_price(std::string_view text, const std::string& line,
                   const char* field) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string("unparsable ") + field + " price", line);
  }
  return value;
}

}  // namespace

PriceBasis price_basis_from_string(const std::string& name) {
  if (name == "mid") return PriceBasis::kMid;
  if (name == "bid") return PriceBasis::kBid;
  if (name == "ask") return PriceBasis::kAsk;
  throw UsageError("unknown price basis '" + name + "' (mid|bid|ask)");
}

std::string to_string(PriceBasis basis) {
  switch (basis) {
    case PriceBasis::kMid: return "mid";
    case PriceBasis::kBid: return "bid";
    case PriceBasis::kAsk: return "ask";
  }
  return "mid";
}

std::int64_t parse_truefx_timestamp(std::string_view text) {
  // Fixed layout: "yyyymmdd hh:mm:ss.fff"
  if (text.size() != 21 || text[8] != ' ' || text[11] != ':' ||
      text[14] != ':' || text[17] != '.') {
    throw DataError("timestamp not in 'yyyymmdd hh:mm:ss.fff' form");
  }
  const auto date = text.substr(0, 8);
  const auto hh = text.substr(9, 2);
  const auto mi = text.substr(12, 2);
  const auto ss = text.substr(15, 2);
  const auto fff = text.substr(18, 3);
  if (!all_digits(date) || !all_digits(hh) || !all_digits(mi) ||
      !all_digits(ss) || !all_digits(fff)) {
    throw DataError("timestamp contains non-digit characters");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{to_int(date.substr(0, 4))},
                           month{static_cast<unsigned>(to_int(date.substr(4, 2)))},
                           day{static_cast<unsigned>(to_int(date.substr(6, 2)))}};
  if (!ymd.ok()) throw DataError("timestamp has an invalid calendar date");
  const int h = to_int(hh), m = to_int(mi), s = to_int(ss);
  if (h > 23 || m > 59 || s > 59) throw DataError("timestamp time-of-day out of range");
  const sys_days days{ymd};
  return duration_cast<milliseconds>(days.time_since_epoch()).count() +
         ((h * 60 + m) * 60 + s) * 1000LL + to_int(fff);
}

Tick parse_tick_line(std::string_view line) {
  const std::string context(line);
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  if (fields.size() != 4) {
    throw ParseError("expected 4 comma-separated fields, got " +
                         std::to_string(fields.size()),
                     context);
  }

  Tick tick;
  tick.pair = std::string(fields[0]);
  if (tick.pair.empty()) throw ParseError("empty pair code", context);
  try {
    tick.timestamp_ms = parse_truefx_timestamp(fields[1]);
  } catch (const DataError& e) {
    throw ParseError(e.what(), context);
  }
  tick.bid = parse_price(fields[2], context, "bid");
  tick.ask = parse_price(fields[3], context, "ask");
  if (!(tick.bid > 0.0) || !(tick.ask > 0.0)) {
    throw ParseError("non-positive price", context);
  }
  if (tick.ask < tick.bid) {
    throw ParseError("crossed quote (ask < bid)", context);
  }
  return tick;
}

PriceSeries load_series(std::istream& in, const std::string& pair_filter,
                        PriceBasis basis, const std::string& label) {
  PriceSeries series;
  series.label = label;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const Tick tick = parse_tick_line(line);
    if (!pair_filter.empty() && tick.pair != pair_filter) continue;
    double value = tick.mid();
    if (basis == PriceBasis::kBid) value = tick.bid;
    if (basis == PriceBasis::kAsk) value = tick.ask;
    series.timestamps_ms.push_back(tick.timestamp_ms);
    series.mids.push_back(value);
  }
  if (in.bad()) throw DataError("I/O failure while reading tick data");
  if (series.empty()) {
    throw DataError("no tick data lines" +
                    (pair_filter.empty() ? std::string()
                                         : " for pair " + pair_filter));
  }
  return series;
}

PriceSeries load_series_file(const std::filesystem::path& path,
                             const std::string& pair_filter,
                             PriceBasis basis) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tick file: " + path.string());
  return load_series(in, pair_filter, basis, path.stem().string());
}

PriceSeries remove_flat_areas(const PriceSeries& series) {
  if (series.empty()) throw DataError("cannot preprocess an empty series");
  PriceSeries out;
  out.label = series.label;
  out.timestamps_ms.reserve(series.size());
  out.mids.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i == 0 || series.mids[i] != out.mids.back()) {
      out.timestamps_ms.push_back(series.timestamps_ms[i]);
      out.mids.push_back(series.mids[i]);
    }
  }
  return out;
}

PriceSeries synthesize_series(const SynthConfig& cfg) {
  if (cfg.length == 0) throw DataError("synthetic series length must be positive");
  if (!(cfg.vol > 0.0)) throw DataError("synthetic series vol must be positive");
  PriceSeries series;
  series.label = cfg.label.empty() ? "synth-" + std::to_string(cfg.seed) : cfg.label;
  series.timestamps_ms.reserve(cfg.length);
  series.mids.reserve(cfg.length);
  Rng rng(cfg.seed);
  double value = cfg.start;
  for (std::size_t i = 0; i < cfg.length; ++i) {
    if (i > 0) {
      double next = value;
      do {
        next = value + cfg.vol * rng.normal();
      } while (next == value || next <= 0.0);
      value = next;
    }
    series.timestamps_ms.push_back(cfg.start_timestamp_ms +
                                   static_cast<std::int64_t>(i) * cfg.step_ms);
    series.mids.push_back(value);
  }
  return series;
}

PriceSeries synthesize_series(std::uint64_t seed, std::size_t length,
                              double start, double vol) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.length = length;
  cfg.start = start;
  cfg.vol = vol;
  return synthesize_series(cfg);
}

void write_series_csv(const PriceSeries& series, std::ostream& out) {
  out << "timestamp_ms,mid\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    // %.17g guarantees the double survives a round trip through text
    std::snprintf(buf, sizeof(buf), "%lld,%.17g",
                  static_cast<long long>(series.timestamps_ms[i]),
                  series.mids[i]);
    out << buf << '\n';
  }
}

void write_series_csv_file(const PriceSeries& series,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  write_series_csv(series, out);
  if (!out) throw DataError("I/O failure while writing: " + path.string());
}

PriceSeries read_series_csv(std::istream& in, const std::string& label) {
  PriceSeries series;
  series.label = label;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "timestamp_ms,mid") {
        throw DataError("series CSV missing 'timestamp_ms,mid' header");
      }
      header_seen = true;
      continue;
    }
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected 'timestamp_ms,mid'", line);
    std::int64_t ts = 0;
    {
      const std::string_view f(line.data(), comma);
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), ts);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("unparsable timestamp_ms", line);
      }
    }
    double mid = 0.0;
    {
      const std::string_view f(line.data() + comma + 1, line.size() - comma - 1);
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), mid);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("unparsable mid", line);
      }
    }
    series.timestamps_ms.push_back(ts);
    series.mids.push_back(mid);
  }
  if (!header_seen) throw DataError("empty series CSV");
  if (series.empty()) throw DataError("series CSV has a header but no data rows");
  return series;
}

PriceSeries read_series_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open series file: " + path.string());
  return read_series_csv(in, path.stem().string());
}

}  // namespace fxbench
