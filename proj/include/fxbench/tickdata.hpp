#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fxbench {

// One quote event from a TrueFX-style feed.
struct Tick {
  std::string pair;
  std::int64_t timestamp_ms = 0;  // UTC epoch milliseconds
  double bid = 0.0;
  double ask = 0.0;

  double mid() const { return 0.5 * (bid + ask); }
};

// Which quoted price becomes the series value. Mid is the default; bid/ask
// are available for studies that care about one side of the book.
enum class PriceBasis { kMid, kBid, kAsk };

PriceBasis price_basis_from_string(const std::string& name);
std::string to_string(PriceBasis basis);

// Ordered price series. Stored as parallel arrays; timestamps are retained
// through preprocessing so tick spans can also be reported in wall-clock
// terms.
struct PriceSeries {
  std::string label;
  std::vector<std::int64_t> timestamps_ms;
  std::vector<double> mids;

  std::size_t size() const { return mids.size(); }
  bool empty() const { return mids.empty(); }
};

// Parses "pair,yyyymmdd hh:mm:ss.fff,bid,ask". Throws ParseError on a
// malformed field count, unparsable timestamp or price, non-positive price,
// or a crossed quote (ask < bid).
Tick parse_tick_line(std::string_view line);

// "yyyymmdd hh:mm:ss.fff" (UTC) -> epoch milliseconds.
std::int64_t parse_truefx_timestamp(std::string_view text);

// Reads tick lines, keeps those matching pair_filter (all pairs when empty)
// and returns the raw, un-preprocessed series. Throws DataError when no data
// line survives.
PriceSeries load_series(std::istream& in, const std::string& pair_filter,
                        PriceBasis basis = PriceBasis::kMid,
                        const std::string& label = "");
PriceSeries load_series_file(const std::filesystem::path& path,
                             const std::string& pair_filter,
                             PriceBasis basis = PriceBasis::kMid);

// Collapses every maximal run of equal consecutive values to its first
// element. Idempotent. Throws DataError on an empty series.
PriceSeries remove_flat_areas(const PriceSeries& series);

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t length = 0;
  double start = 1.15;
  double vol = 1e-4;                          // per-step std-dev, price units
  std::string label;
  std::int64_t start_timestamp_ms = 1633046400000;  // 2021-10-01 00:00:00 UTC
  std::int64_t step_ms = 1000;
};

// Deterministic random walk; zero steps are re-drawn so the output is
// already flat-area-free. Same seed, same series, bit for bit.
PriceSeries synthesize_series(const SynthConfig& cfg);
PriceSeries synthesize_series(std::uint64_t seed, std::size_t length,
                              double start, double vol);

// Internal serialized form: CSV with header "timestamp_ms,mid". Values are
// printed so that a read back is bit-exact.
void write_series_csv(const PriceSeries& series, std::ostream& out);
void write_series_csv_file(const PriceSeries& series,
                           const std::filesystem::path& path);
PriceSeries read_series_csv(std::istream& in, const std::string& label = "");
PriceSeries read_series_csv_file(const std::filesystem::path& path);

}  // namespace fxbench
