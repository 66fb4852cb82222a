#include "fxbench/signal.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fxbench/errors.hpp"

namespace fxbench {

std::string to_string(Direction d) {
  return d == Direction::kUp ? "up" : "down";
}

Direction direction_from_string(const std::string& s) {
  if (s == "up") return Direction::kUp;
  if (s == "down") return Direction::kDown;
  throw DataError("unknown direction '" + s + "'");
}

EmissionPolicy::EmissionPolicy(double threshold, double robust_boundary)
    : threshold_(threshold), boundary_(robust_boundary) {
  if (threshold < 0.0) throw DataError("emission threshold must be >= 0");
}

std::optional<ForecastSignal> EmissionPolicy::step(std::size_t index,
                                                   std::int64_t timestamp_ms,
                                                   double intensity,
                                                   const std::string& model_label) {
  const double abs = std::abs(intensity);
  const bool crossed_boundary = abs >= boundary_ && prev_abs_ < boundary_;
  prev_abs_ = abs;
  if (!std::isfinite(intensity) || intensity == 0.0 || abs < threshold_) {
    return std::nullopt;
  }
  const Direction dir = intensity > 0.0 ? Direction::kUp : Direction::kDown;
  const bool flipped = emitted_any_ && dir != last_direction_;
  if (!emitted_any_ || flipped || crossed_boundary) {
    emitted_any_ = true;
    last_direction_ = dir;
    ForecastSignal s;
    s.index = index;
    s.timestamp_ms = timestamp_ms;
    s.direction = dir;
    s.intensity = intensity;
    s.model_label = model_label;
    return s;
  }
  return std::nullopt;
}

namespace {

// Model labels may contain commas (e.g. "sLSTM-15-1,15"), so the last CSV
// field is quoted when needed.
std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string csv_unquote(const std::string& field) {
  if (field.size() < 2 || field.front() != '"') return field;
  std::string out;
  for (std::size_t i = 1; i + 1 < field.size(); ++i) {
    if (field[i] == '"' && field[i + 1] == '"') ++i;
    out += field[i];
  }
  return out;
}

}  // namespace

void write_signal_csv(const std::vector<ForecastSignal>& signals,
                      const std::vector<std::string>& comment_lines,
                      std::ostream& out) {
  for (const auto& line : comment_lines) out << "# " << line << '\n';
  out << "index,timestamp_ms,direction,intensity,model_label\n";
  char buf[64];
  for (const auto& s : signals) {
    std::snprintf(buf, sizeof(buf), "%zu,%lld,", s.index,
                  static_cast<long long>(s.timestamp_ms));
    out << buf << to_string(s.direction);
    std::snprintf(buf, sizeof(buf), ",%.17g,", s.intensity);
    out << buf << csv_quote(s.model_label) << '\n';
  }
}

std::vector<ForecastSignal> read_signal_csv(std::istream& in) {
  std::vector<ForecastSignal> signals;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "index,timestamp_ms,direction,intensity,model_label") {
        throw DataError("signal CSV missing expected header");
      }
      header_seen = true;
      continue;
    }
    // split the first four fields; the remainder is the (possibly quoted)
    // model label
    std::size_t pos = 0;
    std::vector<std::string> fields;
    for (int k = 0; k < 4; ++k) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) throw ParseError("too few signal fields", line);
      fields.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    ForecastSignal s;
    try {
      s.index = static_cast<std::size_t>(std::stoull(fields[0]));
      s.timestamp_ms = std::stoll(fields[1]);
      s.direction = direction_from_string(fields[2]);
      s.intensity = std::stod(fields[3]);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("unparsable signal fields", line);
    }
    s.model_label = csv_unquote(line.substr(pos));
    signals.push_back(std::move(s));
  }
  if (!header_seen) throw DataError("empty signal CSV");
  return signals;
}

std::vector<ForecastSignal> read_signal_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open signal file: " + path);
  return read_signal_csv(in);
}

}  // namespace fxbench
