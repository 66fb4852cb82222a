#include "fxbench/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "fxbench/errors.hpp"

namespace fxbench {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }
}  // namespace

int IndicatorConfig::warmup() const {
  int w = 1;
  for (int win : ma_windows) w = std::max(w, win);
  w = std::max({w, rsi_period, cci_period, williams_period});
  return w;
}

void IndicatorConfig::validate() const {
  if (ma_windows.empty()) throw DataError("indicator config needs at least one MA window");
  for (int win : ma_windows) {
    if (win < 1) throw DataError("MA window must be >= 1");
  }
  if (rsi_period < 2 || cci_period < 2 || williams_period < 2) {
    throw DataError("oscillator periods must be >= 2");
  }
  if (!(ma_scale > 0.0) || !(osc_scale > 0.0) || !(cci_clamp > 0.0)) {
    throw DataError("normalization scales must be positive");
  }
}

void RollingSum::add(double x) {
  // Neumaier compensation
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

MovingAverage::MovingAverage(int window) : window_(window), buffer_(window) {
  if (window < 1) throw DataError("MA window must be >= 1");
}

std::optional<double> MovingAverage::push(double x) {
  if (count_ == static_cast<std::size_t>(window_)) {
    sum_.add(-buffer_[head_]);
  } else {
    ++count_;
  }
  buffer_[head_] = x;
  head_ = (head_ + 1) % buffer_.size();
  sum_.add(x);
  if (count_ < static_cast<std::size_t>(window_)) return std::nullopt;
  return sum_.value() / window_;
}

RsiStream::RsiStream(int period)
    : period_(period), gains_(period), losses_(period) {
  if (period < 2) throw DataError("RSI period must be >= 2");
}

std::optional<double> RsiStream::push(double x) {
  if (!have_prev_) {
    have_prev_ = true;
    prev_ = x;
    return std::nullopt;
  }
  const double delta = x - prev_;
  prev_ = x;
  const double gain = delta > 0.0 ? delta : 0.0;
  const double loss = delta < 0.0 ? -delta : 0.0;
  if (count_ == static_cast<std::size_t>(period_)) {
    gain_sum_.add(-gains_[head_]);
    loss_sum_.add(-losses_[head_]);
  } else {
    ++count_;
  }
  gains_[head_] = gain;
  losses_[head_] = loss;
  head_ = (head_ + 1) % gains_.size();
  gain_sum_.add(gain);
  loss_sum_.add(loss);
  if (count_ < static_cast<std::size_t>(period_)) return std::nullopt;
  // simple (not Wilder-smoothed) means over the rolling delta window
  const double mean_gain = gain_sum_.value() / period_;
  const double mean_loss = loss_sum_.value() / period_;
  if (mean_loss <= 0.0 && mean_gain <= 0.0) return 50.0;
  if (mean_loss <= 0.0) return 100.0;
  if (mean_gain <= 0.0) return 0.0;
  const double rs = mean_gain / mean_loss;
  return 100.0 - 100.0 / (1.0 + rs);
}

CciStream::CciStream(int period) : period_(period), buffer_(period) {
  if (period < 2) throw DataError("CCI period must be >= 2");
}

std::optional<double> CciStream::push(double x) {
  if (count_ == static_cast<std::size_t>(period_)) {
    sum_.add(-buffer_[head_]);
  } else {
    ++count_;
  }
  buffer_[head_] = x;
  head_ = (head_ + 1) % buffer_.size();
  sum_.add(x);
  if (count_ < static_cast<std::size_t>(period_)) return std::nullopt;
  const double sma = sum_.value() / period_;
  // mean absolute deviation needs the window contents; the buffer scan keeps
  // the stream single-pass over the input itself
  double md = 0.0;
  for (double v : buffer_) md += std::abs(v - sma);
  md /= period_;
  if (md <= 0.0) return 0.0;
  return (x - sma) / (0.015 * md);
}

WilliamsStream::WilliamsStream(int period) : period_(period) {
  if (period < 2) throw DataError("Williams period must be >= 2");
}

std::optional<double> WilliamsStream::push(double x) {
  const std::size_t i = index_++;
  while (!max_deque_.empty() && max_deque_.back().second <= x) max_deque_.pop_back();
  max_deque_.emplace_back(i, x);
  while (!min_deque_.empty() && min_deque_.back().second >= x) min_deque_.pop_back();
  min_deque_.emplace_back(i, x);
  const std::size_t window_start = i + 1 >= static_cast<std::size_t>(period_)
                                       ? i + 1 - static_cast<std::size_t>(period_)
                                       : 0;
  while (max_deque_.front().first < window_start) max_deque_.pop_front();
  while (min_deque_.front().first < window_start) min_deque_.pop_front();
  if (i + 1 < static_cast<std::size_t>(period_)) return std::nullopt;
  const double hh = max_deque_.front().second;
  const double ll = min_deque_.front().second;
  if (hh == ll) return -50.0;
  return -100.0 * (hh - x) / (hh - ll);
}

PriceOscillatorStream::PriceOscillatorStream(const std::vector<int>& windows) {
  if (windows.size() != 3) throw DataError("price oscillator expects 3 MA windows");
  for (int w : windows) mas_.emplace_back(w);
}

std::optional<std::array<double, 2>> PriceOscillatorStream::push(double x) {
  std::array<double, 3> values{};
  bool ready = true;
  for (std::size_t k = 0; k < mas_.size(); ++k) {
    const auto v = mas_[k].push(x);
    if (v) values[k] = *v; else ready = false;
  }
  if (!ready) return std::nullopt;
  return std::array<double, 2>{values[0] - values[1], values[0] - values[2]};
}

std::vector<double> moving_average(const PriceSeries& series, int window) {
  if (series.size() < static_cast<std::size_t>(window)) {
    throw DataError("series shorter than MA window " + std::to_string(window));
  }
  std::vector<double> out(series.size(), kNan);
  MovingAverage ma(window);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (const auto v = ma.push(series.mids[i])) out[i] = *v;
  }
  return out;
}

std::vector<double> rsi(const PriceSeries& series, int period) {
  if (series.size() < static_cast<std::size_t>(period) + 1) {
    throw DataError("series shorter than RSI period + 1");
  }
  std::vector<double> out(series.size(), kNan);
  RsiStream stream(period);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (const auto v = stream.push(series.mids[i])) out[i] = *v;
  }
  return out;
}

std::vector<double> cci(const PriceSeries& series, int period) {
  if (series.size() < static_cast<std::size_t>(period)) {
    throw DataError("series shorter than CCI period");
  }
  std::vector<double> out(series.size(), kNan);
  CciStream stream(period);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (const auto v = stream.push(series.mids[i])) out[i] = *v;
  }
  return out;
}

std::vector<double> williams_r(const PriceSeries& series, int period) {
  if (series.size() < static_cast<std::size_t>(period)) {
    throw DataError("series shorter than Williams period");
  }
  std::vector<double> out(series.size(), kNan);
  WilliamsStream stream(period);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (const auto v = stream.push(series.mids[i])) out[i] = *v;
  }
  return out;
}

std::vector<std::array<double, 2>> price_oscillator(const PriceSeries& series,
                                                    const std::vector<int>& windows) {
  int largest = 0;
  for (int w : windows) largest = std::max(largest, w);
  if (series.size() < static_cast<std::size_t>(largest)) {
    throw DataError("series shorter than largest oscillator window");
  }
  std::vector<std::array<double, 2>> out(series.size(), {kNan, kNan});
  PriceOscillatorStream stream(windows);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (const auto v = stream.push(series.mids[i])) out[i] = *v;
  }
  return out;
}

IndicatorEngine::IndicatorEngine(const IndicatorConfig& cfg)
    : cfg_(cfg),
      rsi_(cfg.rsi_period),
      cci_(cfg.cci_period),
      williams_(cfg.williams_period) {
  cfg_.validate();
  for (int w : cfg_.ma_windows) mas_.emplace_back(w);
}

std::optional<IndicatorVector> IndicatorEngine::push(double mid) {
  const std::size_t i = index_++;
  IndicatorVector v;
  v.index = i;
  v.ma.resize(mas_.size());
  bool ready = true;
  for (std::size_t k = 0; k < mas_.size(); ++k) {
    const auto value = mas_[k].push(mid);
    if (value) v.ma[k] = *value; else ready = false;
  }
  const auto r = rsi_.push(mid);
  const auto c = cci_.push(mid);
  const auto w = williams_.push(mid);
  if (!r || !c || !w) ready = false;
  if (!ready) return std::nullopt;
  v.rsi = *r;
  v.cci = *c;
  v.williams = *w;
  if (v.ma.size() >= 3) {
    v.price_osc = {v.ma[0] - v.ma[1], v.ma[0] - v.ma[2]};
  } else {
    v.price_osc = {0.0, 0.0};
  }
  return v;
}

std::vector<double> normalize_indicator_vector(const IndicatorVector& v,
                                               double mid,
                                               const IndicatorConfig& cfg) {
  std::vector<double> out;
  out.reserve(v.ma.size() + 5);
  for (double ma : v.ma) out.push_back(clamp_unit((mid - ma) / cfg.ma_scale));
  out.push_back((v.rsi - 50.0) / 50.0);
  out.push_back(std::clamp(v.cci, -cfg.cci_clamp, cfg.cci_clamp) / cfg.cci_clamp);
  out.push_back((v.williams + 50.0) / 50.0);
  out.push_back(clamp_unit(v.price_osc[0] / cfg.osc_scale));
  out.push_back(clamp_unit(v.price_osc[1] / cfg.osc_scale));
  return out;
}

double denormalize_rsi(double component) { return component * 50.0 + 50.0; }

std::vector<IndicatorVector> indicator_vector_stream(const PriceSeries& series,
                                                     const IndicatorConfig& cfg) {
  if (series.size() < static_cast<std::size_t>(cfg.warmup())) {
    throw DataError("series shorter than indicator warm-up (" +
                    std::to_string(cfg.warmup()) + " points)");
  }
  IndicatorEngine engine(cfg);
  std::vector<IndicatorVector> out;
  out.reserve(series.size() - cfg.warmup() + 1);
  for (double mid : series.mids) {
    if (auto v = engine.push(mid)) out.push_back(std::move(*v));
  }
  return out;
}

void write_indicator_csv(const std::vector<IndicatorVector>& vectors,
                         const IndicatorConfig& cfg, std::ostream& out) {
  out << "index";
  for (int w : cfg.ma_windows) out << ",ma" << w;
  out << ",rsi,cci,williams,po1,po2\n";
  char buf[64];
  for (const auto& v : vectors) {
    out << v.index;
    auto emit = [&](double x) {
      std::snprintf(buf, sizeof(buf), ",%.17g", x);
      out << buf;
    };
    for (double ma : v.ma) emit(ma);
    emit(v.rsi);
    emit(v.cci);
    emit(v.williams);
    emit(v.price_osc[0]);
    emit(v.price_osc[1]);
    out << '\n';
  }
}

}  // namespace fxbench
