#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "fxbench/tickdata.hpp"

namespace fxbench {

struct IndicatorConfig {
  std::vector<int> ma_windows = {300, 600, 900};
  int rsi_period = 300;
  int cci_period = 300;
  int williams_period = 300;

  // Normalization of the raw indicator values into [-1, 1] for the ANN
  // input layer. Scales are sized so typical EUR/USD tick dynamics land in
  // the middle of the range.
  double ma_scale = 0.005;   // 50 pips of price-to-MA distance maps to 1.0
  double osc_scale = 0.005;  // same scale for the price-oscillator pair
  double cci_clamp = 300.0;

  int warmup() const;  // largest configured period
  void validate() const;
};

// Raw indicator values at one series index.
struct IndicatorVector {
  std::size_t index = 0;
  std::vector<double> ma;             // one per configured window, price units
  double rsi = 50.0;                  // [0, 100]
  double cci = 0.0;
  double williams = -50.0;            // [-100, 0]
  std::array<double, 2> price_osc{};  // (MA_w0 - MA_w1, MA_w0 - MA_w2)
};

// Compensated rolling sum so a 10k-tick stream stays within 1e-9 of a naive
// recomputation.
class RollingSum {
 public:
  void add(double x);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

class MovingAverage {
 public:
  explicit MovingAverage(int window);
  std::optional<double> push(double x);
  int window() const { return window_; }

 private:
  int window_;
  std::size_t head_ = 0;
  std::vector<double> buffer_;
  RollingSum sum_;
  std::size_t count_ = 0;
};

class RsiStream {
 public:
  explicit RsiStream(int period);
  std::optional<double> push(double x);

 private:
  int period_;
  bool have_prev_ = false;
  double prev_ = 0.0;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::vector<double> gains_;
  std::vector<double> losses_;
  RollingSum gain_sum_;
  RollingSum loss_sum_;
};

class CciStream {
 public:
  explicit CciStream(int period);
  std::optional<double> push(double x);

 private:
  int period_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::vector<double> buffer_;
  RollingSum sum_;
};

// Rolling max/min via monotonic deques, O(1) amortized per step.
class WilliamsStream {
 public:
  explicit WilliamsStream(int period);
  std::optional<double> push(double x);

 private:
  int period_;
  std::size_t index_ = 0;
  std::deque<std::pair<std::size_t, double>> max_deque_;
  std::deque<std::pair<std::size_t, double>> min_deque_;
};

class PriceOscillatorStream {
 public:
  explicit PriceOscillatorStream(const std::vector<int>& windows);
  std::optional<std::array<double, 2>> push(double x);

 private:
  std::vector<MovingAverage> mas_;
};

// Whole-series forms, aligned to the input: out[i] is NaN until the window
// is full. Each throws DataError when the series is shorter than the window.
std::vector<double> moving_average(const PriceSeries& series, int window);
std::vector<double> rsi(const PriceSeries& series, int period);
std::vector<double> cci(const PriceSeries& series, int period);
std::vector<double> williams_r(const PriceSeries& series, int period);
std::vector<std::array<double, 2>> price_oscillator(const PriceSeries& series,
                                                    const std::vector<int>& windows);

// All simulators advanced in lockstep. push() yields a vector once every
// component stream is warm (index >= warmup() - 1).
class IndicatorEngine {
 public:
  explicit IndicatorEngine(const IndicatorConfig& cfg);
  std::optional<IndicatorVector> push(double mid);
  const IndicatorConfig& config() const { return cfg_; }
  // number of normalized components: one per MA window + rsi + cci +
  // williams + the two oscillator values
  int input_width() const { return static_cast<int>(cfg_.ma_windows.size()) + 5; }

 private:
  IndicatorConfig cfg_;
  std::size_t index_ = 0;
  std::vector<MovingAverage> mas_;
  RsiStream rsi_;
  CciStream cci_;
  WilliamsStream williams_;
};

// Maps a raw vector to ANN inputs in [-1, 1]; `mid` is the price at the
// vector's index (the MA components are price-to-MA distances).
std::vector<double> normalize_indicator_vector(const IndicatorVector& v,
                                               double mid,
                                               const IndicatorConfig& cfg);
// Inverse of the RSI component's affine map.
double denormalize_rsi(double component);

// One engine pass over a series; returns the stream of raw vectors.
std::vector<IndicatorVector> indicator_vector_stream(const PriceSeries& series,
                                                     const IndicatorConfig& cfg);

// Header: index,ma300,ma600,ma900,rsi,cci,williams,po1,po2 (MA column names
// follow the configured windows).
void write_indicator_csv(const std::vector<IndicatorVector>& vectors,
                         const IndicatorConfig& cfg, std::ostream& out);

}  // namespace fxbench
