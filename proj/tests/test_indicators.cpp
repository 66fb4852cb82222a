#include "fxbench/indicators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fxbench/errors.hpp"
#include "fxbench/rng.hpp"
#include "testutil.hpp"

using namespace fxbench;
namespace tt = fxbench::test;

namespace {

// Small periods keep the unit tests fast; the long-window defaults are
// exercised by the acceptance suite.
IndicatorConfig small_config() {
  IndicatorConfig cfg;
  cfg.ma_windows = {3, 5, 8};
  cfg.rsi_period = 5;
  cfg.cci_period = 5;
  cfg.williams_period = 5;
  return cfg;
}

PriceSeries ramp(std::size_t n, double slope, double start = 1.0) {
  PriceSeries s;
  s.label = "ramp";
  for (std::size_t i = 0; i < n; ++i) {
    s.timestamps_ms.push_back(static_cast<std::int64_t>(i));
    s.mids.push_back(start + slope * static_cast<double>(i));
  }
  return s;
}

}  // namespace

TEST(RollingSumTest, TracksNaiveSumOverLongStream) {
  Rng rng(11);
  RollingSum sum;
  double naive = 0.0;
  for (int i = 0; i < 20000; ++i) {
    // mix of magnitudes to stress cancellation
    const double x = rng.uniform(-1.0, 1.0) * (i % 7 == 0 ? 1e6 : 1e-6);
    sum.add(x);
    naive += x;
  }
  EXPECT_NEAR(sum.value(), naive, 1e-6);
}

TEST(MovingAverageTest, MatchesNaiveMean) {
  Rng rng(3);
  std::vector<double> xs;
  MovingAverage ma(7);
  for (int i = 0; i < 200; ++i) {
    xs.push_back(rng.uniform(0.9, 1.1));
    const auto v = ma.push(xs.back());
    if (i < 6) {
      EXPECT_FALSE(v.has_value());
    } else {
      ASSERT_TRUE(v.has_value());
      EXPECT_NEAR(*v, tt::naive_ma(xs, 7, xs.size() - 1), 1e-12);
    }
  }
}

TEST(MovingAverageTest, WindowOneEchoesInput) {
  MovingAverage ma(1);
  EXPECT_DOUBLE_EQ(*ma.push(42.0), 42.0);
  EXPECT_DOUBLE_EQ(*ma.push(-1.0), -1.0);
}

TEST(StreamOracleTest, AllStreamsMatchNaiveRecompute) {
  const PriceSeries s = tt::make_walk(17, 400);
  const auto& xs = s.mids;
  const int p = 5;

  const std::vector<double> ma3 = moving_average(s, 3);
  const std::vector<double> r = rsi(s, p);
  const std::vector<double> c = cci(s, p);
  const std::vector<double> w = williams_r(s, p);

  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i >= 2) {
      EXPECT_NEAR(ma3[i], tt::naive_ma(xs, 3, i), 1e-9) << "ma at " << i;
    }
    if (i >= static_cast<std::size_t>(p)) {
      EXPECT_NEAR(r[i], tt::naive_rsi(xs, p, i), 1e-9) << "rsi at " << i;
    } else {
      EXPECT_TRUE(std::isnan(r[i]));
    }
    if (i >= static_cast<std::size_t>(p) - 1) {
      EXPECT_NEAR(c[i], tt::naive_cci(xs, p, i), 1e-9) << "cci at " << i;
      EXPECT_NEAR(w[i], tt::naive_williams(xs, p, i), 1e-9) << "williams at " << i;
    } else {
      EXPECT_TRUE(std::isnan(c[i]));
      EXPECT_TRUE(std::isnan(w[i]));
    }
  }
}

TEST(RsiTest, SaturatesOnMonotoneInput) {
  RsiStream up(4);
  std::optional<double> v;
  for (int i = 0; i < 10; ++i) v = up.push(1.0 + 0.01 * i);
  ASSERT_TRUE(v.has_value());
  EXPECT_DOUBLE_EQ(*v, 100.0);  // no losses in the window

  RsiStream down(4);
  for (int i = 0; i < 10; ++i) v = down.push(2.0 - 0.01 * i);
  EXPECT_DOUBLE_EQ(*v, 0.0);  // no gains
}

TEST(RsiTest, FlatWindowReadsNeutral) {
  RsiStream flat(4);
  std::optional<double> v;
  for (int i = 0; i < 10; ++i) v = flat.push(1.5);
  ASSERT_TRUE(v.has_value());
  EXPECT_DOUBLE_EQ(*v, 50.0);
}

TEST(CciTest, ZeroDeviationReadsZero) {
  CciStream cci(4);
  std::optional<double> v;
  for (int i = 0; i < 8; ++i) v = cci.push(1.5);
  ASSERT_TRUE(v.has_value());
  EXPECT_DOUBLE_EQ(*v, 0.0);
}

TEST(WilliamsTest, FlatWindowReadsMidpoint) {
  WilliamsStream w(4);
  std::optional<double> v;
  for (int i = 0; i < 8; ++i) v = w.push(1.5);
  ASSERT_TRUE(v.has_value());
  EXPECT_DOUBLE_EQ(*v, -50.0);
}

TEST(WilliamsTest, ExtremesHitBounds) {
  // strictly rising: last value is the window high -> 0
  WilliamsStream w(4);
  std::optional<double> v;
  for (int i = 0; i < 8; ++i) v = w.push(1.0 + 0.1 * i);
  ASSERT_TRUE(v.has_value());
  EXPECT_DOUBLE_EQ(*v, 0.0);
  // strictly falling: last value is the window low -> -100
  WilliamsStream w2(4);
  for (int i = 0; i < 8; ++i) v = w2.push(2.0 - 0.1 * i);
  EXPECT_DOUBLE_EQ(*v, -100.0);
}

TEST(PriceOscillatorTest, RampYieldsLagDifferences) {
  // On a linear ramp with slope s the w-point mean lags the price by
  // s*(w-1)/2, so MA_a - MA_b = s*(b-a)/2.
  const double slope = 1e-5;
  const PriceSeries s = ramp(1200, slope);
  const std::vector<int> windows = {300, 600, 900};
  const auto osc = price_oscillator(s, windows);
  for (std::size_t i = 899; i < s.size(); ++i) {
    EXPECT_NEAR(osc[i][0], slope * (600 - 300) / 2.0, 1e-9);
    EXPECT_NEAR(osc[i][1], slope * (900 - 300) / 2.0, 1e-9);
  }
  EXPECT_TRUE(std::isnan(osc[898][0]));  // largest window not yet full
}

TEST(PriceOscillatorTest, RequiresThreeWindows) {
  EXPECT_THROW(PriceOscillatorStream({300, 600}), DataError);
}

TEST(WholeSeriesTest, ShortInputThrows) {
  const PriceSeries s = tt::make_walk(1, 10);
  EXPECT_THROW(moving_average(s, 11), DataError);
  EXPECT_THROW(rsi(s, 10), DataError);  // needs period + 1 points
  EXPECT_THROW(cci(s, 11), DataError);
  EXPECT_THROW(williams_r(s, 11), DataError);
  EXPECT_THROW(price_oscillator(s, {4, 8, 11}), DataError);
}

TEST(ConfigTest, WarmupIsLargestPeriod) {
  IndicatorConfig cfg = small_config();
  EXPECT_EQ(cfg.warmup(), 8);
  cfg.rsi_period = 20;
  EXPECT_EQ(cfg.warmup(), 20);
  EXPECT_EQ(IndicatorConfig{}.warmup(), 900);
}

TEST(ConfigTest, ValidateRejectsJunk) {
  IndicatorConfig cfg = small_config();
  cfg.ma_windows.clear();
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = small_config();
  cfg.ma_windows[0] = 0;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = small_config();
  cfg.rsi_period = 1;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = small_config();
  cfg.ma_scale = 0.0;
  EXPECT_THROW(cfg.validate(), DataError);
  EXPECT_NO_THROW(small_config().validate());
}

TEST(EngineTest, LockstepMatchesWholeSeriesFunctions) {
  const IndicatorConfig cfg = small_config();
  const PriceSeries s = tt::make_walk(23, 120);
  IndicatorEngine engine(cfg);

  const auto ma3 = moving_average(s, 3);
  const auto ma5 = moving_average(s, 5);
  const auto ma8 = moving_average(s, 8);
  const auto r = rsi(s, cfg.rsi_period);
  const auto c = cci(s, cfg.cci_period);
  const auto w = williams_r(s, cfg.williams_period);

  std::size_t seen = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto v = engine.push(s.mids[i]);
    if (i + 1 < static_cast<std::size_t>(cfg.warmup())) {
      EXPECT_FALSE(v.has_value()) << "vector before warm-up at " << i;
      continue;
    }
    ASSERT_TRUE(v.has_value()) << "no vector at " << i;
    ++seen;
    EXPECT_EQ(v->index, i);
    EXPECT_NEAR(v->ma[0], ma3[i], 1e-12);
    EXPECT_NEAR(v->ma[1], ma5[i], 1e-12);
    EXPECT_NEAR(v->ma[2], ma8[i], 1e-12);
    EXPECT_NEAR(v->rsi, r[i], 1e-12);
    EXPECT_NEAR(v->cci, c[i], 1e-12);
    EXPECT_NEAR(v->williams, w[i], 1e-12);
    EXPECT_NEAR(v->price_osc[0], ma3[i] - ma5[i], 1e-12);
    EXPECT_NEAR(v->price_osc[1], ma3[i] - ma8[i], 1e-12);
  }
  EXPECT_EQ(seen, s.size() - static_cast<std::size_t>(cfg.warmup()) + 1);
}

TEST(EngineTest, InputWidthCountsComponents) {
  EXPECT_EQ(IndicatorEngine(small_config()).input_width(), 8);
  IndicatorConfig cfg = small_config();
  cfg.ma_windows = {2, 4, 6};
  EXPECT_EQ(IndicatorEngine(cfg).input_width(), 8);
}

TEST(VectorStreamTest, SizeAndAlignment) {
  const IndicatorConfig cfg = small_config();
  const PriceSeries s = tt::make_walk(29, 50);
  const auto vectors = indicator_vector_stream(s, cfg);
  ASSERT_EQ(vectors.size(), s.size() - 7);
  EXPECT_EQ(vectors.front().index, 7u);
  EXPECT_EQ(vectors.back().index, s.size() - 1);

  const PriceSeries tiny = tt::make_walk(31, 5);
  EXPECT_THROW(indicator_vector_stream(tiny, cfg), DataError);
}

TEST(NormalizeTest, ComponentsLandInUnitRange) {
  const IndicatorConfig cfg = small_config();
  const PriceSeries s = tt::make_walk(41, 300, 1.15, 5e-4);
  for (const IndicatorVector& v : indicator_vector_stream(s, cfg)) {
    const auto n = normalize_indicator_vector(v, s.mids[v.index], cfg);
    ASSERT_EQ(n.size(), 8u);
    for (double x : n) {
      EXPECT_GE(x, -1.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_NEAR(denormalize_rsi(n[3]), v.rsi, 1e-12);
  }
}

TEST(NormalizeTest, ClampsExtremeDistances) {
  IndicatorConfig cfg = small_config();
  IndicatorVector v;
  v.ma = {1.0, 1.0, 1.0};
  v.rsi = 100.0;
  v.cci = 1e9;
  v.williams = 0.0;
  v.price_osc = {1.0, -1.0};
  const auto n = normalize_indicator_vector(v, 2.0, cfg);  // a full unit above the MAs
  EXPECT_DOUBLE_EQ(n[0], 1.0);
  EXPECT_DOUBLE_EQ(n[3], 1.0);   // rsi 100 -> +1
  EXPECT_DOUBLE_EQ(n[4], 1.0);   // cci clamped
  EXPECT_DOUBLE_EQ(n[5], 1.0);   // williams 0 -> +1
  EXPECT_DOUBLE_EQ(n[6], 1.0);
  EXPECT_DOUBLE_EQ(n[7], -1.0);

  v.cci = -1e9;
  v.rsi = 0.0;
  v.williams = -100.0;
  const auto m = normalize_indicator_vector(v, 0.5, cfg);  // far below the MAs
  EXPECT_DOUBLE_EQ(m[0], -1.0);
  EXPECT_DOUBLE_EQ(m[3], -1.0);
  EXPECT_DOUBLE_EQ(m[4], -1.0);
  EXPECT_DOUBLE_EQ(m[5], -1.0);
}

TEST(IndicatorCsvTest, HeaderFollowsConfiguredWindows) {
  const IndicatorConfig cfg = small_config();
  const PriceSeries s = tt::make_walk(43, 20);
  const auto vectors = indicator_vector_stream(s, cfg);
  std::ostringstream out;
  write_indicator_csv(vectors, cfg, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "index,ma3,ma5,ma8,rsi,cci,williams,po1,po2");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, vectors.size());
}
