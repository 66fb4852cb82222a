#include "fxbench/lstm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fxbench/errors.hpp"
#include "testutil.hpp"

using namespace fxbench;
namespace tt = fxbench::test;

namespace {

ModelSpec tiny_spec(int units, int lookback, const std::string& dense, bool bi, bool conv) {
  ModelSpec s;
  s.name = "tiny";
  s.lstm_units = units;
  s.lookback = lookback;
  s.dense_layout = dense;
  s.bidirectional = bi;
  s.convolutional = conv;
  return s;
}

Eigen::MatrixXd random_seq(std::uint64_t seed, int t) {
  Rng rng(seed);
  Eigen::MatrixXd seq(t, 1);
  for (int k = 0; k < t; ++k) seq(k, 0) = rng.uniform(-1.5, 1.5);
  return seq;
}

}  // namespace

TEST(ModelTableTest, HoldsTheEightBenchmarkRows) {
  const auto& table = lstm_model_table();
  ASSERT_EQ(table.size(), 8u);

  const struct {
    const char* name;
    int units;
    const char* dense;
    int lookback;
    bool bi, conv;
  } expected[] = {
      {"sLSTM-1-1", 100, "1x1", 1, false, false},
      {"sLSTM-15-1", 100, "1x1", 15, false, false},
      {"sLSTM-15-1,15", 100, "1x15,1x1", 1, false, false},
      {"biLSTM-1-1", 100, "1x1", 1, true, false},
      {"biLSTM-15-1", 100, "1x1", 15, true, false},
      {"biLSTM-15-1,15", 100, "1x15,1x1", 15, true, false},
      {"convLSTM-1-1", 60, "1x1", 1, false, true},
      {"convLSTM-1-1,15", 64, "1x1", 15, false, true},
  };
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(table[i].name, expected[i].name);
    EXPECT_EQ(table[i].lstm_units, expected[i].units);
    EXPECT_EQ(table[i].dense_layout, expected[i].dense);
    EXPECT_EQ(table[i].lookback, expected[i].lookback);
    EXPECT_EQ(table[i].bidirectional, expected[i].bi);
    EXPECT_EQ(table[i].convolutional, expected[i].conv);
  }
  // only the two "...-15-1,15" simple/bi rows carry the hidden dense stage
  EXPECT_TRUE(table[2].has_hidden_dense());
  EXPECT_TRUE(table[5].has_hidden_dense());
  EXPECT_FALSE(table[7].has_hidden_dense());
}

TEST(ModelTableTest, LookupByName) {
  EXPECT_EQ(find_model_spec("biLSTM-15-1").lookback, 15);
  try {
    find_model_spec("sLSTM-9000");
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    // the error enumerates the valid names
    EXPECT_NE(std::string(e.what()).find("convLSTM-1-1,15"), std::string::npos);
  }
}

TEST(CellTest, ZeroEverythingGivesZeroOutputs) {
  LstmWeights w;
  w.wx = Eigen::MatrixXd::Zero(8, 1);
  w.wh = Eigen::MatrixXd::Zero(8, 2);
  w.b = Eigen::VectorXd::Zero(8);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  const auto [h, state] = lstm_cell_forward(x, LstmState::zero(2), w);
  EXPECT_DOUBLE_EQ(h.norm(), 0.0);  // candidate gate is tanh(0)
  EXPECT_DOUBLE_EQ(state.cell.norm(), 0.0);
}

TEST(CellTest, SaturatedForgetGateCarriesTheCell) {
  // zero weights, forget bias driven to saturation: cell' = cell,
  // hidden' = sigmoid(0) * tanh(cell)
  const int u = 3;
  LstmWeights w;
  w.wx = Eigen::MatrixXd::Zero(4 * u, 1);
  w.wh = Eigen::MatrixXd::Zero(4 * u, u);
  w.b = Eigen::VectorXd::Zero(4 * u);
  w.b.segment(u, u).setConstant(50.0);

  LstmState state = LstmState::zero(u);
  state.cell << 0.3, -0.7, 1.2;
  Eigen::VectorXd x(1);
  x << 0.9;
  const auto [h, next] = lstm_cell_forward(x, state, w);
  for (int i = 0; i < u; ++i) {
    EXPECT_NEAR(next.cell(i), state.cell(i), 1e-12);
    EXPECT_NEAR(h(i), 0.5 * std::tanh(state.cell(i)), 1e-12);
  }
}

TEST(CellTest, DimensionMismatchThrows) {
  LstmWeights w;
  w.wx = Eigen::MatrixXd::Zero(8, 1);
  w.wh = Eigen::MatrixXd::Zero(8, 2);
  w.b = Eigen::VectorXd::Zero(8);
  Eigen::VectorXd x2 = Eigen::VectorXd::Ones(2);  // in_dim is 1
  EXPECT_THROW(lstm_cell_forward(x2, LstmState::zero(2), w), ModelError);
  Eigen::VectorXd x1 = Eigen::VectorXd::Ones(1);
  EXPECT_THROW(lstm_cell_forward(x1, LstmState::zero(3), w), ModelError);
}

TEST(AssembleTest, DeterministicPerSeed) {
  const ModelSpec spec = tiny_spec(4, 5, "1x15,1x1", true, true);
  const LstmModel a = LstmModel::assemble(spec, 42);
  const LstmModel b = LstmModel::assemble(spec, 42);
  const LstmModel c = LstmModel::assemble(spec, 43);
  EXPECT_TRUE(a.fwd.wx == b.fwd.wx);
  EXPECT_TRUE(a.bwd.wh == b.bwd.wh);
  EXPECT_TRUE(a.conv_w == b.conv_w);
  EXPECT_TRUE(a.d1_w == b.d1_w);
  EXPECT_FALSE(a.fwd.wx == c.fwd.wx);
  EXPECT_FALSE(a.trained);
}

TEST(AssembleTest, ShapesFollowTheSpec) {
  const LstmModel uni = LstmModel::assemble(tiny_spec(6, 3, "1x1", false, false), 1);
  EXPECT_EQ(uni.fwd.wx.rows(), 24);
  EXPECT_EQ(uni.fwd.wx.cols(), 1);
  EXPECT_EQ(uni.fwd.wh.cols(), 6);
  EXPECT_EQ(uni.bwd.wx.size(), 0);
  EXPECT_EQ(uni.d1_w.rows(), 1);
  EXPECT_EQ(uni.d1_w.cols(), 6);
  EXPECT_EQ(uni.d2_w.size(), 0);

  const LstmModel full = LstmModel::assemble(tiny_spec(5, 4, "1x15,1x1", true, true), 1);
  EXPECT_EQ(full.conv_w.rows(), 4);  // four conv channels feed the LSTM
  EXPECT_EQ(full.conv_w.cols(), 3);  // kernel width three
  EXPECT_EQ(full.fwd.wx.cols(), 4);
  EXPECT_EQ(full.bwd.wx.rows(), 20);
  EXPECT_EQ(full.d1_w.rows(), 15);
  EXPECT_EQ(full.d1_w.cols(), 10);  // both directions concatenated
  EXPECT_EQ(full.d2_w.cols(), 15);

  EXPECT_THROW(LstmModel::assemble(tiny_spec(0, 3, "1x1", false, false), 1), ModelError);
  EXPECT_THROW(LstmModel::assemble(tiny_spec(3, 0, "1x1", false, false), 1), ModelError);
  EXPECT_THROW(LstmModel::assemble(tiny_spec(3, 3, "2x7", false, false), 1), ModelError);
}

TEST(BuildModelTest, AcceptsOnlyExactTableRows) {
  EXPECT_NO_THROW(build_model(find_model_spec("sLSTM-1-1"), 1));
  ModelSpec tweaked = find_model_spec("sLSTM-1-1");
  tweaked.lstm_units = 101;
  EXPECT_THROW(build_model(tweaked, 1), UsageError);
  tweaked = find_model_spec("biLSTM-15-1");
  tweaked.bidirectional = false;
  EXPECT_THROW(build_model(tweaked, 1), UsageError);
  ModelSpec junk = tiny_spec(4, 2, "1x1", false, false);
  EXPECT_THROW(build_model(junk, 1), UsageError);  // unknown name
}

TEST(ForwardTest, MatchesManualCellLoop) {
  const LstmModel m = LstmModel::assemble(tiny_spec(3, 6, "1x1", false, false), 9);
  const Eigen::MatrixXd seq = random_seq(4, 6);

  LstmState state = LstmState::zero(3);
  Eigen::VectorXd h;
  for (int t = 0; t < 6; ++t) {
    Eigen::VectorXd x(1);
    x << seq(t, 0);
    auto [ht, next] = lstm_cell_forward(x, state, m.fwd);
    h = ht;
    state = next;
  }
  const double manual = (m.d1_w * h + m.d1_b)(0);
  EXPECT_NEAR(m.forward(seq), manual, 1e-14);
}

TEST(ForwardTest, HiddenDenseHeadAppliesRelu) {
  const LstmModel m = LstmModel::assemble(tiny_spec(3, 4, "1x15,1x1", false, false), 10);
  const Eigen::MatrixXd seq = random_seq(5, 4);

  LstmState state = LstmState::zero(3);
  Eigen::VectorXd h;
  for (int t = 0; t < 4; ++t) {
    Eigen::VectorXd x(1);
    x << seq(t, 0);
    auto [ht, next] = lstm_cell_forward(x, state, m.fwd);
    h = ht;
    state = next;
  }
  const Eigen::VectorXd a1 = (m.d1_w * h + m.d1_b).cwiseMax(0.0);
  EXPECT_NEAR(m.forward(seq), (m.d2_w * a1 + m.d2_b)(0), 1e-14);
}

TEST(ForwardTest, RejectsWrongShapes) {
  const LstmModel m = LstmModel::assemble(tiny_spec(3, 4, "1x1", false, false), 1);
  EXPECT_THROW(m.forward(Eigen::MatrixXd::Zero(4, 2)), ModelError);
  EXPECT_THROW(m.forward(Eigen::MatrixXd::Zero(0, 1)), ModelError);
}

TEST(BidirectionalTest, MirroredWeightsOnPalindromeAgree) {
  LstmModel m = LstmModel::assemble(tiny_spec(4, 5, "1x1", true, false), 21);
  m.bwd = m.fwd;  // identical directions
  Eigen::MatrixXd seq(5, 1);
  seq << 0.3, -0.1, 0.7, -0.1, 0.3;  // palindrome

  const Eigen::MatrixXd out = m.bidirectional_concat(seq);
  ASSERT_EQ(out.rows(), 5);
  ASSERT_EQ(out.cols(), 8);
  // reading the input backwards is indistinguishable from reading it
  // forwards, so the two halves mirror each other across the midpoint
  const int U = 4;
  for (int t = 0; t < 5; ++t)
    for (int u = 0; u < U; ++u)
      EXPECT_DOUBLE_EQ(out(t, U + u), out(5 - 1 - t, u)) << "t=" << t << " u=" << u;
}

TEST(BidirectionalTest, ConcatAlignsBackwardStates) {
  // T = 1 collapses both directions onto the same single input
  LstmModel m = LstmModel::assemble(tiny_spec(3, 1, "1x1", true, false), 5);
  m.bwd = m.fwd;
  Eigen::MatrixXd seq(1, 1);
  seq << 0.42;
  const Eigen::MatrixXd out = m.bidirectional_concat(seq);
  for (int u = 0; u < 3; ++u) EXPECT_DOUBLE_EQ(out(0, u), out(0, 3 + u));
}

TEST(BidirectionalTest, RequiresBidirectionalSpec) {
  const LstmModel m = LstmModel::assemble(tiny_spec(3, 4, "1x1", false, false), 1);
  EXPECT_THROW(m.bidirectional_concat(Eigen::MatrixXd::Zero(4, 1)), ModelError);
}

TEST(GradientTest, ForwardBackwardMatchesFiniteDifferences) {
  // one compact variant of every architectural flavor
  const ModelSpec specs[] = {
      tiny_spec(3, 4, "1x1", false, false),
      tiny_spec(3, 5, "1x15,1x1", false, false),
      tiny_spec(2, 4, "1x1", true, false),
      tiny_spec(2, 5, "1x1", false, true),
      tiny_spec(2, 4, "1x15,1x1", true, true),
  };
  int case_id = 0;
  for (const ModelSpec& spec : specs) {
    LstmModel m = LstmModel::assemble(spec, 100 + case_id);
    const Eigen::MatrixXd seq = random_seq(200 + case_id, spec.lookback);
    const double target = 0.37;

    ModelGradients g = ModelGradients::zeros_like(m);
    forward_backward(m, seq, target, g);

    std::vector<double*> params = parameter_pointers(m);
    std::vector<double*> gp = gradient_pointers(g);
    std::vector<double> analytic;
    for (double* p : gp) analytic.push_back(*p);
    ASSERT_EQ(params.size(), analytic.size());

    const auto res = tt::finite_difference_check(params, analytic, [&]() {
      const double err = m.forward(seq) - target;
      return err * err;
    });
    EXPECT_LT(res.max_rel_err, 1e-4) << "flavor " << case_id << " param " << res.worst_index;
    ++case_id;
  }
}

TEST(GradientTest, LossValueMatchesForward) {
  LstmModel m = LstmModel::assemble(tiny_spec(3, 4, "1x1", false, false), 3);
  const Eigen::MatrixXd seq = random_seq(8, 4);
  ModelGradients g = ModelGradients::zeros_like(m);
  const double loss = forward_backward(m, seq, 0.2, g);
  const double err = m.forward(seq) - 0.2;
  EXPECT_NEAR(loss, err * err, 1e-14);
}

TEST(TrainTest, BookkeepsSplitAndSampleCount) {
  const PriceSeries s = tt::make_walk(55, 2000);
  LstmModel m = build_model(find_model_spec("sLSTM-1-1"), 7);
  TrainConfig tcfg;
  tcfg.seed = 7;
  const TrainingReport report = train(m, s, tcfg);
  EXPECT_TRUE(m.trained);
  EXPECT_EQ(report.split_tick, 1400u);  // 70% of 2000
  // window ends run from lookback to split-2
  EXPECT_EQ(report.train_samples, 1400u - 1u - 1u);
  ASSERT_EQ(report.epoch_loss.size(), 3u);
  for (double l : report.epoch_loss) {
    EXPECT_TRUE(std::isfinite(l));
    EXPECT_GE(l, 0.0);
  }
  // fitting a noisy walk should not blow the loss up
  EXPECT_LE(report.epoch_loss.back(), report.epoch_loss.front() * 2.0 + 1e-9);
}

TEST(TrainTest, DeterministicForFixedSeed) {
  const PriceSeries s = tt::make_walk(56, 600);
  const ModelSpec spec = find_model_spec("sLSTM-1-1");
  TrainConfig tcfg;

  LstmModel a = build_model(spec, 11);
  LstmModel b = build_model(spec, 11);
  tcfg.seed = 11;
  const TrainingReport ra = train(a, s, tcfg);
  const TrainingReport rb = train(b, s, tcfg);
  ASSERT_EQ(ra.epoch_loss.size(), rb.epoch_loss.size());
  for (std::size_t e = 0; e < ra.epoch_loss.size(); ++e)
    EXPECT_EQ(ra.epoch_loss[e], rb.epoch_loss[e]);
  EXPECT_TRUE(a.fwd.wx == b.fwd.wx);
  EXPECT_TRUE(a.d1_w == b.d1_w);
}

TEST(TrainTest, TooShortSeriesThrows) {
  const PriceSeries s = tt::make_walk(57, 20);
  LstmModel m = LstmModel::assemble(tiny_spec(4, 15, "1x1", false, false), 1);
  TrainConfig tcfg;
  tcfg.seed = 1;
  // split = 14, lookback 15: no sample fits
  EXPECT_THROW(train(m, s, tcfg), DataError);
}

TEST(TrainTest, RunawayStepReportsDivergence) {
  const PriceSeries s = tt::make_walk(58, 200);
  LstmModel m = LstmModel::assemble(tiny_spec(4, 2, "1x15,1x1", false, false), 2);
  TrainConfig tcfg;
  tcfg.seed = 2;
  tcfg.epochs = 2;
  tcfg.learning_rate = 1e160;
  tcfg.grad_clip = 1e308;  // effectively unclipped
  tcfg.momentum = 0.0;
  try {
    train(m, s, tcfg);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(TrainTest, ValidateRejectsJunkConfig) {
  TrainConfig t;
  t.epochs = 0;
  EXPECT_THROW(t.validate(), UsageError);
  t = {};
  t.batch = 0;
  EXPECT_THROW(t.validate(), UsageError);
  t = {};
  t.momentum = 1.0;
  EXPECT_THROW(t.validate(), UsageError);
  t = {};
  t.train_fraction = 1.0;
  EXPECT_THROW(t.validate(), UsageError);
  t = {};
  t.grad_clip = 0.0;
  EXPECT_THROW(t.validate(), UsageError);
}

TEST(PredictSignalsTest, RefusesUntrainedModel) {
  const PriceSeries s = tt::make_walk(59, 300);
  const LstmModel m = LstmModel::assemble(tiny_spec(4, 2, "1x1", false, false), 1);
  SignalGenConfig cfg;
  EXPECT_THROW(predict_signals(m, s, cfg, 210, "x"), ModelError);
}

TEST(PredictSignalsTest, ZeroNetworkEmitsNothing) {
  const PriceSeries s = tt::make_walk(60, 300);
  LstmModel m = LstmModel::assemble(tiny_spec(4, 2, "1x1", false, false), 1);
  for (double* p : parameter_pointers(m)) *p = 0.0;
  m.trained = true;
  SignalGenConfig cfg;
  EXPECT_TRUE(predict_signals(m, s, cfg, 210, "x").empty());
}

TEST(PredictSignalsTest, SignalsLiveInTheHeldOutSpan) {
  const PriceSeries s = tt::make_walk(61, 900);
  const ModelSpec spec = find_model_spec("sLSTM-1-1");
  const LstmRunResult result = run_lstm_pipeline(s, spec, TrainConfig{}, SignalGenConfig{}, 3,
                                                 "sLSTM-1-1");
  for (const ForecastSignal& sig : result.signals) {
    EXPECT_GE(sig.index, result.report.split_tick);
    EXPECT_LT(sig.index, s.size());
    EXPECT_GE(std::abs(sig.intensity), SignalGenConfig{}.emission_threshold);
    EXPECT_LE(std::abs(sig.intensity), 3.0);
    EXPECT_EQ(sig.model_label, "sLSTM-1-1");
    EXPECT_EQ(sig.timestamp_ms, s.timestamps_ms[sig.index]);
  }
}

TEST(PredictSignalsTest, PipelineIsDeterministic) {
  const PriceSeries s = tt::make_walk(62, 700);
  const ModelSpec spec = find_model_spec("sLSTM-1-1");
  const auto a = run_lstm_pipeline(s, spec, TrainConfig{}, SignalGenConfig{}, 5, "m");
  const auto b = run_lstm_pipeline(s, spec, TrainConfig{}, SignalGenConfig{}, 5, "m");
  ASSERT_EQ(a.signals.size(), b.signals.size());
  for (std::size_t i = 0; i < a.signals.size(); ++i) {
    EXPECT_EQ(a.signals[i].index, b.signals[i].index);
    EXPECT_EQ(a.signals[i].intensity, b.signals[i].intensity);
  }
}

TEST(PredictSignalsTest, EvaluationSpanMustExist) {
  const PriceSeries s = tt::make_walk(63, 100);
  LstmModel m = LstmModel::assemble(tiny_spec(4, 2, "1x1", false, false), 1);
  m.trained = true;
  EXPECT_THROW(predict_signals(m, s, SignalGenConfig{}, 100, "x"), ModelError);
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  LstmModel m = LstmModel::assemble(tiny_spec(3, 4, "1x15,1x1", true, true), 77);
  m.trained = true;
  std::ostringstream out;
  save_checkpoint(m, out);
  std::istringstream in(out.str());
  const LstmModel back = load_checkpoint(in);

  EXPECT_EQ(back.spec.name, m.spec.name);
  EXPECT_EQ(back.spec.lstm_units, m.spec.lstm_units);
  EXPECT_EQ(back.spec.dense_layout, m.spec.dense_layout);
  EXPECT_TRUE(back.trained);
  EXPECT_TRUE(back.conv_w == m.conv_w);
  EXPECT_TRUE(back.fwd.wx == m.fwd.wx);
  EXPECT_TRUE(back.fwd.wh == m.fwd.wh);
  EXPECT_TRUE(back.bwd.b == m.bwd.b);
  EXPECT_TRUE(back.d1_w == m.d1_w);
  EXPECT_TRUE(back.d2_b == m.d2_b);

  const Eigen::MatrixXd seq = random_seq(6, 4);
  EXPECT_EQ(back.forward(seq), m.forward(seq));  // identical to the last bit
}

TEST(CheckpointTest, FileRoundTrip) {
  tt::TempDir tmp;
  LstmModel m = LstmModel::assemble(tiny_spec(2, 3, "1x1", false, false), 8);
  save_checkpoint_file(m, tmp.str("ck.txt"));
  const LstmModel back = load_checkpoint_file(tmp.str("ck.txt"));
  EXPECT_TRUE(back.fwd.wx == m.fwd.wx);
  EXPECT_THROW(load_checkpoint_file(tmp.str("missing.txt")), ModelError);
}

TEST(CheckpointTest, RejectsTamperedContent) {
  LstmModel m = LstmModel::assemble(tiny_spec(2, 3, "1x1", false, false), 9);
  std::ostringstream out;
  save_checkpoint(m, out);
  const std::string good = out.str();

  {
    std::istringstream bad("not-a-checkpoint v99\n" + good.substr(good.find('\n') + 1));
    EXPECT_THROW(load_checkpoint(bad), ModelError);
  }
  {
    // drop the trailing "end" marker and the last tensor
    std::istringstream truncated(good.substr(0, good.size() / 2));
    EXPECT_THROW(load_checkpoint(truncated), ModelError);
  }
  {
    // corrupt a tensor shape
    std::string mangled = good;
    const std::size_t pos = mangled.find("tensor fwd_wx 8 1");
    ASSERT_NE(pos, std::string::npos);
    mangled.replace(pos, 17, "tensor fwd_wx 9 1");
    std::istringstream bad(mangled);
    EXPECT_THROW(load_checkpoint(bad), ModelError);
  }
  {
    // rename a tensor to something unknown
    std::string mangled = good;
    const std::size_t pos = mangled.find("tensor fwd_b");
    ASSERT_NE(pos, std::string::npos);
    mangled.replace(pos, 12, "tensor fwd_q");
    std::istringstream bad(mangled);
    EXPECT_THROW(load_checkpoint(bad), ModelError);
  }
  {
    // break a value
    std::string mangled = good;
    const std::size_t pos = mangled.find("0x");
    ASSERT_NE(pos, std::string::npos);
    mangled.replace(pos, 2, "zz");
    std::istringstream bad(mangled);
    EXPECT_THROW(load_checkpoint(bad), ModelError);
  }
  {
    std::istringstream empty("");
    EXPECT_THROW(load_checkpoint(empty), ModelError);
  }
}
