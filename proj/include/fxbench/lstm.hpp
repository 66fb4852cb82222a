#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fxbench/rng.hpp"
#include "fxbench/signal.hpp"
#include "fxbench/tickdata.hpp"

namespace fxbench {

// One row of the benchmark's model grid. dense_layout is "1x1" (single
// linear unit) or "1x15,1x1" (15-unit ReLU layer, then a linear unit).
struct ModelSpec {
  std::string name;
  int lstm_units = 0;
  std::string dense_layout;
  int lookback = 0;
  bool bidirectional = false;
  bool convolutional = false;

  bool has_hidden_dense() const { return dense_layout == "1x15,1x1"; }
};

// The eight benchmarked variants, in canonical order.
const std::vector<ModelSpec>& lstm_model_table();

// Lookup by exact name; throws UsageError listing the valid names.
const ModelSpec& find_model_spec(const std::string& name);

struct LstmState {
  Eigen::VectorXd hidden;
  Eigen::VectorXd cell;

  static LstmState zero(int units);
};

// Packed gate weights, rows ordered [input; forget; candidate; output],
// each block `units` tall.
struct LstmWeights {
  Eigen::MatrixXd wx;  // (4*units, in_dim)
  Eigen::MatrixXd wh;  // (4*units, units)
  Eigen::VectorXd b;   // (4*units)

  int units() const { return static_cast<int>(wh.cols()); }
  int in_dim() const { return static_cast<int>(wx.cols()); }
};

// Canonical recurrence: i,f,o sigmoid, g tanh; cell' = f.cell + i.g;
// hidden' = o.tanh(cell'). Returns (hidden', new state).
std::pair<Eigen::VectorXd, LstmState> lstm_cell_forward(const Eigen::VectorXd& x,
                                                        const LstmState& state,
                                                        const LstmWeights& w);

struct TrainConfig {
  int epochs = 3;
  int batch = 32;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double grad_clip = 1.0;     // max global gradient norm
  double train_fraction = 0.7;  // leading share of the series used for fitting
  std::uint64_t seed = 0;

  void validate() const;
};

// Sequence regressor: [optional conv1d k=3, same padding, 1->4 channels,
// ReLU] -> [LSTM, optionally bidirectional] -> dense head. Input sequences
// are (lookback x 1) matrices; output is one real.
struct LstmModel {
  ModelSpec spec;

  Eigen::MatrixXd conv_w;  // (4, 3) when convolutional
  Eigen::VectorXd conv_b;  // (4)
  LstmWeights fwd;
  LstmWeights bwd;         // bidirectional only
  Eigen::MatrixXd d1_w;    // first dense layer
  Eigen::VectorXd d1_b;
  Eigen::MatrixXd d2_w;    // final linear layer when the head has two stages
  Eigen::VectorXd d2_b;
  bool trained = false;

  // Unvalidated constructor used by tests to build small instances;
  // build_model routes through this after checking the layout is a table row.
  static LstmModel assemble(const ModelSpec& spec, std::uint64_t seed);

  double forward(const Eigen::MatrixXd& seq) const;

  // Per-timestep [forward hidden | time-aligned backward hidden] rows;
  // bidirectional models only.
  Eigen::MatrixXd bidirectional_concat(const Eigen::MatrixXd& seq) const;
};

// Gradient (and momentum-velocity) buffers shaped like a model's tensors.
struct ModelGradients {
  Eigen::MatrixXd conv_w;
  Eigen::VectorXd conv_b;
  LstmWeights fwd;
  LstmWeights bwd;
  Eigen::MatrixXd d1_w;
  Eigen::VectorXd d1_b;
  Eigen::MatrixXd d2_w;
  Eigen::VectorXd d2_b;

  static ModelGradients zeros_like(const LstmModel& m);
  void scale(double s);
  double global_norm() const;
};

// Squared error (y - target)^2 for one sequence; gradients accumulate into g.
double forward_backward(const LstmModel& m, const Eigen::MatrixXd& seq, double target,
                        ModelGradients& g);

// Matching-order flat views over the live tensors, for finite-difference
// checks and generic parameter updates.
std::vector<double*> parameter_pointers(LstmModel& m);
std::vector<double*> gradient_pointers(ModelGradients& g);

// Deterministic build from (spec, seed); spec must match a table row.
LstmModel build_model(const ModelSpec& spec, std::uint64_t seed);

struct TrainingReport {
  std::vector<double> epoch_loss;  // mean squared error per epoch
  std::size_t split_tick = 0;      // first tick of the held-out span
  std::size_t train_samples = 0;
};

// Momentum-SGD regression on sliding windows of one-step changes (in pips);
// target is the next change. Deterministic for a fixed tcfg.seed.
TrainingReport train(LstmModel& model, const PriceSeries& series, const TrainConfig& tcfg);

struct SignalGenConfig {
  double emission_threshold = 0.25;
  int volatility_window = 900;  // ticks of |change| history in the intensity scale
};

// Walks the held-out span [split_tick, end): intensity =
// clamp(3*prediction/scale, -3, 3) with scale the rolling mean absolute
// one-step change, fed through the shared emission policy.
std::vector<ForecastSignal> predict_signals(const LstmModel& model,
                                            const PriceSeries& series,
                                            const SignalGenConfig& cfg,
                                            std::size_t split_tick,
                                            const std::string& model_label);

struct LstmRunResult {
  std::vector<ForecastSignal> signals;
  TrainingReport report;
};

// build -> train -> predict over one series.
LstmRunResult run_lstm_pipeline(const PriceSeries& series, const ModelSpec& spec,
                                const TrainConfig& tcfg, const SignalGenConfig& sgcfg,
                                std::uint64_t seed, const std::string& model_label);

// Versioned text checkpoint (hexfloat values; bit-exact round trip).
void save_checkpoint(const LstmModel& model, std::ostream& out);
LstmModel load_checkpoint(std::istream& in);
void save_checkpoint_file(const LstmModel& model, const std::string& path);
LstmModel load_checkpoint_file(const std::string& path);

}  // namespace fxbench
