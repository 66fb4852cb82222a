#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fxbench/indicators.hpp"
#include "fxbench/rng.hpp"
#include "fxbench/signal.hpp"
#include "fxbench/tickdata.hpp"

namespace fxbench {

struct AnnPairConfig {
  int pair_count = 5;                  // one per indicator family
  std::vector<int> hidden_layout = {8};
  double learning_rate = 0.01;
  int train_window = 900;              // ticks of history an update may draw on
  int transfer_every = 100;            // ticks between trainer->predictor copies
  double emission_threshold = 0.25;
  std::uint64_t seed = 0;

  // Training target: realized price change over target_horizon ticks,
  // normalized so that target_clamp_pips maps to 1.0, then clamped to
  // [-1, 1]. The horizon matches the 900-tick verification span.
  int target_horizon = 900;
  double target_clamp_pips = 10.0;
  double pip = 1e-4;

  void validate() const;
};

// Small tanh MLP: tanh on every layer including the scalar output, so the
// prediction is guaranteed to land in [-1, 1].
struct TanhMlp {
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out x in)
  std::vector<Eigen::VectorXd> biases;

  static TanhMlp init(int input_width, const std::vector<int>& hidden, Rng& rng);
  double forward(const Eigen::VectorXd& x) const;
  int input_width() const { return static_cast<int>(weights.front().cols()); }
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients zeros_like(const TanhMlp& net);
};

// Adds scale * d((net(x) - target)^2)/dparam to grads and returns the squared
// error. This is train_step's back-propagation core, public so it can be
// checked against finite differences.
double accumulate_mlp_gradients(const TanhMlp& net, const Eigen::VectorXd& x,
                                double target, double scale, MlpGradients& grads);

struct TrainSample {
  std::vector<double> input;  // full normalized indicator vector
  double target = 0.0;        // in [-1, 1]
};

// Trainer learns by back-propagation on past data; the predictor is its
// frozen twin, refreshed only by explicit weight transfers.
struct AnnPair {
  std::vector<int> input_slice;  // components of the normalized vector consumed
  TanhMlp trainer;
  TanhMlp predictor;
};

// Deterministic construction from cfg.seed; weights uniform in
// (-1/sqrt(fan_in), +1/sqrt(fan_in)); predictor starts equal to trainer.
// Input slices partition the normalized indicator vector by family
// (MA set, RSI, CCI, Williams, oscillator pair); with pair_count != 5 the
// families are distributed round-robin.
std::vector<AnnPair> init_pairs(const AnnPairConfig& cfg, const IndicatorConfig& icfg);

// Mean squared error of the trainer over the (sliced) history.
double window_loss(const AnnPair& pair, const std::vector<TrainSample>& history);

// One full-batch gradient-descent step on MSE over the history. If the full
// step would increase the window loss the effective step is halved until it
// does not (the step is dropped entirely after 30 halvings), so the loss is
// non-increasing. Returns the loss after the update. The predictor is not
// touched.
double train_step(AnnPair& pair, const std::vector<TrainSample>& history,
                  double learning_rate);

// Copies trainer weights into the predictor; trainer unchanged.
void transfer_weights(AnnPair& pair);

// Feed-forward pass through the predictor on the pair's slice of the full
// normalized vector. Throws ModelError when the vector is too short for the
// slice.
double predict(const AnnPair& pair, const std::vector<double>& normalized);

// intensity = 3 * mean(outputs); throws ModelError on empty input.
double combine(const std::vector<double>& outputs);

// Single adaptive pass: every tick the trainers take one gradient step on
// the newest sample whose target horizon has matured, weights transfer every
// transfer_every ticks, and every tick the predictors vote into the
// emission policy.
std::vector<ForecastSignal> run_custom_ann(const PriceSeries& series,
                                           const AnnPairConfig& cfg,
                                           const IndicatorConfig& icfg,
                                           const std::string& model_label = "Custom-ANN");

// Minimum series length run_custom_ann accepts for these configs.
std::size_t custom_ann_min_length(const AnnPairConfig& cfg, const IndicatorConfig& icfg);

}  // namespace fxbench
