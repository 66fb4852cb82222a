#include "fxbench/paired_ann.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fxbench/errors.hpp"

namespace fxbench {

void AnnPairConfig::validate() const {
  if (pair_count < 1) throw UsageError("pair_count must be >= 1");
  if (hidden_layout.empty()) throw UsageError("hidden_layout must not be empty");
  for (int w : hidden_layout)
    if (w < 1) throw UsageError("hidden layer widths must be >= 1");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (train_window < 1) throw UsageError("train_window must be >= 1");
  if (transfer_every < 1) throw UsageError("transfer_every must be >= 1");
  if (!(emission_threshold >= 0.0)) throw UsageError("emission_threshold must be >= 0");
  if (target_horizon < 1) throw UsageError("target_horizon must be >= 1");
  if (!(target_clamp_pips > 0.0)) throw UsageError("target_clamp_pips must be > 0");
  if (!(pip > 0.0)) throw UsageError("pip must be > 0");
}

TanhMlp TanhMlp::init(int input_width, const std::vector<int>& hidden, Rng& rng) {
  if (input_width < 1) throw ModelError("network input width must be >= 1");
  std::vector<int> widths;
  widths.push_back(input_width);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);

  TanhMlp net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    Eigen::VectorXd b(out);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
    for (int r = 0; r < out; ++r) b(r) = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

double TanhMlp::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < weights.size(); ++l)
    a = ((weights[l] * a + biases[l]).array().tanh()).matrix();
  return a(0);
}

MlpGradients MlpGradients::zeros_like(const TanhMlp& net) {
  MlpGradients g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

namespace {

// Gathers the pair's slice out of a full normalized vector.
Eigen::VectorXd slice_input(const AnnPair& pair, const std::vector<double>& full) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(pair.input_slice.size()));
  for (std::size_t i = 0; i < pair.input_slice.size(); ++i) {
    const int idx = pair.input_slice[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= full.size())
      throw ModelError("indicator vector too short for network input slice");
    const double v = full[static_cast<std::size_t>(idx)];
    if (!std::isfinite(v)) throw ModelError("non-finite value in network input");
    x(static_cast<Eigen::Index>(i)) = v;
  }
  return x;
}

// Forward pass keeping post-tanh activations per layer (a[0] is the input).
double forward_cached(const TanhMlp& net, const Eigen::VectorXd& x,
                      std::vector<Eigen::VectorXd>& acts) {
  acts.assign(1, x);
  for (std::size_t l = 0; l < net.weights.size(); ++l)
    acts.push_back(((net.weights[l] * acts.back() + net.biases[l]).array().tanh()).matrix());
  return acts.back()(0);
}

double mse_over(const TanhMlp& net, const std::vector<Eigen::VectorXd>& xs,
                const std::vector<double>& ts) {
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double err = net.forward(xs[i]) - ts[i];
    sum += err * err;
  }
  return sum / static_cast<double>(xs.size());
}

}  // namespace

double accumulate_mlp_gradients(const TanhMlp& net, const Eigen::VectorXd& x,
                                double target, double scale, MlpGradients& grads) {
  std::vector<Eigen::VectorXd> acts;
  const double y = forward_cached(net, x, acts);
  const double err = y - target;

  // d(err^2)/dy, then back through each tanh layer.
  Eigen::VectorXd delta(1);
  delta(0) = 2.0 * err * scale;
  for (std::size_t l = net.weights.size(); l-- > 0;) {
    const Eigen::VectorXd& a_out = acts[l + 1];
    const Eigen::VectorXd dz =
        (delta.array() * (1.0 - a_out.array().square())).matrix();
    grads.weights[l].noalias() += dz * acts[l].transpose();
    grads.biases[l] += dz;
    if (l > 0) delta = net.weights[l].transpose() * dz;
  }
  return err * err;
}

std::vector<AnnPair> init_pairs(const AnnPairConfig& cfg, const IndicatorConfig& icfg) {
  cfg.validate();
  icfg.validate();

  const int n_ma = static_cast<int>(icfg.ma_windows.size());
  // Families of adjacent components in the normalized vector:
  // the MA block, RSI, CCI, Williams %R, and the oscillator pair.
  std::vector<std::vector<int>> families;
  std::vector<int> ma_block(static_cast<std::size_t>(n_ma));
  for (int i = 0; i < n_ma; ++i) ma_block[static_cast<std::size_t>(i)] = i;
  families.push_back(ma_block);
  families.push_back({n_ma});
  families.push_back({n_ma + 1});
  families.push_back({n_ma + 2});
  families.push_back({n_ma + 3, n_ma + 4});

  const int n_fam = static_cast<int>(families.size());
  std::vector<std::vector<int>> slices(static_cast<std::size_t>(cfg.pair_count));
  if (cfg.pair_count <= n_fam) {
    for (int f = 0; f < n_fam; ++f) {
      auto& dst = slices[static_cast<std::size_t>(f % cfg.pair_count)];
      dst.insert(dst.end(), families[static_cast<std::size_t>(f)].begin(),
                 families[static_cast<std::size_t>(f)].end());
    }
  } else {
    for (int p = 0; p < cfg.pair_count; ++p)
      slices[static_cast<std::size_t>(p)] = families[static_cast<std::size_t>(p % n_fam)];
  }

  Rng rng(cfg.seed);
  std::vector<AnnPair> pairs;
  pairs.reserve(static_cast<std::size_t>(cfg.pair_count));
  for (int p = 0; p < cfg.pair_count; ++p) {
    AnnPair pair;
    pair.input_slice = slices[static_cast<std::size_t>(p)];
    pair.trainer = TanhMlp::init(static_cast<int>(pair.input_slice.size()),
                                 cfg.hidden_layout, rng);
    pair.predictor = pair.trainer;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

double window_loss(const AnnPair& pair, const std::vector<TrainSample>& history) {
  if (history.empty()) throw ModelError("loss over empty history");
  double sum = 0.0;
  for (const TrainSample& s : history) {
    const double err = pair.trainer.forward(slice_input(pair, s.input)) - s.target;
    sum += err * err;
  }
  return sum / static_cast<double>(history.size());
}

double train_step(AnnPair& pair, const std::vector<TrainSample>& history,
                  double learning_rate) {
  if (history.empty()) throw ModelError("train_step on empty history");
  if (!(learning_rate > 0.0)) throw ModelError("learning rate must be > 0");

  const std::size_t n = history.size();
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ts;
  xs.reserve(n);
  ts.reserve(n);
  for (const TrainSample& s : history) {
    if (!std::isfinite(s.target)) throw ModelError("non-finite training target");
    xs.push_back(slice_input(pair, s.input));
    ts.push_back(s.target);
  }

  MlpGradients grads = MlpGradients::zeros_like(pair.trainer);
  const double scale = 1.0 / static_cast<double>(n);
  double loss_before = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    loss_before += scale * accumulate_mlp_gradients(pair.trainer, xs[i], ts[i], scale, grads);

  // Halve the step until the full-batch update stops hurting; give up after
  // 30 halvings and keep the current weights.
  double step = learning_rate;
  for (int attempt = 0; attempt < 30; ++attempt) {
    TanhMlp candidate = pair.trainer;
    for (std::size_t l = 0; l < candidate.weights.size(); ++l) {
      candidate.weights[l] -= step * grads.weights[l];
      candidate.biases[l] -= step * grads.biases[l];
    }
    const double loss_after = mse_over(candidate, xs, ts);
    if (loss_after <= loss_before) {
      pair.trainer = std::move(candidate);
      return loss_after;
    }
    step *= 0.5;
  }
  return loss_before;
}

void transfer_weights(AnnPair& pair) { pair.predictor = pair.trainer; }

double predict(const AnnPair& pair, const std::vector<double>& normalized) {
  return pair.predictor.forward(slice_input(pair, normalized));
}

double combine(const std::vector<double>& outputs) {
  if (outputs.empty()) throw ModelError("combine over empty network outputs");
  double sum = 0.0;
  for (double v : outputs) {
    if (!std::isfinite(v)) throw ModelError("non-finite network output");
    sum += v;
  }
  return 3.0 * sum / static_cast<double>(outputs.size());
}

std::size_t custom_ann_min_length(const AnnPairConfig& cfg, const IndicatorConfig& icfg) {
  return icfg.warmup() + static_cast<std::size_t>(cfg.train_window) + 1;
}

std::vector<ForecastSignal> run_custom_ann(const PriceSeries& series,
                                           const AnnPairConfig& cfg,
                                           const IndicatorConfig& icfg,
                                           const std::string& model_label) {
  cfg.validate();
  icfg.validate();
  const std::size_t min_len = custom_ann_min_length(cfg, icfg);
  if (series.size() < min_len) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "series '%s' has %zu ticks; need at least %zu (warm-up %d + window %d + 1)",
                  series.label.c_str(), series.size(), min_len, icfg.warmup(),
                  cfg.train_window);
    throw DataError(buf);
  }

  std::vector<AnnPair> pairs = init_pairs(cfg, icfg);
  IndicatorEngine engine(icfg);
  EmissionPolicy emission(cfg.emission_threshold);
  std::vector<ForecastSignal> signals;

  // Ring of the last target_horizon+1 normalized vectors so the sample
  // maturing at tick t (entered at t - target_horizon) is still at hand.
  const std::size_t horizon = static_cast<std::size_t>(cfg.target_horizon);
  const std::size_t ring_len = horizon + 1;
  std::vector<std::vector<double>> ring(ring_len);
  std::vector<std::size_t> ring_index(ring_len, static_cast<std::size_t>(-1));

  std::vector<double> outputs(static_cast<std::size_t>(pairs.size()));
  const double target_scale = cfg.target_clamp_pips * cfg.pip;

  for (std::size_t t = 0; t < series.size(); ++t) {
    const double mid = series.mids[t];
    std::optional<IndicatorVector> v = engine.push(mid);
    bool have_now = false;
    if (v) {
      std::vector<double> norm = normalize_indicator_vector(*v, mid, icfg);
      const std::size_t slot = t % ring_len;
      ring[slot] = std::move(norm);
      ring_index[slot] = t;
      have_now = true;
    }

    // Train on the newest matured sample: input from t - horizon, target
    // from the move realized between then and now.
    if (t >= horizon) {
      const std::size_t s = t - horizon;
      const std::size_t slot = s % ring_len;
      if (ring_index[slot] == s) {
        const double move = (series.mids[t] - series.mids[s]) / target_scale;
        TrainSample sample{ring[slot], std::clamp(move, -1.0, 1.0)};
        const std::vector<TrainSample> history{sample};
        for (AnnPair& pair : pairs) train_step(pair, history, cfg.learning_rate);
      }
    }

    if ((t + 1) % static_cast<std::size_t>(cfg.transfer_every) == 0)
      for (AnnPair& pair : pairs) transfer_weights(pair);

    if (have_now) {
      const std::size_t slot = t % ring_len;
      for (std::size_t p = 0; p < pairs.size(); ++p)
        outputs[p] = predict(pairs[p], ring[slot]);
      const double intensity = combine(outputs);
      std::optional<ForecastSignal> sig =
          emission.step(t, series.timestamps_ms[t], intensity, model_label);
      if (sig) signals.push_back(*sig);
    }
  }
  return signals;
}

}  // namespace fxbench
