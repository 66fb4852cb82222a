#include "fxbench/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fxbench/errors.hpp"

namespace fxbench {

const std::vector<ModelSpec>& lstm_model_table() {
  static const std::vector<ModelSpec> table = {
      {"sLSTM-1-1", 100, "1x1", 1, false, false},
      {"sLSTM-15-1", 100, "1x1", 15, false, false},
      {"sLSTM-15-1,15", 100, "1x15,1x1", 1, false, false},
      {"biLSTM-1-1", 100, "1x1", 1, true, false},
      {"biLSTM-15-1", 100, "1x1", 15, true, false},
      {"biLSTM-15-1,15", 100, "1x15,1x1", 15, true, false},
      {"convLSTM-1-1", 60, "1x1", 1, false, true},
      {"convLSTM-1-1,15", 64, "1x1", 15, false, true},
  };
  return table;
}

const ModelSpec& find_model_spec(const std::string& name) {
  for (const ModelSpec& spec : lstm_model_table())
    if (spec.name == name) return spec;
  std::string msg = "unknown model '" + name + "'; valid models:";
  for (const ModelSpec& spec : lstm_model_table()) msg += " " + spec.name;
  throw UsageError(msg);
}

LstmState LstmState::zero(int units) {
  return {Eigen::VectorXd::Zero(units), Eigen::VectorXd::Zero(units)};
}

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (batch < 1) throw UsageError("batch must be >= 1");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must be in [0, 1)");
  if (!(grad_clip > 0.0)) throw UsageError("grad_clip must be > 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw UsageError("train_fraction must be in (0, 1)");
}

namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) { return 1.0 / (1.0 + (-z).exp()); }

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
}

void fill_uniform(Eigen::VectorXd& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

// One direction's pass over a feature sequence, everything cached for BPTT.
// Entry k holds the step that consumed feature row (reversed ? T-1-k : k).
struct DirCache {
  std::vector<Eigen::VectorXd> xs, hs, cs;
  std::vector<Eigen::ArrayXd> ig, fg, gg, og, tc;
  int steps() const { return static_cast<int>(xs.size()); }
};

void run_direction(const LstmWeights& w, const Eigen::MatrixXd& feats, bool reversed,
                   DirCache& cache) {
  const int T = static_cast<int>(feats.rows());
  const int U = w.units();
  cache = DirCache{};
  cache.xs.reserve(T);
  cache.hs.reserve(T);
  cache.cs.reserve(T);
  cache.ig.reserve(T);
  cache.fg.reserve(T);
  cache.gg.reserve(T);
  cache.og.reserve(T);
  cache.tc.reserve(T);

  Eigen::VectorXd h = Eigen::VectorXd::Zero(U);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(U);
  for (int k = 0; k < T; ++k) {
    const int row = reversed ? T - 1 - k : k;
    Eigen::VectorXd x = feats.row(row).transpose();
    const Eigen::VectorXd z = w.wx * x + w.wh * h + w.b;
    Eigen::ArrayXd i = sigmoid(z.segment(0, U).array());
    Eigen::ArrayXd f = sigmoid(z.segment(U, U).array());
    Eigen::ArrayXd g = z.segment(2 * U, U).array().tanh();
    Eigen::ArrayXd o = sigmoid(z.segment(3 * U, U).array());
    Eigen::ArrayXd cn = f * c.array() + i * g;
    Eigen::ArrayXd tcn = cn.tanh();
    c = cn.matrix();
    h = (o * tcn).matrix();
    cache.xs.push_back(std::move(x));
    cache.ig.push_back(std::move(i));
    cache.fg.push_back(std::move(f));
    cache.gg.push_back(std::move(g));
    cache.og.push_back(std::move(o));
    cache.tc.push_back(std::move(tcn));
    cache.cs.push_back(c);
    cache.hs.push_back(h);
  }
}

// BPTT for one direction; dh_last is the loss gradient w.r.t. the final
// hidden state. Feature gradients (for the conv front-end) land in dfeats.
void backward_direction(const LstmWeights& w, const DirCache& d, bool reversed,
                        const Eigen::VectorXd& dh_last, LstmWeights& gw,
                        Eigen::MatrixXd* dfeats) {
  const int T = d.steps();
  const int U = w.units();
  Eigen::VectorXd dh = dh_last;
  Eigen::ArrayXd dc = Eigen::ArrayXd::Zero(U);
  for (int k = T - 1; k >= 0; --k) {
    const Eigen::ArrayXd& i = d.ig[k];
    const Eigen::ArrayXd& f = d.fg[k];
    const Eigen::ArrayXd& g = d.gg[k];
    const Eigen::ArrayXd& o = d.og[k];
    const Eigen::ArrayXd& tc = d.tc[k];
    const Eigen::ArrayXd c_prev =
        k > 0 ? d.cs[k - 1].array() : Eigen::ArrayXd::Zero(U).eval();
    const Eigen::VectorXd h_prev = k > 0 ? d.hs[k - 1] : Eigen::VectorXd::Zero(U);

    const Eigen::ArrayXd dha = dh.array();
    const Eigen::ArrayXd dout = dha * tc;
    dc += dha * o * (1.0 - tc.square());
    const Eigen::ArrayXd di = dc * g;
    const Eigen::ArrayXd dg = dc * i;
    const Eigen::ArrayXd df = dc * c_prev;
    const Eigen::ArrayXd dc_prev = dc * f;

    Eigen::VectorXd dz(4 * U);
    dz.segment(0, U) = (di * i * (1.0 - i)).matrix();
    dz.segment(U, U) = (df * f * (1.0 - f)).matrix();
    dz.segment(2 * U, U) = (dg * (1.0 - g.square())).matrix();
    dz.segment(3 * U, U) = (dout * o * (1.0 - o)).matrix();

    gw.wx.noalias() += dz * d.xs[k].transpose();
    gw.wh.noalias() += dz * h_prev.transpose();
    gw.b += dz;
    if (dfeats) {
      const int row = reversed ? T - 1 - k : k;
      dfeats->row(row) += (w.wx.transpose() * dz).transpose();
    }
    dh = w.wh.transpose() * dz;
    dc = dc_prev;
  }
}

constexpr int kConvChannels = 4;
constexpr int kConvKernel = 3;

void conv_forward(const Eigen::MatrixXd& conv_w, const Eigen::VectorXd& conv_b,
                  const Eigen::MatrixXd& seq, Eigen::MatrixXd& pre,
                  Eigen::MatrixXd& feats) {
  const int T = static_cast<int>(seq.rows());
  pre.resize(T, kConvChannels);
  feats.resize(T, kConvChannels);
  for (int t = 0; t < T; ++t)
    for (int oc = 0; oc < kConvChannels; ++oc) {
      double acc = conv_b(oc);
      for (int k = 0; k < kConvKernel; ++k) {
        const int src = t + k - 1;  // same-length zero padding
        if (src >= 0 && src < T) acc += conv_w(oc, k) * seq(src, 0);
      }
      pre(t, oc) = acc;
      feats(t, oc) = acc > 0.0 ? acc : 0.0;
    }
}

void conv_backward(const Eigen::MatrixXd& seq, const Eigen::MatrixXd& pre,
                   const Eigen::MatrixXd& dfeats, Eigen::MatrixXd& g_w,
                   Eigen::VectorXd& g_b) {
  const int T = static_cast<int>(seq.rows());
  for (int t = 0; t < T; ++t)
    for (int oc = 0; oc < kConvChannels; ++oc) {
      if (!(pre(t, oc) > 0.0)) continue;  // ReLU gate
      const double dz = dfeats(t, oc);
      g_b(oc) += dz;
      for (int k = 0; k < kConvKernel; ++k) {
        const int src = t + k - 1;
        if (src >= 0 && src < T) g_w(oc, k) += dz * seq(src, 0);
      }
    }
}

struct FullCache {
  Eigen::MatrixXd feats, conv_pre;
  DirCache f, b;
  Eigen::VectorXd head_in;
  Eigen::VectorXd z1, a1;
  double y = 0.0;
};

double model_forward(const LstmModel& m, const Eigen::MatrixXd& seq, FullCache& cache) {
  if (seq.cols() != 1 || seq.rows() < 1)
    throw ModelError("input sequence must be a (T x 1) matrix with T >= 1");

  const Eigen::MatrixXd* feats = &seq;
  if (m.spec.convolutional) {
    conv_forward(m.conv_w, m.conv_b, seq, cache.conv_pre, cache.feats);
    feats = &cache.feats;
  }
  run_direction(m.fwd, *feats, false, cache.f);
  const int U = m.fwd.units();
  if (m.spec.bidirectional) {
    run_direction(m.bwd, *feats, true, cache.b);
    cache.head_in.resize(2 * U);
    cache.head_in << cache.f.hs.back(), cache.b.hs.back();
  } else {
    cache.head_in = cache.f.hs.back();
  }
  if (m.spec.has_hidden_dense()) {
    cache.z1 = m.d1_w * cache.head_in + m.d1_b;
    cache.a1 = cache.z1.cwiseMax(0.0);
    cache.y = (m.d2_w * cache.a1 + m.d2_b)(0);
  } else {
    cache.y = (m.d1_w * cache.head_in + m.d1_b)(0);
  }
  return cache.y;
}

}  // namespace

std::pair<Eigen::VectorXd, LstmState> lstm_cell_forward(const Eigen::VectorXd& x,
                                                        const LstmState& state,
                                                        const LstmWeights& w) {
  const int U = w.units();
  if (x.size() != w.in_dim() || state.hidden.size() != U || state.cell.size() != U ||
      w.wx.rows() != 4 * U || w.b.size() != 4 * U)
    throw ModelError("lstm_cell_forward dimension mismatch");
  const Eigen::VectorXd z = w.wx * x + w.wh * state.hidden + w.b;
  const Eigen::ArrayXd i = sigmoid(z.segment(0, U).array());
  const Eigen::ArrayXd f = sigmoid(z.segment(U, U).array());
  const Eigen::ArrayXd g = z.segment(2 * U, U).array().tanh();
  const Eigen::ArrayXd o = sigmoid(z.segment(3 * U, U).array());
  LstmState next;
  next.cell = (f * state.cell.array() + i * g).matrix();
  next.hidden = (o * next.cell.array().tanh()).matrix();
  return {next.hidden, next};
}

LstmModel LstmModel::assemble(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.lstm_units < 1) throw ModelError("lstm_units must be >= 1");
  if (spec.lookback < 1) throw ModelError("lookback must be >= 1");
  if (spec.dense_layout != "1x1" && spec.dense_layout != "1x15,1x1")
    throw ModelError("dense_layout must be '1x1' or '1x15,1x1'");

  LstmModel m;
  m.spec = spec;
  Rng rng(seed);
  const int U = spec.lstm_units;
  const int in_dim = spec.convolutional ? kConvChannels : 1;

  if (spec.convolutional) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(kConvKernel));
    m.conv_w.resize(kConvChannels, kConvKernel);
    m.conv_b.resize(kConvChannels);
    fill_uniform(m.conv_w, bound, rng);
    fill_uniform(m.conv_b, bound, rng);
  }

  auto init_lstm = [&](LstmWeights& w) {
    w.wx.resize(4 * U, in_dim);
    w.wh.resize(4 * U, U);
    w.b.resize(4 * U);
    fill_uniform(w.wx, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
    const double rbound = 1.0 / std::sqrt(static_cast<double>(U));
    fill_uniform(w.wh, rbound, rng);
    fill_uniform(w.b, rbound, rng);
  };
  init_lstm(m.fwd);
  if (spec.bidirectional) init_lstm(m.bwd);

  const int head_in = spec.bidirectional ? 2 * U : U;
  const double hbound = 1.0 / std::sqrt(static_cast<double>(head_in));
  if (spec.has_hidden_dense()) {
    m.d1_w.resize(15, head_in);
    m.d1_b.resize(15);
    fill_uniform(m.d1_w, hbound, rng);
    fill_uniform(m.d1_b, hbound, rng);
    m.d2_w.resize(1, 15);
    m.d2_b.resize(1);
    const double bound2 = 1.0 / std::sqrt(15.0);
    fill_uniform(m.d2_w, bound2, rng);
    fill_uniform(m.d2_b, bound2, rng);
  } else {
    m.d1_w.resize(1, head_in);
    m.d1_b.resize(1);
    fill_uniform(m.d1_w, hbound, rng);
    fill_uniform(m.d1_b, hbound, rng);
  }
  return m;
}

LstmModel build_model(const ModelSpec& spec, std::uint64_t seed) {
  const ModelSpec& row = find_model_spec(spec.name);
  if (spec.lstm_units != row.lstm_units || spec.dense_layout != row.dense_layout ||
      spec.lookback != row.lookback || spec.bidirectional != row.bidirectional ||
      spec.convolutional != row.convolutional)
    throw UsageError("model spec fields do not match the benchmark row for '" +
                     spec.name + "'");
  return LstmModel::assemble(row, seed);
}

double LstmModel::forward(const Eigen::MatrixXd& seq) const {
  FullCache cache;
  return model_forward(*this, seq, cache);
}

Eigen::MatrixXd LstmModel::bidirectional_concat(const Eigen::MatrixXd& seq) const {
  if (!spec.bidirectional) throw ModelError("model is not bidirectional");
  if (seq.cols() != 1 || seq.rows() < 1)
    throw ModelError("input sequence must be a (T x 1) matrix with T >= 1");
  const Eigen::MatrixXd* feats = &seq;
  Eigen::MatrixXd conv_pre, conv_feats;
  if (spec.convolutional) {
    conv_forward(conv_w, conv_b, seq, conv_pre, conv_feats);
    feats = &conv_feats;
  }
  DirCache f, b;
  run_direction(fwd, *feats, false, f);
  run_direction(bwd, *feats, true, b);
  const int T = static_cast<int>(seq.rows());
  const int U = fwd.units();
  Eigen::MatrixXd out(T, 2 * U);
  for (int t = 0; t < T; ++t) {
    out.row(t).head(U) = f.hs[t].transpose();
    // backward step T-1-t consumed row t, so that state aligns here
    out.row(t).tail(U) = b.hs[T - 1 - t].transpose();
  }
  return out;
}

ModelGradients ModelGradients::zeros_like(const LstmModel& m) {
  ModelGradients g;
  g.conv_w = Eigen::MatrixXd::Zero(m.conv_w.rows(), m.conv_w.cols());
  g.conv_b = Eigen::VectorXd::Zero(m.conv_b.size());
  auto zero_lstm = [](const LstmWeights& w) {
    LstmWeights z;
    z.wx = Eigen::MatrixXd::Zero(w.wx.rows(), w.wx.cols());
    z.wh = Eigen::MatrixXd::Zero(w.wh.rows(), w.wh.cols());
    z.b = Eigen::VectorXd::Zero(w.b.size());
    return z;
  };
  g.fwd = zero_lstm(m.fwd);
  g.bwd = zero_lstm(m.bwd);
  g.d1_w = Eigen::MatrixXd::Zero(m.d1_w.rows(), m.d1_w.cols());
  g.d1_b = Eigen::VectorXd::Zero(m.d1_b.size());
  g.d2_w = Eigen::MatrixXd::Zero(m.d2_w.rows(), m.d2_w.cols());
  g.d2_b = Eigen::VectorXd::Zero(m.d2_b.size());
  return g;
}

void ModelGradients::scale(double s) {
  conv_w *= s;
  conv_b *= s;
  fwd.wx *= s;
  fwd.wh *= s;
  fwd.b *= s;
  bwd.wx *= s;
  bwd.wh *= s;
  bwd.b *= s;
  d1_w *= s;
  d1_b *= s;
  d2_w *= s;
  d2_b *= s;
}

double ModelGradients::global_norm() const {
  double sq = conv_w.squaredNorm() + conv_b.squaredNorm() + fwd.wx.squaredNorm() +
              fwd.wh.squaredNorm() + fwd.b.squaredNorm() + bwd.wx.squaredNorm() +
              bwd.wh.squaredNorm() + bwd.b.squaredNorm() + d1_w.squaredNorm() +
              d1_b.squaredNorm() + d2_w.squaredNorm() + d2_b.squaredNorm();
  return std::sqrt(sq);
}

double forward_backward(const LstmModel& m, const Eigen::MatrixXd& seq, double target,
                        ModelGradients& g) {
  FullCache cache;
  const double y = model_forward(m, seq, cache);
  const double err = y - target;
  const double dy = 2.0 * err;

  Eigen::VectorXd dhead;
  if (m.spec.has_hidden_dense()) {
    g.d2_w.row(0) += dy * cache.a1.transpose();
    g.d2_b(0) += dy;
    Eigen::VectorXd dz1 = dy * m.d2_w.row(0).transpose();
    for (Eigen::Index i = 0; i < dz1.size(); ++i)
      if (!(cache.z1(i) > 0.0)) dz1(i) = 0.0;  // ReLU gate
    g.d1_w.noalias() += dz1 * cache.head_in.transpose();
    g.d1_b += dz1;
    dhead = m.d1_w.transpose() * dz1;
  } else {
    g.d1_w.row(0) += dy * cache.head_in.transpose();
    g.d1_b(0) += dy;
    dhead = dy * m.d1_w.row(0).transpose();
  }

  const int U = m.fwd.units();
  Eigen::MatrixXd dfeats;
  Eigen::MatrixXd* dfeats_ptr = nullptr;
  if (m.spec.convolutional) {
    dfeats = Eigen::MatrixXd::Zero(seq.rows(), kConvChannels);
    dfeats_ptr = &dfeats;
  }
  if (m.spec.bidirectional) {
    backward_direction(m.fwd, cache.f, false, dhead.head(U), g.fwd, dfeats_ptr);
    backward_direction(m.bwd, cache.b, true, dhead.tail(U), g.bwd, dfeats_ptr);
  } else {
    backward_direction(m.fwd, cache.f, false, dhead, g.fwd, dfeats_ptr);
  }
  if (m.spec.convolutional)
    conv_backward(seq, cache.conv_pre, dfeats, g.conv_w, g.conv_b);
  return err * err;
}

namespace {

void push_all(std::vector<double*>& out, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
}

void push_all(std::vector<double*>& out, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v.data() + i);
}

}  // namespace

std::vector<double*> parameter_pointers(LstmModel& m) {
  std::vector<double*> out;
  push_all(out, m.conv_w);
  push_all(out, m.conv_b);
  push_all(out, m.fwd.wx);
  push_all(out, m.fwd.wh);
  push_all(out, m.fwd.b);
  push_all(out, m.bwd.wx);
  push_all(out, m.bwd.wh);
  push_all(out, m.bwd.b);
  push_all(out, m.d1_w);
  push_all(out, m.d1_b);
  push_all(out, m.d2_w);
  push_all(out, m.d2_b);
  return out;
}

std::vector<double*> gradient_pointers(ModelGradients& g) {
  std::vector<double*> out;
  push_all(out, g.conv_w);
  push_all(out, g.conv_b);
  push_all(out, g.fwd.wx);
  push_all(out, g.fwd.wh);
  push_all(out, g.fwd.b);
  push_all(out, g.bwd.wx);
  push_all(out, g.bwd.wh);
  push_all(out, g.bwd.b);
  push_all(out, g.d1_w);
  push_all(out, g.d1_b);
  push_all(out, g.d2_w);
  push_all(out, g.d2_b);
  return out;
}

namespace {

// One-step changes in pips: c[i] = (mid[i] - mid[i-1]) / pip, c[0] unused.
std::vector<double> change_series(const PriceSeries& series, double pip = 1e-4) {
  std::vector<double> c(series.size(), 0.0);
  for (std::size_t i = 1; i < series.size(); ++i)
    c[i] = (series.mids[i] - series.mids[i - 1]) / pip;
  return c;
}

}  // namespace

TrainingReport train(LstmModel& model, const PriceSeries& series, const TrainConfig& tcfg) {
  tcfg.validate();
  const std::size_t n = series.size();
  const int lb = model.spec.lookback;
  const std::size_t split_tick =
      static_cast<std::size_t>(static_cast<double>(n) * tcfg.train_fraction);

  // Window ends at tick i (changes c[i-lb+1 .. i]), target c[i+1]; both the
  // window and the target must fall inside the leading split.
  std::vector<std::size_t> ends;
  for (std::size_t i = static_cast<std::size_t>(lb); i + 1 < split_tick; ++i)
    ends.push_back(i);
  if (ends.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "series '%s' too short to train %s: leading split has %zu ticks, "
                  "need more than lookback+1 = %d",
                  series.label.c_str(), model.spec.name.c_str(), split_tick, lb + 1);
    throw DataError(buf);
  }

  const std::vector<double> c = change_series(series);
  Rng rng(tcfg.seed);
  ModelGradients grads = ModelGradients::zeros_like(model);
  ModelGradients velocity = ModelGradients::zeros_like(model);
  std::vector<double*> params = parameter_pointers(model);
  std::vector<double*> gptr = gradient_pointers(grads);
  std::vector<double*> vptr = gradient_pointers(velocity);

  TrainingReport report;
  report.split_tick = split_tick;
  report.train_samples = ends.size();

  Eigen::MatrixXd seq(lb, 1);
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    // Fisher-Yates with our own generator keeps the order identical across
    // standard libraries.
    for (std::size_t j = ends.size(); j-- > 1;)
      std::swap(ends[j], ends[rng.index(j + 1)]);

    double epoch_sq = 0.0;
    for (std::size_t start = 0; start < ends.size(); start += static_cast<std::size_t>(tcfg.batch)) {
      const std::size_t stop = std::min(ends.size(), start + static_cast<std::size_t>(tcfg.batch));
      for (double* p : gptr) *p = 0.0;
      for (std::size_t s = start; s < stop; ++s) {
        const std::size_t i = ends[s];
        for (int k = 0; k < lb; ++k)
          seq(k, 0) = c[i - static_cast<std::size_t>(lb) + 1 + static_cast<std::size_t>(k)];
        epoch_sq += forward_backward(model, seq, c[i + 1], grads);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      grads.scale(inv);
      const double norm = grads.global_norm();
      if (!std::isfinite(norm) || !std::isfinite(epoch_sq)) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "training diverged: %s, epoch %d, batch at sample %zu",
                      model.spec.name.c_str(), epoch + 1, start);
        throw ModelError(buf);
      }
      if (norm > tcfg.grad_clip) grads.scale(tcfg.grad_clip / norm);
      for (std::size_t p = 0; p < params.size(); ++p) {
        *vptr[p] = tcfg.momentum * *vptr[p] + *gptr[p];
        *params[p] -= tcfg.learning_rate * *vptr[p];
      }
    }
    report.epoch_loss.push_back(epoch_sq / static_cast<double>(ends.size()));
  }
  model.trained = true;
  return report;
}

std::vector<ForecastSignal> predict_signals(const LstmModel& model,
                                            const PriceSeries& series,
                                            const SignalGenConfig& cfg,
                                            std::size_t split_tick,
                                            const std::string& model_label) {
  if (!model.trained) throw ModelError("predict_signals on an untrained model");
  if (!(cfg.emission_threshold >= 0.0)) throw UsageError("emission_threshold must be >= 0");
  if (cfg.volatility_window < 1) throw UsageError("volatility_window must be >= 1");

  const std::size_t n = series.size();
  const int lb = model.spec.lookback;
  const std::size_t start = std::max(split_tick, static_cast<std::size_t>(lb));
  if (start >= n)
    throw ModelError("evaluation span of '" + series.label +
                     "' is shorter than the model lookback");

  const std::vector<double> c = change_series(series);
  const std::size_t w = static_cast<std::size_t>(cfg.volatility_window);
  EmissionPolicy emission(cfg.emission_threshold);
  std::vector<ForecastSignal> signals;
  Eigen::MatrixXd seq(lb, 1);

  double abs_sum = 0.0;
  std::size_t abs_count = 0;
  for (std::size_t i = 1; i < n; ++i) {
    abs_sum += std::abs(c[i]);
    ++abs_count;
    if (abs_count > w) {
      abs_sum -= std::abs(c[i - w]);
      --abs_count;
    }
    if (i < start) continue;

    for (int k = 0; k < lb; ++k)
      seq(k, 0) = c[i - static_cast<std::size_t>(lb) + 1 + static_cast<std::size_t>(k)];
    const double yhat = model.forward(seq);
    const double scale = abs_sum / static_cast<double>(abs_count);
    const double intensity =
        scale > 0.0 ? std::clamp(3.0 * yhat / scale, -3.0, 3.0) : 0.0;
    std::optional<ForecastSignal> sig =
        emission.step(i, series.timestamps_ms[i], intensity, model_label);
    if (sig) signals.push_back(*sig);
  }
  return signals;
}

LstmRunResult run_lstm_pipeline(const PriceSeries& series, const ModelSpec& spec,
                                const TrainConfig& tcfg, const SignalGenConfig& sgcfg,
                                std::uint64_t seed, const std::string& model_label) {
  LstmModel model = build_model(spec, seed);
  TrainConfig cfg = tcfg;
  cfg.seed = seed;
  LstmRunResult result;
  result.report = train(model, series, cfg);
  result.signals = predict_signals(model, series, sgcfg, result.report.split_tick,
                                   model_label.empty() ? spec.name : model_label);
  return result;
}

namespace {

constexpr const char* kCheckpointMagic = "fxbench-lstm-checkpoint v1";

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd* mat = nullptr;
  Eigen::VectorXd* vec = nullptr;
};

std::vector<NamedTensor> named_tensors(LstmModel& m) {
  std::vector<NamedTensor> out;
  auto add_mat = [&](const char* name, Eigen::MatrixXd& t) {
    if (t.size() > 0) out.push_back({name, &t, nullptr});
  };
  auto add_vec = [&](const char* name, Eigen::VectorXd& t) {
    if (t.size() > 0) out.push_back({name, nullptr, &t});
  };
  add_mat("conv_w", m.conv_w);
  add_vec("conv_b", m.conv_b);
  add_mat("fwd_wx", m.fwd.wx);
  add_mat("fwd_wh", m.fwd.wh);
  add_vec("fwd_b", m.fwd.b);
  add_mat("bwd_wx", m.bwd.wx);
  add_mat("bwd_wh", m.bwd.wh);
  add_vec("bwd_b", m.bwd.b);
  add_mat("d1_w", m.d1_w);
  add_vec("d1_b", m.d1_b);
  add_mat("d2_w", m.d2_w);
  add_vec("d2_b", m.d2_b);
  return out;
}

void write_value(std::ostream& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  out << buf;
}

double read_value(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw ModelError("checkpoint truncated while reading values");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ModelError("checkpoint holds a malformed value: " + tok);
  return v;
}

std::string expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw ModelError("checkpoint truncated before '" + key + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind(key + " ", 0) != 0)
    throw ModelError("checkpoint expected '" + key + " ...', got: " + line);
  return line.substr(key.size() + 1);
}

}  // namespace

void save_checkpoint(const LstmModel& model, std::ostream& out) {
  out << kCheckpointMagic << "\n";
  out << "name " << model.spec.name << "\n";
  out << "units " << model.spec.lstm_units << "\n";
  out << "dense " << model.spec.dense_layout << "\n";
  out << "lookback " << model.spec.lookback << "\n";
  out << "bidirectional " << (model.spec.bidirectional ? 1 : 0) << "\n";
  out << "convolutional " << (model.spec.convolutional ? 1 : 0) << "\n";
  out << "trained " << (model.trained ? 1 : 0) << "\n";
  for (const NamedTensor& t : named_tensors(const_cast<LstmModel&>(model))) {
    if (t.mat) {
      out << "tensor " << t.name << " " << t.mat->rows() << " " << t.mat->cols() << "\n";
      for (Eigen::Index r = 0; r < t.mat->rows(); ++r) {
        for (Eigen::Index c = 0; c < t.mat->cols(); ++c) {
          if (c) out << " ";
          write_value(out, (*t.mat)(r, c));
        }
        out << "\n";
      }
    } else {
      out << "tensor " << t.name << " " << t.vec->size() << " 1\n";
      for (Eigen::Index r = 0; r < t.vec->size(); ++r) {
        if (r) out << " ";
        write_value(out, (*t.vec)(r));
      }
      out << "\n";
    }
  }
  out << "end\n";
  if (!out) throw ModelError("checkpoint write failed");
}

LstmModel load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ModelError("empty checkpoint");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCheckpointMagic)
    throw ModelError("unsupported checkpoint header: " + line);

  ModelSpec spec;
  spec.name = expect_line(in, "name");
  spec.lstm_units = std::stoi(expect_line(in, "units"));
  spec.dense_layout = expect_line(in, "dense");
  spec.lookback = std::stoi(expect_line(in, "lookback"));
  spec.bidirectional = expect_line(in, "bidirectional") == "1";
  spec.convolutional = expect_line(in, "convolutional") == "1";
  const bool trained = expect_line(in, "trained") == "1";

  LstmModel model = LstmModel::assemble(spec, 0);
  model.trained = trained;
  std::vector<NamedTensor> tensors = named_tensors(model);
  std::vector<bool> seen(tensors.size(), false);

  std::string word;
  while (in >> word) {
    if (word == "end") break;
    if (word != "tensor") throw ModelError("checkpoint expected 'tensor', got: " + word);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw ModelError("checkpoint tensor header truncated");
    bool matched = false;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      if (tensors[t].name != name) continue;
      matched = true;
      if (seen[t]) throw ModelError("checkpoint repeats tensor " + name);
      seen[t] = true;
      if (tensors[t].mat) {
        if (tensors[t].mat->rows() != rows || tensors[t].mat->cols() != cols)
          throw ModelError("checkpoint tensor " + name + " has the wrong shape");
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) (*tensors[t].mat)(r, c) = read_value(in);
      } else {
        if (tensors[t].vec->size() != rows || cols != 1)
          throw ModelError("checkpoint tensor " + name + " has the wrong shape");
        for (Eigen::Index r = 0; r < rows; ++r) (*tensors[t].vec)(r) = read_value(in);
      }
      break;
    }
    if (!matched) throw ModelError("checkpoint holds unknown tensor " + name);
  }
  if (word != "end") throw ModelError("checkpoint missing end marker");
  for (std::size_t t = 0; t < tensors.size(); ++t)
    if (!seen[t]) throw ModelError("checkpoint missing tensor " + tensors[t].name);
  return model;
}

void save_checkpoint_file(const LstmModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot open checkpoint for writing: " + path);
  save_checkpoint(model, out);
}

LstmModel load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace fxbench
