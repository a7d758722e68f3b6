#include "secmeter/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace secmeter {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

struct DirectionCache {
  // per time step: gate activations, cell and hidden states (hidden x batch)
  std::vector<MatrixXd> i, f, o, g, c, h;
};

// Forward scan of one direction over the whole batch. xs[t] is a
// features x batch matrix in scan order (already reversed for the
// backward direction).
DirectionCache scan(const LstmCellParams& cell, const std::vector<MatrixXd>& xs) {
  const auto T = xs.size();
  const Eigen::Index hidden = cell.bi.size();
  const Eigen::Index batch = xs.empty() ? 0 : xs[0].cols();
  DirectionCache cc;
  cc.i.resize(T);
  cc.f.resize(T);
  cc.o.resize(T);
  cc.g.resize(T);
  cc.c.resize(T);
  cc.h.resize(T);
  MatrixXd h = MatrixXd::Zero(hidden, batch);
  MatrixXd c = MatrixXd::Zero(hidden, batch);
  for (std::size_t t = 0; t < T; ++t) {
    MatrixXd zi = (cell.Wi * xs[t] + cell.Ui * h).colwise() + cell.bi;
    MatrixXd zf = (cell.Wf * xs[t] + cell.Uf * h).colwise() + cell.bf;
    MatrixXd zo = (cell.Wo * xs[t] + cell.Uo * h).colwise() + cell.bo;
    MatrixXd zg = (cell.Wg * xs[t] + cell.Ug * h).colwise() + cell.bg;
    cc.i[t] = sigmoid(zi);
    cc.f[t] = sigmoid(zf);
    cc.o[t] = sigmoid(zo);
    cc.g[t] = zg.array().tanh().matrix();
    c = (cc.f[t].array() * c.array() + cc.i[t].array() * cc.g[t].array()).matrix();
    cc.c[t] = c;
    h = (cc.o[t].array() * c.array().tanh()).matrix();
    cc.h[t] = h;
  }
  return cc;
}

LstmCellParams zero_like(const LstmCellParams& p) {
  LstmCellParams z;
  z.Wi = MatrixXd::Zero(p.Wi.rows(), p.Wi.cols());
  z.Wf = MatrixXd::Zero(p.Wf.rows(), p.Wf.cols());
  z.Wo = MatrixXd::Zero(p.Wo.rows(), p.Wo.cols());
  z.Wg = MatrixXd::Zero(p.Wg.rows(), p.Wg.cols());
  z.Ui = MatrixXd::Zero(p.Ui.rows(), p.Ui.cols());
  z.Uf = MatrixXd::Zero(p.Uf.rows(), p.Uf.cols());
  z.Uo = MatrixXd::Zero(p.Uo.rows(), p.Uo.cols());
  z.Ug = MatrixXd::Zero(p.Ug.rows(), p.Ug.cols());
  z.bi = VectorXd::Zero(p.bi.size());
  z.bf = VectorXd::Zero(p.bf.size());
  z.bo = VectorXd::Zero(p.bo.size());
  z.bg = VectorXd::Zero(p.bg.size());
  return z;
}

// BPTT through one direction. dh_last is the gradient flowing into the
// final hidden state; xs are the inputs in scan order.
void backprop_direction(const LstmCellParams& cell, const std::vector<MatrixXd>& xs,
                        const DirectionCache& cc, const MatrixXd& dh_last,
                        LstmCellParams& grad) {
  const std::size_t T = xs.size();
  const Eigen::Index hidden = cell.bi.size();
  const Eigen::Index batch = xs.empty() ? 0 : xs[0].cols();
  MatrixXd dh = dh_last;
  MatrixXd dc = MatrixXd::Zero(hidden, batch);
  const MatrixXd zeros = MatrixXd::Zero(hidden, batch);
  for (std::size_t tt = T; tt-- > 0;) {
    const MatrixXd& c_prev = tt == 0 ? zeros : cc.c[tt - 1];
    const MatrixXd& h_prev = tt == 0 ? zeros : cc.h[tt - 1];
    MatrixXd tanh_c = cc.c[tt].array().tanh().matrix();
    MatrixXd do_ = (dh.array() * tanh_c.array()).matrix();
    MatrixXd dzo = (do_.array() * cc.o[tt].array() * (1.0 - cc.o[tt].array())).matrix();
    dc = (dc.array() + dh.array() * cc.o[tt].array() * (1.0 - tanh_c.array().square())).matrix();
    MatrixXd df = (dc.array() * c_prev.array()).matrix();
    MatrixXd dzf = (df.array() * cc.f[tt].array() * (1.0 - cc.f[tt].array())).matrix();
    MatrixXd di = (dc.array() * cc.g[tt].array()).matrix();
    MatrixXd dzi = (di.array() * cc.i[tt].array() * (1.0 - cc.i[tt].array())).matrix();
    MatrixXd dg = (dc.array() * cc.i[tt].array()).matrix();
    MatrixXd dzg = (dg.array() * (1.0 - cc.g[tt].array().square())).matrix();

    grad.Wi += dzi * xs[tt].transpose();
    grad.Wf += dzf * xs[tt].transpose();
    grad.Wo += dzo * xs[tt].transpose();
    grad.Wg += dzg * xs[tt].transpose();
    grad.Ui += dzi * h_prev.transpose();
    grad.Uf += dzf * h_prev.transpose();
    grad.Uo += dzo * h_prev.transpose();
    grad.Ug += dzg * h_prev.transpose();
    grad.bi += dzi.rowwise().sum();
    grad.bf += dzf.rowwise().sum();
    grad.bo += dzo.rowwise().sum();
    grad.bg += dzg.rowwise().sum();

    dh = cell.Ui.transpose() * dzi + cell.Uf.transpose() * dzf + cell.Uo.transpose() * dzo +
         cell.Ug.transpose() * dzg;
    dc = (dc.array() * cc.f[tt].array()).matrix();
  }
}

void check_cell_shapes(const LstmCellParams& cell, int hidden, int features) {
  auto bad = [&](bool cond) {
    if (cond) throw ShapeMismatchError("cell parameter shapes disagree with the config");
  };
  bad(cell.Wi.rows() != hidden || cell.Wi.cols() != features);
  bad(cell.Wf.rows() != hidden || cell.Wf.cols() != features);
  bad(cell.Wo.rows() != hidden || cell.Wo.cols() != features);
  bad(cell.Wg.rows() != hidden || cell.Wg.cols() != features);
  bad(cell.Ui.rows() != hidden || cell.Ui.cols() != hidden);
  bad(cell.Uf.rows() != hidden || cell.Uf.cols() != hidden);
  bad(cell.Uo.rows() != hidden || cell.Uo.cols() != hidden);
  bad(cell.Ug.rows() != hidden || cell.Ug.cols() != hidden);
  bad(cell.bi.size() != hidden || cell.bf.size() != hidden || cell.bo.size() != hidden ||
      cell.bg.size() != hidden);
}

// Batched windows -> per-step feature matrices for both scan directions.
struct BatchInputs {
  std::vector<MatrixXd> fwd, bwd;  // [t] features x batch
};

BatchInputs prepare_inputs(const BiLstmModel& model, const std::vector<Sample>& batch) {
  const int T = model.config.window_len;
  const int features = model.config.input_features;
  if (features != 1) throw ShapeMismatchError("only single-feature windows are supported");
  BatchInputs in;
  in.fwd.assign((size_t)T, MatrixXd::Zero(features, (Eigen::Index)batch.size()));
  in.bwd.assign((size_t)T, MatrixXd::Zero(features, (Eigen::Index)batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if ((int)batch[j].window.size() != T)
      throw ShapeMismatchError("window length disagrees with the config");
    for (int t = 0; t < T; ++t) {
      double z = (batch[j].window[(size_t)t] - model.norm_mean) / model.norm_std;
      in.fwd[(size_t)t](0, (Eigen::Index)j) = z;
      in.bwd[(size_t)(T - 1 - t)](0, (Eigen::Index)j) = z;
    }
  }
  return in;
}

Eigen::VectorXd batch_probabilities(const BiLstmModel& model, const std::vector<Sample>& batch,
                                    DirectionCache* fwd_cache, DirectionCache* bwd_cache,
                                    BatchInputs* inputs) {
  const int hidden = model.config.num_hidden_units;
  check_cell_shapes(model.forward_cell, hidden, model.config.input_features);
  check_cell_shapes(model.backward_cell, hidden, model.config.input_features);
  if (model.head_w.size() != 2 * hidden)
    throw ShapeMismatchError("head width must be twice the hidden size");

  BatchInputs in = prepare_inputs(model, batch);
  DirectionCache fc = scan(model.forward_cell, in.fwd);
  DirectionCache bc = scan(model.backward_cell, in.bwd);
  const MatrixXd& hf = fc.h.back();
  const MatrixXd& hb = bc.h.back();
  VectorXd logits = (model.head_w.head(hidden).transpose() * hf).transpose() +
                    (model.head_w.tail(hidden).transpose() * hb).transpose();
  logits.array() += model.head_b;
  VectorXd probs = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
  if (fwd_cache) *fwd_cache = std::move(fc);
  if (bwd_cache) *bwd_cache = std::move(bc);
  if (inputs) *inputs = std::move(in);
  return probs;
}

void put_f64(std::vector<std::uint8_t>& buf, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  for (int i = 0; i < 8; ++i) buf.push_back((std::uint8_t)(bits >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) buf.push_back((std::uint8_t)(x >> (8 * i)));
}

void put_i32(std::vector<std::uint8_t>& buf, std::int32_t x) {
  for (int i = 0; i < 4; ++i) buf.push_back((std::uint8_t)((std::uint32_t)x >> (8 * i)));
}

struct ByteReader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ModelFileError("truncated model file");
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= (std::uint64_t)buf[pos + (size_t)i] << (8 * i);
    pos += 8;
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= (std::uint64_t)buf[pos + (size_t)i] << (8 * i);
    pos += 8;
    return x;
  }
  std::int32_t i32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= (std::uint32_t)buf[pos + (size_t)i] << (8 * i);
    pos += 4;
    return (std::int32_t)x;
  }
};

void put_matrix(std::vector<std::uint8_t>& buf, const MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(buf, m(r, c));
}

MatrixXd read_matrix(ByteReader& in, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.f64();
  return m;
}

void put_cell(std::vector<std::uint8_t>& buf, const LstmCellParams& p) {
  put_matrix(buf, p.Wi);
  put_matrix(buf, p.Wf);
  put_matrix(buf, p.Wo);
  put_matrix(buf, p.Wg);
  put_matrix(buf, p.Ui);
  put_matrix(buf, p.Uf);
  put_matrix(buf, p.Uo);
  put_matrix(buf, p.Ug);
  put_matrix(buf, p.bi);
  put_matrix(buf, p.bf);
  put_matrix(buf, p.bo);
  put_matrix(buf, p.bg);
}

LstmCellParams read_cell(ByteReader& in, int hidden, int features) {
  LstmCellParams p;
  p.Wi = read_matrix(in, hidden, features);
  p.Wf = read_matrix(in, hidden, features);
  p.Wo = read_matrix(in, hidden, features);
  p.Wg = read_matrix(in, hidden, features);
  p.Ui = read_matrix(in, hidden, hidden);
  p.Uf = read_matrix(in, hidden, hidden);
  p.Uo = read_matrix(in, hidden, hidden);
  p.Ug = read_matrix(in, hidden, hidden);
  p.bi = read_matrix(in, hidden, 1);
  p.bf = read_matrix(in, hidden, 1);
  p.bo = read_matrix(in, hidden, 1);
  p.bg = read_matrix(in, hidden, 1);
  return p;
}

template <typename Fn>
void for_each_param(LstmCellParams& p, Fn&& fn) {
  fn(p.Wi);
  fn(p.Wf);
  fn(p.Wo);
  fn(p.Wg);
  fn(p.Ui);
  fn(p.Uf);
  fn(p.Uo);
  fn(p.Ug);
  fn(p.bi);
  fn(p.bf);
  fn(p.bo);
  fn(p.bg);
}

}  // namespace

void DetectorConfig::validate() const {
  if (num_hidden_units <= 0 || window_len <= 0 || input_features <= 0 ||
      !(learning_rate >= 0.0) || epochs <= 0 || batch_size <= 0)
    throw ConfigError("detector config fields must be positive");
}

std::pair<VectorXd, VectorXd> lstm_step(const LstmCellParams& cell, const VectorXd& x,
                                        const VectorXd& h_prev, const VectorXd& c_prev) {
  check_cell_shapes(cell, (int)cell.bi.size(), (int)cell.Wi.cols());
  if (x.size() != cell.Wi.cols() || h_prev.size() != cell.bi.size() ||
      c_prev.size() != cell.bi.size())
    throw ShapeMismatchError("lstm_step operand shapes disagree with the cell");
  VectorXd zi = cell.Wi * x + cell.Ui * h_prev + cell.bi;
  VectorXd zf = cell.Wf * x + cell.Uf * h_prev + cell.bf;
  VectorXd zo = cell.Wo * x + cell.Uo * h_prev + cell.bo;
  VectorXd zg = cell.Wg * x + cell.Ug * h_prev + cell.bg;
  VectorXd i = (1.0 / (1.0 + (-zi.array()).exp())).matrix();
  VectorXd f = (1.0 / (1.0 + (-zf.array()).exp())).matrix();
  VectorXd o = (1.0 / (1.0 + (-zo.array()).exp())).matrix();
  VectorXd g = zg.array().tanh().matrix();
  VectorXd c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  VectorXd h = (o.array() * c.array().tanh()).matrix();
  return {h, c};
}

double forward(const BiLstmModel& model, const std::vector<double>& window) {
  Sample s;
  s.window = window;
  VectorXd p = batch_probabilities(model, {s}, nullptr, nullptr, nullptr);
  return p(0);
}

std::pair<double, Gradients> loss_and_gradients(const BiLstmModel& model,
                                                const std::vector<Sample>& batch) {
  const int hidden = model.config.num_hidden_units;
  const int T = model.config.window_len;
  const auto B = (Eigen::Index)batch.size();

  DirectionCache fc, bc;
  BatchInputs in;
  VectorXd probs = batch_probabilities(model, batch, &fc, &bc, &in);

  double loss = 0.0;
  VectorXd dlogit(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    double y = (double)batch[(size_t)j].label;
    double p = probs(j);
    double clipped = std::min(1.0 - kProbClip, std::max(kProbClip, p));
    loss += -(y * std::log(clipped) + (1.0 - y) * std::log(1.0 - clipped));
    // the clip is part of the loss: gradient is zero where it is active
    bool active = p > kProbClip && p < 1.0 - kProbClip;
    dlogit(j) = active ? (p - y) / (double)B : 0.0;
  }
  loss /= (double)B;

  Gradients g;
  g.fwd = zero_like(model.forward_cell);
  g.bwd = zero_like(model.backward_cell);
  g.head_w = VectorXd::Zero(2 * hidden);
  const MatrixXd& hf = fc.h[(size_t)T - 1];
  const MatrixXd& hb = bc.h[(size_t)T - 1];
  g.head_w.head(hidden) = hf * dlogit;
  g.head_w.tail(hidden) = hb * dlogit;
  g.head_b = dlogit.sum();

  MatrixXd dh_fwd = model.head_w.head(hidden) * dlogit.transpose();
  MatrixXd dh_bwd = model.head_w.tail(hidden) * dlogit.transpose();
  backprop_direction(model.forward_cell, in.fwd, fc, dh_fwd, g.fwd);
  backprop_direction(model.backward_cell, in.bwd, bc, dh_bwd, g.bwd);
  return {loss, std::move(g)};
}

BiLstmModel init_model(const DetectorConfig& config) {
  config.validate();
  const int hidden = config.num_hidden_units;
  const int features = config.input_features;
  std::mt19937_64 gen(config.seed);
  const double bound = 1.0 / std::sqrt((double)hidden);
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto fill = [&](MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(gen);
  };

  BiLstmModel model;
  model.config = config;
  for (LstmCellParams* cell : {&model.forward_cell, &model.backward_cell}) {
    cell->Wi = MatrixXd(hidden, features);
    cell->Wf = MatrixXd(hidden, features);
    cell->Wo = MatrixXd(hidden, features);
    cell->Wg = MatrixXd(hidden, features);
    cell->Ui = MatrixXd(hidden, hidden);
    cell->Uf = MatrixXd(hidden, hidden);
    cell->Uo = MatrixXd(hidden, hidden);
    cell->Ug = MatrixXd(hidden, hidden);
    fill(cell->Wi);
    fill(cell->Wf);
    fill(cell->Wo);
    fill(cell->Wg);
    fill(cell->Ui);
    fill(cell->Uf);
    fill(cell->Uo);
    fill(cell->Ug);
    cell->bi = VectorXd::Zero(hidden);
    cell->bf = VectorXd::Ones(hidden);  // forget-gate bias +1
    cell->bo = VectorXd::Zero(hidden);
    cell->bg = VectorXd::Zero(hidden);
  }
  model.head_w = VectorXd(2 * hidden);
  for (Eigen::Index i = 0; i < model.head_w.size(); ++i) model.head_w(i) = dist(gen);
  model.head_b = 0.0;
  return model;
}

TrainResult train(const std::vector<Sample>& corpus, const DetectorConfig& config) {
  config.validate();
  bool has_pos = false, has_neg = false;
  for (const auto& s : corpus) (s.label ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw DegenerateCorpusError();

  BiLstmModel model = init_model(config);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : corpus)
    for (double x : s.window) {
      sum += x;
      sq += x * x;
      ++n;
    }
  model.norm_mean = sum / (double)n;
  double var = sq / (double)n - model.norm_mean * model.norm_mean;
  model.norm_std = std::sqrt(std::max(var, 1e-12));

  Gradients vel;
  vel.fwd = zero_like(model.forward_cell);
  vel.bwd = zero_like(model.backward_cell);
  vel.head_w = VectorXd::Zero(model.head_w.size());
  vel.head_b = 0.0;
  const double momentum = 0.9;
  const double lr = config.learning_rate;

  std::mt19937_64 shuffle_gen(config.seed ^ 0x5f5f5f5full);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the library PRNG, kept explicit for reproducibility
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = (std::size_t)(shuffle_gen() % i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += (size_t)config.batch_size) {
      std::vector<Sample> batch;
      for (std::size_t j = at; j < std::min(order.size(), at + (size_t)config.batch_size); ++j)
        batch.push_back(corpus[order[j]]);
      auto [loss, grad] = loss_and_gradients(model, batch);
      epoch_loss += loss;
      ++batches;
      if (lr == 0.0) continue;
      auto step_cell = [&](LstmCellParams& p, LstmCellParams& v, const LstmCellParams& gr) {
        auto upd = [&](MatrixXd& theta, MatrixXd& vel_m, const MatrixXd& g_m) {
          vel_m = momentum * vel_m - lr * g_m;
          theta += vel_m;
        };
        upd(p.Wi, v.Wi, gr.Wi);
        upd(p.Wf, v.Wf, gr.Wf);
        upd(p.Wo, v.Wo, gr.Wo);
        upd(p.Wg, v.Wg, gr.Wg);
        upd(p.Ui, v.Ui, gr.Ui);
        upd(p.Uf, v.Uf, gr.Uf);
        upd(p.Uo, v.Uo, gr.Uo);
        upd(p.Ug, v.Ug, gr.Ug);
        auto updv = [&](VectorXd& theta, VectorXd& vel_v, const VectorXd& g_v) {
          vel_v = momentum * vel_v - lr * g_v;
          theta += vel_v;
        };
        updv(p.bi, v.bi, gr.bi);
        updv(p.bf, v.bf, gr.bf);
        updv(p.bo, v.bo, gr.bo);
        updv(p.bg, v.bg, gr.bg);
      };
      step_cell(model.forward_cell, vel.fwd, grad.fwd);
      step_cell(model.backward_cell, vel.bwd, grad.bwd);
      vel.head_w = momentum * vel.head_w - lr * grad.head_w;
      model.head_w += vel.head_w;
      vel.head_b = momentum * vel.head_b - lr * grad.head_b;
      model.head_b += vel.head_b;
    }
    result.epoch_losses.push_back(epoch_loss / (double)batches);
  }
  result.model = std::move(model);
  return result;
}

EvalMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
  EvalMetrics m;
  m.cm = cm;
  m.accuracy = (double)(cm.tp + cm.tn) / (double)cm.total();
  if (cm.tp + cm.fp > 0) m.precision = (double)cm.tp / (double)(cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0) m.recall = (double)cm.tp / (double)(cm.tp + cm.fn);
  return m;
}

EvalMetrics evaluate(const BiLstmModel& model, const std::vector<Sample>& corpus,
                     double threshold) {
  if (corpus.empty()) throw ConfigError("evaluate: corpus is empty");
  ConfusionMatrix cm;
  // batch in chunks to bound memory
  const std::size_t chunk = 256;
  for (std::size_t at = 0; at < corpus.size(); at += chunk) {
    std::vector<Sample> batch(corpus.begin() + (std::ptrdiff_t)at,
                              corpus.begin() + (std::ptrdiff_t)std::min(corpus.size(), at + chunk));
    VectorXd probs = batch_probabilities(model, batch, nullptr, nullptr, nullptr);
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
      bool predicted = probs(j) > threshold;
      bool actual = batch[(size_t)j].label != 0;
      if (predicted && actual) ++cm.tp;
      else if (!predicted && !actual) ++cm.tn;
      else if (predicted && !actual) ++cm.fp;
      else ++cm.fn;
    }
  }
  return metrics_from_confusion(cm);
}

std::vector<Sample> make_windows(const std::vector<MeterSeries>& series, int window_len) {
  std::vector<Sample> out;
  for (const auto& s : series) {
    for (std::size_t at = 0; at + (size_t)window_len <= s.readings.size();
         at += (size_t)window_len) {
      Sample w;
      w.window.assign(s.readings.begin() + (std::ptrdiff_t)at,
                      s.readings.begin() + (std::ptrdiff_t)(at + (size_t)window_len));
      w.label = s.label == Label::Malicious ? 1 : 0;
      w.meter_id = s.meter_id;
      out.push_back(std::move(w));
    }
  }
  return out;
}

SplitCorpus split_by_meter(const std::vector<MeterSeries>& series, int window_len,
                           double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(series.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 gen(seed ^ 0x73706c6974ull);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = (std::size_t)(gen() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::size_t n_train = (std::size_t)std::llround(train_fraction * (double)series.size());
  n_train = std::min(n_train, series.size());
  std::vector<MeterSeries> train_series, test_series;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train_series : test_series).push_back(series[order[i]]);
  return {make_windows(train_series, window_len), make_windows(test_series, window_len)};
}

std::vector<std::uint8_t> model_to_bytes(const BiLstmModel& model) {
  std::vector<std::uint8_t> buf;
  buf.push_back('B');
  buf.push_back('L');
  buf.push_back('S');
  buf.push_back('M');
  buf.push_back(1);
  buf.push_back(0);
  put_i32(buf, model.config.num_hidden_units);
  put_i32(buf, model.config.window_len);
  put_i32(buf, model.config.input_features);
  put_f64(buf, model.config.learning_rate);
  put_i32(buf, model.config.epochs);
  put_i32(buf, model.config.batch_size);
  put_u64(buf, model.config.seed);
  put_f64(buf, model.norm_mean);
  put_f64(buf, model.norm_std);
  put_cell(buf, model.forward_cell);
  put_cell(buf, model.backward_cell);
  put_matrix(buf, model.head_w);
  put_f64(buf, model.head_b);
  return buf;
}

BiLstmModel model_from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "BLSM", 4) != 0)
    throw ModelFileError("bad magic in model file");
  if (bytes[4] != 1 || bytes[5] != 0) throw ModelFileError("unsupported model version");
  ByteReader in{bytes, 6};
  BiLstmModel m;
  m.config.num_hidden_units = in.i32();
  m.config.window_len = in.i32();
  m.config.input_features = in.i32();
  m.config.learning_rate = in.f64();
  m.config.epochs = in.i32();
  m.config.batch_size = in.i32();
  m.config.seed = in.u64();
  m.config.validate();
  m.norm_mean = in.f64();
  m.norm_std = in.f64();
  const int h = m.config.num_hidden_units, f = m.config.input_features;
  m.forward_cell = read_cell(in, h, f);
  m.backward_cell = read_cell(in, h, f);
  m.head_w = read_matrix(in, 2 * h, 1);
  m.head_b = in.f64();
  if (in.pos != bytes.size()) throw ModelFileError("trailing bytes in model file");
  return m;
}

void save_model(const std::string& path, const BiLstmModel& model) {
  auto bytes = model_to_bytes(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelFileError("cannot open model file for writing: " + path);
  out.write((const char*)bytes.data(), (std::streamsize)bytes.size());
}

BiLstmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError("cannot open model file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return model_from_bytes(bytes);
}

std::string metrics_to_csv(const std::vector<std::pair<std::string, EvalMetrics>>& rows) {
  std::string out = "split,accuracy,precision,recall,tp,tn,fp,fn\n";
  char buf[192];
  for (const auto& [split, m] : rows) {
    auto opt = [](const std::optional<double>& v) {
      if (!v) return std::string("nan");
      char b[32];
      std::snprintf(b, sizeof(b), "%.6f", *v);
      return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%s,%s,%lld,%lld,%lld,%lld\n", split.c_str(),
                  m.accuracy, opt(m.precision).c_str(), opt(m.recall).c_str(), (long long)m.cm.tp,
                  (long long)m.cm.tn, (long long)m.cm.fp, (long long)m.cm.fn);
    out += buf;
  }
  return out;
}

}  // namespace secmeter
