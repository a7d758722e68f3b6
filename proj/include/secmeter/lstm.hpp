#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "secmeter/errors.hpp"
#include "secmeter/ingest.hpp"

namespace secmeter {

struct ShapeMismatchError : std::runtime_error {
  explicit ShapeMismatchError(const std::string& what) : std::runtime_error(what) {}
};
struct DegenerateCorpusError : std::runtime_error {
  DegenerateCorpusError() : std::runtime_error("training corpus must contain both classes") {}
};
struct ModelFileError : std::runtime_error {
  explicit ModelFileError(const std::string& what) : std::runtime_error(what) {}
};

struct DetectorConfig {
  int num_hidden_units = 32;
  int window_len = 48;
  int input_features = 1;
  double learning_rate = 0.05;
  int epochs = 12;
  int batch_size = 64;
  std::uint64_t seed = 1;

  void validate() const;
};

// One recurrence direction: input, forget, output and candidate gates.
struct LstmCellParams {
  Eigen::MatrixXd Wi, Wf, Wo, Wg;  // hidden x features
  Eigen::MatrixXd Ui, Uf, Uo, Ug;  // hidden x hidden
  Eigen::VectorXd bi, bf, bo, bg;  // hidden
};

struct BiLstmModel {
  DetectorConfig config;
  LstmCellParams forward_cell;
  LstmCellParams backward_cell;
  Eigen::VectorXd head_w;  // 2*hidden, over [h_fwd_final; h_bwd_final]
  double head_b = 0.0;
  // z-score constants from the training split, applied to every window
  double norm_mean = 0.0;
  double norm_std = 1.0;
};

// One recurrence step: i,f,o = sigmoid(Wx + Uh + b), g = tanh(Wx + Uh + b),
// c = f.c_prev + i.g, h = o.tanh(c).
std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_step(const LstmCellParams& cell,
                                                      const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& h_prev,
                                                      const Eigen::VectorXd& c_prev);

// Probability that the window is malicious, in (0,1).
double forward(const BiLstmModel& model, const std::vector<double>& window);

struct Sample {
  std::vector<double> window;  // raw kWh, window_len values
  int label = 0;               // 1 = malicious
  std::string meter_id;
};

struct Gradients {
  LstmCellParams fwd, bwd;
  Eigen::VectorXd head_w;
  double head_b = 0.0;
};

constexpr double kProbClip = 1e-7;

// Mean binary cross-entropy over the batch (probabilities clipped to
// [kProbClip, 1-kProbClip]) and the full BPTT gradient.
std::pair<double, Gradients> loss_and_gradients(const BiLstmModel& model,
                                                const std::vector<Sample>& batch);

// Weights uniform in +-1/sqrt(hidden), biases zero, forget-gate bias +1.
BiLstmModel init_model(const DetectorConfig& config);

struct TrainResult {
  BiLstmModel model;
  std::vector<double> epoch_losses;
};

// Plain SGD with momentum 0.9, seeded shuffling; deterministic per seed.
TrainResult train(const std::vector<Sample>& corpus, const DetectorConfig& config);

struct ConfusionMatrix {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::int64_t total() const { return tp + tn + fp + fn; }
};

struct EvalMetrics {
  ConfusionMatrix cm;
  double accuracy = 0.0;
  std::optional<double> precision;  // undefined when tp+fp == 0
  std::optional<double> recall;     // undefined when tp+fn == 0
};

// accuracy = (tp+tn)/total, precision = tp/(tp+fp), recall = tp/(tp+fn);
// zero denominators leave the metric unset.
EvalMetrics metrics_from_confusion(const ConfusionMatrix& cm);

// Predicts malicious when p > threshold.
EvalMetrics evaluate(const BiLstmModel& model, const std::vector<Sample>& corpus,
                     double threshold = 0.5);

// Non-overlapping windows, labeled per series.
std::vector<Sample> make_windows(const std::vector<MeterSeries>& series, int window_len);

struct SplitCorpus {
  std::vector<Sample> train, test;
};
// Meter-level split so no meter's windows straddle train and test.
SplitCorpus split_by_meter(const std::vector<MeterSeries>& series, int window_len,
                           double train_fraction, std::uint64_t seed);

// Versioned binary model file ("BLSM" magic, parameters as little-endian
// 64-bit floats in declared order, matrices row-major).
std::vector<std::uint8_t> model_to_bytes(const BiLstmModel& model);
BiLstmModel model_from_bytes(const std::vector<std::uint8_t>& bytes);
void save_model(const std::string& path, const BiLstmModel& model);
BiLstmModel load_model(const std::string& path);

std::string metrics_to_csv(const std::vector<std::pair<std::string, EvalMetrics>>& rows);

}  // namespace secmeter
