#pragma once

// BPR training with mini-batch Adagrad.
//
// Parameters fall into two learning-rate groups: embedding tables (lr_embed)
// and head parameters (lr_net). L2 terms are applied as 2*lambda*theta on the
// parameters a batch touches, with lambda1 on user-side tables (P, Qp),
// lambda2 on Q, lambda3 on hidden layers (conv kernels/biases, MLP W/b) and
// lambda4 on the output weights. lambda4 matters most in practice.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oncf/dataset.hpp"
#include "oncf/evaluation.hpp"
#include "oncf/model.hpp"

namespace oncf {

struct TrainConfig {
  double lr_embed = 0.005;
  double lr_net = 0.01;
  double lambda1 = 1e-6;
  double lambda2 = 1e-6;
  double lambda3 = 10.0;
  double lambda4 = 1.0;
  std::size_t batch_size = 256;
  std::size_t epochs = 30;
  std::uint64_t seed = 42;
  bool pretrain = false;
  std::size_t epochs_pretrain = 20;
  double lambda_pretrain = 1e-6;  // lambda1 and lambda2 of the shallow run
  double adagrad_epsilon = 1e-6;
  NetInit net_init = NetInit::Random;
  double init_stddev = 0.01;
  std::size_t threads = 1;  // evaluation fan-out
  bool eval_validation = true;
  bool eval_test = true;
  std::size_t eval_from_epoch = 1;  // epochs before this one are not evaluated

  // Throws ConfigError naming the offending key.
  void validate() const;
};

struct TrainTriple {
  UserId u;
  ItemId i;  // positive
  ItemId j;  // negative
  bool operator==(const TrainTriple&) const = default;
};

// -ln sigmoid(y_pos - y_neg) via a stable softplus.
double bpr_loss(double y_pos, double y_neg);

struct BprGrad {
  double d_pos;
  double d_neg;
};
BprGrad bpr_grad(double y_pos, double y_neg);

// state += g^2; param -= lr * g / (sqrt(state) + eps), elementwise.
void adagrad_step(std::span<double> param, std::span<const double> grad, std::span<double> state, double lr,
                  double epsilon);

// Squared-gradient accumulators shaped like the model's parameters.
struct AdagradState {
  std::optional<Mat> P;
  Mat Q;
  std::optional<Mat> Qp;
  Head head;
};

AdagradState make_adagrad_state(const Model& model);

// Gradient of the lambda-free BPR loss of one triple; returns the loss.
double bpr_gradients(const Model& model, const TrainTriple& t, std::span<const ItemId> history, ModelGrads& grads);

// One Adagrad update from a batch of triples; histories come from `train`.
// Returns the mean BPR loss of the batch before the update.
double train_step(Model& model, const Dataset& train, std::span<const TrainTriple> batch, const TrainConfig& config,
                  AdagradState& state, bool regularize);

struct EpochRecord {
  std::size_t epoch = 0;
  EvalSplit split = EvalSplit::Validation;
  EvalResult result;
  double loss = 0.0;  // mean training loss of the epoch
  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> rows;
  std::vector<double> epoch_loss;
  double first_batch_loss = 0.0;  // mean loss of the first batch, before any update

  std::vector<EvalResult> results(EvalSplit split) const;
};

using EpochCallback = std::function<void(const Model&, std::size_t epoch)>;

// Trains `model` in place. Epoch 1 runs without regularization. Negatives are
// drawn per positive on the fly. Popularity models are fitted in one pass.
TrainHistory train(Model& model, const SplitSet& split, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

// Trains the shallow (inner product) counterpart of `target` and returns its
// tables, ready for warm_start.
EmbeddingTables pretrain(const ModelSpec& target, const SplitSet& split, const TrainConfig& config,
                         TrainHistory* history = nullptr);

// Fresh or warm-started model for `spec` according to config.pretrain.
Model build_model(const ModelSpec& spec, const SplitSet& split, const TrainConfig& config);

std::string to_string(EvalSplit s);

void write_metrics_csv(std::ostream& out, const TrainHistory& history);

}  // namespace oncf
