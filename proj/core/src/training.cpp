#include "oncf/training.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <utility>

#include "oncf/error.hpp"

namespace oncf {

void TrainConfig::validate() const {
  auto positive = [](double x, const char* key) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(key) + ": must be a positive number");
  };
  auto non_negative = [](double x, const char* key) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(std::string(key) + ": must be non-negative");
  };
  positive(lr_embed, "lr_embed");
  positive(lr_net, "lr_net");
  non_negative(lambda1, "lambda1");
  non_negative(lambda2, "lambda2");
  non_negative(lambda3, "lambda3");
  non_negative(lambda4, "lambda4");
  non_negative(lambda_pretrain, "lambda_pretrain");
  positive(adagrad_epsilon, "adagrad_epsilon");
  positive(init_stddev, "init_stddev");
  if (batch_size == 0) throw ConfigError("batch_size: must be at least 1");
  if (epochs == 0) throw ConfigError("epochs: must be at least 1");
  if (threads == 0) throw ConfigError("threads: must be at least 1");
}

double bpr_loss(double y_pos, double y_neg) {
  const double x = y_pos - y_neg;
  // softplus(-x)
  return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

BprGrad bpr_grad(double y_pos, double y_neg) {
  const double x = y_pos - y_neg;
  // sigmoid(-x), evaluated without overflow on either side.
  const double s = x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
  return {-s, s};
}

void adagrad_step(std::span<double> param, std::span<const double> grad, std::span<double> state, double lr,
                  double epsilon) {
  if (param.size() != grad.size() || param.size() != state.size()) {
    throw DimensionError("adagrad_step: parameter, gradient and state sizes differ");
  }
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad[k];
    state[k] += g * g;
    param[k] -= lr * g / (std::sqrt(state[k]) + epsilon);
  }
}

AdagradState make_adagrad_state(const Model& model) {
  AdagradState s;
  const auto& t = model.tables;
  if (t.P) s.P.emplace(t.P->rows(), t.P->cols());
  s.Q = Mat(t.Q.rows(), t.Q.cols());
  if (t.Qp) s.Qp.emplace(t.Qp->rows(), t.Qp->cols());
  s.head = zeros_like(model.head);
  return s;
}

double bpr_gradients(const Model& model, const TrainTriple& t, std::span<const ItemId> history, ModelGrads& grads) {
  const ForwardState pos = forward(model, t.u, t.i, history);
  const ForwardState neg = forward(model, t.u, t.j, history);
  const BprGrad g = bpr_grad(pos.score, neg.score);
  backward(model, pos, t.u, t.i, history, g.d_pos, grads);
  backward(model, neg, t.u, t.j, history, g.d_neg, grads);
  return bpr_loss(pos.score, neg.score);
}

namespace {

void step_rows(Mat& table, Mat& state, const RowGrads& grads, double lambda, bool regularize, double lr,
               double eps) {
  Vec g(table.cols());
  for (const auto& [r, grad] : grads.rows()) {
    auto param = table.row(r);
    for (std::size_t k = 0; k < g.size(); ++k) {
      g[k] = grad[k] + (regularize ? 2.0 * lambda * param[k] : 0.0);
    }
    adagrad_step(param, g.values(), state.row(r), lr, eps);
  }
}

std::vector<std::pair<std::string, std::span<double>>> blocks(Head& head) {
  std::vector<std::pair<std::string, std::span<double>>> out;
  for_each_head_block(head, [&](const std::string& name, std::span<double> v) { out.emplace_back(name, v); });
  return out;
}

// Output weights carry lambda4; every other head block is a hidden layer.
bool is_output_block(const std::string& name) { return name == "w"; }

}  // namespace

double train_step(Model& model, const Dataset& train, std::span<const TrainTriple> batch, const TrainConfig& config,
                  AdagradState& state, bool regularize) {
  if (batch.empty()) return 0.0;
  ModelGrads grads = zero_grads(model);
  double loss = 0.0;
  for (const auto& t : batch) loss += bpr_gradients(model, t, train.items(t.u), grads);

  const double eps = config.adagrad_epsilon;
  auto& tables = model.tables;
  if (tables.P) step_rows(*tables.P, *state.P, grads.embeddings.P, config.lambda1, regularize, config.lr_embed, eps);
  if (tables.Qp) {
    step_rows(*tables.Qp, *state.Qp, grads.embeddings.Qp, config.lambda1, regularize, config.lr_embed, eps);
  }
  step_rows(tables.Q, state.Q, grads.embeddings.Q, config.lambda2, regularize, config.lr_embed, eps);

  if (model.spec.head != HeadKind::Popularity) {
    auto params = blocks(model.head);
    auto g = blocks(grads.head);
    auto s = blocks(state.head);
    for (std::size_t b = 0; b < params.size(); ++b) {
      const double lambda = is_output_block(params[b].first) ? config.lambda4 : config.lambda3;
      if (regularize) {
        for (std::size_t k = 0; k < params[b].second.size(); ++k) g[b].second[k] += 2.0 * lambda * params[b].second[k];
      }
      adagrad_step(params[b].second, g[b].second, s[b].second, config.lr_net, eps);
    }
  }
  return loss / static_cast<double>(batch.size());
}

std::vector<EvalResult> TrainHistory::results(EvalSplit split) const {
  std::vector<EvalResult> out;
  for (const auto& r : rows) {
    if (r.split == split) out.push_back(r.result);
  }
  return out;
}

std::string to_string(EvalSplit s) { return s == EvalSplit::Validation ? "val" : "test"; }

TrainHistory train(Model& model, const SplitSet& split, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_model(model);
  TrainHistory history;

  auto record = [&](std::size_t epoch, double loss) {
    if (config.eval_validation) {
      history.rows.push_back({epoch, EvalSplit::Validation,
                              evaluate(model, split, EvalSplit::Validation, kDefaultCutoffs, config.threads), loss});
    }
    if (config.eval_test) {
      history.rows.push_back(
          {epoch, EvalSplit::Test, evaluate(model, split, EvalSplit::Test, kDefaultCutoffs, config.threads), loss});
    }
  };

  if (model.spec.head == HeadKind::Popularity) {
    model.head = PopularityHead{itempop_scores(split.train)};
    history.epoch_loss.push_back(0.0);
    if (on_epoch) on_epoch(model, 1);
    record(1, 0.0);
    return history;
  }

  Rng shuffle_rng = make_rng(config.seed, SeedPurpose::Shuffle);
  Rng negative_rng = make_rng(config.seed, SeedPurpose::Negatives);
  AdagradState state = make_adagrad_state(model);
  std::vector<TrainTriple> triples;
  bool first = true;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const bool regularize = epoch >= 2;
    const EpochBatches batches = minibatches(split.train, config.batch_size, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      triples.clear();
      for (const auto& p : batches[b]) {
        triples.push_back({p.user, p.item, sample_negative(split.train, p.user, negative_rng)});
      }
      const double loss = train_step(model, split.train, triples, config, state, regularize);
      if (first) {
        history.first_batch_loss = loss;
        first = false;
      }
      loss_sum += loss * static_cast<double>(triples.size());
      count += triples.size();
    }
    const double epoch_loss = count > 0 ? loss_sum / static_cast<double>(count) : 0.0;
    history.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(model, epoch);
    if (epoch >= config.eval_from_epoch) record(epoch, epoch_loss);
  }
  return history;
}

EmbeddingTables pretrain(const ModelSpec& target, const SplitSet& split, const TrainConfig& config,
                         TrainHistory* history) {
  ModelSpec shallow = ModelSpec::shallow(target.variant, target.K);
  shallow.alpha = target.alpha;
  shallow.fism_norm = target.fism_norm;
  Model model = make_model(shallow, split.train.num_users(), split.train.num_items(), config.seed, NetInit::Random,
                           config.init_stddev);
  if (config.epochs_pretrain == 0) return model.tables;

  TrainConfig cfg = config;
  cfg.epochs = config.epochs_pretrain;
  cfg.lambda1 = config.lambda_pretrain;
  cfg.lambda2 = config.lambda_pretrain;
  cfg.eval_validation = history != nullptr && config.eval_validation;
  cfg.eval_test = history != nullptr && config.eval_test;
  TrainHistory h = train(model, split, cfg);
  if (history) *history = std::move(h);
  return model.tables;
}

Model build_model(const ModelSpec& spec, const SplitSet& split, const TrainConfig& config) {
  const bool shallow = spec.head == HeadKind::Identity || spec.head == HeadKind::Popularity;
  if (config.pretrain && !shallow) {
    return warm_start(spec, pretrain(spec, split, config), config.seed, config.net_init);
  }
  return make_model(spec, split.train.num_users(), split.train.num_items(), config.seed, config.net_init,
                    config.init_stddev);
}

namespace {

void put_number(std::ostream& out, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, res.ptr - buf);
}

}  // namespace

void write_metrics_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,split,hr@5,hr@10,hr@20,ndcg@5,ndcg@10,ndcg@20,loss\n";
  for (const auto& r : history.rows) {
    out << r.epoch << ',' << to_string(r.split);
    for (std::size_t k : kDefaultCutoffs) {
      out << ',';
      put_number(out, r.result.at.at(k).hr);
    }
    for (std::size_t k : kDefaultCutoffs) {
      out << ',';
      put_number(out, r.result.at.at(k).ndcg);
    }
    out << ',';
    put_number(out, r.loss);
    out << '\n';
  }
}

}  // namespace oncf
