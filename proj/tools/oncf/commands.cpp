#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "oncf/checkpoint.hpp"
#include "oncf/dataset.hpp"
#include "oncf/error.hpp"
#include "oncf/evaluation.hpp"
#include "oncf/gradcheck.hpp"
#include "oncf/rng.hpp"

namespace oncf::cli {

namespace {

struct Prepared {
  Dataset filtered;
  SplitSet split;
  bool stable = true;
};

Prepared prepare(const RunConfig& config) {
  if (config.data.empty()) throw ConfigError("data: required (path to the interaction file)");
  Prepared p;
  p.filtered = filter(load_interactions(config.data), config.min_item, config.min_user);
  p.stable = filter_is_stable(p.filtered, config.min_item, config.min_user);
  p.split = split_leave_latest_out(p.filtered, config.effective_split_seed(), config.eval_negatives);
  return p;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void print_result_header(std::ostream& out) {
  out << std::left << std::setw(8) << "split" << std::right << std::setw(7) << "users";
  for (std::size_t k : kDefaultCutoffs) out << std::setw(10) << ("hr@" + std::to_string(k));
  for (std::size_t k : kDefaultCutoffs) out << std::setw(10) << ("ndcg@" + std::to_string(k));
  out << '\n';
}

void print_result_row(std::ostream& out, const std::string& label, const EvalResult& r) {
  out << std::left << std::setw(8) << label << std::right << std::setw(7) << r.users_evaluated << std::fixed
      << std::setprecision(4);
  for (std::size_t k : kDefaultCutoffs) out << std::setw(10) << r.at.at(k).hr;
  for (std::size_t k : kDefaultCutoffs) out << std::setw(10) << r.at.at(k).ndcg;
  out << '\n' << std::defaultfloat;
}

void print_last10(std::ostream& out, const TrainHistory& history) {
  const auto val = history.results(EvalSplit::Validation);
  const auto test = history.results(EvalSplit::Test);
  if (val.empty() && test.empty()) return;
  out << "average of the last " << std::min<std::size_t>(10, std::max(val.size(), test.size()))
      << " evaluated epochs\n";
  print_result_header(out);
  if (!val.empty()) print_result_row(out, "val", rolling_last10(val));
  if (!test.empty()) print_result_row(out, "test", rolling_last10(test));
}

// Throws when the tables cannot score this split's users and items.
void require_compatible(const Model& model, const SplitSet& split, const std::string& what) {
  const Dataset& train = split.train;
  if (model.spec.head == HeadKind::Popularity) {
    const auto& pop = std::get<PopularityHead>(model.head);
    if (pop.scores.size() != train.num_items()) {
      throw ConfigError(what + ": checkpoint/spec mismatch: checkpoint has " + std::to_string(pop.scores.size()) +
                        " items, data has " + std::to_string(train.num_items()));
    }
    return;
  }
  if (model.tables.num_items() != train.num_items()) {
    throw ConfigError(what + ": checkpoint/spec mismatch: checkpoint has " +
                      std::to_string(model.tables.num_items()) + " items, data has " +
                      std::to_string(train.num_items()));
  }
  if (model.tables.P && model.tables.P->rows() != train.num_users()) {
    throw ConfigError(what + ": checkpoint/spec mismatch: checkpoint has " + std::to_string(model.tables.P->rows()) +
                      " users, data has " + std::to_string(train.num_users()));
  }
}

Model shallow_model(const ModelSpec& target, EmbeddingTables tables) {
  ModelSpec s = ModelSpec::shallow(target.variant, target.K);
  s.alpha = target.alpha;
  s.fism_norm = target.fism_norm;
  return Model{s, std::move(tables), IdentityHead{}};
}

}  // namespace

int cmd_ingest(const RunConfig& config, std::ostream& out) {
  const Prepared p = prepare(config);
  auto manifest = open_output(config.out / "manifest.tsv");
  write_split_manifest(manifest, p.split);
  out << "users          " << p.filtered.num_users() << '\n'
      << "items          " << p.filtered.num_items() << '\n'
      << "interactions   " << p.filtered.num_interactions() << '\n'
      << "evaluated      " << p.split.test.size() << '\n'
      << "skipped_users  " << p.split.skipped_users << '\n'
      << "filter_stable  " << (p.stable ? "yes" : "no") << '\n';
  return 0;
}

int cmd_pretrain(const RunConfig& config, std::ostream& out) {
  const Prepared p = prepare(config);
  TrainHistory history;
  EmbeddingTables tables = pretrain(config.spec, p.split, config.train, &history);
  const Model model = shallow_model(config.spec, std::move(tables));
  {
    auto ckpt = open_output(config.out / "pretrain.ckpt");
    save_checkpoint(model, ckpt);
  }
  auto csv = open_output(config.out / "pretrain_metrics.csv");
  write_metrics_csv(csv, history);
  out << "pretrained " << model.spec.descriptor() << " for " << config.train.epochs_pretrain << " epochs\n";
  print_last10(out, history);
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  config.spec.validate();
  const Prepared p = prepare(config);
  Model model;
  if (!config.pretrained.empty()) {
    Model shallow = load_checkpoint(config.pretrained);
    if (shallow.spec.head != HeadKind::Identity || shallow.spec.variant != config.spec.variant ||
        shallow.spec.K != config.spec.K) {
      throw ConfigError("pretrained: checkpoint/spec mismatch: expected a shallow " + to_string(config.spec.variant) +
                        " model with K=" + std::to_string(config.spec.K) + ", got '" + shallow.spec.descriptor() +
                        "'");
    }
    require_compatible(shallow, p.split, "pretrained");
    model = warm_start(config.spec, std::move(shallow.tables), config.train.seed, config.train.net_init);
  } else {
    model = build_model(config.spec, p.split, config.train);
  }
  const TrainHistory history = train(model, p.split, config.train);
  {
    auto ckpt = open_output(config.out / "model.ckpt");
    save_checkpoint(model, ckpt);
  }
  auto csv = open_output(config.out / "metrics.csv");
  write_metrics_csv(csv, history);
  out << "trained " << model.spec.descriptor() << " for " << history.epoch_loss.size() << " epochs, final loss "
      << history.epoch_loss.back() << '\n';
  print_last10(out, history);
  return 0;
}

int cmd_eval(const RunConfig& config, const std::optional<std::filesystem::path>& per_user, std::ostream& out) {
  const Prepared p = prepare(config);
  const Model model = load_checkpoint(config.effective_checkpoint());
  require_compatible(model, p.split, "checkpoint");
  out << "model   " << model.spec.descriptor() << '\n';
  print_result_header(out);
  print_result_row(out, "val", evaluate(model, p.split, EvalSplit::Validation, kDefaultCutoffs, config.train.threads));
  const auto ranks = rank_users(model, p.split, EvalSplit::Test, config.train.threads);
  print_result_row(out, "test", summarize_ranks(ranks));
  if (per_user) {
    auto tsv = open_output(*per_user);
    tsv << "user\trank\n";
    for (std::size_t c = 0; c < ranks.size(); ++c) {
      tsv << p.split.train.user_id(p.split.test[c].user) << '\t' << ranks[c] << '\n';
    }
  }
  return 0;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  config.spec.validate();
  Dataset data;
  if (config.data.empty()) {
    SyntheticSpec s;
    s.users = 20;
    s.items = 40;
    s.min_interactions = 5;
    s.max_interactions = 10;
    s.seed = config.train.seed;
    data = make_synthetic(s);
  } else {
    data = filter(load_interactions(config.data), config.min_item, config.min_user);
  }
  if (data.num_interactions() == 0) throw ConfigError("data: no interactions to build a gradient-check triple from");
  const Model model =
      make_model(config.spec, data.num_users(), data.num_items(), config.train.seed, config.train.net_init,
                 config.train.init_stddev);

  Rng rng = make_rng(config.train.seed, SeedPurpose::GradCheck);
  const auto all = data.interactions();
  const Interaction& pick = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
  const TrainTriple triple{pick.user, pick.item, sample_negative(data, pick.user, rng)};

  const GradReport report = finite_diff_check(model, triple, data.items(triple.u), config.gradcheck);
  out << "model   " << model.spec.descriptor() << '\n'
      << "triple  u=" << data.user_id(triple.u) << " i=" << data.item_id(triple.i) << " j=" << data.item_id(triple.j)
      << '\n';
  print_report(out, report);
  return report.pass ? 0 : 1;
}

int cmd_paramcount(const RunConfig& config, std::ostream& out) {
  config.spec.validate();
  std::size_t users = 0;
  std::size_t items = 0;
  if (!config.data.empty()) {
    const Dataset d = filter(load_interactions(config.data), config.min_item, config.min_user);
    users = d.num_users();
    items = d.num_items();
  }
  const ParamCount c = param_count(config.spec, users, items);
  out << "model          " << config.spec.descriptor() << '\n'
      << "head_total     " << c.head_total << '\n'
      << "tower_weights  " << c.tower_weights << '\n'
      << "embeddings     " << c.embeddings << '\n';
  return 0;
}

int cmd_recommend(const RunConfig& config, const std::string& user, std::size_t k, std::ostream& out) {
  const Prepared p = prepare(config);
  const Model model = load_checkpoint(config.effective_checkpoint());
  require_compatible(model, p.split, "checkpoint");
  const auto u = p.split.train.find_user(user);
  if (!u) throw std::runtime_error("user '" + user + "' is not in the data");
  const auto top = recommend(model, p.split, *u, k);
  out << "rank\titem\tscore\n";
  for (std::size_t r = 0; r < top.size(); ++r) {
    out << r + 1 << '\t' << p.split.train.item_id(top[r].first) << '\t' << top[r].second << '\n';
  }
  return 0;
}

int cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& output, std::ostream& out) {
  const Dataset d = make_synthetic(spec);
  auto file = open_output(output);
  write_interactions(file, d);
  out << "wrote " << d.num_interactions() << " interactions (" << d.num_users() << " users, " << d.num_items()
      << " items) to " << output.string() << '\n';
  return 0;
}

}  // namespace oncf::cli
