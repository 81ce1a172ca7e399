// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "oncf/evaluation.hpp"
#include "oncf/gradcheck.hpp"
#include "oncf/synthetic.hpp"
#include "oncf/tensor.hpp"
#include "oncf/training.hpp"
#include "run_config.hpp"

using namespace oncf;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kRootSeed = 42;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- 1 -----------------------------------------------------------------------

Outcome parameter_counts() {
  std::ostringstream conv, mlp;
  cli::cmd_paramcount(cli::load_config(std::nullopt, {"--K=64", "--C=32", "--depth=6"}), conv);
  cli::cmd_paramcount(cli::load_config(std::nullopt, {"--K=64", "--head=mlp", "--mlp_layers=1"}), mlp);
  const ParamCount c = param_count(ModelSpec::convncf(Variant::MF, 64, 32));
  const ParamCount m = param_count(ModelSpec::oncf_mlp(64, 1));
  Outcome o;
  o.pass = c.head_total == 20646 && m.tower_weights == 8388608 &&
           conv.str().find("head_total     20646\n") != std::string::npos &&
           mlp.str().find("tower_weights  8388608\n") != std::string::npos;
  o.detail = "convncf head " + std::to_string(c.head_total) + ", oncf-mlp tower " + std::to_string(m.tower_weights);
  return o;
}

// --- 2 -----------------------------------------------------------------------

Outcome gradient_suite() {
  const std::vector<ItemId> history{0, 3, 5, 8, 11};
  const TrainTriple triple{2, 5, 7};
  ModelSpec jrl = ModelSpec::jrl(8, 2);
  ModelSpec mlp = ModelSpec::mlp(8, 2);
  ModelSpec oncf_mlp = ModelSpec::oncf_mlp(8, 2);
  const std::vector<std::pair<std::string, ModelSpec>> specs{
      {"convncf-mf", ModelSpec::convncf(Variant::MF, 8, 4)},
      {"convncf-fism", ModelSpec::convncf(Variant::FISM, 8, 4)},
      {"convncf-svd++", ModelSpec::convncf(Variant::SVDPP, 8, 4)},
      {"gmf", ModelSpec::gmf(8)},
      {"jrl", jrl},
      {"mlp", mlp},
      {"oncf-mlp", oncf_mlp},
  };
  Outcome o;
  std::size_t checked = 0, skipped = 0;
  GradCheckOptions opt;
  opt.tol = 1e-4;
  for (const auto& [name, spec] : specs) {
    Model m = make_model(spec, 4, 12, kRootSeed, NetInit::Random, 0.5);
    Rng rng(derive_seed(kRootSeed, SeedPurpose::GradCheck));
    std::normal_distribution<double> n(0.0, 0.5);
    for_each_head_block(m.head, [&](const std::string& block, std::span<double> v) {
      for (auto& x : v) x = n(rng);
      if (block.ends_with("bias") || block.ends_with(".b")) {
        for (auto& x : v) x = std::abs(x) + 0.1;
      }
    });
    const GradReport r = finite_diff_check(m, triple, history, opt);
    for (const auto& s : r.sections) {
      checked += s.checked;
      skipped += s.skipped;
    }
    if (!r.pass) {
      o.pass = false;
      o.detail += name + " failed; ";
    }
  }
  const Model big = make_model(ModelSpec::convncf(Variant::MF, 64, 32), 4, 12, kRootSeed, NetInit::Random, 0.5);
  GradCheckOptions sampled = opt;
  sampled.sample = 40;
  const GradReport r = finite_diff_check(big, triple, history, sampled);
  for (const auto& s : r.sections) {
    checked += s.checked;
    skipped += s.skipped;
  }
  if (!r.pass) {
    o.pass = false;
    o.detail += "K=64 convncf failed; ";
  }
  o.detail += std::to_string(checked) + " coordinates checked, " + std::to_string(skipped) + " kink skips";
  return o;
}

// --- 3 -----------------------------------------------------------------------

Outcome kernel_oracles() {
  Rng rng(derive_seed(kRootSeed, SeedPurpose::Init));
  std::normal_distribution<double> n(0.0, 1.0);
  double worst_outer = 0.0, worst_conv = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = std::size_t{1} << (1 + trial % 6);
    std::vector<double> a(K), b(K);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const Mat E = outer(a, b);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) worst_outer = std::max(worst_outer, std::abs(E(i, j) - a[i] * b[j]));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t side = std::size_t{2} << (trial % 4);
    const std::size_t cin = 1 + trial % 5, cout = 1 + (trial / 5) % 6;
    Tensor3 in(side, side, cin);
    Tensor4 k(2, 2, cin, cout);
    for (auto& x : in.values()) x = n(rng);
    for (auto& x : k.values()) x = n(rng);
    const double bias = n(rng);
    const ConvOutput out = conv2x2s2_forward(in, k, bias);
    for (std::size_t i = 0; i < side / 2; ++i)
      for (std::size_t j = 0; j < side / 2; ++j)
        for (std::size_t c = 0; c < cout; ++c) {
          double acc = bias;
          for (std::size_t p = 0; p < 2; ++p)
            for (std::size_t q = 0; q < 2; ++q)
              for (std::size_t d = 0; d < cin; ++d) acc += k(p, q, d, c) * in(2 * i + p, 2 * j + q, d);
          worst_conv = std::max(worst_conv, std::abs(out.pre(i, j, c) - acc));
          worst_conv = std::max(worst_conv, std::abs(out.act(i, j, c) - std::max(acc, 0.0)));
        }
  }
  Outcome o;
  o.pass = worst_outer <= 1e-12 && worst_conv <= 1e-12;
  o.detail = fmt("max |outer error| %.3g", worst_outer) + fmt(", max |conv error| %.3g", worst_conv);
  return o;
}

// --- 4 -----------------------------------------------------------------------

Outcome receptive_field() {
  Head head = init_head(ModelSpec::convncf(Variant::MF, 64, 32), kRootSeed);
  Rng rng(derive_seed(kRootSeed, SeedPurpose::NetInit));
  std::uniform_real_distribution<double> pos(0.01, 0.1);
  for_each_head_block(head, [&](const std::string&, std::span<double> v) {
    for (auto& x : v) x = pos(rng);
  });
  std::uniform_real_distribution<double> entry(0.1, 1.0);
  Mat E(64, 64);
  for (auto& x : E.values()) x = entry(rng);
  const ConvStack& s = std::get<ConvStack>(head);
  const ConvBackward b = convncf_backward(s, convncf_forward(s, E), 1.0);
  std::size_t positive = 0;
  double smallest = INFINITY;
  for (double g : b.d_E.values()) {
    positive += g > 0.0;
    smallest = std::min(smallest, g);
  }
  // Finite-difference spot checks along the diagonal and in the corners.
  std::size_t fd_ok = 0;
  const std::vector<std::pair<std::size_t, std::size_t>> probes{{0, 0}, {0, 63}, {63, 0}, {63, 63}, {17, 42}, {31, 32}};
  for (auto [x, y] : probes) {
    Mat P = E;
    const double h = 1e-4;
    P(x, y) += h;
    const double up = convncf_forward(s, P).score;
    P(x, y) -= 2 * h;
    const double down = convncf_forward(s, P).score;
    const double fd = (up - down) / (2 * h);
    fd_ok += fd > 0.0 && std::abs(fd - b.d_E(x, y)) <= 1e-4 * std::abs(fd);
  }
  Outcome o;
  o.pass = positive == 64 * 64 && fd_ok == probes.size();
  o.detail = std::to_string(positive) + "/4096 entries positive, min gradient " + fmt("%.3g", smallest) + ", " +
             std::to_string(fd_ok) + "/" + std::to_string(probes.size()) + " finite-difference probes agree";
  return o;
}

// --- desk-scale fixture ----------------------------------------------------

const SplitSet& fixture() {
  static const SplitSet split = [] {
    SyntheticSpec s;  // 200 users, 300 items, rank 8, 15..25 interactions each
    s.seed = derive_seed(kRootSeed, SeedPurpose::Synthetic);
    return split_leave_latest_out(make_synthetic(s), derive_seed(kRootSeed, SeedPurpose::Split));
  }();
  return split;
}

// Settings for the desk-scale runs: K=32 (five conv layers), pretrained
// embeddings, lr_net 0.05 and lambda3 = 1, all inside the tuning grids.
TrainConfig desk_config() {
  TrainConfig c;
  c.seed = kRootSeed;
  c.epochs = 30;
  c.pretrain = true;
  c.lr_net = 0.05;
  c.lambda3 = 1.0;
  c.lambda4 = 1.0;
  c.eval_validation = false;
  c.eval_test = true;
  c.eval_from_epoch = 21;
  return c;
}

constexpr std::size_t kDeskK = 32;

double last10_hr10(const TrainHistory& h) { return rolling_last10(h.results(EvalSplit::Test)).at.at(10).hr; }

const EmbeddingTables& pretrained_mf() {
  static const EmbeddingTables t = pretrain(ModelSpec::convncf(Variant::MF, kDeskK, 32), fixture(), desk_config());
  return t;
}

struct ConvRun {
  double hr10 = 0.0;
  double val_ndcg10_epoch5 = 0.0;
  double tied_users = 0.0;  // fraction of test users whose candidates all score the same
};

ConvRun run_convncf(std::size_t C, bool pretrained, std::size_t epochs) {
  TrainConfig c = desk_config();
  c.epochs = epochs;
  if (epochs < c.eval_from_epoch) c.eval_test = false;
  const ModelSpec spec = ModelSpec::convncf(Variant::MF, kDeskK, C);
  const SplitSet& split = fixture();
  Model m = pretrained ? warm_start(spec, pretrained_mf(), c.seed, c.net_init)
                       : make_model(spec, split.train.num_users(), split.train.num_items(), c.seed, c.net_init,
                                    c.init_stddev);
  ConvRun r;
  const TrainHistory h = train(m, split, c, [&](const Model& model, std::size_t epoch) {
    if (epoch == 5) r.val_ndcg10_epoch5 = evaluate(model, split, EvalSplit::Validation).at.at(10).ndcg;
  });
  if (c.eval_test) r.hr10 = last10_hr10(h);
  std::size_t tied = 0;
  for (const HeldOut& t : split.test) {
    std::vector<ItemId> cands{t.item};
    cands.insert(cands.end(), split.eval_negatives[t.user].begin(), split.eval_negatives[t.user].end());
    const auto scores = score_items(m, t.user, split.user_history(t.user, true), cands);
    tied += std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores.front(); });
  }
  r.tied_users = static_cast<double>(tied) / static_cast<double>(split.test.size());
  return r;
}

const ConvRun& convncf_c32() {
  static const ConvRun r = run_convncf(32, true, 30);
  return r;
}

// --- 5 -----------------------------------------------------------------------

Outcome bpr_sanity() {
  const SplitSet& split = fixture();
  TrainConfig c;
  c.seed = kRootSeed;
  c.epochs = 1;
  c.lambda1 = c.lambda2 = c.lambda3 = c.lambda4 = 0.0;
  c.net_init = NetInit::Zero;
  c.eval_validation = c.eval_test = false;
  Model m = make_model(ModelSpec::convncf(Variant::MF, 64, 32), split.train.num_users(), split.train.num_items(),
                       c.seed, c.net_init, c.init_stddev);
  const TrainHistory h = train(m, split, c);
  const double err = std::abs(h.first_batch_loss - std::log(2.0));
  Outcome o;
  o.pass = err <= 1e-6;
  o.detail = fmt("first-batch loss %.12f", h.first_batch_loss) + fmt(", |loss - ln 2| = %.3g", err);
  return o;
}

// --- 6 -----------------------------------------------------------------------

Outcome metric_values() {
  const double v = ndcg_at_k(2, 10);
  Rng rng(derive_seed(kRootSeed, SeedPurpose::Negatives));
  std::size_t violations = 0;
  for (int f = 0; f < 1000; ++f) {
    std::vector<std::size_t> ranks(1 + rng() % 100);
    for (auto& r : ranks) r = 1 + rng() % (rng() % 2 ? 25 : 1000);
    const EvalResult e = summarize_ranks(ranks);
    const Metrics &a = e.at.at(5), &b = e.at.at(10), &c = e.at.at(20);
    violations += !(a.hr <= b.hr && b.hr <= c.hr && a.ndcg <= b.ndcg && b.ndcg <= c.ndcg);
    violations += !(a.ndcg <= a.hr && b.ndcg <= b.hr && c.ndcg <= c.hr);
  }
  Outcome o;
  o.pass = std::abs(v - 0.6309298) <= 1e-6 && violations == 0;
  o.detail = fmt("ndcg_at_k(2, 10) = %.7f", v) + ", " + std::to_string(violations) + " violations in 1000 fixtures";
  return o;
}

// --- 7 -----------------------------------------------------------------------

Outcome desk_learning() {
  const SplitSet& split = fixture();
  TrainConfig c = desk_config();

  Model pop = make_model(ModelSpec::itempop(), split.train.num_users(), split.train.num_items(), c.seed);
  const double pop_hr = last10_hr10(train(pop, split, c));

  TrainConfig mf_cfg = c;
  mf_cfg.pretrain = false;
  Model mf = build_model(ModelSpec::shallow(Variant::MF, kDeskK), split, mf_cfg);
  const double mf_hr = last10_hr10(train(mf, split, mf_cfg));

  const ConvRun& conv = convncf_c32();
  const ConvRun scratch = run_convncf(32, false, 5);

  const bool a = mf_hr >= pop_hr + 0.10 && conv.hr10 >= pop_hr + 0.10;
  const bool b = conv.hr10 >= mf_hr - 0.02;
  const bool cc = conv.val_ndcg10_epoch5 >= scratch.val_ndcg10_epoch5;
  const bool d = conv.tied_users == 0.0;
  Outcome o;
  o.pass = a && b && cc && d;
  o.detail = fmt("HR@10 itempop %.4f", pop_hr) + fmt(", mf-bpr %.4f", mf_hr) + fmt(", convncf-mf %.4f", conv.hr10) +
             fmt("; epoch-5 val NDCG@10 pretrained %.4f", conv.val_ndcg10_epoch5) +
             fmt(" vs scratch %.4f", scratch.val_ndcg10_epoch5) + fmt("; all-tied users %.3f", conv.tied_users) +
             " [a " + (a ? "ok" : "x") + ", b " + (b ? "ok" : "x") + ", c " + (cc ? "ok" : "x") + ", d " +
             (d ? "ok" : "x") + "]";
  return o;
}

// --- 8 -----------------------------------------------------------------------

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "oncf_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  SyntheticSpec s;
  s.users = 60;
  s.items = 90;
  s.seed = derive_seed(kRootSeed, SeedPurpose::Synthetic);
  std::ostringstream log;
  cli::cmd_synth(s, root / "data.tsv", log);

  auto run = [&](const std::string& name) {
    const fs::path out = root / name;
    const cli::RunConfig cfg = cli::load_config(
        std::nullopt, {"--data=" + (root / "data.tsv").string(), "--out=" + out.string(), "--seed=42", "--K=8",
                       "--C=4", "--epochs=4", "--epochs_pretrain=2", "--eval_negatives=50", "--variant=svdpp"});
    cli::cmd_ingest(cfg, log);
    cli::cmd_pretrain(cfg, log);
    cli::RunConfig warm = cfg;
    warm.pretrained = out / "pretrain.ckpt";
    cli::cmd_train(warm, log);
    return out;
  };
  const fs::path a = run("a");
  const fs::path b = run("b");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  Outcome o;
  std::size_t identical = 0;
  const std::vector<std::string> files{"manifest.tsv", "pretrain.ckpt", "pretrain_metrics.csv", "model.ckpt",
                                       "metrics.csv"};
  for (const auto& f : files) {
    const std::string x = slurp(a / f), y = slurp(b / f);
    const bool same = !x.empty() && x == y;
    identical += same;
    if (!same) o.detail += f + " differs; ";
  }
  o.pass = identical == files.size();
  o.detail += std::to_string(identical) + "/" + std::to_string(files.size()) + " artifacts byte-identical";
  fs::remove_all(root);
  return o;
}

// --- 9 -----------------------------------------------------------------------

Outcome feature_map_sweep() {
  const double c32 = convncf_c32().hr10;
  const double c8 = run_convncf(8, true, 30).hr10;
  const double c2 = run_convncf(2, true, 30).hr10;
  const double spread = std::max({c2, c8, c32}) - std::min({c2, c8, c32});
  Outcome o;
  o.pass = spread <= 0.05;
  o.detail = fmt("HR@10 C=2 %.4f", c2) + fmt(", C=8 %.4f", c8) + fmt(", C=32 %.4f", c32) + fmt(", spread %.4f", spread);
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "parameter counts", parameter_counts},
      {2, "gradient suite", gradient_suite},
      {3, "kernel oracles", kernel_oracles},
      {4, "receptive-field totality", receptive_field},
      {5, "BPR sanity at zero-initialized head", bpr_sanity},
      {6, "metric unit values", metric_values},
      {7, "desk-scale learning", desk_learning},
      {8, "pipeline determinism", determinism},
      {9, "feature-map sweep", feature_map_sweep},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s (%s; %.1fs)\n", c.id, o.pass ? "PASS" : "FAIL", c.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
