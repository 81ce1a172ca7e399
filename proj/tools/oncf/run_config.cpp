#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "oncf/error.hpp"
#include "oncf/rng.hpp"

namespace oncf::cli {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); }

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad(key, "cannot parse '" + s + "' as a number");
  return v;
}

std::size_t to_size(const std::string& key, const std::string& s) { return parse_number<std::size_t>(key, s); }
double to_real(const std::string& key, const std::string& s) { return parse_number<double>(key, s); }

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad(key, "expected true or false, got '" + s + "'");
}

template <typename Fn>
auto named(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    // Spec parsers report their own key names; keep them but make sure ours is present.
    const std::string what = e.what();
    if (what.rfind(key + ":", 0) == 0) throw;
    throw ConfigError(key + ": " + what);
  }
}

struct Key {
  const char* fallback;  // default as documented
  const char* doc;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
};

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = {
      {"data", {"(required)", "interaction file, user<TAB>item<TAB>timestamp",
                [](RunConfig& c, const std::string&, const std::string& v) { c.data = v; }}},
      {"out", {"out", "output directory",
               [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }}},
      {"variant", {"mf", "user embedding: mf | fism | svdpp",
                   [](RunConfig& c, const std::string& k, const std::string& v) {
                     c.spec.variant = named(k, [&] { return parse_variant(v); });
                   }}},
      {"merge", {"outer", "merge function: outer | elementwise | concat | inner | none",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   c.spec.merge = named(k, [&] { return parse_merge(v); });
                 }}},
      {"head", {"cnn", "prediction head: cnn | mlp | linear | identity | itempop",
                [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.spec.head = named(k, [&] { return parse_head(v); });
                }}},
      {"K", {"64", "embedding size (power of two for cnn heads)",
             [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.K = to_size(k, v); }}},
      {"C", {"32", "feature maps per convolution layer",
             [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.channels = to_size(k, v); }}},
      {"depth", {"0", "convolution layers; 0 derives log2(K)",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.depth = to_size(k, v); }}},
      {"mlp_layers", {"1", "hidden layers of an mlp head (1..3)",
                      [](RunConfig& c, const std::string& k, const std::string& v) {
                        c.spec.mlp_layers = to_size(k, v);
                      }}},
      {"alpha", {"0.5", "history normalisation exponent (fism, svdpp)",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.alpha = to_real(k, v); }}},
      {"fism_norm", {"excluded_set", "history count: excluded_set | full_set",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                       c.spec.fism_norm = named(k, [&] { return parse_fism_norm(v); });
                     }}},
      {"lr_embed", {"0.005", "Adagrad learning rate of the embedding tables",
                    [](RunConfig& c, const std::string& k, const std::string& v) {
                      c.train.lr_embed = to_real(k, v);
                    }}},
      {"lr_net", {"0.01", "Adagrad learning rate of the head",
                  [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr_net = to_real(k, v); }}},
      {"lambda1", {"1e-6", "L2 on user-side tables (P, Qp)",
                   [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda1 = to_real(k, v); }}},
      {"lambda2", {"1e-6", "L2 on the item table Q",
                   [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda2 = to_real(k, v); }}},
      {"lambda3", {"10", "L2 on hidden layers (conv kernels and biases, mlp W and b)",
                   [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda3 = to_real(k, v); }}},
      {"lambda4", {"1", "L2 on the output weights w; the most sensitive of the four",
                   [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda4 = to_real(k, v); }}},
      {"batch_size", {"256", "triples per Adagrad step",
                      [](RunConfig& c, const std::string& k, const std::string& v) {
                        c.train.batch_size = to_size(k, v);
                      }}},
      {"epochs", {"30", "training epochs",
                  [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_size(k, v); }}},
      {"seed", {"42", "root seed for every random stream",
                [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.train.seed = parse_number<std::uint64_t>(k, v);
                  c.gradcheck.seed = c.train.seed;
                }}},
      {"split_seed", {"(derived from seed)", "seed of the leave-latest-out split and evaluation negatives",
                      [](RunConfig& c, const std::string& k, const std::string& v) {
                        c.split_seed = parse_number<std::uint64_t>(k, v);
                      }}},
      {"pretrain", {"false", "warm-start embeddings from the shallow counterpart",
                    [](RunConfig& c, const std::string& k, const std::string& v) { c.train.pretrain = to_bool(k, v); }}},
      {"pretrained", {"(none)", "shallow checkpoint to warm-start from instead of pretraining in-process",
                      [](RunConfig& c, const std::string&, const std::string& v) { c.pretrained = v; }}},
      {"epochs_pretrain", {"20", "epochs of the shallow pretraining run",
                           [](RunConfig& c, const std::string& k, const std::string& v) {
                             c.train.epochs_pretrain = to_size(k, v);
                           }}},
      {"lambda_pretrain", {"1e-6", "lambda1 and lambda2 during pretraining",
                           [](RunConfig& c, const std::string& k, const std::string& v) {
                             c.train.lambda_pretrain = to_real(k, v);
                           }}},
      {"adagrad_epsilon", {"1e-6", "Adagrad denominator offset",
                           [](RunConfig& c, const std::string& k, const std::string& v) {
                             c.train.adagrad_epsilon = to_real(k, v);
                           }}},
      {"net_init", {"random", "head initialisation: random | zero",
                    [](RunConfig& c, const std::string& k, const std::string& v) {
                      if (v == "random") c.train.net_init = NetInit::Random;
                      else if (v == "zero") c.train.net_init = NetInit::Zero;
                      else bad(k, "expected random or zero, got '" + v + "'");
                    }}},
      {"init_stddev", {"0.01", "standard deviation of the Gaussian embedding init",
                       [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.train.init_stddev = to_real(k, v);
                       }}},
      {"threads", {"1", "evaluation worker threads",
                   [](RunConfig& c, const std::string& k, const std::string& v) { c.train.threads = to_size(k, v); }}},
      {"eval_splits", {"val,test", "splits evaluated after each epoch: val | test | val,test | none",
                       [](RunConfig& c, const std::string& k, const std::string& v) {
                         if (v == "val,test" || v == "test,val") c.train.eval_validation = c.train.eval_test = true;
                         else if (v == "val") c.train.eval_validation = true, c.train.eval_test = false;
                         else if (v == "test") c.train.eval_validation = false, c.train.eval_test = true;
                         else if (v == "none") c.train.eval_validation = c.train.eval_test = false;
                         else bad(k, "expected val, test, val,test or none, got '" + v + "'");
                       }}},
      {"eval_from_epoch", {"1", "first epoch that is evaluated",
                           [](RunConfig& c, const std::string& k, const std::string& v) {
                             c.train.eval_from_epoch = to_size(k, v);
                           }}},
      {"min_item", {"1", "drop items with fewer interactions",
                    [](RunConfig& c, const std::string& k, const std::string& v) { c.min_item = to_size(k, v); }}},
      {"min_user", {"1", "then drop users with fewer interactions",
                    [](RunConfig& c, const std::string& k, const std::string& v) { c.min_user = to_size(k, v); }}},
      {"eval_negatives", {"999", "sampled negatives per evaluated user",
                          [](RunConfig& c, const std::string& k, const std::string& v) {
                            c.eval_negatives = to_size(k, v);
                          }}},
      {"checkpoint", {"<out>/model.ckpt", "model read by eval and recommend",
                      [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; }}},
      {"gradcheck_step", {"1e-5", "central-difference step",
                          [](RunConfig& c, const std::string& k, const std::string& v) {
                            c.gradcheck.step = to_real(k, v);
                          }}},
      {"gradcheck_tol", {"1e-4", "relative tolerance",
                         [](RunConfig& c, const std::string& k, const std::string& v) {
                           c.gradcheck.tol = to_real(k, v);
                         }}},
      {"gradcheck_abs_floor", {"1e-8", "absolute error always accepted",
                               [](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.gradcheck.abs_floor = to_real(k, v);
                               }}},
      {"gradcheck_sample", {"200", "coordinates checked per parameter section",
                            [](RunConfig& c, const std::string& k, const std::string& v) {
                              c.gradcheck.sample = to_size(k, v);
                            }}},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::uint64_t RunConfig::effective_split_seed() const {
  return split_seed ? *split_seed : derive_seed(train.seed, SeedPurpose::Split);
}

std::filesystem::path RunConfig::effective_checkpoint() const {
  return checkpoint.empty() ? out / "model.ckpt" : checkpoint;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  auto it = keys().find(key);
  if (it == keys().end()) throw ConfigError(key + ": unknown key");
  it->second.set(config, key, value);
}

void read_config(std::istream& in, RunConfig& config) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    try {
      apply_setting(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("config: cannot open " + file->string());
    read_config(in, config);
  }
  for (const auto& arg : overrides) {
    if (arg.rfind("--", 0) != 0 || arg.find('=') == std::string::npos) {
      throw ConfigError("override '" + arg + "': expected --key=value");
    }
    const auto eq = arg.find('=');
    apply_setting(config, arg.substr(2, eq - 2), arg.substr(eq + 1));
  }
  return config;
}

std::string describe_keys() {
  std::ostringstream os;
  for (const auto& [name, key] : keys()) {
    os << "  " << name;
    for (std::size_t pad = name.size(); pad < 20; ++pad) os << ' ';
    os << key.doc << " [" << key.fallback << "]\n";
  }
  return os.str();
}

}  // namespace oncf::cli
