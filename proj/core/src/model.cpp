#include "oncf/model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "oncf/error.hpp"

namespace oncf {

namespace {

template <typename E>
struct NameTable {
  E value;
  const char* name;
};

constexpr NameTable<Variant> kVariants[] = {{Variant::MF, "mf"}, {Variant::FISM, "fism"}, {Variant::SVDPP, "svdpp"}};
constexpr NameTable<MergeKind> kMerges[] = {{MergeKind::Elementwise, "elementwise"},
                                            {MergeKind::Concat, "concat"},
                                            {MergeKind::Outer, "outer"},
                                            {MergeKind::Inner, "inner"},
                                            {MergeKind::None, "none"}};
constexpr NameTable<HeadKind> kHeads[] = {{HeadKind::Cnn, "cnn"},
                                          {HeadKind::Mlp, "mlp"},
                                          {HeadKind::Linear, "linear"},
                                          {HeadKind::Identity, "identity"},
                                          {HeadKind::Popularity, "itempop"}};
constexpr NameTable<FismNorm> kNorms[] = {{FismNorm::ExcludedSet, "excluded_set"}, {FismNorm::FullSet, "full_set"}};

template <typename E, std::size_t N>
std::string name_of(const NameTable<E> (&table)[N], E v) {
  for (const auto& entry : table) {
    if (entry.value == v) return entry.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_name(const NameTable<E> (&table)[N], const std::string& s, const char* key) {
  for (const auto& entry : table) {
    if (s == entry.name) return entry.value;
  }
  std::string allowed;
  for (const auto& entry : table) allowed += std::string(allowed.empty() ? "" : "|") + entry.name;
  throw ConfigError(std::string(key) + ": unknown value '" + s + "' (expected " + allowed + ")");
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::size_t parse_size(const std::string& key, const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a real number, got '" + s + "'");
  }
  return v;
}

void fill_normal(std::span<double> xs, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : xs) x = dist(rng);
}

void add_to(std::span<double> dst, std::span<const double> src, double scale = 1.0) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
}

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

}  // namespace

std::string to_string(Variant v) { return name_of(kVariants, v); }
std::string to_string(MergeKind m) { return name_of(kMerges, m); }
std::string to_string(HeadKind h) { return name_of(kHeads, h); }
std::string to_string(FismNorm n) { return name_of(kNorms, n); }
Variant parse_variant(const std::string& s) { return parse_name(kVariants, s, "variant"); }
MergeKind parse_merge(const std::string& s) { return parse_name(kMerges, s, "merge"); }
HeadKind parse_head(const std::string& s) { return parse_name(kHeads, s, "head"); }
FismNorm parse_fism_norm(const std::string& s) { return parse_name(kNorms, s, "fism_norm"); }

// --- ModelSpec ----------------------------------------------------------------

ModelSpec ModelSpec::convncf(Variant v, std::size_t K, std::size_t channels) {
  ModelSpec s;
  s.variant = v;
  s.merge = MergeKind::Outer;
  s.head = HeadKind::Cnn;
  s.K = K;
  s.channels = channels;
  return s;
}

ModelSpec ModelSpec::oncf_mlp(std::size_t K, std::size_t layers) {
  ModelSpec s;
  s.merge = MergeKind::Outer;
  s.head = HeadKind::Mlp;
  s.K = K;
  s.mlp_layers = layers;
  return s;
}

ModelSpec ModelSpec::gmf(std::size_t K) {
  ModelSpec s;
  s.merge = MergeKind::Elementwise;
  s.head = HeadKind::Linear;
  s.K = K;
  return s;
}

ModelSpec ModelSpec::jrl(std::size_t K, std::size_t layers) {
  ModelSpec s;
  s.merge = MergeKind::Elementwise;
  s.head = HeadKind::Mlp;
  s.K = K;
  s.mlp_layers = layers;
  return s;
}

ModelSpec ModelSpec::mlp(std::size_t K, std::size_t layers) {
  ModelSpec s;
  s.merge = MergeKind::Concat;
  s.head = HeadKind::Mlp;
  s.K = K;
  s.mlp_layers = layers;
  return s;
}

ModelSpec ModelSpec::shallow(Variant v, std::size_t K) {
  ModelSpec s;
  s.variant = v;
  s.merge = MergeKind::Inner;
  s.head = HeadKind::Identity;
  s.K = K;
  return s;
}

ModelSpec ModelSpec::itempop() {
  ModelSpec s;
  s.merge = MergeKind::None;
  s.head = HeadKind::Popularity;
  return s;
}

void ModelSpec::validate() const {
  if (K == 0) throw ConfigError("K: embedding size must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha: must be a finite non-negative number");
  const bool ok = (merge == MergeKind::Outer && (head == HeadKind::Cnn || head == HeadKind::Mlp)) ||
                  (merge == MergeKind::Elementwise && (head == HeadKind::Linear || head == HeadKind::Mlp)) ||
                  (merge == MergeKind::Concat && head == HeadKind::Mlp) ||
                  (merge == MergeKind::Inner && head == HeadKind::Identity) ||
                  (merge == MergeKind::None && head == HeadKind::Popularity);
  if (!ok) {
    throw ConfigError("head: '" + to_string(head) + "' cannot follow merge '" + to_string(merge) + "'");
  }
  if (head == HeadKind::Cnn) {
    if (!is_power_of_two(K) || K < 2) {
      throw ConfigError("K: the convolution tower needs a power of two >= 2, got " + std::to_string(K));
    }
    const std::size_t expected = static_cast<std::size_t>(std::countr_zero(K));
    if (depth != 0 && depth != expected) {
      throw ConfigError("depth: " + std::to_string(depth) + " layers do not reduce a " + std::to_string(K) +
                        "x" + std::to_string(K) + " map to 1x1 (need " + std::to_string(expected) + ")");
    }
    if (channels == 0) throw ConfigError("C: feature-map count must be positive");
  }
  if (head == HeadKind::Mlp) {
    if (mlp_layers < 1 || mlp_layers > 3) throw ConfigError("mlp_layers: must be in 1..3");
    if ((head_input_width() >> mlp_layers) == 0) throw ConfigError("mlp_layers: tower narrower than one unit");
  }
}

std::size_t ModelSpec::conv_depth() const {
  return depth != 0 ? depth : static_cast<std::size_t>(std::countr_zero(K));
}

std::size_t ModelSpec::head_input_width() const {
  switch (merge) {
    case MergeKind::Concat:
      return 2 * K;
    case MergeKind::Outer:
      return K * K;
    case MergeKind::None:
      return 0;
    default:
      return K;
  }
}

std::vector<std::size_t> ModelSpec::mlp_widths() const {
  std::vector<std::size_t> widths{head_input_width()};
  for (std::size_t l = 0; l < mlp_layers; ++l) widths.push_back(widths.back() / 2);
  return widths;
}

std::string ModelSpec::descriptor() const {
  std::ostringstream os;
  os << "variant=" << to_string(variant) << " merge=" << to_string(merge) << " head=" << to_string(head)
     << " K=" << K << " C=" << channels << " depth=" << depth << " mlp_layers=" << mlp_layers
     << " alpha=" << format_double(alpha) << " fism_norm=" << to_string(fism_norm);
  return os.str();
}

ModelSpec ModelSpec::parse_descriptor(const std::string& text) {
  ModelSpec s;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FormatError("spec descriptor: token '" + token + "' is not key=value");
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  for (const auto& [key, value] : kv) {
    if (key == "variant") s.variant = parse_variant(value);
    else if (key == "merge") s.merge = parse_merge(value);
    else if (key == "head") s.head = parse_head(value);
    else if (key == "K") s.K = parse_size(key, value);
    else if (key == "C") s.channels = parse_size(key, value);
    else if (key == "depth") s.depth = parse_size(key, value);
    else if (key == "mlp_layers") s.mlp_layers = parse_size(key, value);
    else if (key == "alpha") s.alpha = parse_real(key, value);
    else if (key == "fism_norm") s.fism_norm = parse_fism_norm(value);
    else throw FormatError("spec descriptor: unknown key '" + key + "'");
  }
  return s;
}

// --- initialisation -------------------------------------------------------------

constexpr double kConvBiasInit = 0.1;

Head init_head(const ModelSpec& spec, std::uint64_t seed, NetInit init) {
  spec.validate();
  Rng rng(seed);
  const bool random = init == NetInit::Random;
  switch (spec.head) {
    case HeadKind::Cnn: {
      ConvStack stack;
      const std::size_t C = spec.channels;
      for (std::size_t l = 0; l < spec.conv_depth(); ++l) {
        const std::size_t cin = l == 0 ? 1 : C;
        ConvLayer layer{Tensor4(2, 2, cin, C), random ? kConvBiasInit : 0.0};
        if (random) fill_normal(layer.kernel.values(), rng, std::sqrt(2.0 / (4.0 * static_cast<double>(cin))));
        stack.layers.push_back(std::move(layer));
      }
      stack.w = Vec(C);
      if (random) fill_normal(stack.w.values(), rng, std::sqrt(1.0 / static_cast<double>(C)));
      return stack;
    }
    case HeadKind::Mlp: {
      MlpHead head;
      const auto widths = spec.mlp_widths();
      for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer{Mat(widths[l + 1], widths[l]), Vec(widths[l + 1])};
        if (random) fill_normal(layer.W.values(), rng, std::sqrt(2.0 / static_cast<double>(widths[l])));
        head.layers.push_back(std::move(layer));
      }
      head.out = Vec(widths.back());
      if (random) fill_normal(head.out.values(), rng, std::sqrt(1.0 / static_cast<double>(widths.back())));
      return head;
    }
    case HeadKind::Linear:
      return LinearHead{Vec(spec.K, random ? 1.0 : 0.0)};
    case HeadKind::Identity:
      return IdentityHead{};
    case HeadKind::Popularity:
      return PopularityHead{};
  }
  return IdentityHead{};
}

Model make_model(const ModelSpec& spec, std::size_t num_users, std::size_t num_items, std::uint64_t seed,
                 NetInit init, double embed_stddev) {
  spec.validate();
  Model m;
  m.spec = spec;
  if (spec.head == HeadKind::Popularity) {
    m.tables.K = spec.K;
    m.tables.Q = Mat(0, spec.K);
    m.head = PopularityHead{Vec(num_items)};
    return m;
  }
  m.tables = init_tables(num_users, num_items, spec.K, spec.variant, derive_seed(seed, SeedPurpose::Init),
                         embed_stddev);
  m.tables.alpha = spec.alpha;
  m.tables.fism_norm = spec.fism_norm;
  m.head = init_head(spec, derive_seed(seed, SeedPurpose::NetInit), init);
  return m;
}

Model warm_start(const ModelSpec& spec, EmbeddingTables tables, std::uint64_t seed, NetInit init) {
  spec.validate();
  if (tables.K != spec.K) {
    throw ConfigError("K: pretrained tables have K=" + std::to_string(tables.K) + ", spec wants " +
                      std::to_string(spec.K));
  }
  check_tables(tables, spec.variant);
  Model m;
  m.spec = spec;
  m.tables = std::move(tables);
  m.tables.alpha = spec.alpha;
  m.tables.fism_norm = spec.fism_norm;
  // A shallow FISM/MF pretraining run may carry tables the target variant does not read.
  if (!uses_user_vectors(spec.variant)) m.tables.P.reset();
  if (!uses_history(spec.variant)) m.tables.Qp.reset();
  m.head = init_head(spec, derive_seed(seed, SeedPurpose::NetInit), init);
  return m;
}

void check_model(const Model& model) {
  const ModelSpec& spec = model.spec;
  spec.validate();
  if (spec.head == HeadKind::Popularity) {
    if (!std::holds_alternative<PopularityHead>(model.head)) throw ConfigError("head: expected popularity scores");
    return;
  }
  if (model.tables.K != spec.K) throw ConfigError("K: tables and spec disagree");
  check_tables(model.tables, spec.variant);
  const Head expected = init_head(spec, 0, NetInit::Zero);
  if (expected.index() != model.head.index()) throw ConfigError("head: parameters do not match '" + to_string(spec.head) + "'");
  std::vector<std::size_t> want;
  std::vector<std::size_t> have;
  for_each_head_block(expected, [&](const std::string&, auto values) { want.push_back(values.size()); });
  for_each_head_block(model.head, [&](const std::string&, auto values) { have.push_back(values.size()); });
  if (want != have) throw ConfigError("head: parameter shapes do not match the spec (C/depth/mlp_layers)");
}

// --- merge ----------------------------------------------------------------------

Merged merge(MergeKind kind, const Vec& user, const Vec& item) {
  if (user.size() != item.size()) {
    throw DimensionError("merge: user length " + std::to_string(user.size()) + " vs item length " +
                         std::to_string(item.size()));
  }
  const std::size_t K = user.size();
  switch (kind) {
    case MergeKind::Elementwise: {
      Vec out(K);
      for (std::size_t k = 0; k < K; ++k) out[k] = user[k] * item[k];
      return out;
    }
    case MergeKind::Concat: {
      Vec out(2 * K);
      for (std::size_t k = 0; k < K; ++k) {
        out[k] = user[k];
        out[K + k] = item[k];
      }
      return out;
    }
    case MergeKind::Outer:
      return outer(user, item);
    case MergeKind::Inner:
      return dot(user, item);
    case MergeKind::None:
      break;
  }
  throw ConfigError("merge: 'none' has no embedding merge");
}

Vec flatten(const Mat& m) { return Vec(std::vector<double>(m.values().begin(), m.values().end())); }

// --- ConvNCF tower ------------------------------------------------------------------

ConvForward convncf_forward(const ConvStack& stack, const Mat& E) {
  const std::size_t K = E.rows();
  if (E.cols() != K) throw DimensionError("convncf_forward: interaction map must be square");
  if (stack.depth() == 0 || K != (std::size_t{1} << stack.depth())) {
    throw ConfigError("depth: " + std::to_string(stack.depth()) + " conv layers cannot reduce a " +
                      std::to_string(K) + "x" + std::to_string(K) + " map to 1x1");
  }
  ConvForward out;
  out.cache.inputs.reserve(stack.depth() + 1);
  out.cache.pre.reserve(stack.depth());
  out.cache.inputs.push_back(as_feature_map(E));
  for (const auto& layer : stack.layers) {
    ConvOutput o = conv2x2s2_forward(out.cache.inputs.back(), layer.kernel, layer.bias);
    out.cache.pre.push_back(std::move(o.pre));
    out.cache.inputs.push_back(std::move(o.act));
  }
  const auto g = out.cache.inputs.back().values();
  out.g = Vec(std::vector<double>(g.begin(), g.end()));
  out.score = dot(stack.w, out.g);
  return out;
}

ConvBackward convncf_backward(const ConvStack& stack, const ConvForward& fwd, double d_score) {
  ConvBackward out;
  out.d_stack.layers.resize(stack.depth());
  out.d_stack.w = Vec(stack.channels());
  for (std::size_t c = 0; c < stack.channels(); ++c) out.d_stack.w[c] = d_score * fwd.g[c];

  Tensor3 d_act(1, 1, stack.channels());
  for (std::size_t c = 0; c < stack.channels(); ++c) d_act(0, 0, c) = d_score * stack.w[c];
  for (std::size_t l = stack.depth(); l-- > 0;) {
    ConvGrads g = conv2x2s2_backward(fwd.cache.inputs[l], stack.layers[l].kernel, fwd.cache.pre[l], d_act);
    out.d_stack.layers[l].kernel = std::move(g.d_kernel);
    out.d_stack.layers[l].bias = g.d_bias;
    d_act = std::move(g.d_input);
  }
  const std::size_t K = d_act.height();
  out.d_E = Mat(K, K, std::vector<double>(d_act.values().begin(), d_act.values().end()));
  return out;
}

// --- MLP head ------------------------------------------------------------------------

MlpForward mlp_forward(const MlpHead& head, const Vec& x) {
  MlpForward out;
  out.inputs.reserve(head.layers.size() + 1);
  out.inputs.push_back(x);
  for (const auto& layer : head.layers) {
    Vec pre = dense_forward(out.inputs.back(), layer.W, layer.b);
    out.inputs.push_back(relu(pre));
    out.pre.push_back(std::move(pre));
  }
  out.score = dot(head.out, out.inputs.back());
  return out;
}

MlpBackward mlp_backward(const MlpHead& head, const MlpForward& fwd, double d_score) {
  MlpBackward out;
  out.d_head.layers.resize(head.layers.size());
  const Vec& last = fwd.inputs.back();
  out.d_head.out = Vec(last.size());
  Vec d_act(last.size());
  for (std::size_t k = 0; k < last.size(); ++k) {
    out.d_head.out[k] = d_score * last[k];
    d_act[k] = d_score * head.out[k];
  }
  for (std::size_t l = head.layers.size(); l-- > 0;) {
    const Vec d_pre = relu_backward(fwd.pre[l], d_act);
    DenseGrads g = dense_backward(fwd.inputs[l], head.layers[l].W, d_pre);
    out.d_head.layers[l].W = std::move(g.d_W);
    out.d_head.layers[l].b = std::move(g.d_b);
    d_act = std::move(g.d_x);
  }
  out.d_x = std::move(d_act);
  return out;
}

// --- whole model -------------------------------------------------------------------

namespace {

void head_forward(const Model& model, ForwardState& st) {
  st.merged = merge(model.spec.merge, st.user, st.item);
  std::visit(
      [&](const auto& h) {
        using H = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<H, IdentityHead>) {
          st.score = std::get<double>(st.merged);
        } else if constexpr (std::is_same_v<H, LinearHead>) {
          st.score = dot(h.h, std::get<Vec>(st.merged));
        } else if constexpr (std::is_same_v<H, MlpHead>) {
          if (const Mat* E = std::get_if<Mat>(&st.merged)) {
            st.mlp = mlp_forward(h, flatten(*E));
          } else {
            st.mlp = mlp_forward(h, std::get<Vec>(st.merged));
          }
          st.score = st.mlp.score;
        } else if constexpr (std::is_same_v<H, ConvStack>) {
          st.conv = convncf_forward(h, std::get<Mat>(st.merged));
          st.score = st.conv.score;
        } else {
          throw ConfigError("head: popularity head has no embedding path");
        }
      },
      model.head);
}

double popularity_score(const PopularityHead& h, ItemId i) {
  if (i >= h.scores.size()) throw BoundsError("item " + std::to_string(i) + " out of range");
  return h.scores[i];
}

void accumulate(Head& dst, const Head& src) {
  std::vector<std::span<double>> targets;
  for_each_head_block(dst, [&](const std::string&, std::span<double> v) { targets.push_back(v); });
  std::size_t k = 0;
  for_each_head_block(src, [&](const std::string&, std::span<const double> v) { add_to(targets.at(k++), v); });
}

}  // namespace

ForwardState forward(const Model& model, UserId u, ItemId i, std::span<const ItemId> history) {
  ForwardState st;
  if (const auto* pop = std::get_if<PopularityHead>(&model.head)) {
    st.score = popularity_score(*pop, i);
    return st;
  }
  st.user = user_embedding(model.tables, model.spec.variant, u, i, history);
  st.item = item_embedding(model.tables, i);
  head_forward(model, st);
  return st;
}

double predict(const Model& model, UserId u, ItemId i, std::span<const ItemId> history) {
  return forward(model, u, i, history).score;
}

std::vector<double> score_items(const Model& model, UserId u, std::span<const ItemId> history,
                                std::span<const ItemId> candidates) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  if (const auto* pop = std::get_if<PopularityHead>(&model.head)) {
    for (ItemId i : candidates) scores.push_back(popularity_score(*pop, i));
    return scores;
  }
  const ItemId none = std::numeric_limits<ItemId>::max();
  const Vec shared_user = user_embedding(model.tables, model.spec.variant, u, none, history);
  const bool history_dependent = uses_history(model.spec.variant);
  ForwardState st;
  for (ItemId i : candidates) {
    const bool in_history =
        history_dependent && std::find(history.begin(), history.end(), i) != history.end();
    st.user = in_history ? user_embedding(model.tables, model.spec.variant, u, i, history) : shared_user;
    st.item = item_embedding(model.tables, i);
    head_forward(model, st);
    scores.push_back(st.score);
  }
  return scores;
}

Head zeros_like(const Head& head) {
  Head z = head;
  for_each_head_block(z, [](const std::string&, std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); });
  return z;
}

ModelGrads zero_grads(const Model& model) { return ModelGrads{EmbeddingGrads(model.tables.K), zeros_like(model.head)}; }

void backward(const Model& model, const ForwardState& fwd, UserId u, ItemId i, std::span<const ItemId> history,
              double d_score, ModelGrads& grads) {
  if (std::holds_alternative<PopularityHead>(model.head)) return;
  const std::size_t K = model.tables.K;
  Vec d_user(K);
  Vec d_item(K);

  std::visit(
      [&](const auto& h) {
        using H = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<H, IdentityHead>) {
          for (std::size_t k = 0; k < K; ++k) {
            d_user[k] = d_score * fwd.item[k];
            d_item[k] = d_score * fwd.user[k];
          }
        } else if constexpr (std::is_same_v<H, LinearHead>) {
          const Vec& m = std::get<Vec>(fwd.merged);
          add_to(std::get<LinearHead>(grads.head).h.values(), m.values(), d_score);
          for (std::size_t k = 0; k < K; ++k) {
            const double dm = d_score * h.h[k];
            d_user[k] = dm * fwd.item[k];
            d_item[k] = dm * fwd.user[k];
          }
        } else if constexpr (std::is_same_v<H, MlpHead>) {
          MlpBackward b = mlp_backward(h, fwd.mlp, d_score);
          Head tmp = std::move(b.d_head);
          accumulate(grads.head, tmp);
          const Vec& dx = b.d_x;
          if (model.spec.merge == MergeKind::Outer) {
            for (std::size_t r = 0; r < K; ++r) {
              for (std::size_t c = 0; c < K; ++c) {
                d_user[r] += dx[r * K + c] * fwd.item[c];
                d_item[c] += dx[r * K + c] * fwd.user[r];
              }
            }
          } else if (model.spec.merge == MergeKind::Concat) {
            for (std::size_t k = 0; k < K; ++k) {
              d_user[k] = dx[k];
              d_item[k] = dx[K + k];
            }
          } else {
            for (std::size_t k = 0; k < K; ++k) {
              d_user[k] = dx[k] * fwd.item[k];
              d_item[k] = dx[k] * fwd.user[k];
            }
          }
        } else if constexpr (std::is_same_v<H, ConvStack>) {
          ConvBackward b = convncf_backward(h, fwd.conv, d_score);
          Head tmp = std::move(b.d_stack);
          accumulate(grads.head, tmp);
          const Mat& dE = b.d_E;
          for (std::size_t r = 0; r < K; ++r) {
            const auto row = dE.row(r);
            double acc = 0.0;
            for (std::size_t c = 0; c < K; ++c) {
              acc += row[c] * fwd.item[c];
              d_item[c] += row[c] * fwd.user[r];
            }
            d_user[r] = acc;
          }
        }
      },
      model.head);

  scatter_user_gradient(grads.embeddings, model.tables, model.spec.variant, u, i, history, d_user);
  scatter_item_gradient(grads.embeddings, i, d_item);
}

// --- parameter counting ----------------------------------------------------------------

ParamCount param_count(const ModelSpec& spec, std::size_t num_users, std::size_t num_items) {
  spec.validate();
  ParamCount pc;
  const std::size_t K = spec.K;
  switch (spec.head) {
    case HeadKind::Cnn: {
      const std::size_t C = spec.channels;
      const std::size_t depth = spec.conv_depth();
      pc.tower_weights = 4 * C + (depth - 1) * 4 * C * C;
      pc.head_total = pc.tower_weights + depth + C;
      break;
    }
    case HeadKind::Mlp: {
      const auto widths = spec.mlp_widths();
      for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        pc.tower_weights += widths[l] * widths[l + 1];
        pc.head_total += widths[l] * widths[l + 1] + widths[l + 1];
      }
      pc.head_total += widths.back();
      break;
    }
    case HeadKind::Linear:
      pc.head_total = K;
      break;
    case HeadKind::Identity:
    case HeadKind::Popularity:
      break;
  }
  if (spec.head != HeadKind::Popularity) {
    pc.embeddings = num_items * K;
    if (uses_user_vectors(spec.variant)) pc.embeddings += num_users * K;
    if (uses_history(spec.variant)) pc.embeddings += num_items * K;
  }
  return pc;
}

}  // namespace oncf
