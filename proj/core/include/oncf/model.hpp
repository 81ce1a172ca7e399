#pragma once

// Merge-function x head dispatch. Every architecture is user embedding ->
// merge(f_U, f_I) -> head -> scalar score:
//
//   ConvNCF   OUTER       + CNN      (2x2 stride-2 tower down to 1x1xC, then w)
//   ONCF-mlp  OUTER       + MLP      (interaction map flattened row-major)
//   GMF       ELEMENTWISE + LINEAR
//   JRL       ELEMENTWISE + MLP
//   MLP       CONCAT      + MLP
//   MF/FISM/SVD++ (shallow)  INNER + IDENTITY
//   ItemPop   NONE        + POPULARITY
//
// Each head exposes a forward pass that records what its backward pass needs.

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "oncf/embeddings.hpp"
#include "oncf/rng.hpp"
#include "oncf/tensor.hpp"

namespace oncf {

enum class MergeKind { Elementwise, Concat, Outer, Inner, None };
enum class HeadKind { Cnn, Mlp, Linear, Identity, Popularity };

std::string to_string(Variant v);
std::string to_string(MergeKind m);
std::string to_string(HeadKind h);
std::string to_string(FismNorm n);
Variant parse_variant(const std::string& s);
MergeKind parse_merge(const std::string& s);
HeadKind parse_head(const std::string& s);
FismNorm parse_fism_norm(const std::string& s);

struct ModelSpec {
  Variant variant = Variant::MF;
  MergeKind merge = MergeKind::Outer;
  HeadKind head = HeadKind::Cnn;
  std::size_t K = 64;
  std::size_t channels = 32;   // feature maps per conv layer
  std::size_t depth = 0;       // conv layers; 0 means log2(K)
  std::size_t mlp_layers = 1;  // hidden layers of an MLP head, 1..3
  double alpha = 0.5;
  FismNorm fism_norm = FismNorm::ExcludedSet;

  static ModelSpec convncf(Variant v, std::size_t K, std::size_t channels);
  static ModelSpec oncf_mlp(std::size_t K, std::size_t layers);
  static ModelSpec gmf(std::size_t K);
  static ModelSpec jrl(std::size_t K, std::size_t layers);
  static ModelSpec mlp(std::size_t K, std::size_t layers);
  static ModelSpec shallow(Variant v, std::size_t K);
  static ModelSpec itempop();

  // Throws ConfigError naming the offending key.
  void validate() const;
  std::size_t conv_depth() const;
  std::size_t head_input_width() const;
  std::vector<std::size_t> mlp_widths() const;  // input width, then each hidden width

  // Space-separated key=value tokens; parse_descriptor(descriptor()) == *this.
  std::string descriptor() const;
  static ModelSpec parse_descriptor(const std::string& text);

  bool operator==(const ModelSpec&) const = default;
};

struct ConvLayer {
  Tensor4 kernel;  // 2 x 2 x c_in x C
  double bias = 0.0;
  bool operator==(const ConvLayer&) const = default;
};

struct ConvStack {
  std::vector<ConvLayer> layers;
  Vec w;  // prediction weights over the final 1x1xC map
  std::size_t depth() const noexcept { return layers.size(); }
  std::size_t channels() const noexcept { return w.size(); }
  bool operator==(const ConvStack&) const = default;
};

struct DenseLayer {
  Mat W;
  Vec b;
  bool operator==(const DenseLayer&) const = default;
};

struct MlpHead {
  std::vector<DenseLayer> layers;  // ReLU after each
  Vec out;                         // linear projection of the last hidden layer
  bool operator==(const MlpHead&) const = default;
};

struct LinearHead {
  Vec h;
  bool operator==(const LinearHead&) const = default;
};

struct IdentityHead {
  bool operator==(const IdentityHead&) const = default;
};

struct PopularityHead {
  Vec scores;  // per item
  bool operator==(const PopularityHead&) const = default;
};

using Head = std::variant<IdentityHead, ConvStack, MlpHead, LinearHead, PopularityHead>;

struct Model {
  ModelSpec spec;
  EmbeddingTables tables;
  Head head;
  bool operator==(const Model&) const = default;
};

enum class NetInit { Random, Zero };

// He-normal kernels and hidden weights, zero biases, N(0, 1/fan_in) output
// weights; GMF's linear head starts at all ones. Zero init leaves every head
// parameter at 0 (GMF included).
Head init_head(const ModelSpec& spec, std::uint64_t seed, NetInit init = NetInit::Random);

// Fresh embeddings and head.
Model make_model(const ModelSpec& spec, std::size_t num_users, std::size_t num_items, std::uint64_t seed,
                 NetInit init = NetInit::Random, double embed_stddev = 0.01);

// Pretrained embeddings with a freshly initialised head.
Model warm_start(const ModelSpec& spec, EmbeddingTables tables, std::uint64_t seed,
                 NetInit init = NetInit::Random);

// Checks that the head and tables have the shapes `spec` demands.
void check_model(const Model& model);

// --- merge -------------------------------------------------------------------

using Merged = std::variant<double, Vec, Mat>;

Merged merge(MergeKind kind, const Vec& user, const Vec& item);

// Row-major flattening of a square interaction map.
Vec flatten(const Mat& m);

// --- ConvNCF tower ------------------------------------------------------------

struct ConvCache {
  std::vector<Tensor3> inputs;  // inputs[0] = E as K x K x 1, inputs[l] = output of layer l
  std::vector<Tensor3> pre;     // pre-activations per layer
};

struct ConvForward {
  ConvCache cache;
  Vec g;  // final 1 x 1 x C map
  double score = 0.0;
};

ConvForward convncf_forward(const ConvStack& stack, const Mat& E);

struct ConvBackward {
  ConvStack d_stack;  // same shapes as the stack
  Mat d_E;
};

ConvBackward convncf_backward(const ConvStack& stack, const ConvForward& fwd, double d_score);

// --- MLP head --------------------------------------------------------------

struct MlpForward {
  std::vector<Vec> inputs;  // inputs[l] feeds layer l; inputs.back() is the last activation
  std::vector<Vec> pre;
  double score = 0.0;
};

MlpForward mlp_forward(const MlpHead& head, const Vec& x);

struct MlpBackward {
  MlpHead d_head;
  Vec d_x;
};

MlpBackward mlp_backward(const MlpHead& head, const MlpForward& fwd, double d_score);

// --- whole model -----------------------------------------------------------

struct ForwardState {
  Vec user;
  Vec item;
  Merged merged;
  ConvForward conv;
  MlpForward mlp;
  double score = 0.0;
};

ForwardState forward(const Model& model, UserId u, ItemId i, std::span<const ItemId> history);

double predict(const Model& model, UserId u, ItemId i, std::span<const ItemId> history);

// Scores for many candidates of one user; reuses the user embedding whenever
// the candidate does not affect it.
std::vector<double> score_items(const Model& model, UserId u, std::span<const ItemId> history,
                                std::span<const ItemId> candidates);

struct ModelGrads {
  EmbeddingGrads embeddings;
  Head head;  // zero-shaped like the model head, accumulates
};

ModelGrads zero_grads(const Model& model);
Head zeros_like(const Head& head);

// Accumulates d_score * d(score)/d(params) into grads.
void backward(const Model& model, const ForwardState& fwd, UserId u, ItemId i, std::span<const ItemId> history,
              double d_score, ModelGrads& grads);

// Applies fn(name, values) to every head parameter block, in checkpoint order.
template <typename Fn>
void for_each_head_block(Head& head, Fn&& fn);
template <typename Fn>
void for_each_head_block(const Head& head, Fn&& fn);

// --- parameter counting -----------------------------------------------------

struct ParamCount {
  std::size_t head_total = 0;     // every trainable head parameter incl. w / output
  std::size_t tower_weights = 0;  // conv kernels or hidden-layer weight matrices only
  std::size_t embeddings = 0;     // P, Q, Qp entries
};

ParamCount param_count(const ModelSpec& spec, std::size_t num_users = 0, std::size_t num_items = 0);

// ----------------------------------------------------------------------------

template <typename HeadT, typename Fn>
void for_each_head_block_impl(HeadT& head, Fn&& fn) {
  std::visit(
      [&](auto& h) {
        using H = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<H, ConvStack>) {
          for (std::size_t l = 0; l < h.layers.size(); ++l) {
            const std::string prefix = "conv." + std::to_string(l + 1);
            fn(prefix + ".kernel", h.layers[l].kernel.values());
            fn(prefix + ".bias", std::span(&h.layers[l].bias, 1));
          }
          fn(std::string("w"), h.w.values());
        } else if constexpr (std::is_same_v<H, MlpHead>) {
          for (std::size_t l = 0; l < h.layers.size(); ++l) {
            const std::string prefix = "mlp." + std::to_string(l + 1);
            fn(prefix + ".W", h.layers[l].W.values());
            fn(prefix + ".b", h.layers[l].b.values());
          }
          fn(std::string("w"), h.out.values());
        } else if constexpr (std::is_same_v<H, LinearHead>) {
          fn(std::string("w"), h.h.values());
        } else if constexpr (std::is_same_v<H, PopularityHead>) {
          fn(std::string("pop"), h.scores.values());
        }
      },
      head);
}

template <typename Fn>
void for_each_head_block(Head& head, Fn&& fn) {
  for_each_head_block_impl(head, std::forward<Fn>(fn));
}
template <typename Fn>
void for_each_head_block(const Head& head, Fn&& fn) {
  for_each_head_block_impl(head, std::forward<Fn>(fn));
}

}  // namespace oncf
