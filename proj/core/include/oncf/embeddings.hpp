#pragma once

// User and item embedding functions (ID lookup, item-history sum, and their
// sum) together with the sparse gradient scatter back into the tables.

#include <cstdint>
#include <map>
#include <optional>
#include <span>

#include "oncf/dataset.hpp"
#include "oncf/tensor.hpp"

namespace oncf {

enum class Variant { MF, FISM, SVDPP };

// How the history sum is normalised: by the number of summed items (target
// excluded) or by the full history size including the target.
enum class FismNorm { ExcludedSet, FullSet };

struct EmbeddingTables {
  std::size_t K = 0;
  double alpha = 0.5;
  FismNorm fism_norm = FismNorm::ExcludedSet;
  std::optional<Mat> P;   // M x K user vectors (MF, SVD++)
  Mat Q;                  // N x K target-item vectors
  std::optional<Mat> Qp;  // N x K history-item vectors (FISM, SVD++)

  std::size_t num_users() const { return P ? P->rows() : 0; }
  std::size_t num_items() const { return Q.rows(); }
  std::size_t parameter_count() const;
  bool operator==(const EmbeddingTables&) const = default;
};

bool uses_user_vectors(Variant v);
bool uses_history(Variant v);

// Entries i.i.d. N(0, stddev^2). Allocates only the tables `variant` reads.
EmbeddingTables init_tables(std::size_t num_users, std::size_t num_items, std::size_t K, Variant variant,
                            std::uint64_t seed, double stddev = 0.01);

// Throws ConfigError when the tables lack what `variant` needs.
void check_tables(const EmbeddingTables& tables, Variant variant);

Vec item_embedding(const EmbeddingTables& tables, ItemId i);

// MF: p_u. FISM: n^-alpha * sum of q'_t over history \ {target}. SVD++: both.
// `history` must hold distinct item indices.
Vec user_embedding(const EmbeddingTables& tables, Variant variant, UserId u, ItemId target,
                   std::span<const ItemId> history);

// Coefficient n^-alpha applied to the history sum for this (history, target).
double history_coefficient(const EmbeddingTables& tables, std::span<const ItemId> history, ItemId target);

// Gradient rows keyed by table row; only touched rows are present.
class RowGrads {
 public:
  explicit RowGrads(std::size_t cols = 0) : cols_(cols) {}
  std::span<double> row(std::uint32_t r);
  void add(std::uint32_t r, std::span<const double> g, double scale = 1.0);
  const std::map<std::uint32_t, Vec>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }
  void clear() { rows_.clear(); }

 private:
  std::size_t cols_;
  std::map<std::uint32_t, Vec> rows_;
};

struct EmbeddingGrads {
  RowGrads P;
  RowGrads Q;
  RowGrads Qp;
  explicit EmbeddingGrads(std::size_t K = 0) : P(K), Q(K), Qp(K) {}
};

void scatter_user_gradient(EmbeddingGrads& grads, const EmbeddingTables& tables, Variant variant, UserId u,
                           ItemId target, std::span<const ItemId> history, const Vec& d_user);

void scatter_item_gradient(EmbeddingGrads& grads, ItemId i, const Vec& d_item);

}  // namespace oncf
