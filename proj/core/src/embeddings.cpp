#include "oncf/embeddings.hpp"

#include <cmath>
#include <string>

#include "oncf/error.hpp"

namespace oncf {

namespace {

void fill_gaussian(Mat& m, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : m.values()) x = dist(rng);
}

std::size_t summed_count(std::span<const ItemId> history, ItemId target) {
  std::size_t n = 0;
  for (ItemId t : history) n += t != target ? 1 : 0;
  return n;
}

}  // namespace

std::size_t EmbeddingTables::parameter_count() const {
  return (P ? P->size() : 0) + Q.size() + (Qp ? Qp->size() : 0);
}

bool uses_user_vectors(Variant v) { return v == Variant::MF || v == Variant::SVDPP; }
bool uses_history(Variant v) { return v == Variant::FISM || v == Variant::SVDPP; }

EmbeddingTables init_tables(std::size_t num_users, std::size_t num_items, std::size_t K, Variant variant,
                            std::uint64_t seed, double stddev) {
  if (K == 0) throw ConfigError("K: embedding size must be positive");
  Rng rng(seed);
  EmbeddingTables t;
  t.K = K;
  if (uses_user_vectors(variant)) {
    t.P.emplace(num_users, K);
    fill_gaussian(*t.P, rng, stddev);
  }
  t.Q = Mat(num_items, K);
  fill_gaussian(t.Q, rng, stddev);
  if (uses_history(variant)) {
    t.Qp.emplace(num_items, K);
    fill_gaussian(*t.Qp, rng, stddev);
  }
  return t;
}

void check_tables(const EmbeddingTables& tables, Variant variant) {
  if (uses_user_vectors(variant) && !tables.P) throw ConfigError("variant: user table P missing");
  if (uses_history(variant) && !tables.Qp) throw ConfigError("variant: history table Qp missing");
  if (tables.Q.cols() != tables.K || (tables.P && tables.P->cols() != tables.K) ||
      (tables.Qp && tables.Qp->cols() != tables.K)) {
    throw ConfigError("K: table widths disagree with embedding size " + std::to_string(tables.K));
  }
}

Vec item_embedding(const EmbeddingTables& tables, ItemId i) {
  if (i >= tables.Q.rows()) {
    throw BoundsError("item " + std::to_string(i) + " out of range (N=" + std::to_string(tables.Q.rows()) + ")");
  }
  const auto row = tables.Q.row(i);
  return Vec(std::vector<double>(row.begin(), row.end()));
}

double history_coefficient(const EmbeddingTables& tables, std::span<const ItemId> history, ItemId target) {
  const std::size_t n =
      tables.fism_norm == FismNorm::ExcludedSet ? summed_count(history, target) : history.size();
  return std::pow(static_cast<double>(n == 0 ? 1 : n), -tables.alpha);
}

Vec user_embedding(const EmbeddingTables& tables, Variant variant, UserId u, ItemId target,
                   std::span<const ItemId> history) {
  Vec out(tables.K);
  if (uses_user_vectors(variant)) {
    if (!tables.P) throw ConfigError("variant: user table P missing");
    if (u >= tables.P->rows()) {
      throw BoundsError("user " + std::to_string(u) + " out of range (M=" + std::to_string(tables.P->rows()) + ")");
    }
    const auto p = tables.P->row(u);
    for (std::size_t k = 0; k < tables.K; ++k) out[k] = p[k];
  }
  if (uses_history(variant)) {
    if (!tables.Qp) throw ConfigError("variant: history table Qp missing");
    const Mat& qp = *tables.Qp;
    Vec sum(tables.K);
    for (ItemId t : history) {
      if (t >= qp.rows()) throw BoundsError("history item " + std::to_string(t) + " out of range");
      if (t == target) continue;
      const auto row = qp.row(t);
      for (std::size_t k = 0; k < tables.K; ++k) sum[k] += row[k];
    }
    const double c = history_coefficient(tables, history, target);
    for (std::size_t k = 0; k < tables.K; ++k) out[k] += c * sum[k];
  }
  return out;
}

std::span<double> RowGrads::row(std::uint32_t r) {
  auto [it, inserted] = rows_.try_emplace(r, cols_);
  return it->second.values();
}

void RowGrads::add(std::uint32_t r, std::span<const double> g, double scale) {
  if (g.size() != cols_) throw DimensionError("RowGrads::add: width mismatch");
  auto dst = row(r);
  for (std::size_t k = 0; k < cols_; ++k) dst[k] += scale * g[k];
}

void scatter_user_gradient(EmbeddingGrads& grads, const EmbeddingTables& tables, Variant variant, UserId u,
                           ItemId target, std::span<const ItemId> history, const Vec& d_user) {
  if (d_user.size() != tables.K) throw DimensionError("scatter_user_gradient: gradient length != K");
  if (uses_user_vectors(variant)) {
    if (u >= tables.num_users()) throw BoundsError("user " + std::to_string(u) + " out of range");
    grads.P.add(u, d_user.values());
  }
  if (uses_history(variant)) {
    const double c = history_coefficient(tables, history, target);
    for (ItemId t : history) {
      if (t >= tables.num_items()) throw BoundsError("history item " + std::to_string(t) + " out of range");
      if (t != target) grads.Qp.add(t, d_user.values(), c);
    }
  }
}

void scatter_item_gradient(EmbeddingGrads& grads, ItemId i, const Vec& d_item) { grads.Q.add(i, d_item.values()); }

}  // namespace oncf
