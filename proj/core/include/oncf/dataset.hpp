#pragma once

// Implicit-feedback interaction data: ingestion, filtering, leave-latest-out
// splitting, shuffled mini-batches and uniform negative sampling.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oncf/rng.hpp"

namespace oncf {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

struct Interaction {
  UserId user;
  ItemId item;
  std::int64_t timestamp;
  bool operator==(const Interaction&) const = default;
};

struct ItemEvent {
  ItemId item;
  std::int64_t timestamp;
  bool operator==(const ItemEvent&) const = default;
};

struct UserItem {
  UserId user;
  ItemId item;
  bool operator==(const UserItem&) const = default;
};

// Dense-indexed interactions. Each user's history is ordered by timestamp,
// ties broken by raw item id; at most one event per (user, item).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> user_ids, std::vector<std::string> item_ids,
          std::vector<std::vector<ItemEvent>> per_user);

  std::size_t num_users() const noexcept { return user_ids_.size(); }
  std::size_t num_items() const noexcept { return item_ids_.size(); }
  std::size_t num_interactions() const noexcept { return num_interactions_; }

  // Timestamp-ordered history of u.
  std::span<const ItemEvent> history(UserId u) const { return per_user_.at(u); }
  // Item indices of u in ascending index order.
  std::span<const ItemId> items(UserId u) const { return sorted_items_.at(u); }
  bool contains(UserId u, ItemId i) const;

  const std::string& user_id(UserId u) const { return user_ids_.at(u); }
  const std::string& item_id(ItemId i) const { return item_ids_.at(i); }
  const std::vector<std::string>& user_ids() const noexcept { return user_ids_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  std::optional<UserId> find_user(const std::string& raw) const;
  std::optional<ItemId> find_item(const std::string& raw) const;

  // All interactions, users in index order, each user's in history order.
  std::vector<Interaction> interactions() const;

  bool operator==(const Dataset& other) const {
    return user_ids_ == other.user_ids_ && item_ids_ == other.item_ids_ && per_user_ == other.per_user_;
  }

 private:
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::vector<std::vector<ItemEvent>> per_user_;
  std::vector<std::vector<ItemId>> sorted_items_;
  std::unordered_map<std::string, UserId> user_index_;
  std::unordered_map<std::string, ItemId> item_index_;
  std::size_t num_interactions_ = 0;
};

// `user<TAB>item<TAB>timestamp` records; `#` lines and blank lines are skipped.
// Repeated (user, item) pairs collapse to the earliest timestamp. Dense indices
// follow first appearance.
Dataset parse_interactions(std::istream& in);
Dataset load_interactions(const std::filesystem::path& path);

// One pass dropping items with fewer than min_item_interactions, then one pass
// dropping users with fewer than min_user_interactions. Indices are re-densified
// preserving relative order.
Dataset filter(const Dataset& data, std::size_t min_item_interactions, std::size_t min_user_interactions);

// True when filter() at these thresholds would remove nothing. A false result
// right after filter() reports cascading removals that a second pass would make.
bool filter_is_stable(const Dataset& data, std::size_t min_item_interactions,
                      std::size_t min_user_interactions);

struct HeldOut {
  UserId user;
  ItemId item;
  std::int64_t timestamp;
  bool operator==(const HeldOut&) const = default;
};

struct SplitSet {
  Dataset train;
  std::vector<HeldOut> validation;  // one per eligible user, ascending user order
  std::vector<HeldOut> test;        // aligned with validation
  // Indexed by user; empty for users excluded from evaluation. Shared by the
  // validation and test candidate lists.
  std::vector<std::vector<ItemId>> eval_negatives;
  std::size_t skipped_users = 0;

  // Train items of u in ascending order, plus its validation item when
  // include_validation is set. Never contains the test item.
  std::vector<ItemId> user_history(UserId u, bool include_validation) const;

  bool operator==(const SplitSet&) const = default;
};

inline constexpr std::size_t kDefaultEvalNegatives = 999;

// Test = latest interaction; validation = seeded uniform pick among the rest;
// evaluation negatives drawn without replacement from items the user never
// touched. Users with fewer than three interactions stay entirely in train.
SplitSet split_leave_latest_out(const Dataset& data, std::uint64_t seed,
                                std::size_t num_negatives = kDefaultEvalNegatives);

// Writes every interaction as `user<TAB>item<TAB>timestamp<TAB>train|val|test`.
void write_split_manifest(std::ostream& out, const SplitSet& split);

// One epoch of shuffled (user, item) pairs cut into consecutive batches.
class EpochBatches {
 public:
  EpochBatches(std::vector<UserItem> pairs, std::size_t batch_size);

  std::size_t size() const noexcept { return (pairs_.size() + batch_size_ - 1) / batch_size_; }
  std::span<const UserItem> operator[](std::size_t b) const;
  std::span<const UserItem> pairs() const noexcept { return pairs_; }

 private:
  std::vector<UserItem> pairs_;
  std::size_t batch_size_;
};

EpochBatches minibatches(const Dataset& train, std::size_t batch_size, Rng& rng);

// Uniform draw from the items u has not interacted with in `train`.
ItemId sample_negative(const Dataset& train, UserId u, Rng& rng);

}  // namespace oncf
