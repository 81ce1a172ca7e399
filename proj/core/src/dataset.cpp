#include "oncf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "oncf/error.hpp"

namespace oncf {

Dataset::Dataset(std::vector<std::string> user_ids, std::vector<std::string> item_ids,
                 std::vector<std::vector<ItemEvent>> per_user)
    : user_ids_(std::move(user_ids)), item_ids_(std::move(item_ids)), per_user_(std::move(per_user)) {
  if (per_user_.size() != user_ids_.size()) {
    throw DimensionError("Dataset: " + std::to_string(per_user_.size()) + " histories for " +
                         std::to_string(user_ids_.size()) + " users");
  }
  for (UserId u = 0; u < user_ids_.size(); ++u) user_index_.emplace(user_ids_[u], u);
  for (ItemId i = 0; i < item_ids_.size(); ++i) item_index_.emplace(item_ids_[i], i);

  sorted_items_.resize(per_user_.size());
  for (std::size_t u = 0; u < per_user_.size(); ++u) {
    auto& events = per_user_[u];
    for (const auto& e : events) {
      if (e.item >= item_ids_.size()) throw BoundsError("Dataset: item index out of range");
    }
    std::sort(events.begin(), events.end(), [this](const ItemEvent& a, const ItemEvent& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return item_ids_[a.item] < item_ids_[b.item];
    });
    auto& items = sorted_items_[u];
    items.reserve(events.size());
    for (const auto& e : events) items.push_back(e.item);
    std::sort(items.begin(), items.end());
    if (std::adjacent_find(items.begin(), items.end()) != items.end()) {
      throw std::invalid_argument("Dataset: duplicate (user, item) pair for user " + user_ids_[u]);
    }
    num_interactions_ += events.size();
  }
}

bool Dataset::contains(UserId u, ItemId i) const {
  const auto& items = sorted_items_.at(u);
  return std::binary_search(items.begin(), items.end(), i);
}

std::optional<UserId> Dataset::find_user(const std::string& raw) const {
  auto it = user_index_.find(raw);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<ItemId> Dataset::find_item(const std::string& raw) const {
  auto it = item_index_.find(raw);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Interaction> Dataset::interactions() const {
  std::vector<Interaction> out;
  out.reserve(num_interactions_);
  for (UserId u = 0; u < per_user_.size(); ++u) {
    for (const auto& e : per_user_[u]) out.push_back({u, e.item, e.timestamp});
  }
  return out;
}

Dataset parse_interactions(std::istream& in) {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, UserId> user_index;
  std::unordered_map<std::string, ItemId> item_index;
  std::vector<std::vector<ItemEvent>> per_user;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError(line_no, "expected 3 tab-separated fields");
    }
    std::string user = line.substr(0, t1);
    std::string item = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string_view ts_field(line.data() + t2 + 1, line.size() - t2 - 1);
    if (user.empty() || item.empty()) throw ParseError(line_no, "empty user or item id");

    std::int64_t ts = 0;
    const auto [ptr, ec] = std::from_chars(ts_field.data(), ts_field.data() + ts_field.size(), ts);
    if (ts_field.empty() || ec != std::errc() || ptr != ts_field.data() + ts_field.size()) {
      throw ParseError(line_no, "timestamp '" + std::string(ts_field) + "' is not a base-10 integer");
    }

    auto [uit, new_user] = user_index.try_emplace(user, static_cast<UserId>(user_ids.size()));
    if (new_user) {
      user_ids.push_back(std::move(user));
      per_user.emplace_back();
    }
    auto [iit, new_item] = item_index.try_emplace(item, static_cast<ItemId>(item_ids.size()));
    if (new_item) item_ids.push_back(std::move(item));
    per_user[uit->second].push_back({iit->second, ts});
  }

  for (auto& events : per_user) {
    std::sort(events.begin(), events.end(), [](const ItemEvent& a, const ItemEvent& b) {
      return std::tie(a.item, a.timestamp) < std::tie(b.item, b.timestamp);
    });
    events.erase(std::unique(events.begin(), events.end(),
                             [](const ItemEvent& a, const ItemEvent& b) { return a.item == b.item; }),
                 events.end());
  }
  return Dataset(std::move(user_ids), std::move(item_ids), std::move(per_user));
}

Dataset load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interaction file " + path.string());
  return parse_interactions(in);
}

Dataset filter(const Dataset& data, std::size_t min_item_interactions, std::size_t min_user_interactions) {
  std::vector<std::size_t> item_count(data.num_items(), 0);
  for (UserId u = 0; u < data.num_users(); ++u) {
    for (const auto& e : data.history(u)) ++item_count[e.item];
  }

  std::vector<std::string> user_ids;
  std::vector<std::vector<ItemEvent>> per_user;
  std::vector<std::size_t> kept_count(data.num_items(), 0);
  for (UserId u = 0; u < data.num_users(); ++u) {
    std::vector<ItemEvent> kept;
    for (const auto& e : data.history(u)) {
      if (item_count[e.item] >= min_item_interactions) kept.push_back(e);
    }
    if (kept.empty() || kept.size() < min_user_interactions) continue;
    for (const auto& e : kept) ++kept_count[e.item];
    user_ids.push_back(data.user_id(u));
    per_user.push_back(std::move(kept));
  }

  // Items left without interactions after the user pass disappear with the
  // re-indexing; items merely pushed below the threshold stay and are
  // reported by filter_is_stable().
  std::vector<ItemId> item_map(data.num_items(), 0);
  std::vector<std::string> item_ids;
  for (ItemId i = 0; i < data.num_items(); ++i) {
    if (kept_count[i] > 0) {
      item_map[i] = static_cast<ItemId>(item_ids.size());
      item_ids.push_back(data.item_id(i));
    }
  }
  for (auto& events : per_user) {
    for (auto& e : events) e.item = item_map[e.item];
  }
  return Dataset(std::move(user_ids), std::move(item_ids), std::move(per_user));
}

bool filter_is_stable(const Dataset& data, std::size_t min_item_interactions,
                      std::size_t min_user_interactions) {
  std::vector<std::size_t> item_count(data.num_items(), 0);
  for (UserId u = 0; u < data.num_users(); ++u) {
    if (data.history(u).size() < min_user_interactions || data.history(u).empty()) return false;
    for (const auto& e : data.history(u)) ++item_count[e.item];
  }
  return std::all_of(item_count.begin(), item_count.end(),
                     [&](std::size_t c) { return c >= min_item_interactions; });
}

std::vector<ItemId> SplitSet::user_history(UserId u, bool include_validation) const {
  const auto items = train.items(u);
  std::vector<ItemId> out(items.begin(), items.end());
  if (include_validation) {
    auto it = std::lower_bound(validation.begin(), validation.end(), u,
                               [](const HeldOut& h, UserId key) { return h.user < key; });
    if (it != validation.end() && it->user == u) {
      out.insert(std::upper_bound(out.begin(), out.end(), it->item), it->item);
    }
  }
  return out;
}

SplitSet split_leave_latest_out(const Dataset& data, std::uint64_t seed, std::size_t num_negatives) {
  Rng rng(seed);
  SplitSet split;
  split.eval_negatives.resize(data.num_users());
  std::vector<std::vector<ItemEvent>> train_events(data.num_users());
  const std::size_t n_items = data.num_items();

  std::vector<ItemId> complement;
  complement.reserve(n_items);
  for (UserId u = 0; u < data.num_users(); ++u) {
    const auto events = data.history(u);
    if (events.size() < 3) {
      train_events[u].assign(events.begin(), events.end());
      ++split.skipped_users;
      continue;
    }
    if (n_items <= events.size()) {
      throw ProtocolError("user " + data.user_id(u) + " has interacted with every item; no evaluation negatives");
    }

    const ItemEvent test = events.back();
    std::uniform_int_distribution<std::size_t> pick(0, events.size() - 2);
    const std::size_t val_pos = pick(rng);
    const ItemEvent val = events[val_pos];
    split.test.push_back({u, test.item, test.timestamp});
    split.validation.push_back({u, val.item, val.timestamp});
    for (std::size_t k = 0; k + 1 < events.size(); ++k) {
      if (k != val_pos) train_events[u].push_back(events[k]);
    }

    complement.clear();
    const auto seen = data.items(u);
    auto s = seen.begin();
    for (ItemId i = 0; i < n_items; ++i) {
      if (s != seen.end() && *s == i) {
        ++s;
        continue;
      }
      complement.push_back(i);
    }
    const std::size_t count = std::min(num_negatives, complement.size());
    for (std::size_t k = 0; k < count; ++k) {
      std::uniform_int_distribution<std::size_t> swap_with(k, complement.size() - 1);
      std::swap(complement[k], complement[swap_with(rng)]);
    }
    split.eval_negatives[u].assign(complement.begin(), complement.begin() + static_cast<std::ptrdiff_t>(count));
  }

  split.train = Dataset(data.user_ids(), data.item_ids(), std::move(train_events));
  return split;
}

void write_split_manifest(std::ostream& out, const SplitSet& split) {
  const Dataset& train = split.train;
  struct Row {
    std::int64_t timestamp;
    const std::string* item;
    const char* tag;
  };
  std::size_t held = 0;
  std::vector<Row> rows;
  for (UserId u = 0; u < train.num_users(); ++u) {
    rows.clear();
    for (const auto& e : train.history(u)) rows.push_back({e.timestamp, &train.item_id(e.item), "train"});
    if (held < split.test.size() && split.test[held].user == u) {
      const auto& v = split.validation[held];
      const auto& t = split.test[held];
      rows.push_back({v.timestamp, &train.item_id(v.item), "val"});
      rows.push_back({t.timestamp, &train.item_id(t.item), "test"});
      ++held;
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return *a.item < *b.item;
    });
    for (const auto& r : rows) {
      out << train.user_id(u) << '\t' << *r.item << '\t' << r.timestamp << '\t' << r.tag << '\n';
    }
  }
}

EpochBatches::EpochBatches(std::vector<UserItem> pairs, std::size_t batch_size)
    : pairs_(std::move(pairs)), batch_size_(batch_size) {
  if (batch_size_ == 0) throw std::invalid_argument("minibatches: batch_size must be >= 1");
}

std::span<const UserItem> EpochBatches::operator[](std::size_t b) const {
  const std::size_t begin = b * batch_size_;
  if (begin >= pairs_.size()) throw BoundsError("EpochBatches: batch index out of range");
  return std::span<const UserItem>(pairs_).subspan(begin, std::min(batch_size_, pairs_.size() - begin));
}

EpochBatches minibatches(const Dataset& train, std::size_t batch_size, Rng& rng) {
  std::vector<UserItem> pairs;
  pairs.reserve(train.num_interactions());
  for (UserId u = 0; u < train.num_users(); ++u) {
    for (const auto& e : train.history(u)) pairs.push_back({u, e.item});
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  return EpochBatches(std::move(pairs), batch_size);
}

ItemId sample_negative(const Dataset& train, UserId u, Rng& rng) {
  const std::size_t n = train.num_items();
  if (train.items(u).size() >= n) {
    throw SamplingError("user " + train.user_id(u) + " has interacted with every item");
  }
  std::uniform_int_distribution<ItemId> draw(0, static_cast<ItemId>(n - 1));
  for (;;) {
    const ItemId j = draw(rng);
    if (!train.contains(u, j)) return j;
  }
}

}  // namespace oncf
