#include "oncf/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "oncf/error.hpp"

namespace oncf {

namespace {

constexpr std::string_view kMagic = "ONCF1";

template <typename T>
struct Section {
  std::string name;
  std::vector<std::size_t> dims;
  std::span<T> values;
};

template <typename ModelT, typename T = std::conditional_t<std::is_const_v<ModelT>, const double, double>>
std::vector<Section<T>> sections_of(ModelT& model) {
  std::vector<Section<T>> out;
  auto& tables = model.tables;
  if (model.spec.head != HeadKind::Popularity) {
    if (tables.P) out.push_back({"P", {tables.P->rows(), tables.P->cols()}, tables.P->values()});
    out.push_back({"Q", {tables.Q.rows(), tables.Q.cols()}, tables.Q.values()});
    if (tables.Qp) out.push_back({"Qp", {tables.Qp->rows(), tables.Qp->cols()}, tables.Qp->values()});
  }
  std::visit(
      [&](auto& h) {
        using H = std::remove_cv_t<std::remove_reference_t<decltype(h)>>;
        if constexpr (std::is_same_v<H, ConvStack>) {
          for (std::size_t l = 0; l < h.layers.size(); ++l) {
            auto& k = h.layers[l].kernel;
            const std::string prefix = "conv." + std::to_string(l + 1);
            out.push_back({prefix + ".kernel",
                           {k.kernel_height(), k.kernel_width(), k.in_channels(), k.out_channels()},
                           k.values()});
            out.push_back({prefix + ".bias", {}, std::span<T>(&h.layers[l].bias, 1)});
          }
          out.push_back({"w", {h.w.size()}, h.w.values()});
        } else if constexpr (std::is_same_v<H, MlpHead>) {
          for (std::size_t l = 0; l < h.layers.size(); ++l) {
            auto& layer = h.layers[l];
            const std::string prefix = "mlp." + std::to_string(l + 1);
            out.push_back({prefix + ".W", {layer.W.rows(), layer.W.cols()}, layer.W.values()});
            out.push_back({prefix + ".b", {layer.b.size()}, layer.b.values()});
          }
          out.push_back({"w", {h.out.size()}, h.out.values()});
        } else if constexpr (std::is_same_v<H, LinearHead>) {
          out.push_back({"w", {h.h.size()}, h.h.values()});
        } else if constexpr (std::is_same_v<H, PopularityHead>) {
          out.push_back({"pop", {h.scores.size()}, h.scores.values()});
        }
      },
      model.head);
  return out;
}

void put_f64(std::string& buf, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) {
    buf.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
  return std::bit_cast<double>(bits);
}

struct DirEntry {
  std::vector<std::size_t> dims;
  std::size_t offset = 0;
  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

std::size_t dim_or_throw(const std::map<std::string, DirEntry>& dir, const std::string& name, std::size_t axis) {
  auto it = dir.find(name);
  if (it == dir.end()) throw FormatError("section " + name + ": missing");
  if (it->second.dims.size() != 2) throw FormatError("section " + name + ": expected rank 2");
  return it->second.dims[axis];
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
  check_model(model);
  const auto secs = sections_of(model);
  std::ostringstream header;
  header << kMagic << ' ' << model.spec.descriptor() << '\n';
  std::size_t offset = 0;
  for (const auto& s : secs) {
    header << s.name << ' ' << s.dims.size();
    for (auto d : s.dims) header << ' ' << d;
    header << ' ' << offset << '\n';
    offset += s.values.size() * 8;
  }
  header << '\n';

  std::string payload;
  payload.reserve(offset);
  for (const auto& s : secs) {
    for (double x : s.values) put_f64(payload, x);
  }
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw FormatError("checkpoint: write failed");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot open " + path.string() + " for writing");
  save_checkpoint(model, out);
}

Model load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.compare(0, kMagic.size(), kMagic) != 0 ||
      (line.size() > kMagic.size() && line[kMagic.size()] != ' ')) {
    throw FormatError("header: missing ONCF1 magic");
  }
  ModelSpec spec;
  try {
    spec = ModelSpec::parse_descriptor(line.substr(kMagic.size()));
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("header: ") + e.what());
  }

  std::map<std::string, DirEntry> dir;
  std::vector<std::string> order;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      terminated = true;
      break;
    }
    std::istringstream is(line);
    std::string name;
    std::size_t rank = 0;
    if (!(is >> name >> rank) || rank > 4) throw FormatError("directory: malformed entry '" + line + "'");
    DirEntry e;
    e.dims.resize(rank);
    for (auto& d : e.dims) {
      if (!(is >> d)) throw FormatError("section " + name + ": malformed dims");
    }
    std::string extra;
    if (!(is >> e.offset) || (is >> extra)) throw FormatError("section " + name + ": malformed offset");
    if (!dir.emplace(name, std::move(e)).second) throw FormatError("section " + name + ": duplicated");
    order.push_back(name);
  }
  if (!terminated) throw FormatError("directory: not terminated by a blank line");

  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());

  Model model;
  model.spec = spec;
  if (spec.head == HeadKind::Popularity) {
    auto it = dir.find("pop");
    if (it == dir.end() || it->second.dims.size() != 1) throw FormatError("section pop: missing or not rank 1");
    model.tables.K = spec.K;
    model.tables.Q = Mat(0, spec.K);
    model.head = PopularityHead{Vec(it->second.dims[0])};
  } else {
    const std::size_t n_items = dim_or_throw(dir, "Q", 0);
    model.tables.K = spec.K;
    model.tables.alpha = spec.alpha;
    model.tables.fism_norm = spec.fism_norm;
    model.tables.Q = Mat(n_items, spec.K);
    if (uses_user_vectors(spec.variant)) model.tables.P.emplace(dim_or_throw(dir, "P", 0), spec.K);
    if (uses_history(spec.variant)) model.tables.Qp.emplace(n_items, spec.K);
    model.head = init_head(spec, 0, NetInit::Zero);
  }

  auto secs = sections_of(model);
  if (secs.size() != dir.size()) {
    for (const auto& name : order) {
      const bool expected =
          std::any_of(secs.begin(), secs.end(), [&](const auto& s) { return s.name == name; });
      if (!expected) throw FormatError("section " + name + ": not part of a '" + spec.descriptor() + "' model");
    }
  }
  for (auto& s : secs) {
    auto it = dir.find(s.name);
    if (it == dir.end()) throw FormatError("section " + s.name + ": missing");
    const DirEntry& e = it->second;
    if (e.dims != s.dims) throw FormatError("section " + s.name + ": shape does not match the spec");
    const std::size_t nbytes = e.count() * 8;
    if (e.offset > payload.size() || payload.size() - e.offset < nbytes) {
      throw FormatError("section " + s.name + ": payload truncated");
    }
    for (std::size_t k = 0; k < s.values.size(); ++k) s.values[k] = get_f64(bytes + e.offset + 8 * k);
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace oncf
