#include "oncf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "oncf/error.hpp"
#include "oncf/rng.hpp"

namespace oncf {

namespace {

std::span<double> section_values(Model& model, const std::string& name) {
  auto& t = model.tables;
  if (name == "P") {
    if (!t.P) throw std::invalid_argument("gradcheck: model has no P table");
    return t.P->values();
  }
  if (name == "Q") return t.Q.values();
  if (name == "Qp") {
    if (!t.Qp) throw std::invalid_argument("gradcheck: model has no Qp table");
    return t.Qp->values();
  }
  std::span<double> found;
  bool ok = false;
  for_each_head_block(model.head, [&](const std::string& block, std::span<double> v) {
    if (block == name) {
      found = v;
      ok = true;
    }
  });
  if (!ok) throw std::invalid_argument("gradcheck: unknown section " + name);
  return found;
}

double bpr_loss_of(const Model& model, const TrainTriple& t, std::span<const ItemId> history) {
  return bpr_loss(predict(model, t.u, t.i, history), predict(model, t.u, t.j, history));
}

void append_pattern(std::vector<bool>& out, const ForwardState& f) {
  for (const auto& pre : f.conv.cache.pre) {
    for (double x : pre.values()) out.push_back(x > 0.0);
  }
  for (const auto& pre : f.mlp.pre) {
    for (double x : pre.values()) out.push_back(x > 0.0);
  }
}

std::vector<bool> relu_pattern(const Model& model, const TrainTriple& t, std::span<const ItemId> history) {
  std::vector<bool> out;
  append_pattern(out, forward(model, t.u, t.i, history));
  append_pattern(out, forward(model, t.u, t.j, history));
  return out;
}

struct Probe {
  double numeric = 0.0;
  bool kink = false;
  bool finite = true;
};

// Perturbs model in place and restores the entry bit-exactly afterwards.
Probe probe(Model& work, std::span<double> values, std::size_t index, const TrainTriple& t,
            std::span<const ItemId> history, double step, const std::vector<bool>* base_pattern) {
  const double original = values[index];
  Probe p;
  values[index] = original + step;
  const double plus = bpr_loss_of(work, t, history);
  if (base_pattern && relu_pattern(work, t, history) != *base_pattern) p.kink = true;
  values[index] = original - step;
  const double minus = bpr_loss_of(work, t, history);
  if (base_pattern && relu_pattern(work, t, history) != *base_pattern) p.kink = true;
  values[index] = original;
  p.finite = std::isfinite(plus) && std::isfinite(minus);
  p.numeric = (plus - minus) / (2.0 * step);
  return p;
}

// Rows of a table the triple can reach, plus any the analytic pass touched.
std::vector<std::size_t> candidate_indices(const std::string& name, const Model& model, const ModelGrads& grads,
                                           const TrainTriple& t, std::span<const ItemId> history, std::size_t size) {
  const std::size_t K = model.tables.K;
  std::set<std::size_t> rows;
  const RowGrads* touched = nullptr;
  if (name == "P") {
    rows.insert(t.u);
    touched = &grads.embeddings.P;
  } else if (name == "Q") {
    rows.insert(t.i);
    rows.insert(t.j);
    touched = &grads.embeddings.Q;
  } else if (name == "Qp") {
    rows.insert(history.begin(), history.end());
    rows.insert(t.i);
    rows.insert(t.j);
    touched = &grads.embeddings.Qp;
  }
  std::vector<std::size_t> out;
  if (!touched) {
    out.resize(size);
    for (std::size_t k = 0; k < size; ++k) out[k] = k;
    return out;
  }
  for (const auto& [r, unused] : touched->rows()) rows.insert(r);
  for (std::size_t r : rows) {
    for (std::size_t k = 0; k < K; ++k) out.push_back(r * K + k);
  }
  return out;
}

}  // namespace

const SectionReport* GradReport::find(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

double analytic_entry(const ModelGrads& grads, const Model& model, const std::string& section, std::size_t index) {
  const RowGrads* rows = nullptr;
  if (section == "P") rows = &grads.embeddings.P;
  if (section == "Q") rows = &grads.embeddings.Q;
  if (section == "Qp") rows = &grads.embeddings.Qp;
  if (rows) {
    const std::size_t K = model.tables.K;
    auto it = rows->rows().find(static_cast<std::uint32_t>(index / K));
    return it == rows->rows().end() ? 0.0 : it->second[index % K];
  }
  double out = 0.0;
  bool ok = false;
  for_each_head_block(grads.head, [&](const std::string& block, std::span<const double> v) {
    if (block == section) {
      if (index >= v.size()) throw BoundsError("gradcheck: index out of range in " + section);
      out = v[index];
      ok = true;
    }
  });
  if (!ok) throw std::invalid_argument("gradcheck: unknown section " + section);
  return out;
}

double central_difference(const Model& model, const TrainTriple& triple, std::span<const ItemId> history,
                          const std::string& section, std::size_t index, double step) {
  Model work = model;
  auto values = section_values(work, section);
  if (index >= values.size()) throw BoundsError("gradcheck: index out of range in " + section);
  return probe(work, values, index, triple, history, step, nullptr).numeric;
}

GradReport finite_diff_check(const Model& model, const TrainTriple& triple, std::span<const ItemId> history,
                             const GradCheckOptions& options, const GradientFn& analytic) {
  check_model(model);
  ModelGrads grads = zero_grads(model);
  if (analytic) {
    analytic(model, triple, history, grads);
  } else {
    bpr_gradients(model, triple, history, grads);
  }

  std::vector<std::string> names;
  if (model.spec.head != HeadKind::Popularity) {
    if (model.tables.P) names.push_back("P");
    names.push_back("Q");
    if (model.tables.Qp) names.push_back("Qp");
  }
  for_each_head_block(model.head, [&](const std::string& name, std::span<const double>) { names.push_back(name); });

  Model work = model;
  const std::vector<bool> base = relu_pattern(work, triple, history);
  Rng rng = make_rng(options.seed, SeedPurpose::GradCheck);
  GradReport report;

  for (const auto& name : names) {
    SectionReport sec;
    sec.name = name;
    auto values = section_values(work, name);
    auto candidates = candidate_indices(name, work, grads, triple, history, values.size());
    if (candidates.size() > options.sample) {
      for (std::size_t k = 0; k < options.sample; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
        std::swap(candidates[k], candidates[pick(rng)]);
      }
      candidates.resize(options.sample);
      std::sort(candidates.begin(), candidates.end());
    }
    for (std::size_t index : candidates) {
      const Probe p = probe(work, values, index, triple, history, options.step, &base);
      if (!p.finite) {
        report.pass = false;
        report.failure = "non-finite loss at perturbed point: section " + name + " index " + std::to_string(index);
        report.sections.push_back(sec);
        return report;
      }
      if (p.kink) {
        ++sec.skipped;
        continue;
      }
      const double a = analytic_entry(grads, work, name, index);
      const double abs_err = std::abs(a - p.numeric);
      const double scale = std::max(std::abs(a), std::abs(p.numeric));
      const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
      ++sec.checked;
      sec.max_abs = std::max(sec.max_abs, abs_err);
      sec.max_rel = std::max(sec.max_rel, rel_err);
      if (!(rel_err <= options.tol || abs_err <= options.abs_floor)) ++sec.failed;
    }
    if (sec.failed > 0) report.pass = false;
    report.sections.push_back(sec);
  }
  return report;
}

void print_report(std::ostream& out, const GradReport& report) {
  std::size_t width = 7;
  for (const auto& s : report.sections) width = std::max(width, s.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "section" << std::right << std::setw(14) << "max_rel"
     << std::setw(14) << "max_abs" << std::setw(9) << "checked" << std::setw(9) << "skipped" << std::setw(8)
     << "failed" << '\n';
  for (const auto& s : report.sections) {
    os << std::left << std::setw(static_cast<int>(width)) << s.name << std::right << std::scientific
       << std::setprecision(3) << std::setw(14) << s.max_rel << std::setw(14) << s.max_abs << std::setw(9)
       << s.checked << std::setw(9) << s.skipped << std::setw(8) << s.failed << '\n';
  }
  if (!report.failure.empty()) os << "error: " << report.failure << '\n';
  os << (report.pass ? "PASS" : "FAIL") << '\n';
  out << os.str();
}

}  // namespace oncf
