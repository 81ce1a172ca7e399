#pragma once

// Central-difference check of the analytic BPR gradients (no L2 terms).
//
// Each parameter section (P, Q, Qp and every head block) is sampled on seeded
// coordinates. A coordinate whose perturbation changes the sign pattern of
// any ReLU pre-activation in either forward pass is skipped and counted: the
// finite difference straddles a kink there and says nothing about the adjoint.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "oncf/model.hpp"
#include "oncf/training.hpp"

namespace oncf {

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  double abs_floor = 1e-8;
  std::size_t sample = 200;  // coordinates per section
  std::uint64_t seed = 0;
};

struct SectionReport {
  std::string name;
  double max_rel = 0.0;
  double max_abs = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kink crossings
  std::size_t failed = 0;
  bool operator==(const SectionReport&) const = default;
};

struct GradReport {
  std::vector<SectionReport> sections;
  bool pass = true;
  std::string failure;  // set when a perturbed loss was not finite

  const SectionReport* find(const std::string& name) const;
  bool operator==(const GradReport&) const = default;
};

using GradientFn = std::function<void(const Model&, const TrainTriple&, std::span<const ItemId>, ModelGrads&)>;

// Analytic side defaults to bpr_gradients; tests substitute a corrupted one.
GradReport finite_diff_check(const Model& model, const TrainTriple& triple, std::span<const ItemId> history,
                             const GradCheckOptions& options = {}, const GradientFn& analytic = {});

// Central difference of the BPR loss along one parameter entry. `section`
// names a table (P, Q, Qp) or a head block; `index` is the flat offset.
double central_difference(const Model& model, const TrainTriple& triple, std::span<const ItemId> history,
                          const std::string& section, std::size_t index, double step);

// Flat analytic gradient entry for the same addressing.
double analytic_entry(const ModelGrads& grads, const Model& model, const std::string& section, std::size_t index);

void print_report(std::ostream& out, const GradReport& report);

}  // namespace oncf
