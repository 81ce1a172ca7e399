#pragma once

#include <cmath>
#include <random>
#include <span>
#include <sstream>
#include <string>

#include "oncf/dataset.hpp"
#include "oncf/tensor.hpp"

namespace oncf::test {

inline void fill_normal(std::span<double> v, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& x : v) x = n(rng);
}

inline void fill_uniform(std::span<double> v, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& x : v) x = u(rng);
}

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double stddev = 1.0) {
  Vec v(n);
  fill_normal(v.values(), rng, stddev);
  return v;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Central difference of f() along one writable entry, restoring it afterwards.
template <typename F>
double central_diff(double& entry, F&& f, double h = 1e-5) {
  const double saved = entry;
  entry = saved + h;
  const double plus = f();
  entry = saved - h;
  const double minus = f();
  entry = saved;
  return (plus - minus) / (2.0 * h);
}

inline Dataset dataset_from(const std::string& tsv) {
  std::istringstream in(tsv);
  return parse_interactions(in);
}

inline double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace oncf::test
