#pragma once

// Checkpoint layout:
//
//   ONCF1 <spec descriptor>\n
//   <name> <rank> <dim_1> ... <dim_rank> <byte offset>\n      (one per section)
//   \n
//   <payload>   row-major IEEE-754 binary64, little-endian
//
// Offsets are relative to the first payload byte. Sections appear in the
// order P, Q, Qp, conv.<l>.kernel, conv.<l>.bias, mlp.<l>.W, mlp.<l>.b, w, pop
// (layers numbered from 1), each present only when the model has it.

#include <filesystem>
#include <iosfwd>

#include "oncf/model.hpp"

namespace oncf {

void save_checkpoint(const Model& model, std::ostream& out);
void save_checkpoint(const Model& model, const std::filesystem::path& path);

// Throws FormatError naming the header or the offending section.
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace oncf
