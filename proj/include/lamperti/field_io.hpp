#pragma once

// FieldSample CSV:
//   # key=value            metadata lines (kernel, parameters, seed, grid axes, frame, ...)
//   rep,c_1,...,c_d,v_1,...,v_m
// Numbers are written with 17 significant digits so a write/read cycle is
// bit-exact.

#include "lamperti/fields.hpp"

#include <iosfwd>
#include <string>

namespace lamperti::fields {

void write_field_sample(std::ostream& out, const FieldSample& sample);
FieldSample read_field_sample(std::istream& in);

/// Writes to `path` through a temporary file and a rename; "-" writes to stdout.
void write_text_atomically(const std::string& path, const std::string& content);

std::string encode_grid_axes(const LatticeGrid& grid);
LatticeGrid decode_grid_axes(const std::string& text);

}  // namespace lamperti::fields
