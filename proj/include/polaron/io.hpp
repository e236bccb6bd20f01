#pragma once

#include "polaron/grid.hpp"

#include <string>
#include <vector>

namespace polaron::io {

// Flat little-endian layout: int32 d, int32 n[d], float64 box lengths[d],
// then row-major float64 values.
void write_field(const std::string& path, const ScalarField& f);
ScalarField read_field(const std::string& path);

// One row per grid point: coordinates then value.
void write_field_csv(const std::string& path, const ScalarField& f);

// Plain table with a header row.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace polaron::io
