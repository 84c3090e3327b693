#pragma once

#include <string>

#include "taflab/ta.hpp"

namespace taflab::ta {

// Versioned little-endian binary container: header (automaton tables,
// temporal kind, T, generator seed) followed by per-example symbol and
// target id arrays. Round-trips bit-exactly.
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace taflab::ta
