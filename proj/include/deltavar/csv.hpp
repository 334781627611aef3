#pragma once

// Plain CSV I/O. Numbers are written in the shortest form that parses back to
// the same double, so files round-trip exactly and are byte-stable.

#include <filesystem>
#include <string>

#include "deltavar/estimation.hpp"

namespace deltavar {

std::string format_double(double v);

/// Writes "# <comment>", then "x,y" and one row per sample.
void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::string& comment);

/// Reads an x,y CSV. Lines starting with '#' are skipped; the header is required.
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace deltavar
