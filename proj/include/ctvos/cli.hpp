// Command-line front door: synth | train | propagate | eval | gradcheck |
// visualize. Diagnostics go to stderr; data products go to files. Exit codes:
// 0 success, 1 usage error, 2 runtime/data error.
#pragma once

#include <string>
#include <vector>

#include "ctvos/image.hpp"

namespace ctvos {

int run_command(const std::vector<std::string>& args);

// Alpha-blends each object's mask over the frame in a fixed palette color and
// writes the result as a PNG.
void write_overlay(const Image& frame, const IndexMask& masks, const std::string& out_path);

}  // namespace ctvos
