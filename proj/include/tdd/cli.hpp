#pragma once

#include <string>
#include <vector>

#include "tdd/hsi.hpp"

namespace tdd {

// Entry point behind the `tdd` binary. `args` is argv-style including the
// program name. Returns the process exit code: 0 success, 1 usage error,
// 2 data/format error, 3 numeric failure.
int run(const std::vector<std::string>& args);

// Number of worker threads from the TDD_THREADS environment variable:
// unset -> 1, "0" -> hardware concurrency, otherwise the given cap.
int worker_threads();

// 8-bit binary PGM preview of a score map, min-max scaled.
void write_pgm(const ScoreMap& map, const std::string& path);

} // namespace tdd
