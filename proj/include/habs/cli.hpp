/*
 * cli.hpp
 *
 *  horizon-abs <abstract|plan|validate|render|chain> --model PATH --out DIR [overrides]
 *
 *  Exit codes: 0 success, 1 I/O or parse error, 2 unsatisfiable,
 *  3 infeasible discretization, 4 validation failure.
 */
#pragma once

namespace habs::cli {

int run(int argc, const char* const* argv);

}  // namespace habs::cli
