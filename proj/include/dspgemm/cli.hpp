#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dspgemm/blocking_tuner.hpp"

namespace dspgemm {

inline constexpr const char* kToolVersion = "1.0.0";

// Exit codes: 0 ok, 1 usage or input error, 2 verification failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::vector<MatrixShape> sweep_preset(const std::string& name);
std::vector<MatrixShape> parse_shapes_csv(const std::string& text);

}  // namespace dspgemm
