#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gpforge/kernel.hpp"

namespace gpforge::cli {

enum ExitCode : int { Ok = 0, RuntimeFailure = 1, UsageFailure = 2 };

/// Entry point of the `gpforge` binary. `args` excludes the program name.
/// Subcommands: bounds, sample, experiment, precond-sweep, verify.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Locale-independent rendering with 17 significant digits.
std::string format_double(double v);

/// CSV with header "x0,...,x{d-1}" and one row per point.
InputData read_inputs_csv(const std::string& path);
void write_inputs_csv(const std::string& path, const InputData& inputs);

/// Reads the "index,y" sample format back into a vector.
Eigen::VectorXd read_sample_csv(const std::string& path);

}  // namespace gpforge::cli
