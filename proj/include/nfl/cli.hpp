#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "nfl/io.hpp"
#include "nfl/system.hpp"

namespace nfl::cli {

enum ExitCode : int { Ok = 0, CheckFailed = 1, InputError = 2, InfeasibleExit = 3, NumericalExit = 4 };

struct Options {
  std::string config;
  std::string out = ".";
  bool out_given = false;  // example: write files only when --out is given
  std::string input;   // convert: weight file
  std::string output;  // convert: INN file (default <out>/<stem>_inn.json)
  std::string result;  // simulate/verify: result file (default <out>/result.json)
  std::optional<unsigned> seed;
  bool baseline = false;
  std::optional<int> horizon;
  std::optional<double> eps;
  std::optional<std::string> multiplier;
  std::optional<std::string> objective;
};

int cmd_convert(const Options& o, std::ostream& out, std::ostream& err);
int cmd_synthesize(const Options& o, std::ostream& out, std::ostream& err);
int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err);
int cmd_verify(const Options& o, std::ostream& out, std::ostream& err);
int cmd_example(const Options& o, std::ostream& out, std::ostream& err);

/// Dispatches by name and maps exceptions to exit codes.
int run(const std::string& command, const Options& o, std::ostream& out, std::ostream& err);

/// Writes plant.json, network files and config.json for `sys` into `dir`.
std::filesystem::path write_project(const std::filesystem::path& dir, const BilinearNfl& sys);

}  // namespace nfl::cli
