#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace substab::cli {

/// Everything a subcommand needs, filled from the command line.
struct RunConfig {
  std::string command;
  std::string input;
  std::string response = "y";
  std::string out_dir = ".";
  std::string truth;

  double alpha = 0.8;
  int B = 100;
  int s0 = 10;
  int K = 1;
  std::string base = "l0";
  std::string mode = "greedy";
  std::optional<double> corr_guard;
  int max_restarts = 0;
  std::uint64_t seed = 0;
  int workers = 0;

  double h = 0.2;
  std::vector<int> s0_grid;
  bool use_response = false;

  std::string recipe = "figure1";
  long n = 0;

  std::vector<std::string> methods;
  std::vector<double> alpha_grid;
  std::vector<double> h_grid;
  int repetitions = 5;
  int os_trials = 0;
  long n_fit = 200, n_model = 200, n_val = 200, n_test = 500;
  double scale = 1.0;
};

nlohmann::json to_json(const RunConfig& config);

/// Runs one subcommand, writing artifacts under config.out_dir and a short
/// report to `out`. Throws on failure.
void run(const RunConfig& config, std::ostream& out);

/// Parses argv and runs; returns the process exit status. Failures print a
/// one-line JSON error object to `err`.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace substab::cli
