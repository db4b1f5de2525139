#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace samt {

// ============================================================
// Subcommand drivers behind the command-line tool. Each one loads
// the config, prints a fixed-width summary to `out`, and writes its
// artifact files into `out_dir` (atomically: a temp file is renamed
// into place, so readers never observe a half-written file). Errors
// are reported by throwing ValidationError, FeasibilityError, or
// IoError; the caller maps those to exit codes.
//
// Artifacts:
//   analyze            analyze.csv | analyze.json
//   enumerate-fusions  fusions.csv | fusions.json
//   cost               cost.csv    | cost.json
//   search             pareto.csv, best.json, trace.csv
//   sweep              aggregate.csv
// ============================================================

struct DriverOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;  // overrides the config's search seed
    std::string out_dir = ".";
    std::string format = "csv";  // "csv" or "json"; search and sweep write fixed names
    std::string genome_path;     // cost: file with one genome, or one per GEMM stage
    std::string code_bits;       // cost: fusion code, e.g. "010000"; empty means none
    int threads = 1;
};

void run_analyze(const DriverOptions& opt, std::ostream& out);
void run_enumerate(const DriverOptions& opt, std::ostream& out);
void run_cost(const DriverOptions& opt, std::ostream& out);
void run_search(const DriverOptions& opt, std::ostream& out);
void run_sweep(const DriverOptions& opt, std::ostream& out);

}  // namespace samt
