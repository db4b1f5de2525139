#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "samt/drivers.hpp"
#include "samt/errors.hpp"

namespace {

// SAMT_THREADS caps the search worker pool; results never depend on
// it, only wall time does.
[[nodiscard]] int default_threads() {
    if (const char* env = std::getenv("SAMT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (env[0] == '\0' || end == nullptr || *end != '\0' || v < 1)
            throw samt::ValidationError("SAMT_THREADS must be a positive integer, got \"" +
                                        std::string(env) + "\"");
        return static_cast<int>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"design-space exploration for transformer layers on spatial accelerators"};
    app.require_subcommand(1);

    samt::DriverOptions opt;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config_path, "JSON run configuration")->required();
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { opt.seed = v; },
            "override the search seed from the config");
        cmd->add_option("--out", opt.out_dir, "directory for artifact files")
            ->capture_default_str();
        cmd->add_option("--format", opt.format, "artifact format: csv or json")
            ->capture_default_str();
    };

    auto* analyze =
        app.add_subcommand("analyze", "per-operator compute, traffic and intensity");
    add_common(analyze);
    auto* enumerate =
        app.add_subcommand("enumerate-fusions", "all 64 fusion codes with memory savings");
    add_common(enumerate);
    auto* cost = app.add_subcommand("cost", "evaluate one fusion code under given mappings");
    add_common(cost);
    cost->add_option("--genome", opt.genome_path,
                     "file with one mapping genome, or one per GEMM stage");
    cost->add_option("--code", opt.code_bits, "6-bit fusion code, e.g. 010000");
    auto* search =
        app.add_subcommand("search", "search mappings across all fusion codes and modes");
    add_common(search);
    auto* sweep = app.add_subcommand("sweep", "repeat the search across S2 capacities");
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        opt.threads = default_threads();
        if (analyze->parsed()) {
            samt::run_analyze(opt, std::cout);
        } else if (enumerate->parsed()) {
            samt::run_enumerate(opt, std::cout);
        } else if (cost->parsed()) {
            samt::run_cost(opt, std::cout);
        } else if (search->parsed()) {
            samt::run_search(opt, std::cout);
        } else if (sweep->parsed()) {
            samt::run_sweep(opt, std::cout);
        }
        return 0;
    } catch (const samt::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const samt::FeasibilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const samt::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
