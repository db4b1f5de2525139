#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "samt/hardware.hpp"
#include "samt/search.hpp"
#include "samt/workload.hpp"

namespace samt {

// ============================================================
// Run configuration, loaded from a JSON file with five optional
// sections: model, hardware, template, search, sweep. Missing keys
// fall back to the struct defaults; unknown keys are rejected so a
// typo cannot silently revert a field to its default.
// ============================================================

struct RunConfig {
    ModelDims model;
    HardwareConfig hardware;
    std::string template_name = "flexible";
    GaConfig search;
    std::vector<std::int64_t> sweep_s2_bytes;  // S2 capacities for the sweep command

    void ensure_valid() const;  // throws ValidationError
};

// Parses JSON text. Throws ValidationError on malformed JSON, unknown
// keys, or wrongly typed values.
[[nodiscard]] RunConfig parse_run_config(const std::string& text);

// Reads and parses a config file, then validates it. Throws IoError
// when the file cannot be read.
[[nodiscard]] RunConfig load_run_config(const std::string& path);

}  // namespace samt
