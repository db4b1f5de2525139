#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace samt {

// Per-access energy, in arbitrary units per byte (per MAC for e_mac).
struct EnergyModel {
    double e_mac = 1.0;
    double e_s1 = 1.0;
    double e_s2 = 6.0;
    double e_s3 = 200.0;

    bool operator==(const EnergyModel&) const = default;
};

// Three-level spatial accelerator: PEs with private S1 scratchpads,
// grouped into clusters sharing a global S2 buffer, fed from off-chip
// memory (S3). Bandwidths are bytes/second; divide by clock for the
// (possibly fractional) bytes-per-cycle the cost model uses.
struct HardwareConfig {
    std::int64_t pe_count = 256;
    std::int64_t s1_bytes = 256;
    std::int64_t s2_bytes = 20ll * 1024 * 1024;
    double bw_noc_bytes_per_s = 16e9;
    double bw_offchip_bytes_per_s = 80e9;
    double clock_hz = 1e9;
    EnergyModel energy;

    [[nodiscard]] double noc_bytes_per_cycle() const { return bw_noc_bytes_per_s / clock_hz; }
    [[nodiscard]] double offchip_bytes_per_cycle() const {
        return bw_offchip_bytes_per_s / clock_hz;
    }

    [[nodiscard]] std::vector<std::string> validate() const;
    void ensure_valid() const;  // throws ValidationError
};

}  // namespace samt
