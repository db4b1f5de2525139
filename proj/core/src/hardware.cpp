#include "samt/hardware.hpp"

#include <sstream>

#include "samt/errors.hpp"

namespace samt {

std::vector<std::string> HardwareConfig::validate() const {
    std::vector<std::string> out;
    if (pe_count <= 0) out.push_back("pe_count: must be positive");
    if (s1_bytes <= 0) out.push_back("s1_bytes: must be positive");
    if (s2_bytes <= 0) out.push_back("s2_bytes: must be positive");
    if (!(bw_noc_bytes_per_s > 0)) out.push_back("bw_noc_bytes_per_s: must be positive");
    if (!(bw_offchip_bytes_per_s > 0)) out.push_back("bw_offchip_bytes_per_s: must be positive");
    if (!(clock_hz > 0)) out.push_back("clock_hz: must be positive");
    if (energy.e_mac < 0) out.push_back("energy.e_mac: must be non-negative");
    if (energy.e_s1 < 0) out.push_back("energy.e_s1: must be non-negative");
    if (energy.e_s2 < 0) out.push_back("energy.e_s2: must be non-negative");
    if (energy.e_s3 < 0) out.push_back("energy.e_s3: must be non-negative");
    return out;
}

void HardwareConfig::ensure_valid() const {
    const auto violations = validate();
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid hardware config:";
    for (const auto& v : violations) msg << " [" << v << "]";
    throw ValidationError(msg.str());
}

}  // namespace samt
