#include "samt/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>
#include <sstream>

#include "samt/errors.hpp"

namespace samt {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

[[nodiscard]] std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Pairwise-product footprint of one tile (A + B + C panels), bytes.
[[nodiscard]] std::int64_t tile_footprint_bytes(std::int64_t m, std::int64_t n, std::int64_t k,
                                                std::int64_t bytes_per_element) {
    return (m * k + k * n + m * n) * bytes_per_element;
}

constexpr std::array<Dim, 3> kDims = {Dim::M, Dim::N, Dim::K};

}  // namespace

const char* dim_name(Dim d) {
    switch (d) {
        case Dim::M: return "M";
        case Dim::N: return "N";
        case Dim::K: return "K";
    }
    return "?";
}

GemmShape GemmShape::of(const BaseOp& op, std::int64_t bytes_per_element) {
    return GemmShape{op.m, op.n, op.k, op.batch, bytes_per_element};
}

std::int64_t GemmShape::extent(Dim d) const {
    switch (d) {
        case Dim::M: return m;
        case Dim::N: return n;
        case Dim::K: return k;
    }
    return 1;
}

const Directive& LevelMap::at(Dim d) const {
    for (const auto& dir : directives)
        if (dir.dim == d) return dir;
    throw ValidationError(std::string("level map has no directive for dimension ") + dim_name(d));
}

Dim LevelMap::spatial_dim() const {
    for (const auto& dir : directives)
        if (dir.kind == MapKind::Spatial) return dir.dim;
    throw ValidationError("level map has no spatial directive");
}

// ============================================================
// Text codec
// ============================================================

namespace {

std::string level_text(const LevelMap& level) {
    std::vector<std::string> parts;
    for (const auto& dir : level.directives) {
        std::ostringstream os;
        os << (dir.kind == MapKind::Spatial ? "SpatialMap" : "TemporalMap") << '(' << dir.size
           << ',' << dir.offset << ") " << dim_name(dir.dim) << ';';
        parts.push_back(os.str());
    }
    return join(parts, " ");
}

}  // namespace

std::string Genome::str() const {
    std::ostringstream os;
    os << level_text(inter) << '\n' << "Cluster(" << cluster_size << ");\n" << level_text(intra)
       << '\n';
    return os.str();
}

Genome Genome::parse(const std::string& text) {
    static const std::regex token_re(
        R"((SpatialMap|TemporalMap)\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*([MNK])\s*;|Cluster\s*\(\s*(\d+)\s*\)\s*;)");

    struct Token {
        bool is_cluster = false;
        Directive dir;
        std::int64_t cluster = 0;
    };
    std::vector<Token> tokens;
    auto begin = std::sregex_iterator(text.begin(), text.end(), token_re);
    auto end = std::sregex_iterator();
    std::size_t consumed = 0;
    for (auto it = begin; it != end; ++it) {
        const auto& m = *it;
        // Only whitespace may separate tokens.
        const std::string gap = text.substr(consumed, static_cast<std::size_t>(m.position()) - consumed);
        if (gap.find_first_not_of(" \t\r\n") != std::string::npos)
            throw ValidationError("genome text has unrecognized content: \"" + gap + "\"");
        consumed = static_cast<std::size_t>(m.position() + m.length());
        Token t;
        if (m[5].matched) {
            t.is_cluster = true;
            t.cluster = std::stoll(m[5].str());
        } else {
            t.dir.kind = m[1].str() == "SpatialMap" ? MapKind::Spatial : MapKind::Temporal;
            t.dir.size = std::stoll(m[2].str());
            t.dir.offset = std::stoll(m[3].str());
            const char c = m[4].str()[0];
            t.dir.dim = c == 'M' ? Dim::M : c == 'N' ? Dim::N : Dim::K;
        }
        tokens.push_back(t);
    }
    if (text.substr(consumed).find_first_not_of(" \t\r\n") != std::string::npos)
        throw ValidationError("genome text has trailing unrecognized content");
    if (tokens.size() != 7 || tokens[0].is_cluster || tokens[1].is_cluster || tokens[2].is_cluster ||
        !tokens[3].is_cluster || tokens[4].is_cluster || tokens[5].is_cluster ||
        tokens[6].is_cluster)
        throw ValidationError(
            "genome text must be three directives, a Cluster line, then three directives");

    Genome g;
    for (int i = 0; i < 3; ++i) g.inter.directives[static_cast<std::size_t>(i)] = tokens[static_cast<std::size_t>(i)].dir;
    g.cluster_size = tokens[3].cluster;
    for (int i = 0; i < 3; ++i) g.intra.directives[static_cast<std::size_t>(i)] = tokens[static_cast<std::size_t>(i + 4)].dir;
    return g;
}

// ============================================================
// Template registry
// ============================================================

namespace {

std::vector<AcceleratorTemplate> make_templates() {
    using S = SlotSpec;
    constexpr auto T = MapKind::Temporal;
    constexpr auto Sp = MapKind::Spatial;
    std::vector<AcceleratorTemplate> v;

    AcceleratorTemplate shidiannao;
    shidiannao.name = "shidiannao";
    shidiannao.supports_spatial_reduction = false;
    shidiannao.forwarding = true;
    shidiannao.cluster_size = 16;
    shidiannao.inter_structure = {{S{T, Dim::K}, S{T, Dim::N}, S{Sp, Dim::M}}};
    shidiannao.intra_structure = {{S{T, Dim::M}, S{T, Dim::K}, S{Sp, Dim::N}}};
    v.push_back(shidiannao);

    AcceleratorTemplate nvdla;
    nvdla.name = "nvdla";
    nvdla.cluster_size = 64;
    nvdla.inter_structure = {{S{T, Dim::M}, S{T, Dim::K}, S{Sp, Dim::N}}};
    nvdla.intra_structure = {{S{T, Dim::N}, S{T, Dim::M}, S{Sp, Dim::K}}};
    v.push_back(nvdla);

    AcceleratorTemplate eyeriss;
    eyeriss.name = "eyeriss";
    eyeriss.cluster_size = 14;
    eyeriss.inter_structure = {{S{T, Dim::K}, S{T, Dim::N}, S{Sp, Dim::M}}};
    eyeriss.intra_structure = {{S{T, Dim::M}, S{T, Dim::N}, S{Sp, Dim::K}}};
    v.push_back(eyeriss);

    AcceleratorTemplate tpu;
    tpu.name = "tpu";
    tpu.cluster_size = 128;
    tpu.inter_structure = {{S{Sp, Dim::N}, S{T, Dim::M}, S{T, Dim::K}}};
    tpu.intra_structure = {{S{T, Dim::N}, S{Sp, Dim::K}, S{T, Dim::M}}};
    v.push_back(tpu);

    AcceleratorTemplate flexible;
    flexible.name = "flexible";
    flexible.per_operator_dataflow = true;
    v.push_back(flexible);

    return v;
}

const std::vector<AcceleratorTemplate>& templates() {
    static const std::vector<AcceleratorTemplate> v = make_templates();
    return v;
}

}  // namespace

const AcceleratorTemplate& accelerator_template(const std::string& name) {
    for (const auto& t : templates())
        if (t.name == name) return t;
    throw ValidationError("unknown accelerator template \"" + name + "\" (expected one of " +
                          join(template_names(), ", ") + ")");
}

std::vector<std::string> template_names() {
    std::vector<std::string> names;
    for (const auto& t : templates()) names.push_back(t.name);
    return names;
}

// ============================================================
// Validation
// ============================================================

namespace {

void check_level(const LevelMap& level, const char* which, std::vector<std::string>& out) {
    int spatial = 0;
    std::array<int, 3> seen{};
    for (const auto& dir : level.directives) {
        seen[static_cast<std::size_t>(dir.dim)]++;
        if (dir.kind == MapKind::Spatial) spatial++;
        if (dir.size < 1)
            out.push_back(std::string(which) + ": size for " + dim_name(dir.dim) +
                          " must be >= 1");
        if (dir.offset < 1)
            out.push_back(std::string(which) + ": offset for " + dim_name(dir.dim) +
                          " must be >= 1");
        if (dir.offset > dir.size)
            out.push_back(std::string(which) + ": offset for " + dim_name(dir.dim) +
                          " must not exceed its size");
    }
    for (std::size_t i = 0; i < 3; ++i)
        if (seen[i] != 1)
            out.push_back(std::string(which) + ": dimension " + dim_name(static_cast<Dim>(i)) +
                          " must appear exactly once");
    if (spatial != 1)
        out.push_back(std::string(which) + ": exactly one directive must be spatial");
}

[[nodiscard]] bool structure_matches(const LevelMap& level,
                                     const std::array<SlotSpec, 3>& structure) {
    for (std::size_t i = 0; i < 3; ++i)
        if (level.directives[i].kind != structure[i].kind ||
            level.directives[i].dim != structure[i].dim)
            return false;
    return true;
}

[[nodiscard]] bool level_well_formed(const LevelMap& level) {
    std::vector<std::string> v;
    check_level(level, "", v);
    return v.empty();
}

}  // namespace

std::vector<std::string> validate_genome(const Genome& g, const GemmShape& gemm,
                                         const HardwareConfig& hw,
                                         const AcceleratorTemplate& tmpl) {
    std::vector<std::string> out;
    check_level(g.inter, "inter", out);
    check_level(g.intra, "intra", out);

    if (g.cluster_size < 1) out.push_back("cluster size must be >= 1");
    if (g.cluster_size > hw.pe_count)
        out.push_back("cluster size " + std::to_string(g.cluster_size) +
                      " exceeds PE count " + std::to_string(hw.pe_count));

    if (tmpl.cluster_size > 0 && g.cluster_size != tmpl.cluster_size)
        out.push_back("template " + tmpl.name + " requires cluster size " +
                      std::to_string(tmpl.cluster_size));
    if (tmpl.inter_structure && !structure_matches(g.inter, *tmpl.inter_structure))
        out.push_back("inter level does not match the " + tmpl.name + " dataflow structure");
    if (tmpl.intra_structure && !structure_matches(g.intra, *tmpl.intra_structure))
        out.push_back("intra level does not match the " + tmpl.name + " dataflow structure");

    if (!level_well_formed(g.inter) || !level_well_formed(g.intra)) return out;

    if (!tmpl.supports_spatial_reduction) {
        if (g.inter.spatial_dim() == Dim::K)
            out.push_back("template " + tmpl.name + " does not support spatial reduction (inter)");
        if (g.intra.spatial_dim() == Dim::K)
            out.push_back("template " + tmpl.name + " does not support spatial reduction (intra)");
    }

    const std::int64_t pe_bytes =
        tile_footprint_bytes(g.intra.size_of(Dim::M), g.intra.size_of(Dim::N),
                             g.intra.size_of(Dim::K), gemm.bytes_per_element);
    if (pe_bytes > hw.s1_bytes)
        out.push_back("per-PE tile needs " + std::to_string(pe_bytes) + " bytes but S1 holds " +
                      std::to_string(hw.s1_bytes));

    const std::int64_t cluster_bytes =
        tile_footprint_bytes(g.inter.size_of(Dim::M), g.inter.size_of(Dim::N),
                             g.inter.size_of(Dim::K), gemm.bytes_per_element);
    if (cluster_bytes > hw.s2_bytes)
        out.push_back("per-cluster tile needs " + std::to_string(cluster_bytes) +
                      " bytes but S2 holds " + std::to_string(hw.s2_bytes));
    return out;
}

void ensure_valid_genome(const Genome& g, const GemmShape& gemm, const HardwareConfig& hw,
                         const AcceleratorTemplate& tmpl) {
    const auto violations = validate_genome(g, gemm, hw, tmpl);
    if (!violations.empty()) throw ValidationError("invalid genome: " + join(violations, "; "));
}

// ============================================================
// Construction
// ============================================================

std::vector<std::int64_t> divisors(std::int64_t n) {
    if (n < 1) throw ValidationError("divisors() needs a positive value");
    std::vector<std::int64_t> out;
    for (std::int64_t i = 1; i * i <= n; ++i) {
        if (n % i != 0) continue;
        out.push_back(i);
        if (i != n / i) out.push_back(n / i);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void set_directive_size(LevelMap& level, Dim d, std::int64_t size) {
    for (auto& dir : level.directives)
        if (dir.dim == d) {
            dir.size = size;
            dir.offset = size;
        }
}

namespace {

constexpr std::array<SlotSpec, 3> kFreeInter = {
    {SlotSpec{MapKind::Temporal, Dim::K}, SlotSpec{MapKind::Temporal, Dim::N},
     SlotSpec{MapKind::Spatial, Dim::M}}};
constexpr std::array<SlotSpec, 3> kFreeIntra = {
    {SlotSpec{MapKind::Temporal, Dim::M}, SlotSpec{MapKind::Temporal, Dim::K},
     SlotSpec{MapKind::Spatial, Dim::N}}};

LevelMap level_from_structure(const std::array<SlotSpec, 3>& structure) {
    LevelMap level;
    for (std::size_t i = 0; i < 3; ++i)
        level.directives[i] = Directive{structure[i].kind, structure[i].dim, 1, 1};
    return level;
}


// Largest divisor of `extent` that is <= cap (cap >= 1).
std::int64_t largest_divisor_at_most(std::int64_t extent, std::int64_t cap) {
    const auto divs = divisors(extent);
    std::int64_t best = 1;
    for (std::int64_t d : divs)
        if (d <= cap) best = d;
    return best;
}

// Shrink sizes (each a divisor of its extent) until the pairwise
// footprint fits the byte budget. Returns false if even unit tiles
// overflow.
bool shrink_to_fit(LevelMap& level, const GemmShape& gemm, std::int64_t budget_bytes) {
    auto footprint = [&] {
        return tile_footprint_bytes(level.size_of(Dim::M), level.size_of(Dim::N),
                                    level.size_of(Dim::K), gemm.bytes_per_element);
    };
    while (footprint() > budget_bytes) {
        Dim victim = Dim::M;
        std::int64_t largest = 0;
        for (Dim d : kDims) {
            const std::int64_t s = level.size_of(d);
            if (s > largest) {
                largest = s;
                victim = d;
            }
        }
        if (largest <= 1) return false;
        const auto divs = divisors(gemm.extent(victim));
        std::int64_t next = 1;
        for (std::int64_t d : divs)
            if (d < largest) next = d;
        set_directive_size(level, victim, next);
    }
    return true;
}

// Shrink the spatial size (drawn from divisors of `menu_extent`)
// until its tile count over `covered_extent` reaches `lanes`.
void cover_lanes(LevelMap& level, std::int64_t covered_extent, std::int64_t menu_extent,
                 std::int64_t lanes) {
    const Dim sd = level.spatial_dim();
    auto tiles = [&] { return ceil_div(covered_extent, level.size_of(sd)); };
    while (tiles() < lanes && level.size_of(sd) > 1) {
        const auto divs = divisors(menu_extent);
        std::int64_t next = 1;
        for (std::int64_t d : divs)
            if (d < level.size_of(sd)) next = d;
        set_directive_size(level, sd, next);
    }
}

std::int64_t default_cluster_size(const AcceleratorTemplate& tmpl, const HardwareConfig& hw) {
    if (tmpl.cluster_size > 0) return tmpl.cluster_size;
    // Divisor of the PE count closest to its square root, smaller on ties.
    const auto divs = divisors(hw.pe_count);
    const double root = std::sqrt(static_cast<double>(hw.pe_count));
    std::int64_t best = 1;
    for (std::int64_t d : divs)
        if (std::abs(static_cast<double>(d) - root) < std::abs(static_cast<double>(best) - root))
            best = d;
    return best;
}

}  // namespace

Genome default_genome(const AcceleratorTemplate& tmpl, const GemmShape& gemm,
                      const HardwareConfig& hw) {
    Genome g;
    g.inter = level_from_structure(tmpl.inter_structure ? *tmpl.inter_structure : kFreeInter);
    g.intra = level_from_structure(tmpl.intra_structure ? *tmpl.intra_structure : kFreeIntra);
    g.cluster_size = default_cluster_size(tmpl, hw);
    if (g.cluster_size > hw.pe_count)
        throw FeasibilityError("template " + tmpl.name + " needs a cluster of " +
                               std::to_string(g.cluster_size) + " PEs but only " +
                               std::to_string(hw.pe_count) + " exist");

    for (Dim d : kDims) set_directive_size(g.inter, d, gemm.extent(d));
    if (!shrink_to_fit(g.inter, gemm, hw.s2_bytes))
        throw FeasibilityError("no tiling of this operator fits the S2 buffer of " +
                               std::to_string(hw.s2_bytes) + " bytes");
    const std::int64_t clusters = std::max<std::int64_t>(1, hw.pe_count / g.cluster_size);
    const Dim inter_sd = g.inter.spatial_dim();
    cover_lanes(g.inter, gemm.extent(inter_sd), gemm.extent(inter_sd), clusters);

    for (Dim d : kDims)
        set_directive_size(g.intra, d, largest_divisor_at_most(gemm.extent(d), g.inter.size_of(d)));
    if (!shrink_to_fit(g.intra, gemm, hw.s1_bytes))
        throw FeasibilityError("no tiling of this operator fits the S1 scratchpad of " +
                               std::to_string(hw.s1_bytes) + " bytes");
    const Dim intra_sd = g.intra.spatial_dim();
    cover_lanes(g.intra, g.inter.size_of(intra_sd), gemm.extent(intra_sd), g.cluster_size);

    ensure_valid_genome(g, gemm, hw, tmpl);
    return g;
}

namespace {

std::uint64_t pick(std::mt19937_64& rng, std::uint64_t n) { return n <= 1 ? 0 : rng() % n; }

std::array<SlotSpec, 3> random_structure(std::mt19937_64& rng, bool allow_spatial_k) {
    std::array<Dim, 3> order = {Dim::M, Dim::N, Dim::K};
    for (std::size_t i = 2; i > 0; --i)
        std::swap(order[i], order[pick(rng, i + 1)]);
    while (true) {
        const std::size_t spatial = pick(rng, 3);
        if (!allow_spatial_k && order[spatial] == Dim::K) continue;
        std::array<SlotSpec, 3> s;
        for (std::size_t i = 0; i < 3; ++i)
            s[i] = SlotSpec{i == spatial ? MapKind::Spatial : MapKind::Temporal, order[i]};
        return s;
    }
}

}  // namespace

Genome random_genome(const AcceleratorTemplate& tmpl, const GemmShape& gemm,
                     const HardwareConfig& hw, std::mt19937_64& rng) {
    Genome g;
    g.inter = level_from_structure(
        tmpl.inter_structure ? *tmpl.inter_structure
                             : random_structure(rng, tmpl.supports_spatial_reduction));
    g.intra = level_from_structure(
        tmpl.intra_structure ? *tmpl.intra_structure
                             : random_structure(rng, tmpl.supports_spatial_reduction));
    if (tmpl.cluster_size > 0) {
        g.cluster_size = tmpl.cluster_size;
    } else {
        const auto divs = divisors(hw.pe_count);
        g.cluster_size = divs[pick(rng, divs.size())];
    }

    for (Dim d : kDims) {
        const auto divs = divisors(gemm.extent(d));
        const std::int64_t s1 = divs[pick(rng, divs.size())];
        std::vector<std::int64_t> small;
        for (std::int64_t v : divs)
            if (v <= s1) small.push_back(v);
        const std::int64_t s0 = small[pick(rng, small.size())];
        set_directive_size(g.inter, d, s1);
        set_directive_size(g.intra, d, s0);
    }

    // Repair oversized draws so the result is always valid.
    if (!shrink_to_fit(g.inter, gemm, hw.s2_bytes))
        throw FeasibilityError("no tiling of this operator fits the S2 buffer of " +
                               std::to_string(hw.s2_bytes) + " bytes");
    for (Dim d : kDims)
        if (g.intra.size_of(d) > g.inter.size_of(d))
            set_directive_size(g.intra, d, largest_divisor_at_most(gemm.extent(d), g.inter.size_of(d)));
    if (!shrink_to_fit(g.intra, gemm, hw.s1_bytes))
        throw FeasibilityError("no tiling of this operator fits the S1 scratchpad of " +
                               std::to_string(hw.s1_bytes) + " bytes");

    ensure_valid_genome(g, gemm, hw, tmpl);
    return g;
}

Genome repair_genome(Genome g, const GemmShape& gemm, const HardwareConfig& hw) {
    for (auto* level : {&g.inter, &g.intra})
        for (auto& dir : level->directives) {
            if (dir.size < 1) dir.size = 1;
            dir.offset = dir.size;
        }
    if (!shrink_to_fit(g.inter, gemm, hw.s2_bytes))
        throw FeasibilityError("no tiling of this operator fits the S2 buffer of " +
                               std::to_string(hw.s2_bytes) + " bytes");
    for (Dim d : kDims)
        if (g.intra.size_of(d) > g.inter.size_of(d))
            set_directive_size(g.intra, d,
                               largest_divisor_at_most(gemm.extent(d), g.inter.size_of(d)));
    if (!shrink_to_fit(g.intra, gemm, hw.s1_bytes))
        throw FeasibilityError("no tiling of this operator fits the S1 scratchpad of " +
                               std::to_string(hw.s1_bytes) + " bytes");
    return g;
}

// ============================================================
// Search-space size
// ============================================================

MappingSpaceCount count_mapping_space(const AcceleratorTemplate& tmpl, const GemmShape& gemm,
                                      const HardwareConfig& hw) {
    // Cluster choices.
    unsigned long long clusters;
    if (tmpl.cluster_size > 0) {
        clusters = tmpl.cluster_size <= hw.pe_count ? 1ull : 0ull;
    } else {
        clusters = divisors(hw.pe_count).size();
    }

    // Structure choices per level: 3! orders x 3 spatial slots, minus
    // spatial-K when unsupported. Fixed structures contribute one.
    auto level_structures = [&](const std::optional<std::array<SlotSpec, 3>>& fixed) {
        if (fixed) return 1ull;
        return tmpl.supports_spatial_reduction ? 18ull : 12ull;
    };

    // Size choices per dimension: divisor pairs with intra <= inter.
    auto size_pairs = [](std::int64_t extent) {
        const auto n = static_cast<unsigned long long>(divisors(extent).size());
        return n * (n + 1) / 2;
    };

    const unsigned long long factors[] = {clusters,
                                          level_structures(tmpl.inter_structure),
                                          level_structures(tmpl.intra_structure),
                                          size_pairs(gemm.m),
                                          size_pairs(gemm.n),
                                          size_pairs(gemm.k)};
    MappingSpaceCount result;
    result.count = 1;
    bool overflow = false;
    double log10_sum = 0.0;
    for (const unsigned long long f : factors) {
        if (f == 0) {
            result.count = 0;
            result.log10_count = 0.0;
            return result;
        }
        log10_sum += std::log10(static_cast<double>(f));
        unsigned long long next = 0;
        if (overflow || __builtin_mul_overflow(result.count, f, &next)) {
            overflow = true;
        } else {
            result.count = next;
        }
    }
    // When the product overflows, the count saturates and the log10
    // estimate carries the magnitude.
    if (overflow) result.count = std::numeric_limits<unsigned long long>::max();
    result.log10_count = log10_sum;
    return result;
}

}  // namespace samt
