#include "samt/drivers.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "samt/config.hpp"
#include "samt/costmodel.hpp"
#include "samt/errors.hpp"
#include "samt/fusion.hpp"
#include "samt/mapping.hpp"
#include "samt/search.hpp"
#include "samt/workload.hpp"

namespace samt {

namespace {

using ordered_json = nlohmann::ordered_json;

[[nodiscard]] RunConfig load_options_config(const DriverOptions& opt) {
    if (opt.config_path.empty()) throw ValidationError("--config is required");
    RunConfig cfg = load_run_config(opt.config_path);
    if (opt.seed) cfg.search.seed = *opt.seed;
    return cfg;
}

void check_format(const std::string& format) {
    if (format != "csv" && format != "json")
        throw ValidationError("--format must be \"csv\" or \"json\", got \"" + format + "\"");
}

// Writes next to the final name and renames into place, so a crash
// mid-write never leaves a torn file under the advertised name.
void write_file_atomic(const std::string& dir, const std::string& name,
                       const std::string& content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    const fs::path final_path = fs::path(dir) / name;
    const fs::path tmp_path = fs::path(dir) / (name + ".tmp");
    {
        std::ofstream f(tmp_path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp_path.string());
        f << content;
        f.flush();
        if (!f) throw IoError("cannot write " + tmp_path.string());
    }
    if (std::rename(tmp_path.c_str(), final_path.c_str()) != 0)
        throw IoError("cannot rename " + tmp_path.string() + " to " + final_path.string());
}

// Integral values print without a decimal point; everything else gets
// six fixed places. Both forms are byte-stable for equal inputs.
[[nodiscard]] std::string fmt(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15)
        return std::to_string(static_cast<long long>(v));
    std::ostringstream o;
    o << std::fixed << std::setprecision(6) << v;
    return o.str();
}

[[nodiscard]] const char* kind_name(OpKind kind) {
    switch (kind) {
        case OpKind::Gemm: return "gemm";
        case OpKind::BatchedGemm: return "batched_gemm";
        default: return "elementwise";
    }
}

[[nodiscard]] const BaseOp& stage_op(const std::vector<BaseOp>& layer, OpId id) {
    for (const auto& op : layer)
        if (op.id == id) return op;
    throw ValidationError("layer has no stage named " + std::string(op_name(id)));
}

[[nodiscard]] std::vector<Genome> parse_genome_blocks(const std::string& text) {
    std::vector<std::string> blocks;
    std::string current;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
        if (blank) {
            if (!current.empty()) {
                blocks.push_back(current);
                current.clear();
            }
        } else {
            current += line;
            current += "\n";
        }
    }
    if (!current.empty()) blocks.push_back(current);
    std::vector<Genome> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(Genome::parse(b));
    return out;
}

[[nodiscard]] ordered_json report_json(const CostReport& r, bool with_tensors) {
    ordered_json j;
    j["latency_cycles"] = r.latency_cycles;
    j["compute_cycles"] = r.compute_cycles;
    j["mem_bound_cycles"] = r.mem_bound_cycles;
    j["energy_units"] = r.energy;
    j["acc_s1_bytes"] = r.acc_s1_bytes;
    j["acc_s2_bytes"] = r.acc_s2_bytes;
    j["acc_s3_bytes"] = r.acc_s3_bytes;
    j["mac_count"] = r.mac_count;
    j["flop_count"] = r.flop_count;
    j["pe_utilization"] = r.pe_utilization;
    if (with_tensors) {
        ordered_json tensors = ordered_json::array();
        for (const auto& t : r.tensors) {
            ordered_json tj;
            tj["tensor"] = t.tensor;
            tj["s3_bytes"] = t.s3_bytes;
            tj["s2_bytes"] = t.s2_bytes;
            tj["s1_bytes"] = t.s1_bytes;
            tensors.push_back(tj);
        }
        j["tensors"] = std::move(tensors);
    }
    return j;
}

void report_csv_row(std::ostringstream& csv, const std::string& unit, const CostReport& r) {
    csv << unit << ',' << fmt(r.latency_cycles) << ',' << r.compute_cycles << ','
        << fmt(r.mem_bound_cycles) << ',' << fmt(r.energy) << ',' << r.acc_s1_bytes << ','
        << r.acc_s2_bytes << ',' << r.acc_s3_bytes << ',' << r.mac_count << ','
        << fmt(r.pe_utilization) << '\n';
}

}  // namespace

// ============================================================
// analyze
// ============================================================

void run_analyze(const DriverOptions& opt, std::ostream& out) {
    check_format(opt.format);
    const RunConfig cfg = load_options_config(opt);
    const auto layer = build_layer(cfg.model);
    const std::int64_t B = cfg.model.bytes_per_element;
    const auto totals = layer_totals(layer, B);
    const double total_intensity = arithmetic_intensity(totals.flops, totals.mops);

    out << "layer analysis: d=" << cfg.model.d << " l=" << cfg.model.l
        << " n_h=" << cfg.model.n_h << " d_ffn=" << cfg.model.ffn_dim()
        << " mode=" << (cfg.model.mode == RunMode::Prefill ? "prefill" : "decode") << "\n";
    out << std::left << std::setw(11) << "op" << std::setw(14) << "kind" << std::right
        << std::setw(7) << "m" << std::setw(7) << "n" << std::setw(7) << "k" << std::setw(7)
        << "batch" << std::setw(15) << "flops" << std::setw(13) << "mops" << std::setw(12)
        << "intensity" << "\n";
    for (const auto& op : layer) {
        out << std::left << std::setw(11) << op_name(op.id) << std::setw(14) << kind_name(op.kind)
            << std::right << std::setw(7) << op.m << std::setw(7) << op.n << std::setw(7) << op.k
            << std::setw(7) << op.batch << std::setw(15) << op.flops() << std::setw(13)
            << op.mops(B) << std::setw(12) << fmt(arithmetic_intensity(op.flops(), op.mops(B)))
            << "\n";
    }
    out << std::left << std::setw(11) << "total" << std::setw(14) << "" << std::right
        << std::setw(7) << "" << std::setw(7) << "" << std::setw(7) << "" << std::setw(7) << ""
        << std::setw(15) << totals.flops << std::setw(13) << totals.mops << std::setw(12)
        << fmt(total_intensity) << "\n";

    if (opt.format == "csv") {
        std::ostringstream csv;
        csv << "op,kind,m,n,k,batch,flops,mops_bytes,intensity\n";
        for (const auto& op : layer)
            csv << op_name(op.id) << ',' << kind_name(op.kind) << ',' << op.m << ',' << op.n << ','
                << op.k << ',' << op.batch << ',' << op.flops() << ',' << op.mops(B) << ','
                << fmt(arithmetic_intensity(op.flops(), op.mops(B))) << '\n';
        csv << "total,,,,,," << totals.flops << ',' << totals.mops << ',' << fmt(total_intensity)
            << '\n';
        write_file_atomic(opt.out_dir, "analyze.csv", csv.str());
    } else {
        ordered_json j;
        ordered_json ops = ordered_json::array();
        for (const auto& op : layer) {
            ordered_json oj;
            oj["op"] = op_name(op.id);
            oj["kind"] = kind_name(op.kind);
            oj["m"] = op.m;
            oj["n"] = op.n;
            oj["k"] = op.k;
            oj["batch"] = op.batch;
            oj["flops"] = op.flops();
            oj["mops_bytes"] = op.mops(B);
            oj["intensity"] = arithmetic_intensity(op.flops(), op.mops(B));
            ops.push_back(oj);
        }
        j["ops"] = std::move(ops);
        j["total"] =
            ordered_json{{"flops", totals.flops}, {"mops_bytes", totals.mops},
                         {"intensity", total_intensity}};
        write_file_atomic(opt.out_dir, "analyze.json", j.dump(2) + "\n");
    }
}

// ============================================================
// enumerate-fusions
// ============================================================

void run_enumerate(const DriverOptions& opt, std::ostream& out) {
    check_format(opt.format);
    const RunConfig cfg = load_options_config(opt);
    const auto codes = enumerate_codes(cfg.model, cfg.hardware.s2_bytes);

    out << "fusion codes: s2_bytes=" << cfg.hardware.s2_bytes << "\n";
    out << std::left << std::setw(8) << "code" << std::setw(24) << "chains" << std::right
        << std::setw(16) << "reduced_elems" << std::setw(16) << "reduced_bytes" << std::setw(16)
        << "s2_required" << std::setw(10) << "feasible" << "\n";
    for (const auto& info : codes)
        out << std::left << std::setw(8) << info.code.str() << std::setw(24) << info.chains
            << std::right << std::setw(16) << info.memory_reduced_elems << std::setw(16)
            << info.memory_reduced_bytes << std::setw(16) << info.s2_required_bytes
            << std::setw(10) << (info.is_feasible ? 1 : 0) << "\n";

    if (opt.format == "csv") {
        std::ostringstream csv;
        csv << "code,chains,memory_reduced_elems,memory_reduced_bytes,s2_required_bytes,"
               "feasible\n";
        for (const auto& info : codes)
            csv << info.code.str() << ',' << info.chains << ',' << info.memory_reduced_elems << ','
                << info.memory_reduced_bytes << ',' << info.s2_required_bytes << ','
                << (info.is_feasible ? 1 : 0) << '\n';
        write_file_atomic(opt.out_dir, "fusions.csv", csv.str());
    } else {
        ordered_json j;
        ordered_json arr = ordered_json::array();
        for (const auto& info : codes) {
            ordered_json cj;
            cj["code"] = info.code.str();
            cj["chains"] = info.chains;
            cj["memory_reduced_elems"] = info.memory_reduced_elems;
            cj["memory_reduced_bytes"] = info.memory_reduced_bytes;
            cj["s2_required_bytes"] = info.s2_required_bytes;
            cj["feasible"] = info.is_feasible;
            arr.push_back(cj);
        }
        j["s2_bytes"] = cfg.hardware.s2_bytes;
        j["codes"] = std::move(arr);
        write_file_atomic(opt.out_dir, "fusions.json", j.dump(2) + "\n");
    }
}

// ============================================================
// cost
// ============================================================

void run_cost(const DriverOptions& opt, std::ostream& out) {
    check_format(opt.format);
    const RunConfig cfg = load_options_config(opt);
    const FusionCode code =
        opt.code_bits.empty() ? FusionCode{} : FusionCode::parse(opt.code_bits);
    const auto& tmpl = accelerator_template(cfg.template_name);
    const auto layer = build_layer(cfg.model);
    const auto stage_ids = gemm_stage_ids(layer);
    const std::int64_t B = cfg.model.bytes_per_element;

    GenomeMap genomes;
    if (opt.genome_path.empty()) {
        for (OpId id : stage_ids) {
            const BaseOp& op = stage_op(layer, id);
            genomes[id] = default_genome(tmpl, GemmShape::of(op, B), cfg.hardware);
        }
    } else {
        std::ifstream f(opt.genome_path, std::ios::binary);
        if (!f) throw IoError("cannot read genome file: " + opt.genome_path);
        std::ostringstream buf;
        buf << f.rdbuf();
        const auto parsed = parse_genome_blocks(buf.str());
        if (parsed.size() == 1) {
            for (OpId id : stage_ids) {
                const BaseOp& op = stage_op(layer, id);
                genomes[id] = repair_genome(parsed[0], GemmShape::of(op, B), cfg.hardware);
            }
        } else if (parsed.size() == stage_ids.size()) {
            for (std::size_t i = 0; i < stage_ids.size(); ++i) genomes[stage_ids[i]] = parsed[i];
        } else {
            throw ValidationError("genome file " + opt.genome_path + " must hold 1 genome or " +
                                  std::to_string(stage_ids.size()) + ", got " +
                                  std::to_string(parsed.size()));
        }
    }

    const auto report = evaluate_layer(code, genomes, cfg.model, cfg.hardware, tmpl);
    if (!report.feasible) throw FeasibilityError(report.message);

    out << "layer cost: code=" << code.str() << " template=" << cfg.template_name << "\n";
    out << std::left << std::setw(13) << "unit" << std::right << std::setw(14) << "latency"
        << std::setw(14) << "compute" << std::setw(14) << "mem_bound" << std::setw(16) << "energy"
        << std::setw(9) << "util" << "\n";
    for (const auto& chain : report.chains)
        out << std::left << std::setw(13) << chain.name << std::right << std::setw(14)
            << fmt(chain.total.latency_cycles) << std::setw(14) << chain.total.compute_cycles
            << std::setw(14) << fmt(chain.total.mem_bound_cycles) << std::setw(16)
            << fmt(chain.total.energy) << std::setw(9) << fmt(chain.total.pe_utilization) << "\n";
    out << std::left << std::setw(13) << "total" << std::right << std::setw(14)
        << fmt(report.total.latency_cycles) << std::setw(14) << report.total.compute_cycles
        << std::setw(14) << fmt(report.total.mem_bound_cycles) << std::setw(16)
        << fmt(report.total.energy) << std::setw(9) << fmt(report.total.pe_utilization) << "\n";

    if (opt.format == "csv") {
        std::ostringstream csv;
        csv << "unit,latency_cycles,compute_cycles,mem_bound_cycles,energy_units,acc_s1_bytes,"
               "acc_s2_bytes,acc_s3_bytes,mac_count,pe_utilization\n";
        for (const auto& chain : report.chains) report_csv_row(csv, chain.name, chain.total);
        report_csv_row(csv, "total", report.total);
        write_file_atomic(opt.out_dir, "cost.csv", csv.str());
    } else {
        ordered_json j;
        j["fusion_code"] = code.str();
        j["template"] = cfg.template_name;
        j["total"] = report_json(report.total, false);
        ordered_json chains = ordered_json::array();
        for (const auto& chain : report.chains) {
            ordered_json cj;
            cj["name"] = chain.name;
            cj["total"] = report_json(chain.total, false);
            ordered_json stages = ordered_json::array();
            for (const auto& stage : chain.stages) {
                ordered_json sj = report_json(stage, true);
                ordered_json named;
                named["op"] = stage.op;
                for (auto& item : sj.items()) named[item.key()] = item.value();
                stages.push_back(named);
            }
            cj["stages"] = std::move(stages);
            chains.push_back(cj);
        }
        j["chains"] = std::move(chains);
        write_file_atomic(opt.out_dir, "cost.json", j.dump(2) + "\n");
    }
}

// ============================================================
// search
// ============================================================

namespace {

[[nodiscard]] ordered_json entry_json(const CodeSearchResult& e,
                                      const std::vector<OpId>& stage_ids) {
    ordered_json j;
    j["fusion_code"] = e.code.str();
    j["dataflow_mode"] = dataflow_mode_name(e.mode);
    j["latency_cycles"] = e.fitness.latency;
    j["energy_units"] = e.fitness.energy;
    j["s2_required_bytes"] = e.s2_required_bytes;
    j["memory_reduced_bytes"] = e.memory_reduced_bytes;
    ordered_json genomes;
    for (std::size_t i = 0; i < e.genomes.size() && i < stage_ids.size(); ++i)
        genomes[op_name(stage_ids[i])] = e.genomes[i].str();
    j["genomes"] = std::move(genomes);
    return j;
}

void write_search_artifacts(const std::string& dir, const FullSearchResult& result,
                            const std::vector<OpId>& stage_ids) {
    std::ostringstream pareto;
    pareto << "latency_cycles,energy_units,s2_bytes_needed,fusion_code,genome_ref\n";
    for (std::size_t idx : result.pareto) {
        const auto& e = result.entries[idx];
        pareto << fmt(e.fitness.latency) << ',' << fmt(e.fitness.energy) << ','
               << e.s2_required_bytes << ',' << e.code.str() << ',' << e.code.str() << ':'
               << dataflow_mode_name(e.mode) << '\n';
    }
    write_file_atomic(dir, "pareto.csv", pareto.str());

    const auto& best = result.best();
    ordered_json j = entry_json(best, stage_ids);
    ordered_json points = ordered_json::array();
    for (std::size_t idx : result.pareto)
        points.push_back(entry_json(result.entries[idx], stage_ids));
    j["pareto"] = std::move(points);
    write_file_atomic(dir, "best.json", j.dump(2) + "\n");

    std::ostringstream trace;
    trace << "fusion_code,dataflow_mode,generation,best_latency_cycles,best_energy_units\n";
    for (const auto& e : result.entries) {
        if (!e.feasible) continue;
        for (const auto& point : e.trace)
            trace << e.code.str() << ',' << dataflow_mode_name(e.mode) << ',' << point.generation
                  << ',' << fmt(point.best_latency) << ',' << fmt(point.best_energy) << '\n';
    }
    write_file_atomic(dir, "trace.csv", trace.str());
}

}  // namespace

void run_search(const DriverOptions& opt, std::ostream& out) {
    check_format(opt.format);
    const RunConfig cfg = load_options_config(opt);
    const auto& tmpl = accelerator_template(cfg.template_name);
    const auto stage_ids = gemm_stage_ids(build_layer(cfg.model));

    const auto result = full_search(cfg.model, cfg.hardware, tmpl, cfg.search, opt.threads);
    write_search_artifacts(opt.out_dir, result, stage_ids);

    std::size_t feasible = 0;
    for (const auto& e : result.entries)
        if (e.feasible) ++feasible;
    const auto& best = result.best();
    out << "search: template=" << cfg.template_name << " seed=" << cfg.search.seed << "\n";
    out << "feasible entries: " << feasible << " of " << result.entries.size() << "\n";
    out << "pareto size: " << result.pareto.size() << "\n";
    out << "best: code=" << best.code.str() << " mode=" << dataflow_mode_name(best.mode)
        << " latency=" << fmt(best.fitness.latency) << " energy=" << fmt(best.fitness.energy)
        << "\n";
}

// ============================================================
// sweep
// ============================================================

void run_sweep(const DriverOptions& opt, std::ostream& out) {
    check_format(opt.format);
    const RunConfig cfg = load_options_config(opt);
    if (cfg.sweep_s2_bytes.empty())
        throw ValidationError("config: sweep.s2_bytes: required for the sweep command");
    const auto& tmpl = accelerator_template(cfg.template_name);

    out << "sweep: template=" << cfg.template_name << " seed=" << cfg.search.seed << "\n";
    out << std::right << std::setw(12) << "s2_bytes" << std::setw(12) << "status" << std::setw(8)
        << "code" << std::setw(10) << "mode" << std::setw(14) << "latency" << std::setw(16)
        << "energy" << "\n";

    std::ostringstream csv;
    csv << "s2_bytes,status,best_code,best_mode,latency_cycles,energy_units,"
           "memory_reduced_bytes,s2_required_bytes\n";
    for (std::int64_t s2 : cfg.sweep_s2_bytes) {
        HardwareConfig hw = cfg.hardware;
        hw.s2_bytes = s2;
        try {
            const auto result = full_search(cfg.model, hw, tmpl, cfg.search, opt.threads);
            const auto& best = result.best();
            csv << s2 << ",ok," << best.code.str() << ',' << dataflow_mode_name(best.mode) << ','
                << fmt(best.fitness.latency) << ',' << fmt(best.fitness.energy) << ','
                << best.memory_reduced_bytes << ',' << best.s2_required_bytes << '\n';
            out << std::right << std::setw(12) << s2 << std::setw(12) << "ok" << std::setw(8)
                << best.code.str() << std::setw(10) << dataflow_mode_name(best.mode)
                << std::setw(14) << fmt(best.fitness.latency) << std::setw(16)
                << fmt(best.fitness.energy) << "\n";
        } catch (const FeasibilityError&) {
            csv << s2 << ",infeasible,,,,,,\n";
            out << std::right << std::setw(12) << s2 << std::setw(12) << "infeasible"
                << std::setw(8) << "-" << std::setw(10) << "-" << std::setw(14) << "-"
                << std::setw(16) << "-" << "\n";
        }
    }
    write_file_atomic(opt.out_dir, "aggregate.csv", csv.str());
}

}  // namespace samt
