#include "samt/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "samt/errors.hpp"
#include "samt/mapping.hpp"

namespace samt {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (item.key() == a) {
                known = true;
                break;
            }
        if (!known) throw ValidationError("config: unknown key \"" + where + item.key() + "\"");
    }
}

[[nodiscard]] const json& expect_object(const json& obj, const std::string& where,
                                        const char* key) {
    const json& v = obj.at(key);
    if (!v.is_object())
        throw ValidationError("config: " + where + key + ": expected an object");
    return v;
}

[[nodiscard]] std::int64_t take_int(const json& obj, const std::string& where, const char* key,
                                    std::int64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ValidationError("config: " + where + key + ": expected an integer");
    return v.get<std::int64_t>();
}

[[nodiscard]] double take_num(const json& obj, const std::string& where, const char* key,
                              double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ValidationError("config: " + where + key + ": expected a number");
    return v.get<double>();
}

[[nodiscard]] std::string take_str(const json& obj, const std::string& where, const char* key,
                                   std::string fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ValidationError("config: " + where + key + ": expected a string");
    return v.get<std::string>();
}

void parse_model(const json& obj, ModelDims& model) {
    const std::string where = "model.";
    check_keys(obj, where,
               {"d", "l", "n_h", "d_ffn", "bytes_per_element", "mode", "kv_len", "c_sm",
                "c_gelu"});
    model.d = take_int(obj, where, "d", model.d);
    model.l = take_int(obj, where, "l", model.l);
    model.n_h = take_int(obj, where, "n_h", model.n_h);
    model.d_ffn = take_int(obj, where, "d_ffn", model.d_ffn);
    model.bytes_per_element = take_int(obj, where, "bytes_per_element", model.bytes_per_element);
    model.kv_len = take_int(obj, where, "kv_len", model.kv_len);
    model.c_sm = take_int(obj, where, "c_sm", model.c_sm);
    model.c_gelu = take_int(obj, where, "c_gelu", model.c_gelu);
    const std::string mode = take_str(obj, where, "mode", "prefill");
    if (mode == "prefill") {
        model.mode = RunMode::Prefill;
    } else if (mode == "decode") {
        model.mode = RunMode::Decode;
    } else {
        throw ValidationError("config: model.mode: expected \"prefill\" or \"decode\", got \"" +
                              mode + "\"");
    }
}

void parse_hardware(const json& obj, HardwareConfig& hw) {
    const std::string where = "hardware.";
    check_keys(obj, where,
               {"pe_count", "s1_bytes", "s2_bytes", "bw_noc_bytes_per_s", "bw_offchip_bytes_per_s",
                "clock_hz", "energy"});
    hw.pe_count = take_int(obj, where, "pe_count", hw.pe_count);
    hw.s1_bytes = take_int(obj, where, "s1_bytes", hw.s1_bytes);
    hw.s2_bytes = take_int(obj, where, "s2_bytes", hw.s2_bytes);
    hw.bw_noc_bytes_per_s = take_num(obj, where, "bw_noc_bytes_per_s", hw.bw_noc_bytes_per_s);
    hw.bw_offchip_bytes_per_s =
        take_num(obj, where, "bw_offchip_bytes_per_s", hw.bw_offchip_bytes_per_s);
    hw.clock_hz = take_num(obj, where, "clock_hz", hw.clock_hz);
    if (obj.contains("energy")) {
        const json& e = expect_object(obj, where, "energy");
        const std::string ewhere = "hardware.energy.";
        check_keys(e, ewhere, {"e_mac", "e_s1", "e_s2", "e_s3"});
        hw.energy.e_mac = take_num(e, ewhere, "e_mac", hw.energy.e_mac);
        hw.energy.e_s1 = take_num(e, ewhere, "e_s1", hw.energy.e_s1);
        hw.energy.e_s2 = take_num(e, ewhere, "e_s2", hw.energy.e_s2);
        hw.energy.e_s3 = take_num(e, ewhere, "e_s3", hw.energy.e_s3);
    }
}

void parse_search(const json& obj, GaConfig& search) {
    const std::string where = "search.";
    check_keys(obj, where,
               {"population_size", "generations", "crossover_rate", "mutation_rate",
                "reorder_rate", "elite_fraction", "fitness_threshold", "seed"});
    search.population_size =
        static_cast<int>(take_int(obj, where, "population_size", search.population_size));
    search.generations = static_cast<int>(take_int(obj, where, "generations", search.generations));
    search.crossover_rate = take_num(obj, where, "crossover_rate", search.crossover_rate);
    search.mutation_rate = take_num(obj, where, "mutation_rate", search.mutation_rate);
    search.reorder_rate = take_num(obj, where, "reorder_rate", search.reorder_rate);
    search.elite_fraction = take_num(obj, where, "elite_fraction", search.elite_fraction);
    search.fitness_threshold = take_num(obj, where, "fitness_threshold", search.fitness_threshold);
    search.seed = static_cast<std::uint64_t>(
        take_int(obj, where, "seed", static_cast<std::int64_t>(search.seed)));
}

void parse_sweep(const json& obj, std::vector<std::int64_t>& sweep) {
    const std::string where = "sweep.";
    check_keys(obj, where, {"s2_bytes"});
    if (!obj.contains("s2_bytes")) return;
    const json& arr = obj.at("s2_bytes");
    if (!arr.is_array())
        throw ValidationError("config: sweep.s2_bytes: expected an array of integers");
    sweep.clear();
    for (const json& v : arr) {
        if (!v.is_number_integer())
            throw ValidationError("config: sweep.s2_bytes: expected an array of integers");
        sweep.push_back(v.get<std::int64_t>());
    }
}

}  // namespace

void RunConfig::ensure_valid() const {
    model.ensure_valid();
    hardware.ensure_valid();
    search.ensure_valid();
    static_cast<void>(accelerator_template(template_name));  // throws on unknown names
    for (std::int64_t s2 : sweep_s2_bytes)
        if (s2 <= 0)
            throw ValidationError("config: sweep.s2_bytes: entries must be positive, got " +
                                  std::to_string(s2));
}

RunConfig parse_run_config(const std::string& text) {
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded()) throw ValidationError("config: not valid JSON");
    if (!root.is_object()) throw ValidationError("config: top level must be a JSON object");
    check_keys(root, "", {"model", "hardware", "template", "search", "sweep"});

    RunConfig cfg;
    if (root.contains("model")) parse_model(expect_object(root, "", "model"), cfg.model);
    if (root.contains("hardware")) parse_hardware(expect_object(root, "", "hardware"), cfg.hardware);
    cfg.template_name = take_str(root, "", "template", cfg.template_name);
    if (root.contains("search")) parse_search(expect_object(root, "", "search"), cfg.search);
    if (root.contains("sweep")) parse_sweep(expect_object(root, "", "sweep"), cfg.sweep_s2_bytes);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config file: " + path);
    RunConfig cfg = parse_run_config(buf.str());
    cfg.ensure_valid();
    return cfg;
}

}  // namespace samt
