#include "vstack/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace vstack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json& require(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(path + key, "missing required key");
    return *it;
}

double number(const json& j, const std::string& key, const std::string& path) {
    const json& v = require(j, key, path);
    if (!v.is_number()) throw InputError(path + key, "expected a number");
    return v.get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<double>();
}

/// Accepts either a scalar (broadcast over the horizon) or an array of
/// exactly H numbers.
std::vector<double> series_or_scalar(const json& j, const std::string& key, int H,
                                     const std::string& path, bool required_key = true) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required_key) throw InputError(path + key, "missing required key");
        return {};
    }
    if (it->is_number()) return std::vector<double>(static_cast<size_t>(H), it->get<double>());
    if (!it->is_array())
        throw InputError(path + key, "expected a number or an array of length H");
    if (static_cast<int>(it->size()) != H)
        throw InputError(path + key, "array length " + std::to_string(it->size()) +
                                         " does not match horizon " + std::to_string(H));
    std::vector<double> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_number()) throw InputError(path + key, "non-numeric entry");
        out.push_back(v.get<double>());
    }
    return out;
}

void check_nonneg(const std::vector<double>& v, const std::string& field,
                  std::vector<std::string>& out) {
    for (size_t t = 0; t < v.size(); ++t)
        if (v[t] < 0.0) {
            out.push_back(field + "[" + std::to_string(t) + "]: must be >= 0");
            return;
        }
}

void check_len(const std::vector<double>& v, int H, const std::string& field,
               std::vector<std::string>& out) {
    if (static_cast<int>(v.size()) != H)
        out.push_back(field + ": length " + std::to_string(v.size()) + " != horizon " +
                      std::to_string(H));
}

json series_json(const std::vector<double>& v) { return json(v); }

std::vector<double> series_from(const json& j) { return j.get<std::vector<double>>(); }

}  // namespace

Scenario load_scenario(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path.string(), "cannot open scenario file");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(path.string(), std::string("invalid JSON: ") + e.what());
    }
    fs::path dir = path.parent_path();

    Scenario s;
    const json& jh = require(j, "horizon", "");
    s.horizon.H = static_cast<int>(number(jh, "H", "horizon."));
    s.horizon.dt = number(jh, "dt", "horizon.");
    if (s.horizon.H < 1) throw InputError("horizon.H", "must be >= 1");
    if (!(s.horizon.dt > 0)) throw InputError("horizon.dt", "must be > 0");
    const int H = s.horizon.H;

    const json& jf = require(j, "feeder", "");
    fs::path feeder_file = dir / require(jf, "file", "feeder.").get<std::string>();
    s.feeder = net::load_feeder(feeder_file, number_or(jf, "s_base_kva", 1000.0),
                                number_or(jf, "v_base_kv", 12.66), number_or(jf, "v_min", 0.95),
                                number_or(jf, "v_max", 1.05), number_or(jf, "v_ref", 1.0));

    const json& jt = require(j, "tariff", "");
    std::string kind = require(jt, "kind", "tariff.").get<std::string>();
    if (kind == "TOU")
        s.tariff.kind = TariffKind::TOU;
    else if (kind == "TPT")
        s.tariff.kind = TariffKind::TPT;
    else
        throw InputError("tariff.kind", "expected 'TOU' or 'TPT'");
    s.tariff.tou_energy_price = series_or_scalar(jt, "tou_energy_price", H, "tariff.",
                                                 s.tariff.kind == TariffKind::TOU);
    if (s.tariff.tou_energy_price.empty())
        s.tariff.tou_energy_price.assign(static_cast<size_t>(H), 0.0);
    s.tariff.tpt_energy_price = number_or(jt, "tpt_energy_price", 0.0);
    s.tariff.tpt_peak_price = number_or(jt, "tpt_peak_price", 0.0);
    s.tariff.feed_in_price = series_or_scalar(jt, "feed_in_price", H, "tariff.");
    s.tariff.b2g_price = series_or_scalar(jt, "b2g_price", H, "tariff.");
    s.tariff.et_price = series_or_scalar(jt, "et_price", H, "tariff.", false);
    if (s.tariff.et_price.empty()) {
        // Mid-market local price: halfway between the grid buy reference and
        // the feed-in sell reference for each slot.
        s.tariff.et_price.resize(static_cast<size_t>(H));
        for (int t = 0; t < H; ++t)
            s.tariff.et_price[static_cast<size_t>(t)] =
                0.5 * (s.tariff.energy_price(t) + s.tariff.feed_in_price[static_cast<size_t>(t)]);
    }

    if (j.contains("flags")) {
        const json& jfl = j["flags"];
        s.flags.enable_b2b = jfl.value("enable_b2b", true);
        s.flags.enable_b2g = jfl.value("enable_b2g", true);
        s.flags.enable_et = jfl.value("enable_et", true);
    }
    s.include_discomfort = j.value("include_discomfort", true);

    const json& jcs = require(j, "communities", "");
    if (!jcs.is_array() || jcs.empty())
        throw InputError("communities", "expected a non-empty array");
    int ci = 0;
    for (const auto& jc : jcs) {
        std::string base = "communities[" + std::to_string(ci) + "].";
        Community c;
        c.node_id = static_cast<int>(number(jc, "node", base));

        const json& jb = require(jc, "battery", base);
        c.battery.capacity_upper = number(jb, "capacity_upper", base + "battery.");
        c.battery.capacity_lower = number_or(jb, "capacity_lower", 0.0);
        c.battery.charge_max = number(jb, "charge_max", base + "battery.");
        c.battery.discharge_max = number(jb, "discharge_max", base + "battery.");
        c.battery.eff_charge = number_or(jb, "eff_charge", 1.0);
        c.battery.eff_discharge = number_or(jb, "eff_discharge", 1.0);
        c.battery.initial_energy = number(jb, "initial_energy", base + "battery.");
        c.battery.degradation_coeff = number_or(jb, "degradation_coeff", 0.0);

        const json& jv = require(jc, "hvac", base);
        c.hvac.thermal_capacitance = number(jv, "thermal_capacitance", base + "hvac.");
        c.hvac.thermal_resistance = number(jv, "thermal_resistance", base + "hvac.");
        c.hvac.mode = number_or(jv, "mode", 1.0);
        c.hvac.power_min = series_or_scalar(jv, "power_min", H, base + "hvac.");
        c.hvac.power_max = series_or_scalar(jv, "power_max", H, base + "hvac.");
        c.hvac.temp_min = series_or_scalar(jv, "temp_min", H, base + "hvac.");
        c.hvac.temp_max = series_or_scalar(jv, "temp_max", H, base + "hvac.");
        c.hvac.temp_pref = number(jv, "temp_pref", base + "hvac.");
        c.hvac.discomfort_coeff = number_or(jv, "discomfort_coeff", 0.0);
        c.hvac.initial_indoor_temp = number(jv, "initial_indoor_temp", base + "hvac.");

        const json& jl = require(jc, "limits", base);
        c.limits.grid_max = number(jl, "grid_max", base + "limits.");
        c.limits.et_buy_max = number_or(jl, "et_buy_max", 0.0);
        c.limits.et_sell_max = number_or(jl, "et_sell_max", 0.0);
        c.limits.b2b_max = series_or_scalar(jl, "b2b_max", H, base + "limits.", false);
        if (c.limits.b2b_max.empty())
            c.limits.b2b_max.assign(static_cast<size_t>(H), c.battery.discharge_max);
        c.limits.b2g_max = series_or_scalar(jl, "b2g_max", H, base + "limits.", false);
        if (c.limits.b2g_max.empty())
            c.limits.b2g_max.assign(static_cast<size_t>(H), c.battery.discharge_max);

        const json& js = require(jc, "series", base);
        auto load_series = [&](const char* key) {
            const json& v = require(js, key, base + "series.");
            if (v.is_string())
                return read_series_csv(dir / v.get<std::string>(), H);
            return series_or_scalar(js, key, H, base + "series.");
        };
        c.series.pv_available = load_series("pv");
        c.series.inflexible_load = load_series("load");
        c.series.outdoor_temp = load_series("temp");
        c.series.reactive_load = load_series("qload");

        s.communities.push_back(std::move(c));
        ++ci;
    }

    auto violations = validate(s);
    if (!violations.empty()) {
        auto field = violations.front().substr(0, violations.front().find(':'));
        throw InputError(field, violations.front().substr(violations.front().find(':') + 2));
    }
    return s;
}

std::vector<std::string> validate(const Scenario& s) {
    std::vector<std::string> out;
    const int H = s.horizon.H;
    if (H < 1) out.push_back("horizon.H: must be >= 1");
    if (!(s.horizon.dt > 0)) out.push_back("horizon.dt: must be > 0");
    if (s.communities.empty()) out.push_back("communities: must contain at least one community");

    if (s.feeder.node_count < 1) out.push_back("feeder: empty feeder");
    if (!(s.feeder.v_min <= s.feeder.v_ref && s.feeder.v_ref <= s.feeder.v_max))
        out.push_back("feeder.v_ref: substation voltage must lie within [v_min, v_max]");

    auto check_prices = [&](const std::vector<double>& v, const std::string& field) {
        check_len(v, H, field, out);
        check_nonneg(v, field, out);
    };
    if (s.tariff.kind == TariffKind::TOU)
        check_prices(s.tariff.tou_energy_price, "tariff.tou_energy_price");
    if (s.tariff.tpt_energy_price < 0) out.push_back("tariff.tpt_energy_price: must be >= 0");
    if (s.tariff.tpt_peak_price < 0) out.push_back("tariff.tpt_peak_price: must be >= 0");
    check_prices(s.tariff.feed_in_price, "tariff.feed_in_price");
    check_prices(s.tariff.b2g_price, "tariff.b2g_price");
    check_prices(s.tariff.et_price, "tariff.et_price");

    for (size_t i = 0; i < s.communities.size(); ++i) {
        const Community& c = s.communities[i];
        std::string base = "communities[" + std::to_string(i) + "].";
        if (c.node_id < 1 || c.node_id >= s.feeder.node_count)
            out.push_back(base + "node: node " + std::to_string(c.node_id) +
                          " does not exist in the feeder (or is the substation)");

        const BatteryParams& b = c.battery;
        if (b.capacity_lower < 0) out.push_back(base + "battery.capacity_lower: must be >= 0");
        if (b.capacity_lower > b.capacity_upper)
            out.push_back(base + "battery.capacity_lower: exceeds capacity_upper");
        if (b.initial_energy < b.capacity_lower || b.initial_energy > b.capacity_upper)
            out.push_back(base +
                          "battery.initial_energy: must lie in [capacity_lower, capacity_upper]");
        if (!(b.eff_discharge > 0 && b.eff_discharge <= 1))
            out.push_back(base + "battery.eff_discharge: must lie in (0, 1]");
        if (!(b.eff_charge >= 0 && b.eff_charge <= 1))
            out.push_back(base + "battery.eff_charge: must lie in [0, 1]");
        if (b.charge_max < 0) out.push_back(base + "battery.charge_max: must be >= 0");
        if (b.discharge_max < 0) out.push_back(base + "battery.discharge_max: must be >= 0");
        if (b.degradation_coeff < 0)
            out.push_back(base + "battery.degradation_coeff: must be >= 0");

        const HvacParams& h = c.hvac;
        if (!(h.thermal_capacitance > 0))
            out.push_back(base + "hvac.thermal_capacitance: must be > 0");
        if (!(h.thermal_resistance > 0))
            out.push_back(base + "hvac.thermal_resistance: must be > 0");
        check_len(h.power_min, H, base + "hvac.power_min", out);
        check_len(h.power_max, H, base + "hvac.power_max", out);
        check_len(h.temp_min, H, base + "hvac.temp_min", out);
        check_len(h.temp_max, H, base + "hvac.temp_max", out);
        if (static_cast<int>(h.power_min.size()) == H &&
            static_cast<int>(h.power_max.size()) == H) {
            for (int t = 0; t < H; ++t)
                if (h.power_min[static_cast<size_t>(t)] > h.power_max[static_cast<size_t>(t)]) {
                    out.push_back(base + "hvac.power_min[" + std::to_string(t) +
                                  "]: exceeds power_max");
                    break;
                }
        }
        if (static_cast<int>(h.temp_min.size()) == H &&
            static_cast<int>(h.temp_max.size()) == H) {
            for (int t = 0; t < H; ++t) {
                if (h.temp_min[static_cast<size_t>(t)] > h.temp_pref ||
                    h.temp_pref > h.temp_max[static_cast<size_t>(t)]) {
                    out.push_back(base + "hvac.temp_pref: outside [temp_min, temp_max] at slot " +
                                  std::to_string(t));
                    break;
                }
            }
        }

        const SupplyLimits& l = c.limits;
        if (l.grid_max < 0) out.push_back(base + "limits.grid_max: must be >= 0");
        if (l.et_buy_max < 0) out.push_back(base + "limits.et_buy_max: must be >= 0");
        if (l.et_sell_max < 0) out.push_back(base + "limits.et_sell_max: must be >= 0");
        check_len(l.b2b_max, H, base + "limits.b2b_max", out);
        check_len(l.b2g_max, H, base + "limits.b2g_max", out);
        check_nonneg(l.b2b_max, base + "limits.b2b_max", out);
        check_nonneg(l.b2g_max, base + "limits.b2g_max", out);

        const ExogenousSeries& e = c.series;
        check_len(e.pv_available, H, base + "series.pv", out);
        check_len(e.inflexible_load, H, base + "series.load", out);
        check_len(e.outdoor_temp, H, base + "series.temp", out);
        check_len(e.reactive_load, H, base + "series.qload", out);
        check_nonneg(e.pv_available, base + "series.pv", out);
        check_nonneg(e.inflexible_load, base + "series.load", out);
    }
    return out;
}

namespace {

json battery_json(const BatteryParams& b) {
    return {{"capacity_upper", b.capacity_upper}, {"capacity_lower", b.capacity_lower},
            {"charge_max", b.charge_max},         {"discharge_max", b.discharge_max},
            {"eff_charge", b.eff_charge},         {"eff_discharge", b.eff_discharge},
            {"initial_energy", b.initial_energy}, {"degradation_coeff", b.degradation_coeff}};
}

json hvac_json(const HvacParams& h) {
    return {{"thermal_capacitance", h.thermal_capacitance},
            {"thermal_resistance", h.thermal_resistance},
            {"mode", h.mode},
            {"power_min", series_json(h.power_min)},
            {"power_max", series_json(h.power_max)},
            {"temp_min", series_json(h.temp_min)},
            {"temp_max", series_json(h.temp_max)},
            {"temp_pref", h.temp_pref},
            {"discomfort_coeff", h.discomfort_coeff},
            {"initial_indoor_temp", h.initial_indoor_temp}};
}

}  // namespace

json to_json(const Scenario& s) {
    json j;
    j["horizon"] = {{"H", s.horizon.H}, {"dt", s.horizon.dt}};
    j["include_discomfort"] = s.include_discomfort;
    j["flags"] = {{"enable_b2b", s.flags.enable_b2b},
                  {"enable_b2g", s.flags.enable_b2g},
                  {"enable_et", s.flags.enable_et}};
    j["tariff"] = {{"kind", s.tariff.kind == TariffKind::TOU ? "TOU" : "TPT"},
                   {"tou_energy_price", series_json(s.tariff.tou_energy_price)},
                   {"tpt_energy_price", s.tariff.tpt_energy_price},
                   {"tpt_peak_price", s.tariff.tpt_peak_price},
                   {"feed_in_price", series_json(s.tariff.feed_in_price)},
                   {"b2g_price", series_json(s.tariff.b2g_price)},
                   {"et_price", series_json(s.tariff.et_price)}};

    json jf;
    jf["node_count"] = s.feeder.node_count;
    jf["v_min"] = s.feeder.v_min;
    jf["v_max"] = s.feeder.v_max;
    jf["v_ref"] = s.feeder.v_ref;
    jf["s_base_kva"] = s.feeder.s_base_kva;
    jf["v_base_kv"] = s.feeder.v_base_kv;
    json jbr = json::array();
    for (const auto& br : s.feeder.branches)
        jbr.push_back({{"from", br.from},
                       {"to", br.to},
                       {"r_pu", br.r_pu},
                       {"x_pu", br.x_pu},
                       {"p_min_pu", br.p_min_pu},
                       {"p_max_pu", br.p_max_pu},
                       {"q_min_pu", br.q_min_pu},
                       {"q_max_pu", br.q_max_pu}});
    jf["branches"] = jbr;
    j["feeder"] = jf;

    json jcs = json::array();
    for (const auto& c : s.communities) {
        json jc;
        jc["node"] = c.node_id;
        jc["battery"] = battery_json(c.battery);
        jc["hvac"] = hvac_json(c.hvac);
        jc["limits"] = {{"grid_max", c.limits.grid_max},
                        {"et_buy_max", c.limits.et_buy_max},
                        {"et_sell_max", c.limits.et_sell_max},
                        {"b2b_max", series_json(c.limits.b2b_max)},
                        {"b2g_max", series_json(c.limits.b2g_max)}};
        jc["series"] = {{"pv", series_json(c.series.pv_available)},
                        {"load", series_json(c.series.inflexible_load)},
                        {"temp", series_json(c.series.outdoor_temp)},
                        {"qload", series_json(c.series.reactive_load)}};
        jcs.push_back(jc);
    }
    j["communities"] = jcs;
    return j;
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.horizon.H = j.at("horizon").at("H").get<int>();
    s.horizon.dt = j.at("horizon").at("dt").get<double>();
    s.include_discomfort = j.value("include_discomfort", true);
    const json& jfl = j.at("flags");
    s.flags.enable_b2b = jfl.at("enable_b2b").get<bool>();
    s.flags.enable_b2g = jfl.at("enable_b2g").get<bool>();
    s.flags.enable_et = jfl.at("enable_et").get<bool>();

    const json& jt = j.at("tariff");
    s.tariff.kind = jt.at("kind").get<std::string>() == "TOU" ? TariffKind::TOU : TariffKind::TPT;
    s.tariff.tou_energy_price = series_from(jt.at("tou_energy_price"));
    s.tariff.tpt_energy_price = jt.at("tpt_energy_price").get<double>();
    s.tariff.tpt_peak_price = jt.at("tpt_peak_price").get<double>();
    s.tariff.feed_in_price = series_from(jt.at("feed_in_price"));
    s.tariff.b2g_price = series_from(jt.at("b2g_price"));
    s.tariff.et_price = series_from(jt.at("et_price"));

    const json& jf = j.at("feeder");
    net::FeederModel f;
    f.node_count = jf.at("node_count").get<int>();
    f.v_min = jf.at("v_min").get<double>();
    f.v_max = jf.at("v_max").get<double>();
    f.v_ref = jf.at("v_ref").get<double>();
    f.s_base_kva = jf.at("s_base_kva").get<double>();
    f.v_base_kv = jf.at("v_base_kv").get<double>();
    for (const auto& jb : jf.at("branches")) {
        net::Branch br;
        br.from = jb.at("from").get<int>();
        br.to = jb.at("to").get<int>();
        br.r_pu = jb.at("r_pu").get<double>();
        br.x_pu = jb.at("x_pu").get<double>();
        br.p_min_pu = jb.at("p_min_pu").get<double>();
        br.p_max_pu = jb.at("p_max_pu").get<double>();
        br.q_min_pu = jb.at("q_min_pu").get<double>();
        br.q_max_pu = jb.at("q_max_pu").get<double>();
        f.branches.push_back(br);
    }
    s.feeder = net::rebuild_tree(f);

    for (const auto& jc : j.at("communities")) {
        Community c;
        c.node_id = jc.at("node").get<int>();
        const json& jb = jc.at("battery");
        c.battery.capacity_upper = jb.at("capacity_upper").get<double>();
        c.battery.capacity_lower = jb.at("capacity_lower").get<double>();
        c.battery.charge_max = jb.at("charge_max").get<double>();
        c.battery.discharge_max = jb.at("discharge_max").get<double>();
        c.battery.eff_charge = jb.at("eff_charge").get<double>();
        c.battery.eff_discharge = jb.at("eff_discharge").get<double>();
        c.battery.initial_energy = jb.at("initial_energy").get<double>();
        c.battery.degradation_coeff = jb.at("degradation_coeff").get<double>();
        const json& jv = jc.at("hvac");
        c.hvac.thermal_capacitance = jv.at("thermal_capacitance").get<double>();
        c.hvac.thermal_resistance = jv.at("thermal_resistance").get<double>();
        c.hvac.mode = jv.at("mode").get<double>();
        c.hvac.power_min = series_from(jv.at("power_min"));
        c.hvac.power_max = series_from(jv.at("power_max"));
        c.hvac.temp_min = series_from(jv.at("temp_min"));
        c.hvac.temp_max = series_from(jv.at("temp_max"));
        c.hvac.temp_pref = jv.at("temp_pref").get<double>();
        c.hvac.discomfort_coeff = jv.at("discomfort_coeff").get<double>();
        c.hvac.initial_indoor_temp = jv.at("initial_indoor_temp").get<double>();
        const json& jl = jc.at("limits");
        c.limits.grid_max = jl.at("grid_max").get<double>();
        c.limits.et_buy_max = jl.at("et_buy_max").get<double>();
        c.limits.et_sell_max = jl.at("et_sell_max").get<double>();
        c.limits.b2b_max = series_from(jl.at("b2b_max"));
        c.limits.b2g_max = series_from(jl.at("b2g_max"));
        const json& js = jc.at("series");
        c.series.pv_available = series_from(js.at("pv"));
        c.series.inflexible_load = series_from(js.at("load"));
        c.series.outdoor_temp = series_from(js.at("temp"));
        c.series.reactive_load = series_from(js.at("qload"));
        s.communities.push_back(std::move(c));
    }
    return s;
}

bool operator==(const Scenario& a, const Scenario& b) {
    return a.horizon == b.horizon && a.communities == b.communities && a.feeder == b.feeder &&
           a.tariff == b.tariff && a.flags == b.flags &&
           a.include_discomfort == b.include_discomfort;
}

double sample_initial_soc(double lo, double hi, double mean, double sd, std::uint64_t seed) {
    if (!(lo < hi)) throw InputError("sample_initial_soc", "requires lo < hi");
    if (!(sd > 0)) throw InputError("sample_initial_soc", "requires sd > 0");
    Rng rng(seed);
    for (int attempt = 0; attempt < 1'000'000; ++attempt) {
        double draw = mean + sd * rng.normal();
        if (draw >= lo && draw <= hi) return draw;
    }
    throw SolveError("sample_initial_soc: rejection sampling did not hit [lo, hi]");
}

}  // namespace vstack
