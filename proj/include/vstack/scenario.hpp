#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vstack/common.hpp"
#include "vstack/network.hpp"

#include "json.hpp"

namespace vstack {

struct Horizon {
    int H = 24;       // number of slots
    double dt = 1.0;  // slot length, hours

    friend bool operator==(const Horizon&, const Horizon&) = default;
};

struct BatteryParams {
    double capacity_upper = 0.0;    // kWh
    double capacity_lower = 0.0;    // kWh
    double charge_max = 0.0;        // kW
    double discharge_max = 0.0;     // kW
    double eff_charge = 1.0;        // fraction of charged power stored
    double eff_discharge = 1.0;     // fraction of stored energy delivered
    double initial_energy = 0.0;    // kWh
    double degradation_coeff = 0.0; // AUD/kWh^2

    friend bool operator==(const BatteryParams&, const BatteryParams&) = default;
};

struct HvacParams {
    double thermal_capacitance = 1.0;  // kWh/degC
    double thermal_resistance = 1.0;   // degC/kW
    double mode = 1.0;                 // +1 cooling, -1 heating
    std::vector<double> power_min;     // kW per slot
    std::vector<double> power_max;     // kW per slot
    std::vector<double> temp_min;      // degC per slot
    std::vector<double> temp_max;      // degC per slot
    double temp_pref = 22.0;           // degC
    double discomfort_coeff = 0.0;     // AUD/degC^2
    double initial_indoor_temp = 22.0; // degC

    friend bool operator==(const HvacParams&, const HvacParams&) = default;
};

struct SupplyLimits {
    double grid_max = 0.0;          // kW
    double et_buy_max = 0.0;        // kW
    double et_sell_max = 0.0;       // kW
    std::vector<double> b2b_max;    // kW per slot (defaults to discharge_max)
    std::vector<double> b2g_max;    // kW per slot (defaults to discharge_max)

    friend bool operator==(const SupplyLimits&, const SupplyLimits&) = default;
};

struct ExogenousSeries {
    std::vector<double> pv_available;   // kW per slot
    std::vector<double> inflexible_load;// kW per slot
    std::vector<double> outdoor_temp;   // degC per slot
    std::vector<double> reactive_load;  // kvar per slot, at the community node

    friend bool operator==(const ExogenousSeries&, const ExogenousSeries&) = default;
};

enum class TariffKind { TOU, TPT };

struct Tariff {
    TariffKind kind = TariffKind::TOU;
    std::vector<double> tou_energy_price;  // AUD/kWh per slot
    double tpt_energy_price = 0.0;         // AUD/kWh
    double tpt_peak_price = 0.0;           // AUD/kW
    std::vector<double> feed_in_price;     // AUD/kWh per slot
    std::vector<double> b2g_price;         // AUD/kWh per slot
    std::vector<double> et_price;          // AUD/kWh per slot (mid-market default)

    /// Per-slot energy price used for grid draws (TOU series or flat TPT rate).
    double energy_price(int t) const {
        return kind == TariffKind::TOU ? tou_energy_price[static_cast<size_t>(t)]
                                       : tpt_energy_price;
    }

    friend bool operator==(const Tariff&, const Tariff&) = default;
};

struct Community {
    int node_id = 0;  // feeder node the community connects to
    BatteryParams battery;
    HvacParams hvac;
    SupplyLimits limits;
    ExogenousSeries series;

    friend bool operator==(const Community&, const Community&) = default;
};

struct StreamFlags {
    bool enable_b2b = true;
    bool enable_b2g = true;
    bool enable_et = true;

    friend bool operator==(const StreamFlags&, const StreamFlags&) = default;
};

struct Scenario {
    Horizon horizon;
    std::vector<Community> communities;
    net::FeederModel feeder;
    Tariff tariff;
    StreamFlags flags;
    bool include_discomfort = true;  // count HVAC discomfort in objectives

    int H() const { return horizon.H; }
    double dt() const { return horizon.dt; }
    int community_count() const { return static_cast<int>(communities.size()); }
};

/// Loads a scenario bundle: one JSON config referencing a feeder CSV and
/// per-community series CSVs (paths resolved against the JSON's directory).
/// Throws InputError naming the offending field on any violation.
Scenario load_scenario(const std::filesystem::path& path);

/// Returns every invariant violation as a human-readable string carrying the
/// field path. Empty means the scenario is valid.
std::vector<std::string> validate(const Scenario& s);

/// Self-contained JSON form (series inlined). from_json(to_json(s)) == s.
nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

/// Draws from a normal(mean, sd) truncated to [lo, hi] by rejection.
/// Deterministic for a fixed seed.
double sample_initial_soc(double lo, double hi, double mean, double sd, std::uint64_t seed);

bool operator==(const Scenario& a, const Scenario& b);

}  // namespace vstack
