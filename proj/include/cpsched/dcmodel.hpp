#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cpsched/lp_solver.hpp"

namespace cpsched::dc {

/// Server and facility parameters. Defaults are the reference data center
/// (A_max = 8000 servers, 1 MW grid connection).
struct DataCenterParams {
    double p_idle = 0.1;         // kW per server
    double p_peak = 0.2;         // kW per server
    double pue = 1.4;
    double l_rate = 3.0;         // jobs per server per slot
    double c_dt = 0.5;           // QoS delay bound, s
    double a_max = 8000.0;       // servers
    double p_grid_max = 1000.0;  // kW
    double lambda_c = 0.1;       // $/kWh of carbon-based energy (T-EAC price)

    void validate() const;
};

/// Energy storage. Charging power is positive, discharging negative.
struct EssParams {
    double q_max = 500.0;  // kWh
    double q_min = 0.0;    // kWh
    double p_max = 80.0;   // kW
    double q_init = 250.0; // kWh, also the terminal floor

    void validate() const;
};

struct WorkloadTrace {
    std::vector<double> inflexible;                      // jobs per slot
    std::vector<std::vector<double>> flexible_arrivals;  // [class][slot]
    std::vector<int> delay_tolerance;                    // slots, per class

    std::size_t horizon() const { return inflexible.size(); }
    std::size_t num_classes() const { return flexible_arrivals.size(); }
    void validate() const;
};

struct MarketSeries {
    std::vector<double> price;  // $/kWh
    std::vector<double> cbep;   // carbon-based share of grid energy, [0, 1]

    void validate() const;
};

/// Facility power draw in kW for `active_servers` servers handling
/// `workload` jobs in one slot.
double dc_power(const DataCenterParams& params, double active_servers, double workload);

/// Slope k of the linear QoS bound L_ifl <= k * A_ifl implied by
/// 1 / (l_rate - L/A) <= c_dt. Throws when l_rate <= 1 / c_dt.
double linearize_qos(const DataCenterParams& params);

/// Column indices of the decision variables inside the schedule LP.
struct VariableMap {
    std::vector<std::vector<std::size_t>> flexible_load;  // [class][slot]
    std::vector<std::size_t> flexible_servers;
    std::vector<std::size_t> inflexible_load;
    std::vector<std::size_t> inflexible_servers;
    std::vector<std::size_t> grid;
    std::vector<std::size_t> ess_power;
    std::vector<std::size_t> balance_rows;  // constraint index of each slot's power balance
};

struct ScheduleLp {
    lp::LinearProgram program;
    VariableMap vars;
};

/// Robust day-ahead schedule LP: the power balance holds for every PV
/// realization at or above `pv_lower`.
ScheduleLp build_schedule_lp(const DataCenterParams& params, const EssParams& ess,
                             const WorkloadTrace& trace, const MarketSeries& market,
                             std::span<const double> pv_lower);

struct ScheduleSolution {
    std::vector<std::vector<double>> flexible_load;  // [class][slot]
    std::vector<double> flexible_servers;
    std::vector<double> inflexible_load;
    std::vector<double> inflexible_servers;
    std::vector<double> grid;
    std::vector<double> ess_power;
    std::vector<double> ess_energy;  // state of charge at the end of each slot
    std::vector<double> dc_load;     // kW drawn by the facility
    std::vector<double> pv_lower;    // PV bound the schedule was built against
    double cost_energy = 0.0;
    double cost_teac = 0.0;
    double carbon_energy = 0.0;

    std::size_t horizon() const { return grid.size(); }
    double total_cost() const { return cost_energy + cost_teac; }
};

ScheduleSolution decode_schedule(const ScheduleLp& model, const lp::LpSolution& solution,
                                 const DataCenterParams& params, const EssParams& ess,
                                 const MarketSeries& market);

struct ScheduleCheck {
    std::vector<bool> violated;  // per slot
    std::size_t violations = 0;
    double realized_cost = 0.0;
    double realized_carbon = 0.0;
};

/// Flags slot t iff pv_realized[t] + grid[t] < dc_load[t] + ess_power[t] - tol.
/// Grid purchases are day-ahead commitments, so realized cost and carbon
/// equal the scheduled ones.
ScheduleCheck validate_schedule(const ScheduleSolution& solution,
                                std::span<const double> pv_realized, double tol = 1e-6);

/// One row per slot: decisions, PV bound, and the realized flag when given.
void write_schedule_csv(std::ostream& out, const ScheduleSolution& solution,
                        const ScheduleCheck* check = nullptr);

/// JSON summary (costs, carbon, violations).
std::string schedule_summary_json(const ScheduleSolution& solution,
                                  const ScheduleCheck* check = nullptr);

}  // namespace cpsched::dc
