#include "cpsched/dcmodel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace cpsched::dc {

void DataCenterParams::validate() const {
    if (!(p_idle > 0.0) || !(p_peak > p_idle))
        throw std::invalid_argument("data center parameters need p_peak > p_idle > 0");
    if (!(pue >= 1.0)) throw std::invalid_argument("PUE must be >= 1");
    if (!(c_dt > 0.0) || !(l_rate > 1.0 / c_dt))
        throw std::invalid_argument("l_rate must exceed 1/c_dt for the QoS bound to be attainable");
    if (!(a_max > 0.0)) throw std::invalid_argument("a_max must be positive");
    if (!(p_grid_max >= 0.0)) throw std::invalid_argument("p_grid_max must be nonnegative");
    if (!(lambda_c >= 0.0)) throw std::invalid_argument("lambda_c must be nonnegative");
}

void EssParams::validate() const {
    if (!(0.0 <= q_min && q_min <= q_init && q_init <= q_max))
        throw std::invalid_argument("ESS needs 0 <= q_min <= q_init <= q_max");
    if (!(p_max > 0.0)) throw std::invalid_argument("ESS p_max must be positive");
}

void WorkloadTrace::validate() const {
    const std::size_t horizon_len = inflexible.size();
    if (horizon_len == 0) throw std::invalid_argument("workload trace is empty");
    if (delay_tolerance.size() != flexible_arrivals.size())
        throw std::invalid_argument("one delay tolerance per flexible class required");
    for (double v : inflexible)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("inflexible workload must be finite and nonnegative");
    for (std::size_t c = 0; c < flexible_arrivals.size(); ++c) {
        if (flexible_arrivals[c].size() != horizon_len)
            throw std::invalid_argument("flexible class " + std::to_string(c + 1) +
                                        " has the wrong number of slots");
        for (double v : flexible_arrivals[c])
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("flexible arrivals must be finite and nonnegative");
        if (delay_tolerance[c] < 0) throw std::invalid_argument("delay tolerance must be >= 0");
    }
}

void MarketSeries::validate() const {
    if (price.size() != cbep.size())
        throw std::invalid_argument("price and CBEP series differ in length");
    for (double p : price)
        if (!std::isfinite(p)) throw std::invalid_argument("price must be finite");
    for (double c : cbep)
        if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("CBEP must lie in [0, 1]");
}

double dc_power(const DataCenterParams& params, double active_servers, double workload) {
    if (active_servers < 0.0 || workload < 0.0)
        throw std::invalid_argument("dc_power needs nonnegative servers and workload");
    const double per_server = params.p_idle + (params.pue - 1.0) * params.p_peak;
    const double per_job = (params.p_peak - params.p_idle) / params.l_rate;
    return per_server * active_servers + per_job * workload;
}

double linearize_qos(const DataCenterParams& params) {
    if (!(params.c_dt > 0.0) || params.l_rate <= 1.0 / params.c_dt)
        throw std::invalid_argument("QoS unattainable: l_rate must exceed 1/c_dt");
    return params.l_rate - 1.0 / params.c_dt;
}

ScheduleLp build_schedule_lp(const DataCenterParams& params, const EssParams& ess,
                             const WorkloadTrace& trace, const MarketSeries& market,
                             std::span<const double> pv_lower) {
    params.validate();
    ess.validate();
    trace.validate();
    market.validate();
    const std::size_t horizon = trace.horizon();
    const std::size_t classes = trace.num_classes();
    if (market.price.size() != horizon || pv_lower.size() != horizon)
        throw std::invalid_argument("market series and PV bound must cover the workload horizon");
    for (double v : pv_lower)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("pv_lower must be finite and nonnegative");

    const double per_server = params.p_idle + (params.pue - 1.0) * params.p_peak;
    const double per_job = (params.p_peak - params.p_idle) / params.l_rate;
    const double qos = linearize_qos(params);

    ScheduleLp model;
    auto& lp = model.program;
    auto& v = model.vars;
    const auto slot = [](const char* what, std::size_t t) {
        return std::string(what) + "[" + std::to_string(t + 1) + "]";
    };

    v.flexible_load.assign(classes, {});
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t t = 0; t < horizon; ++t)
            v.flexible_load[c].push_back(lp.add_variable(
                "L_fl[" + std::to_string(c + 1) + "," + std::to_string(t + 1) + "]", 0.0));
    for (std::size_t t = 0; t < horizon; ++t) {
        v.flexible_servers.push_back(lp.add_variable(slot("A_fl", t), 0.0));
        // Inflexible demand must be served in its arrival slot.
        v.inflexible_load.push_back(lp.add_variable(slot("L_ifl", t), 0.0, trace.inflexible[t]));
        v.inflexible_servers.push_back(lp.add_variable(slot("A_ifl", t), 0.0));
        const double grid_cost = market.price[t] + params.lambda_c * market.cbep[t];
        v.grid.push_back(lp.add_variable(slot("P_grid", t), grid_cost, 0.0, params.p_grid_max));
        v.ess_power.push_back(lp.add_variable(slot("P_ess", t), 0.0, -ess.p_max, ess.p_max));
    }

    using lp::Relation;
    for (std::size_t c = 0; c < classes; ++c) {
        const auto& arrivals = trace.flexible_arrivals[c];
        const auto h = static_cast<std::size_t>(trace.delay_tolerance[c]);
        const std::string tag = std::to_string(c + 1);
        double arrived = 0.0;
        for (std::size_t t = 0; t < horizon; ++t) {
            arrived += arrivals[t];
            // Cannot process work that has not arrived.
            lp::LinearProgram::Terms processed;
            for (std::size_t s = 0; s <= t; ++s) processed.emplace_back(v.flexible_load[c][s], 1.0);
            lp.add_constraint(processed, Relation::LessEqual, arrived,
                              "arrived[" + tag + "," + std::to_string(t + 1) + "]");
            // Work arrived by t is done by t + h, or by the end of the day.
            lp::LinearProgram::Terms deadline;
            const std::size_t last = std::min(t + h, horizon - 1);
            for (std::size_t s = 0; s <= last; ++s) deadline.emplace_back(v.flexible_load[c][s], 1.0);
            lp.add_constraint(deadline, Relation::GreaterEqual, arrived,
                              "deadline[" + tag + "," + std::to_string(t + 1) + "]");
        }
    }

    for (std::size_t t = 0; t < horizon; ++t) {
        lp::LinearProgram::Terms capacity;
        for (std::size_t c = 0; c < classes; ++c) capacity.emplace_back(v.flexible_load[c][t], 1.0);
        capacity.emplace_back(v.flexible_servers[t], -params.l_rate);
        lp.add_constraint(capacity, Relation::LessEqual, 0.0, slot("capacity", t));

        lp.add_constraint({{v.inflexible_load[t], 1.0}, {v.inflexible_servers[t], -qos}},
                          Relation::LessEqual, 0.0, slot("qos", t));

        lp.add_constraint({{v.flexible_servers[t], 1.0}, {v.inflexible_servers[t], 1.0}},
                          Relation::LessEqual, params.a_max, slot("servers", t));

        lp::LinearProgram::Terms stored;
        for (std::size_t s = 0; s <= t; ++s) stored.emplace_back(v.ess_power[s], 1.0);
        lp.add_constraint(stored, Relation::LessEqual, ess.q_max - ess.q_init, slot("soc_max", t));
        lp.add_constraint(stored, Relation::GreaterEqual,
                          (t + 1 == horizon ? 0.0 : ess.q_min - ess.q_init), slot("soc_min", t));

        // pv_lower + grid >= dc load + ess charging
        lp::LinearProgram::Terms balance;
        balance.emplace_back(v.flexible_servers[t], per_server);
        balance.emplace_back(v.inflexible_servers[t], per_server);
        for (std::size_t c = 0; c < classes; ++c) balance.emplace_back(v.flexible_load[c][t], per_job);
        balance.emplace_back(v.inflexible_load[t], per_job);
        balance.emplace_back(v.ess_power[t], 1.0);
        balance.emplace_back(v.grid[t], -1.0);
        v.balance_rows.push_back(
            lp.add_constraint(balance, Relation::LessEqual, pv_lower[t], slot("balance", t)));
    }
    return model;
}

ScheduleSolution decode_schedule(const ScheduleLp& model, const lp::LpSolution& solution,
                                 const DataCenterParams& params, const EssParams& ess,
                                 const MarketSeries& market) {
    if (solution.status != lp::Status::Optimal)
        throw std::invalid_argument("cannot decode a " + lp::to_string(solution.status) +
                                    " schedule LP");
    const auto& v = model.vars;
    const auto& x = solution.x;
    const std::size_t horizon = v.grid.size();
    ScheduleSolution out;
    const auto take = [&](const std::vector<std::size_t>& idx) {
        std::vector<double> values(idx.size());
        for (std::size_t t = 0; t < idx.size(); ++t) values[t] = x[idx[t]];
        return values;
    };
    for (const auto& cls : v.flexible_load) out.flexible_load.push_back(take(cls));
    out.flexible_servers = take(v.flexible_servers);
    out.inflexible_load = take(v.inflexible_load);
    out.inflexible_servers = take(v.inflexible_servers);
    out.grid = take(v.grid);
    out.ess_power = take(v.ess_power);

    double soc = ess.q_init;
    out.ess_energy.resize(horizon);
    out.dc_load.resize(horizon);
    out.pv_lower.resize(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        soc += out.ess_power[t];
        out.ess_energy[t] = soc;
        double work = out.inflexible_load[t];
        for (const auto& cls : out.flexible_load) work += cls[t];
        const double servers = out.flexible_servers[t] + out.inflexible_servers[t];
        out.dc_load[t] = dc_power(params, std::max(servers, 0.0), std::max(work, 0.0));
        out.pv_lower[t] = model.program.constraints[v.balance_rows[t]].rhs;
        out.cost_energy += market.price[t] * out.grid[t];
        out.carbon_energy += market.cbep[t] * out.grid[t];
    }
    out.cost_teac = params.lambda_c * out.carbon_energy;
    return out;
}

ScheduleCheck validate_schedule(const ScheduleSolution& solution,
                                std::span<const double> pv_realized, double tol) {
    const std::size_t horizon = solution.horizon();
    if (pv_realized.size() != horizon)
        throw std::invalid_argument("realized PV length differs from the schedule horizon");
    ScheduleCheck check;
    check.violated.assign(horizon, false);
    for (std::size_t t = 0; t < horizon; ++t) {
        const double supply = pv_realized[t] + solution.grid[t];
        const double demand = solution.dc_load[t] + solution.ess_power[t];
        if (supply < demand - tol) {
            check.violated[t] = true;
            ++check.violations;
        }
    }
    check.realized_cost = solution.total_cost();
    check.realized_carbon = solution.carbon_energy;
    return check;
}

void write_schedule_csv(std::ostream& out, const ScheduleSolution& solution,
                        const ScheduleCheck* check) {
    out << "hour";
    for (std::size_t c = 0; c < solution.flexible_load.size(); ++c) out << ",L_fl_c" << c + 1;
    out << ",A_fl,L_ifl,A_ifl,P_grid,P_ess,Q_ess,Q_dc,pv_lower";
    if (check) out << ",violated";
    out << '\n';
    out << std::setprecision(9);
    for (std::size_t t = 0; t < solution.horizon(); ++t) {
        out << t;
        for (const auto& cls : solution.flexible_load) out << ',' << cls[t];
        out << ',' << solution.flexible_servers[t] << ',' << solution.inflexible_load[t] << ','
            << solution.inflexible_servers[t] << ',' << solution.grid[t] << ','
            << solution.ess_power[t] << ',' << solution.ess_energy[t] << ','
            << solution.dc_load[t] << ',' << solution.pv_lower[t];
        if (check) out << ',' << (check->violated[t] ? 1 : 0);
        out << '\n';
    }
}

std::string schedule_summary_json(const ScheduleSolution& solution, const ScheduleCheck* check) {
    nlohmann::ordered_json j;
    j["cost_energy_usd"] = solution.cost_energy;
    j["cost_teac_usd"] = solution.cost_teac;
    j["total_cost_usd"] = solution.total_cost();
    j["carbon_energy_kwh"] = solution.carbon_energy;
    if (check) {
        j["violations"] = check->violations;
        std::vector<int> flags;
        for (bool b : check->violated) flags.push_back(b ? 1 : 0);
        j["violated_hours"] = flags;
    }
    return j.dump(2);
}

}  // namespace cpsched::dc
