#include "rtc/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace rtc {

namespace {

constexpr double kSweepTol = 1e-8;
constexpr int kMaxSweeps = 100;

using cplx = std::complex<double>;

[[noreturn]] void topology_error(const std::string& what) { throw TopologyError("feeder: " + what); }

} // namespace

RadialFeeder::RadialFeeder(FeederModel model) : model_(std::move(model)) {
    const auto& nodes = model_.nodes;
    const std::size_t n = nodes.size();
    if (n == 0) topology_error("no nodes");
    if (!(model_.slack_voltage > 0.0)) topology_error("slack voltage must be positive");
    if (!(model_.monitor_v_frac > 0.0 && model_.monitor_v_frac < model_.v_limit_frac))
        topology_error("need 0 < monitor_v_frac < v_limit_frac");
    if (!(model_.power_factor > 0.0 && model_.power_factor <= 1.0)) topology_error("power factor must be in (0, 1]");

    for (std::size_t i = 0; i < n; ++i) {
        if (nodes[i].id != static_cast<int>(i)) topology_error("node ids must equal their position");
        phase_count_ = std::max(phase_count_, nodes[i].phase + 1);
        if (!by_bus_phase_.emplace(std::pair{nodes[i].bus, nodes[i].phase}, i).second)
            topology_error("duplicate (bus, phase) at node " + std::to_string(i));
    }

    feeding_line_.assign(n, -1);
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t l = 0; l < model_.lines.size(); ++l) {
        const auto& line = model_.lines[l];
        if (line.from < 0 || line.to < 0 || static_cast<std::size_t>(line.from) >= n ||
            static_cast<std::size_t>(line.to) >= n)
            topology_error("line " + std::to_string(l) + " references an unknown node");
        if (!(line.ampacity > 0.0)) topology_error("line " + std::to_string(l) + " ampacity must be positive");
        if (std::hypot(line.resistance, line.reactance) <= 0.0)
            topology_error("line " + std::to_string(l) + " has zero impedance");
        const auto& child = nodes[static_cast<std::size_t>(line.to)];
        if (child.parent != line.from) topology_error("line " + std::to_string(l) + " disagrees with the node parent");
        if (feeding_line_[static_cast<std::size_t>(line.to)] != -1)
            topology_error("node " + std::to_string(line.to) + " fed by more than one line (not radial)");
        if (nodes[static_cast<std::size_t>(line.from)].phase != child.phase)
            topology_error("line " + std::to_string(l) + " joins different phases");
        feeding_line_[static_cast<std::size_t>(line.to)] = static_cast<int>(l);
        children[static_cast<std::size_t>(line.from)].push_back(static_cast<std::size_t>(line.to));
    }

    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (nodes[i].parent == -1) {
            if (feeding_line_[i] != -1) topology_error("slack node " + std::to_string(i) + " has a feeding line");
            stack.push_back(i);
        } else if (feeding_line_[i] == -1) {
            topology_error("node " + std::to_string(i) + " has no feeding line");
        }
    }
    std::vector<char> seen(n, 0);
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        if (seen[v]) topology_error("cycle through node " + std::to_string(v));
        seen[v] = 1;
        order_.push_back(v);
        for (auto it = children[v].rbegin(); it != children[v].rend(); ++it) stack.push_back(*it);
    }
    if (order_.size() != n) topology_error("nodes unreachable from a slack node (not radial)");
}

std::size_t RadialFeeder::node_at(std::size_t bus, std::size_t phase) const {
    const auto it = by_bus_phase_.find({bus, phase});
    if (it == by_bus_phase_.end()) {
        throw TopologyError("feeder: no node at bus " + std::to_string(bus) + " phase " + std::to_string(phase));
    }
    return it->second;
}

bool RadialFeeder::has_node(std::size_t bus, std::size_t phase) const {
    return by_bus_phase_.contains({bus, phase});
}

std::vector<double> LoadFlowResult::voltage_magnitudes() const {
    std::vector<double> out(node_voltages.size());
    std::transform(node_voltages.begin(), node_voltages.end(), out.begin(), [](cplx v) { return std::abs(v); });
    return out;
}

LoadFlowResult solve_load_flow(const RadialFeeder& feeder, std::span<const double> node_kw) {
    const auto& m = feeder.model();
    const std::size_t n = feeder.node_count();
    if (node_kw.size() != n) throw std::invalid_argument("load flow: one load per node expected");

    const auto& order = feeder.order();
    const auto& feeding = feeder.feeding_line();
    const double v_nom = m.slack_voltage;
    const double q_ratio = std::tan(std::acos(m.power_factor));

    std::vector<cplx> load(n);
    for (std::size_t i = 0; i < n; ++i) load[i] = cplx(node_kw[i], node_kw[i] * q_ratio) * 1000.0;

    auto impedance = [&](std::size_t node) {
        const auto& line = m.lines[static_cast<std::size_t>(feeding[node])];
        return cplx(line.resistance, line.reactance);
    };
    auto parent = [&](std::size_t node) { return static_cast<std::size_t>(m.nodes[node].parent); };

    std::vector<cplx> v(n, cplx(v_nom, 0.0));
    std::vector<cplx> branch(n);

    auto backward = [&] {
        for (std::size_t i = 0; i < n; ++i) branch[i] = std::conj(load[i] / v[i]);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const std::size_t node = *it;
            if (feeding[node] != -1) branch[parent(node)] += branch[node];
        }
    };

    LoadFlowResult r;
    for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
        backward();
        double dv = 0.0;
        for (std::size_t node : order) {
            if (feeding[node] == -1) continue;
            const cplx next = v[parent(node)] - impedance(node) * branch[node];
            dv = std::max(dv, std::abs(next - v[node]) / v_nom);
            v[node] = next;
        }
        r.iterations = sweep;
        if (dv < kSweepTol) {
            r.converged = true;
            break;
        }
    }
    backward();

    r.node_voltages = v;
    r.line_currents.assign(m.lines.size(), 0.0);
    for (std::size_t node = 0; node < n; ++node) {
        r.max_v_dev_frac = std::max(r.max_v_dev_frac, std::abs(std::abs(v[node]) - v_nom) / v_nom);
        r.load_power += load[node];
        if (feeding[node] == -1) {
            r.slack_power += v[node] * std::conj(branch[node]);
            continue;
        }
        const auto l = static_cast<std::size_t>(feeding[node]);
        const double amps = std::abs(branch[node]);
        r.line_currents[l] = amps;
        r.max_i_frac_of_ampacity = std::max(r.max_i_frac_of_ampacity, amps / m.lines[l].ampacity);
        r.losses += impedance(node) * std::norm(branch[node]);
    }

    // Mismatch from the line equations: power delivered to a node through
    // its feeding line minus what leaves through its children's lines.
    const double s_base = m.transformer_kva * 1000.0 / static_cast<double>(std::max<std::size_t>(1, feeder.phase_count()));
    std::vector<cplx> net(n);
    for (std::size_t node = 0; node < n; ++node) {
        if (feeding[node] == -1) continue;
        const cplx i_line = (v[parent(node)] - v[node]) / impedance(node);
        net[node] += v[node] * std::conj(i_line);
        net[parent(node)] -= v[parent(node)] * std::conj(i_line);
    }
    for (std::size_t node = 0; node < n; ++node) {
        if (feeding[node] == -1) continue;
        r.max_mismatch_pu = std::max(r.max_mismatch_pu, std::abs(net[node] - load[node]) / s_base);
    }
    return r;
}

LimitStatus check_limits(const LoadFlowResult& r, const FeederModel& f) {
    LimitStatus s;
    s.violation = !r.converged || r.max_v_dev_frac > f.v_limit_frac || r.max_i_frac_of_ampacity > 1.0;
    s.monitor_trigger = s.violation || r.max_v_dev_frac >= f.monitor_v_frac || r.max_i_frac_of_ampacity > f.monitor_i_frac;
    return s;
}

std::vector<double> node_loads(const RadialFeeder& feeder, std::span<const Connection> connections,
                               std::span<const double> household_kw) {
    std::vector<double> out(feeder.node_count(), 0.0);
    for (std::size_t i = 0; i < connections.size(); ++i) out.at(connections[i].node) += household_kw[i];
    return out;
}

std::vector<double> pcc_average_kwh(std::span<const Connection> connections, std::span<const double> household_kw,
                                    std::size_t pcc_count, double slot_hours) {
    std::vector<double> out(pcc_count, 0.0);
    for (std::size_t i = 0; i < connections.size(); ++i) out.at(connections[i].pcc.index) += household_kw[i] * slot_hours;
    if (!connections.empty()) {
        for (double& v : out) v /= static_cast<double>(connections.size());
    }
    return out;
}

std::vector<double> scaled_flows(std::span<const double> baseline_kw, FlowDirection dir, double scale) {
    const double sign = dir == FlowDirection::Injection ? -1.0 : 1.0;
    const bool any = std::any_of(baseline_kw.begin(), baseline_kw.end(), [&](double p) { return sign * p > 0.0; });
    std::vector<double> out(baseline_kw.begin(), baseline_kw.end());
    for (double& p : out) {
        if (!any) {
            p += sign * (scale - 1.0);
        } else if (sign * p > 0.0) {
            p *= scale;
        }
    }
    return out;
}

DerivedConstraints derive_constraints(const RadialFeeder& feeder, std::span<const Connection> connections,
                                      std::span<const double> baseline_kw, FlowDirection dir, double step_frac,
                                      const AverageBox& box, double slot_hours, double max_scale) {
    if (!(step_frac > 0.0)) throw std::invalid_argument("derive_constraints: step_frac must be positive");
    const std::size_t n_pcc = box.lo.size();

    auto violates = [&](const std::vector<double>& kw) {
        const auto lf = solve_load_flow(feeder, node_loads(feeder, connections, kw));
        return check_limits(lf, feeder.model()).violation;
    };

    std::vector<double> last(baseline_kw.begin(), baseline_kw.end());
    if (violates(last)) throw BaselineViolation("derive_constraints: baseline flows already violate a limit");

    DerivedConstraints out;
    out.set = {box.lo, box.hi};
    const auto steps = static_cast<int>(std::floor((max_scale - 1.0) / step_frac + 1e-9));
    for (int k = 1; k <= steps; ++k) {
        const double scale = 1.0 + k * step_frac;
        auto kw = scaled_flows(baseline_kw, dir, scale);
        if (violates(kw)) {
            out.limited = true;
            break;
        }
        last = std::move(kw);
        out.scale = scale;
    }

    out.bound_kw = last;
    if (!out.limited) return out;

    const auto bound = pcc_average_kwh(connections, last, n_pcc, slot_hours);
    if (dir == FlowDirection::Injection) {
        out.set.c_lo = bound;
    } else {
        out.set.c_hi = bound;
    }
    return out;
}

double phase_variance(std::size_t phase_count, std::span<const std::size_t> phases, std::span<const double> net_loads) {
    std::vector<double> sums(phase_count, 0.0);
    for (std::size_t i = 0; i < phases.size(); ++i) sums.at(phases[i]) += net_loads[i];
    const double mean = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(phase_count);
    double var = 0.0;
    for (double s : sums) var += (s - mean) * (s - mean);
    return var / static_cast<double>(phase_count);
}

std::vector<std::size_t> rebalance_phases(std::size_t phase_count, std::span<const std::size_t> current,
                                          const std::vector<bool>& switchable, std::span<const double> net_loads) {
    std::vector<std::size_t> out(current.begin(), current.end());
    std::vector<std::size_t> movers;
    std::vector<double> sums(phase_count, 0.0);
    for (std::size_t i = 0; i < current.size(); ++i) {
        if (switchable[i]) {
            movers.push_back(i);
        } else {
            sums.at(current[i]) += net_loads[i];
        }
    }
    if (movers.empty()) return out;

    std::stable_sort(movers.begin(), movers.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(net_loads[a]) > std::abs(net_loads[b]); });

    // Adding load w to phase p changes the sum of squares by 2 w s_p + w^2;
    // the mean is unaffected, so the smallest s_p * w wins.
    for (std::size_t i : movers) {
        const double w = net_loads[i];
        std::size_t best = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < phase_count; ++p) {
            const double score = sums[p] * w;
            if (score < best_score) {
                best_score = score;
                best = p;
            }
        }
        out[i] = best;
        sums[best] += w;
    }

    if (phase_variance(phase_count, out, net_loads) > phase_variance(phase_count, current, net_loads)) {
        return {current.begin(), current.end()};
    }
    return out;
}

} // namespace rtc
