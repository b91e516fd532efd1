#include "infusion/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace infusion::sim {

using patient::Organ;

std::string_view to_string(DeltaUMode m) {
    return m == DeltaUMode::rate ? "rate" : "raw";
}

DeltaUMode parse_delta_u_mode(std::string_view name) {
    if (name == "rate") {
        return DeltaUMode::rate;
    }
    if (name == "raw") {
        return DeltaUMode::raw;
    }
    throw ConfigError("delta_u_mode must be 'rate' or 'raw'");
}

void SimConfig::validate() const {
    if (!(step_h > 0.0)) {
        throw ConfigError("step_h must be positive");
    }
    if (!(setpoint_time >= 0.0)) {
        throw ConfigError("setpoint_time must be nonnegative");
    }
    if (!(t_end > setpoint_time)) {
        throw ConfigError("t_end must exceed setpoint_time");
    }
    if (!(setpoint_amplitude >= 0.0 && setpoint_amplitude < 1.0)) {
        throw ConfigError("setpoint_amplitude must lie in [0, 1)");
    }
    if (!(w1 >= 0.0) || !(w2 >= 0.0)) {
        throw ConfigError("cost weights must be nonnegative");
    }
    if (!(deriv_filter_nf > 0.0)) {
        throw ConfigError("deriv_filter_nf must be positive");
    }
    if (t_end / step_h > 1e8) {
        throw ConfigError("t_end / step_h exceeds the 1e8 step budget");
    }
}

std::size_t SimConfig::steps() const {
    return static_cast<std::size_t>(std::llround(t_end / step_h));
}

void SimulationTrace::validate() const {
    const std::size_t n = t.size();
    auto check = [&](const std::vector<double>& v, const char* name) {
        if (v.size() != n) {
            throw ConfigError(std::string("trace column '") + name + "' has mismatched length");
        }
        for (double x : v) {
            if (!std::isfinite(x)) {
                throw ConfigError(std::string("trace column '") + name + "' is not finite");
            }
        }
    };
    if (n < 2) {
        throw ConfigError("trace needs at least two samples");
    }
    check(r, "r");
    check(e, "e");
    check(u, "u");
    check(delta_u, "delta_u");
    check(c_b, "c_b");
    check(y, "y");
    if (observers.size() != observer_names.size()) {
        throw ConfigError("observer names and columns disagree");
    }
    for (std::size_t i = 0; i < observers.size(); ++i) {
        check(observers[i], observer_names[i].c_str());
    }
}

namespace {

constexpr double kDivergenceBound = 1e12;

/// Controllable canonical block: x0' = -a.x + in, xi' = x(i-1), out = c.x + d*in.
struct CompanionBlock {
    std::vector<double> a;
    std::vector<double> c;
    double d = 0.0;

    explicit CompanionBlock(const lti::TransferFunction& tf) {
        const lti::StateSpaceModel ss = lti::tf_to_state_space(tf);
        const auto n = static_cast<std::size_t>(ss.A.rows());
        a.resize(n);
        c.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            a[j] = -ss.A(0, static_cast<Eigen::Index>(j));
            c[j] = ss.C(static_cast<Eigen::Index>(j));
        }
        d = ss.D;
    }

    std::size_t order() const { return a.size(); }

    double output(const double* x, double in) const {
        double y = d * in;
        for (std::size_t j = 0; j < c.size(); ++j) {
            y += c[j] * x[j];
        }
        return y;
    }

    void derivative(const double* x, double in, double* dx) const {
        const std::size_t n = a.size();
        if (n == 0) {
            return;
        }
        double acc = in;
        for (std::size_t j = 0; j < n; ++j) {
            acc -= a[j] * x[j];
        }
        dx[0] = acc;
        for (std::size_t j = 1; j < n; ++j) {
            dx[j] = x[j - 1];
        }
    }
};

struct Signals {
    double r = 0.0;
    double e = 0.0;
    double u = 0.0;
    double c_b = 0.0;
    double y = 0.0;
    double lungs_out = 0.0;
};

class ClosedLoop {
  public:
    ClosedLoop(const lti::TransferFunction& controller, const patient::PatientModel& p,
               const SimConfig& cfg, bool with_observers)
        : cfg_(cfg), patient_(p), controller_(controller), lungs_(p.organ(Organ::lungs)),
          brain_(p.organ(Organ::brain)) {
        recirculating_ = p.topology == patient::Topology::recirculating;
        for (Organ o : patient::kAllOrgans) {
            if (o != Organ::lungs && o != Organ::brain) {
                organ_names_.emplace_back(patient::to_string(o));
                organs_.emplace_back(p.organ(o));
            }
        }
        integrate_organs_ = recirculating_ || with_observers;
        std::size_t offset = 0;
        controller_at_ = offset;
        offset += controller_.order();
        lungs_at_ = offset;
        offset += lungs_.order();
        brain_at_ = offset;
        offset += brain_.order();
        if (integrate_organs_) {
            for (const auto& o : organs_) {
                organ_at_.push_back(offset);
                offset += o.order();
            }
        }
        n_states_ = offset;
        // reference steps at setpoint_time; grid-aligned times are snapped
        step_at_ = cfg.setpoint_time - 1e-9 * cfg.step_h;
    }

    std::size_t states() const { return n_states_; }
    bool integrates_organs() const { return integrate_organs_; }
    const std::vector<std::string>& organ_names() const { return organ_names_; }

    Signals signals(double t, const double* x) const {
        Signals s;
        s.lungs_out = lungs_.output(x + lungs_at_, 0.0);
        s.c_b = brain_.output(x + brain_at_, 0.0);
        s.y = patient::hill_effect(std::max(s.c_b, 0.0), patient_.hill);
        s.r = t >= step_at_ ? cfg_.setpoint_amplitude : 0.0;
        s.e = s.r - s.y;
        s.u = controller_.output(x + controller_at_, s.e);
        if (cfg_.clamp_nonnegative_u) {
            s.u = std::max(s.u, 0.0);
        }
        return s;
    }

    double organ_output(std::size_t i, const double* x) const {
        return organs_[i].output(x + organ_at_[i], 0.0);
    }

    void derivative(double t, const double* x, double* dx) const {
        const Signals s = signals(t, x);
        double lungs_in = patient_.infusion_scale * s.u;
        if (recirculating_) {
            lungs_in += patient_.shunt_gain * s.lungs_out + s.c_b;
            for (std::size_t i = 0; i < organs_.size(); ++i) {
                lungs_in += organ_output(i, x);
            }
        }
        controller_.derivative(x + controller_at_, s.e, dx + controller_at_);
        lungs_.derivative(x + lungs_at_, lungs_in, dx + lungs_at_);
        brain_.derivative(x + brain_at_, s.lungs_out, dx + brain_at_);
        if (integrate_organs_) {
            for (std::size_t i = 0; i < organs_.size(); ++i) {
                organs_[i].derivative(x + organ_at_[i], s.lungs_out, dx + organ_at_[i]);
            }
        }
    }

  private:
    const SimConfig& cfg_;
    const patient::PatientModel& patient_;
    CompanionBlock controller_;
    CompanionBlock lungs_;
    CompanionBlock brain_;
    std::vector<CompanionBlock> organs_;
    std::vector<std::string> organ_names_;
    std::vector<std::size_t> organ_at_;
    std::size_t controller_at_ = 0;
    std::size_t lungs_at_ = 0;
    std::size_t brain_at_ = 0;
    std::size_t n_states_ = 0;
    bool recirculating_ = false;
    bool integrate_organs_ = false;
    double step_at_ = 0.0;
};

std::string divergence_message(double t) {
    return "closed loop diverged at t = " + format_double(t) + " min";
}

} // namespace

SimulationTrace simulate_closed_loop(const lti::TransferFunction& controller,
                                     const patient::PatientModel& patient, const SimConfig& cfg,
                                     const SimOptions& options) {
    cfg.validate();
    patient.validate();
    if (!controller.is_proper()) {
        throw ConfigError("controller transfer function must be proper");
    }

    const ClosedLoop loop(controller, patient, cfg, options.record_observers);
    const std::size_t n_steps = cfg.steps();
    const std::size_t n = loop.states();
    const double h = cfg.step_h;

    SimulationTrace trace;
    trace.step_h = h;
    for (auto* v : {&trace.t, &trace.r, &trace.e, &trace.u, &trace.delta_u, &trace.c_b, &trace.y}) {
        v->reserve(n_steps + 1);
    }
    const bool record = options.record_observers;
    if (record) {
        trace.observer_names = loop.organ_names();
        trace.observer_names.emplace_back("shunt");
        trace.observers.assign(trace.observer_names.size(), {});
        for (auto& col : trace.observers) {
            col.reserve(n_steps + 1);
        }
    }

    std::vector<double> x(n, 0.0), k1(n), k2(n), k3(n), k4(n), tmp(n);

    auto sample = [&](std::size_t k) {
        const double t = static_cast<double>(k) * h;
        const Signals s = loop.signals(t, x.data());
        trace.t.push_back(t);
        trace.r.push_back(s.r);
        trace.e.push_back(s.e);
        trace.delta_u.push_back(k == 0 ? 0.0 : (s.u - trace.u.back()) / h);
        trace.u.push_back(s.u);
        trace.c_b.push_back(s.c_b);
        trace.y.push_back(s.y);
        if (record) {
            const std::size_t organs = trace.observers.size() - 1;
            for (std::size_t i = 0; i < organs; ++i) {
                trace.observers[i].push_back(loop.organ_output(i, x.data()));
            }
            trace.observers.back().push_back(patient.shunt_gain * s.lungs_out);
        }
    };

    sample(0);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * h;
        loop.derivative(t, x.data(), k1.data());
        for (std::size_t i = 0; i < n; ++i) {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        loop.derivative(t + 0.5 * h, tmp.data(), k2.data());
        for (std::size_t i = 0; i < n; ++i) {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        loop.derivative(t + 0.5 * h, tmp.data(), k3.data());
        for (std::size_t i = 0; i < n; ++i) {
            tmp[i] = x[i] + h * k3[i];
        }
        loop.derivative(t + h, tmp.data(), k4.data());
        const double t_next = static_cast<double>(k + 1) * h;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (!(std::abs(x[i]) <= kDivergenceBound)) {
                throw DivergenceError(t_next, divergence_message(t_next));
            }
        }
        sample(k + 1);
        if (!std::isfinite(trace.u.back()) || !std::isfinite(trace.c_b.back())) {
            throw DivergenceError(t_next, divergence_message(t_next));
        }
    }
    return trace;
}

CostBreakdown evaluate_cost(const SimulationTrace& trace, double w1, double w2, DeltaUMode mode,
                            bool exclude_reference_steps) {
    trace.validate();
    const std::size_t n = trace.size();
    const double h = trace.step_h;
    if (!(h > 0.0)) {
        throw ConfigError("trace step must be positive");
    }

    CostBreakdown c;
    for (std::size_t k = 0; k < n; ++k) {
        const double weight = (k == 0 || k + 1 == n) ? 0.5 * h : h;
        c.itse += weight * trace.t[k] * trace.e[k] * trace.e[k];
    }
    for (std::size_t k = 1; k < n; ++k) {
        if (exclude_reference_steps && trace.r[k] != trace.r[k - 1]) {
            continue;
        }
        const double du = trace.u[k] - trace.u[k - 1];
        c.isdco += mode == DeltaUMode::rate ? du * du / h : h * du * du;
    }
    c.j = w1 * c.itse + w2 * c.isdco;
    return c;
}

namespace {

std::optional<double> first_crossing(const SimulationTrace& tr, double level) {
    for (std::size_t k = 0; k < tr.size(); ++k) {
        if (tr.y[k] >= level) {
            if (k == 0) {
                return tr.t[0];
            }
            const double y0 = tr.y[k - 1];
            const double y1 = tr.y[k];
            const double frac = y1 > y0 ? (level - y0) / (y1 - y0) : 1.0;
            return tr.t[k - 1] + frac * (tr.t[k] - tr.t[k - 1]);
        }
    }
    return std::nullopt;
}

} // namespace

CostBreakdown evaluate_cost(const SimulationTrace& trace, const SimConfig& cfg) {
    return evaluate_cost(trace, cfg.w1, cfg.w2, cfg.delta_u_mode, cfg.isdco_exclude_reference_steps);
}

Metrics compute_metrics(const SimulationTrace& trace, const SimConfig& cfg) {
    return compute_metrics(trace, cfg.w1, cfg.w2, cfg.delta_u_mode,
                           cfg.isdco_exclude_reference_steps);
}

Metrics compute_metrics(const SimulationTrace& trace, double w1, double w2, DeltaUMode mode,
                        bool exclude_reference_steps) {
    const CostBreakdown cost = evaluate_cost(trace, w1, w2, mode, exclude_reference_steps);
    Metrics m;
    m.j = cost.j;
    m.itse = cost.itse;
    m.isdco = cost.isdco;

    const std::size_t n = trace.size();
    m.peak_u = *std::max_element(trace.u.begin(), trace.u.end());
    for (std::size_t k = 1; k < n; ++k) {
        m.total_drug += 0.5 * (trace.u[k] + trace.u[k - 1]) * (trace.t[k] - trace.t[k - 1]);
    }
    const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n))));
    double sum = 0.0;
    for (std::size_t k = n - tail; k < n; ++k) {
        sum += trace.u[k];
    }
    m.steady_state_u = sum / static_cast<double>(tail);

    const double amplitude = trace.r.back();
    if (!(amplitude > 0.0)) {
        return m;
    }
    const double peak_y = *std::max_element(trace.y.begin(), trace.y.end());
    m.overshoot_pct = std::max(0.0, peak_y - amplitude) / amplitude * 100.0;

    const auto t10 = first_crossing(trace, 0.1 * amplitude);
    const auto t90 = first_crossing(trace, 0.9 * amplitude);
    if (t10 && t90) {
        m.rise_time_10_90 = *t90 - *t10;
    }

    const auto step = std::find(trace.r.begin(), trace.r.end(), amplitude);
    const double t_step = trace.t[static_cast<std::size_t>(step - trace.r.begin())];
    const double band = 0.02 * amplitude;
    std::size_t last_out = n;
    for (std::size_t k = n; k-- > 0;) {
        if (std::abs(trace.e[k]) > band) {
            last_out = k;
            break;
        }
    }
    if (last_out == n) {
        m.settling_time_2pct = 0.0;
    } else if (last_out + 1 < n) {
        m.settling_time_2pct = trace.t[last_out + 1] - t_step;
    }
    return m;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
    out << "t,r,e,u,delta_u,c_b,y";
    for (const auto& name : trace.observer_names) {
        out << ',' << name;
    }
    out << '\n';
    for (std::size_t k = 0; k < trace.size(); ++k) {
        out << format_double(trace.t[k]) << ',' << format_double(trace.r[k]) << ','
            << format_double(trace.e[k]) << ',' << format_double(trace.u[k]) << ','
            << format_double(trace.delta_u[k]) << ',' << format_double(trace.c_b[k]) << ','
            << format_double(trace.y[k]);
        for (const auto& col : trace.observers) {
            out << ',' << format_double(col[k]);
        }
        out << '\n';
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    return cells;
}

double parse_cell(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError("malformed number '" + s + "' in trace CSV");
    }
    return v;
}

} // namespace

SimulationTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ConfigError("empty trace CSV");
    }
    const auto header = split_csv_line(line);
    static const char* fixed[] = {"t", "r", "e", "u", "delta_u", "c_b", "y"};
    if (header.size() < 7) {
        throw ConfigError("trace CSV header is too short");
    }
    for (std::size_t i = 0; i < 7; ++i) {
        if (header[i] != fixed[i]) {
            throw ConfigError("unexpected trace CSV column '" + header[i] + "'");
        }
    }
    SimulationTrace tr;
    tr.observer_names.assign(header.begin() + 7, header.end());
    tr.observers.assign(tr.observer_names.size(), {});
    std::vector<double>* cols[] = {&tr.t, &tr.r, &tr.e, &tr.u, &tr.delta_u, &tr.c_b, &tr.y};
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ConfigError("trace CSV row has the wrong number of cells");
        }
        for (std::size_t i = 0; i < 7; ++i) {
            cols[i]->push_back(parse_cell(cells[i]));
        }
        for (std::size_t i = 7; i < cells.size(); ++i) {
            tr.observers[i - 7].push_back(parse_cell(cells[i]));
        }
    }
    if (tr.t.size() < 2) {
        throw ConfigError("trace CSV needs at least two rows");
    }
    tr.step_h = tr.t[1] - tr.t[0];
    tr.validate();
    return tr;
}

void write_metrics(std::ostream& out, const Metrics& m) {
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("absent");
    };
    out << "J = " << format_double(m.j) << '\n'
        << "itse = " << format_double(m.itse) << '\n'
        << "isdco = " << format_double(m.isdco) << '\n'
        << "rise_time_10_90 = " << opt(m.rise_time_10_90) << '\n'
        << "settling_time_2pct = " << opt(m.settling_time_2pct) << '\n'
        << "overshoot_pct = " << opt(m.overshoot_pct) << '\n'
        << "peak_u = " << format_double(m.peak_u) << '\n'
        << "total_drug = " << format_double(m.total_drug) << '\n'
        << "steady_state_u = " << format_double(m.steady_state_u) << '\n';
}

} // namespace infusion::sim
