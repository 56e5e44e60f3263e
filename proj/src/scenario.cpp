#include "cphase/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "cphase/errors.hpp"
#include "cphase/numfmt.hpp"

namespace cphase {

double ControllerConfig::band() const {
    if (settle_band) return *settle_band;
    return kind == ControllerKind::adaptive ? 0.1 : 0.5;
}

void ScenarioConfig::validate() const {
    if (!(duration > 0.0)) throw DomainError("duration must be positive");
    if (!(step_time > 0.0 && step_time < duration)) {
        throw DomainError("step_time must lie inside (0, duration)");
    }
    if (!(steady_window > 0.0)) throw DomainError("steady_window must be positive");
    if (!(controller.bounds.min < controller.bounds.max)) throw DomainError("SOI bounds are empty");
    controller.params.validate();
    plant.validate();
    profile.validate();
}

namespace {

Ramp operating_ramp(double initial, double final) { return {initial, final, 5.0, 0.5}; }

}  // namespace

ScenarioConfig case_preset(int case_number, ControllerKind kind) {
    ScenarioConfig c;
    c.name = "case" + std::to_string(case_number);
    c.controller.kind = kind;
    c.plant.apply_mismatch(c.controller.params);
    TransientProfile& p = c.profile;
    p.n = operating_ramp(1200.0, 1200.0);
    p.t_man = operating_ramp(300.0, 300.0);
    p.p_man = operating_ramp(2.0, 2.0);
    p.phi = operating_ramp(0.7, 0.7);
    p.egr = operating_ramp(0.25, 0.25);
    p.ca50_ref = {8.0, 8.0, 5.0, 0.001};
    switch (case_number) {
        case 1: p.ca50_ref.final = 10.0; break;
        case 2: p.n.final = 1500.0; break;
        case 3: p.t_man.final = 330.0; break;
        case 4:
            p.phi.initial = 0.5;
            p.phi.final = 0.9;
            break;
        case 5:
            p.egr.initial = 0.0;
            p.egr.final = 0.5;
            break;
        default: throw DomainError("unknown case preset " + std::to_string(case_number));
    }
    return c;
}

ScenarioConfig case_preset(const std::string& name, ControllerKind kind) {
    if (name.size() == 5 && name.rfind("case", 0) == 0 && name[4] >= '1' && name[4] <= '5') {
        return case_preset(name[4] - '0', kind);
    }
    throw DomainError("unknown preset '" + name + "' (expected case1..case5)");
}

namespace {

using nlohmann::json;

void read_ramp(const json& j, Ramp& r) {
    if (j.is_number()) {
        r = Ramp::constant(j.get<double>());
        return;
    }
    if (!j.is_object()) throw DomainError("expected a number or an object");
    // A ramp given only its initial value stays flat.
    if (j.contains("initial")) r.initial = r.final = j["initial"].get<double>();
    if (j.contains("final")) r.final = j["final"].get<double>();
    r.start = j.value("start", r.start);
    r.duration = j.value("duration", r.duration);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    if (!std::filesystem::exists(path)) throw DomainError("referenced file does not exist: " + path.string());
    return path;
}

ModelParams read_model_params(const json& j, const std::filesystem::path& base, ModelParams p) {
    if (j.is_string()) return load_params(resolve(base, j.get<std::string>()));
    auto v = p.to_array();
    for (std::size_t i = 0; i < ModelParams::kCount; ++i) {
        v[i] = j.value(std::string(ModelParams::kKeys[i]), v[i]);
    }
    return ModelParams::from_array(v);
}

// Wraps a field lookup so that type errors report their JSON path.
template <class F>
void at_path(const std::string& path, F&& f) {
    try {
        f();
    } catch (const json::exception& e) {
        throw DomainError("config field '" + path + "': " + e.what());
    } catch (const DomainError& e) {
        throw DomainError("config field '" + path + "': " + e.what());
    }
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
    ControllerKind kind = ControllerKind::adaptive;
    if (j.contains("controller") && j["controller"].contains("type")) {
        at_path("controller.type", [&] {
            kind = controller_kind_from_string(j["controller"]["type"].get<std::string>());
        });
    }
    ScenarioConfig c;
    c.controller.kind = kind;
    c.plant.apply_mismatch(c.controller.params);
    if (j.contains("preset")) {
        at_path("preset", [&] { c = case_preset(j["preset"].get<std::string>(), kind); });
    }
    at_path("name", [&] { c.name = j.value("name", c.name); });
    at_path("duration", [&] { c.duration = j.value("duration", c.duration); });
    at_path("step_time", [&] { c.step_time = j.value("step_time", c.step_time); });
    at_path("steady_window", [&] { c.steady_window = j.value("steady_window", c.steady_window); });

    if (j.contains("controller")) {
        const json& cj = j["controller"];
        ControllerConfig& cc = c.controller;
        at_path("controller.x_r_bar", [&] { cc.x_r_bar = cj.value("x_r_bar", cc.x_r_bar); });
        at_path("controller.soi_min", [&] { cc.bounds.min = cj.value("soi_min", cc.bounds.min); });
        at_path("controller.soi_max", [&] { cc.bounds.max = cj.value("soi_max", cc.bounds.max); });
        if (cj.contains("settle_band")) {
            at_path("controller.settle_band", [&] { cc.settle_band = cj["settle_band"].get<double>(); });
        }
        if (cj.contains("params")) {
            at_path("controller.params", [&] { cc.params = read_model_params(cj["params"], base_dir, cc.params); });
        }
    }

    if (j.contains("plant")) {
        const json& pj = j["plant"];
        PlantConfig& pc = c.plant;
        if (pj.contains("geometry")) {
            at_path("plant.geometry", [&] {
                const json& g = pj["geometry"];
                pc.geom = g.is_string() ? load_geometry(resolve(base_dir, g.get<std::string>()))
                                        : g.get<EngineGeometry>();
            });
        }
        if (pj.contains("wiebe")) {
            at_path("plant.wiebe", [&] {
                pc.wiebe.a = pj["wiebe"].value("a", pc.wiebe.a);
                pc.wiebe.b = pj["wiebe"].value("b", pc.wiebe.b);
            });
        }
        // Plant constants: either an explicit parameter set or a mismatch
        // relative to the controller's copy.
        at_path("plant.mismatch", [&] {
            if (pj.contains("params")) {
                pc.true_params = read_model_params(pj["params"], base_dir, c.controller.params);
                pc.wiebe = WiebeParams::from_composite(pc.wiebe.a, pc.wiebe.b, pc.true_params.c9);
            } else if (pj.contains("mismatch")) {
                const json& m = pj["mismatch"];
                if (m.is_string() && m.get<std::string>() == "none") {
                    pc.match(c.controller.params);
                } else {
                    pc.apply_mismatch(c.controller.params, m.value("c4_scale", 0.99), m.value("c9_scale", 0.95));
                }
            } else {
                pc.apply_mismatch(c.controller.params);
            }
        });
        if (pj.contains("soi_quantum")) {
            at_path("plant.soi_quantum", [&] {
                const json& q = pj["soi_quantum"];
                if (q.is_null() || (q.is_number() && q.get<double>() == 0.0)) {
                    pc.soi_quantum.reset();
                } else {
                    pc.soi_quantum = q.get<double>();
                }
            });
        }
        at_path("plant.fuel_delay_cycles", [&] { pc.fuel_delay_cycles = pj.value("fuel_delay_cycles", pc.fuel_delay_cycles); });
        at_path("plant.lag_tau", [&] { pc.lag_tau = pj.value("lag_tau", pc.lag_tau); });
        at_path("plant.seed", [&] { pc.seed = pj.value("seed", pc.seed); });
        at_path("plant.x_r", [&] { pc.x_r = pj.value("x_r", pc.x_r); });
        at_path("plant.integration_step", [&] { pc.integration_step = pj.value("integration_step", pc.integration_step); });
        if (pj.contains("model")) {
            at_path("plant.model", [&] { pc.model = combustion_model_from_string(pj["model"].get<std::string>()); });
        }
        if (pj.contains("noise")) {
            at_path("plant.noise", [&] {
                const json& n = pj["noise"];
                pc.noise.ca50 = n.value("ca50", pc.noise.ca50);
                pc.noise.p_ivc = n.value("p_ivc", pc.noise.p_ivc);
                pc.noise.t_ivc = n.value("t_ivc", pc.noise.t_ivc);
            });
        }
        if (pj.contains("manifold_map")) {
            at_path("plant.manifold_map", [&] {
                const json& m = pj["manifold_map"];
                auto& mm = pc.manifold_map;
                mm.p_gain = m.value("p_gain", mm.p_gain);
                mm.p_offset = m.value("p_offset", mm.p_offset);
                mm.t_gain = m.value("t_gain", mm.t_gain);
                mm.t_offset = m.value("t_offset", mm.t_offset);
            });
        }
    }

    if (j.contains("profile")) {
        const json& pj = j["profile"];
        TransientProfile& p = c.profile;
        const std::pair<const char*, Ramp*> channels[] = {
            {"n", &p.n},         {"egr", &p.egr},     {"phi", &p.phi},
            {"p_man", &p.p_man}, {"t_man", &p.t_man}, {"ca50_ref", &p.ca50_ref}};
        for (const auto& [key, ramp] : channels) {
            if (pj.contains(key)) {
                at_path(std::string("profile.") + key, [&] { read_ramp(pj[key], *ramp); });
            }
        }
    }

    if (j.contains("outputs")) {
        const json& oj = j["outputs"];
        at_path("outputs", [&] {
            if (oj.contains("csv")) c.csv_out = oj["csv"].get<std::string>();
            if (oj.contains("metrics")) c.metrics_out = oj["metrics"].get<std::string>();
        });
    }

    at_path("scenario", [&] { c.validate(); });
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return scenario_from_json(j, path.parent_path());
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
    config.validate();
    Plant plant(config.plant);
    const ChannelValues initial = profile_eval(config.profile, 0.0);
    plant.reset(initial);

    std::unique_ptr<Controller> controller;
    const ControllerConfig& cc = config.controller;
    if (cc.kind == ControllerKind::adaptive) {
        OperatingCondition nominal = plant.upcoming_condition(initial);
        nominal.x_r = cc.x_r_bar;
        controller = std::make_unique<AdaptiveController>(cc.params, config.plant.geom, nominal, cc.bounds);
    } else {
        controller = std::make_unique<FeedforwardController>(cc.params, config.plant.geom, cc.x_r_bar, cc.bounds);
    }

    ScenarioResult result;
    // Measured conditions of the last completed cycle. EGR is sensed in
    // the intake manifold and so leads the lagged in-cylinder composition.
    std::optional<OperatingCondition> previous;
    // A cycle that starts within 1 ns of the end is not simulated.
    while (plant.time() < config.duration - 1e-9) {
        const ChannelValues manifold = profile_eval(config.profile, plant.time());
        ControllerInputs inputs;
        inputs.current = plant.upcoming_condition(manifold);
        inputs.previous = previous.value_or(inputs.current);

        const double latched_ref = manifold.ca50_ref;
        const ControlCommand cmd = controller->command(latched_ref, inputs);
        const ControllerState used = controller->snapshot();
        CycleRecord rec = plant.step_cycle(cmd.soi, manifold);
        // The reference in force when the cycle's CA50 is evaluated; a
        // change during the cycle reaches the controller one cycle late.
        rec.ca50_ref = config.profile.ca50_ref.eval(plant.time());
        if (cmd.saturated && rec.fault == Fault::none) rec.fault = Fault::saturation;
        controller->observe(rec.ca50);
        rec.controller = used;
        if (rec.ca50) rec.lyapunov = lyapunov_value(latched_ref, *rec.ca50);
        previous = rec.cond;
        previous->egr = manifold.egr;
        result.records.push_back(rec);
    }
    result.metrics = compute_metrics(result.records, config.step_time, config.duration, config.steady_window,
                                     cc.band(), transient_end(config.profile, config.step_time, config.duration));
    return result;
}

namespace {

SegmentMetrics segment_metrics(const std::vector<CycleRecord>& records, const std::string& name,
                               double t_begin, double t_end, double window, double band,
                               double settle_origin) {
    SegmentMetrics m;
    m.name = name;
    m.t_begin = t_begin;
    m.t_end = t_end;
    m.transient_end = settle_origin;

    struct Point {
        double error;
        double time;
        std::size_t total_ordinal;
    };
    std::vector<Point> fueled;
    for (const auto& r : records) {
        if (r.time_s < t_begin || r.time_s >= t_end) continue;
        ++m.cycles;
        if (r.ca50) fueled.push_back({*r.ca50 - r.ca50_ref, r.time_s, m.cycles});
    }
    m.fueled_cycles = fueled.size();
    if (fueled.empty()) return m;

    double sum = 0.0;
    std::size_t count = 0;
    m.steady_min = std::numeric_limits<double>::infinity();
    m.steady_max = -std::numeric_limits<double>::infinity();
    for (const auto& p : fueled) {
        if (p.time < t_end - window) continue;
        m.steady_min = std::min(m.steady_min, p.error);
        m.steady_max = std::max(m.steady_max, p.error);
        sum += p.error;
        ++count;
    }
    if (count == 0) {
        m.steady_min = m.steady_max = 0.0;
    } else {
        m.steady_mean = sum / static_cast<double>(count);
    }

    for (const auto& p : fueled) {
        if (std::abs(p.error) > std::abs(m.transient_peak_error)) m.transient_peak_error = p.error;
    }
    const double side = (m.transient_peak_error - m.steady_mean) < 0.0 ? -1.0 : 1.0;
    for (const auto& p : fueled) {
        m.overshoot = std::max(m.overshoot, -side * (p.error - m.steady_mean));
    }

    std::size_t settled_at = 0;
    for (std::size_t i = 0; i < fueled.size(); ++i) {
        if (std::abs(fueled[i].error) > band) settled_at = i + 1;
    }
    if (settled_at < fueled.size()) {
        m.settling_cycles = settled_at + 1;
        m.settling_cycles_total = fueled[settled_at].total_ordinal;
    }
    const auto first_after = std::find_if(fueled.begin(), fueled.end(),
                                          [&](const Point& p) { return p.time >= settle_origin; });
    const auto first_index = static_cast<std::size_t>(first_after - fueled.begin());
    if (settled_at < fueled.size() && first_after != fueled.end()) {
        m.settling_after_transient = settled_at >= first_index ? settled_at - first_index + 1 : 1;
    }
    return m;
}

std::string opt_field(const std::optional<double>& v) { return v ? format_exact(*v) : std::string(); }

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

RunMetrics compute_metrics(const std::vector<CycleRecord>& records, double step_time,
                           double duration, double steady_window, double band,
                           std::optional<double> transient_end) {
    RunMetrics m;
    m.band = band;
    m.pre = segment_metrics(records, "pre_step", 0.0, step_time, steady_window, band, 0.0);
    m.post = segment_metrics(records, "post_step", step_time, duration, steady_window, band,
                             transient_end.value_or(step_time));
    return m;
}

double transient_end(const TransientProfile& profile, double step_time, double duration) {
    double end = step_time;
    for (const Ramp* r : {&profile.n, &profile.egr, &profile.phi, &profile.p_man, &profile.t_man,
                          &profile.ca50_ref}) {
        if (!r->changes()) continue;
        const double e = r->start + r->duration;
        if (e > end && r->start < duration) end = e;
    }
    return end;
}

void write_records(std::ostream& out, const std::vector<CycleRecord>& records) {
    out << kRecordHeader << '\n';
    for (const auto& r : records) {
        out << r.cycle_index << ',' << format_exact(r.time_s) << ',' << format_exact(r.soi_cmd) << ','
            << format_exact(r.soi_actuated) << ',' << opt_field(r.soc) << ',' << opt_field(r.ca50)
            << ',' << format_exact(r.ca50_ref) << ',' << format_exact(r.controller.x1_hat) << ','
            << format_exact(r.controller.x2_hat) << ',' << opt_field(r.lyapunov) << ','
            << format_exact(r.cond.n) << ',' << format_exact(r.cond.egr) << ','
            << format_exact(r.cond.phi) << ',' << format_exact(r.cond.ivc.p_ivc) << ','
            << format_exact(r.cond.ivc.t_ivc) << ',' << to_string(r.fault) << '\n';
    }
}

std::vector<CycleRecord> read_records(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || line != kRecordHeader) {
        throw ParseError(source, 1, std::string("missing header '") + kRecordHeader + "'");
    }
    std::vector<CycleRecord> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 16) throw ParseError(source, line_no, "expected 16 fields");
        auto num = [&](std::size_t i) {
            const auto v = parse_double(f[i]);
            if (!v) throw ParseError(source, line_no, "invalid number in field " + std::to_string(i + 1));
            return *v;
        };
        auto opt = [&](std::size_t i) -> std::optional<double> {
            if (f[i].empty()) return std::nullopt;
            return num(i);
        };
        CycleRecord r;
        r.cycle_index = static_cast<long>(num(0));
        r.time_s = num(1);
        r.soi_cmd = num(2);
        r.soi_actuated = num(3);
        r.soc = opt(4);
        r.ca50 = opt(5);
        r.ca50_ref = num(6);
        r.controller.x1_hat = num(7);
        r.controller.x2_hat = num(8);
        r.lyapunov = opt(9);
        r.cond.n = num(10);
        r.cond.egr = num(11);
        r.cond.phi = num(12);
        r.cond.ivc.p_ivc = num(13);
        r.cond.ivc.t_ivc = num(14);
        r.cond.soi = r.soi_actuated;
        try {
            r.fault = fault_from_string(f[15]);
        } catch (const DomainError& e) {
            throw ParseError(source, line_no, e.what());
        }
        out.push_back(r);
    }
    return out;
}

namespace {

nlohmann::json segment_json(const SegmentMetrics& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["t_begin"] = s.t_begin;
    j["t_end"] = s.t_end;
    j["cycles"] = s.cycles;
    j["fueled_cycles"] = s.fueled_cycles;
    j["settling_cycles"] = s.settling_cycles ? nlohmann::json(*s.settling_cycles) : nlohmann::json();
    j["settling_cycles_total"] =
        s.settling_cycles_total ? nlohmann::json(*s.settling_cycles_total) : nlohmann::json();
    j["transient_end"] = s.transient_end;
    j["settling_after_transient"] =
        s.settling_after_transient ? nlohmann::json(*s.settling_after_transient) : nlohmann::json();
    j["steady_state_error_band"] = {s.steady_min, s.steady_max};
    j["steady_state_mean_error"] = s.steady_mean;
    j["overshoot"] = s.overshoot;
    j["transient_peak_error"] = s.transient_peak_error;
    return j;
}

}  // namespace

void write_metrics(std::ostream& out, const RunMetrics& metrics) {
    nlohmann::json j;
    j["band"] = metrics.band;
    j["segments"] = {segment_json(metrics.pre), segment_json(metrics.post)};
    out << j.dump(2) << '\n';
}

}  // namespace cphase
