#include "cphase/plant.hpp"

#include <cmath>
#include <numbers>

#include "cphase/errors.hpp"

namespace cphase {

std::string to_string(CombustionModel model) {
    return model == CombustionModel::knock_integral ? "knock_integral" : "control_oriented";
}

CombustionModel combustion_model_from_string(const std::string& name) {
    if (name == "knock_integral") return CombustionModel::knock_integral;
    if (name == "control_oriented") return CombustionModel::control_oriented;
    throw DomainError("unknown combustion model '" + name + "'");
}

void PlantConfig::apply_mismatch(const ModelParams& base, double c4_scale, double c9_scale) {
    true_params = base;
    true_params.c4 *= c4_scale;
    true_params.c9 *= c9_scale;
    wiebe = WiebeParams::from_composite(wiebe.a, wiebe.b, true_params.c9);
}

void PlantConfig::match(const ModelParams& base) { apply_mismatch(base, 1.0, 1.0); }

void PlantConfig::validate() const {
    geom.validate();
    true_params.validate();
    wiebe.validate();
    if (soi_quantum && !(*soi_quantum > 0.0)) throw DomainError("soi_quantum must be positive");
    if (fuel_delay_cycles < 0) throw DomainError("fuel_delay_cycles must be non-negative");
    if (!(lag_tau >= 0.0)) throw DomainError("lag_tau must be non-negative");
    if (noise.ca50 < 0.0 || noise.p_ivc < 0.0 || noise.t_ivc < 0.0) {
        throw DomainError("noise standard deviations must be non-negative");
    }
    if (!(x_r >= 0.0 && x_r < 1.0)) throw DomainError("plant x_r must lie in [0, 1)");
    if (!(integration_step > 0.0)) throw DomainError("integration_step must be positive");
}

double Ramp::eval(double t) const {
    if (t <= start) return initial;
    if (t >= start + duration) return final;
    const double s = (t - start) / duration;
    return initial + (final - initial) * 0.5 * (1.0 - std::cos(std::numbers::pi * s));
}

void TransientProfile::validate() const {
    for (const Ramp* r : {&n, &egr, &phi, &p_man, &t_man, &ca50_ref}) {
        if (!(r->duration >= 0.0)) throw DomainError("ramp duration must be non-negative");
    }
    for (double v : {n.initial, n.final}) {
        if (!(v > 0.0)) throw DomainError("engine speed must be positive");
    }
    for (double v : {egr.initial, egr.final}) {
        if (!(v >= 0.0 && v <= 0.6)) throw DomainError("EGR must lie in [0, 0.6]");
    }
    for (double v : {phi.initial, phi.final}) {
        if (!(v > 0.0 && v <= 1.0)) throw DomainError("phi must lie in (0, 1]");
    }
    for (double v : {p_man.initial, p_man.final, t_man.initial, t_man.final}) {
        if (!(v > 0.0)) throw DomainError("manifold pressure and temperature must be positive");
    }
}

ChannelValues profile_eval(const TransientProfile& p, double t) {
    return {p.n.eval(t),     p.egr.eval(t),   p.phi.eval(t),
            p.p_man.eval(t), p.t_man.eval(t), p.ca50_ref.eval(t)};
}

double lag_update(double current, double target, double dt, double tau) {
    if (tau <= 0.0) return target;
    return current + (target - current) * -std::expm1(-dt / tau);
}

IvcState ivc_lag_update(const IvcState& current, const IvcState& target, double dt, double tau) {
    return {lag_update(current.p_ivc, target.p_ivc, dt, tau),
            lag_update(current.t_ivc, target.t_ivc, dt, tau), target.v_ivc};
}

double quantize_soi(double soi, double quantum) {
    const double steps = std::round(soi / quantum);
    // Dividing by an integral reciprocal keeps e.g. 11 * 0.1 at the double
    // nearest 1.1 instead of 1.1000000000000001.
    const double inv = 1.0 / quantum;
    const double inv_rounded = std::round(inv);
    if (inv_rounded >= 1.0 && std::abs(inv - inv_rounded) <= 1e-9 * inv) return steps / inv_rounded;
    return steps * quantum;
}

std::string to_string(Fault fault) {
    switch (fault) {
        case Fault::none: return "none";
        case Fault::misfire: return "misfire";
        case Fault::saturation: return "saturation";
    }
    return "none";
}

Fault fault_from_string(const std::string& name) {
    if (name == "none") return Fault::none;
    if (name == "misfire") return Fault::misfire;
    if (name == "saturation") return Fault::saturation;
    throw DomainError("unknown fault '" + name + "'");
}

Plant::Plant(PlantConfig config) : config_(std::move(config)), rng_(config_.seed) {
    config_.validate();
}

IvcState Plant::manifold_target(const ChannelValues& m) const {
    const auto& map = config_.manifold_map;
    return make_ivc_state(map.p_gain * m.p_man + map.p_offset, map.t_gain * m.t_man + map.t_offset,
                          config_.geom);
}

void Plant::reset(const ChannelValues& manifold) {
    rng_.seed(config_.seed);
    time_ = 0.0;
    time_carry_ = 0.0;
    cycle_ = 0;
    ivc_ = manifold_target(manifold);
    egr_ = manifold.egr;
}

OperatingCondition Plant::upcoming_condition(const ChannelValues& manifold) const {
    return {manifold.n, egr_, manifold.phi, ivc_, config_.x_r, 0.0};
}

CycleRecord Plant::step_cycle(double soi_cmd, const ChannelValues& manifold) {
    if (!std::isfinite(soi_cmd)) throw DomainError("SOI command must be finite");

    CycleRecord rec;
    rec.cycle_index = cycle_;
    rec.time_s = time_;
    rec.soi_cmd = soi_cmd;
    rec.soi_actuated = config_.soi_quantum ? quantize_soi(soi_cmd, *config_.soi_quantum) : soi_cmd;
    rec.ca50_ref = manifold.ca50_ref;

    OperatingCondition cond = upcoming_condition(manifold);
    cond.soi = rec.soi_actuated;
    if (config_.noise.p_ivc > 0.0) {
        cond.ivc.p_ivc += std::normal_distribution<double>(0.0, config_.noise.p_ivc)(rng_);
    }
    if (config_.noise.t_ivc > 0.0) {
        cond.ivc.t_ivc += std::normal_distribution<double>(0.0, config_.noise.t_ivc)(rng_);
    }
    rec.cond = cond;

    if (cycle_ >= config_.fuel_delay_cycles) {
        const ModelParams& p = config_.true_params;
        try {
            double soc = 0.0;
            if (config_.model == CombustionModel::knock_integral) {
                soc = soc_full_integral(cond, p, config_.geom, config_.integration_step);
            } else {
                const PressureTemperature tdc =
                    polytropic_state_at_volume(tdc_volume(config_.geom), cond.ivc, p.k_c);
                soc = soc_simplified(cond, tdc.pressure, tdc.temperature, p);
            }
            const double bd =
                burn_duration(dilution_fraction(cond.egr, cond.x_r), cond.phi, config_.wiebe, p);
            double ca50 = wiebe_ca50(soc, bd, config_.wiebe);
            if (config_.noise.ca50 > 0.0) {
                ca50 += std::normal_distribution<double>(0.0, config_.noise.ca50)(rng_);
            }
            rec.soc = soc;
            rec.ca50 = ca50;
        } catch (const MisfireError&) {
            rec.fault = Fault::misfire;
        }
    }

    const double period = 120.0 / manifold.n;
    const IvcState target = manifold_target(manifold);
    ivc_ = ivc_lag_update(ivc_, target, period, config_.lag_tau);
    egr_ = lag_update(egr_, manifold.egr, period, config_.lag_tau);
    // Compensated sum so that whole-second boundaries land exactly.
    const double y = period - time_carry_;
    const double t = time_ + y;
    time_carry_ = (t - time_) - y;
    time_ = t;
    ++cycle_;
    return rec;
}

}  // namespace cphase
