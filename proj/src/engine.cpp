#include "cphase/engine.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "cphase/errors.hpp"

namespace cphase {

namespace {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

void require_fraction(double value, const char* name) {
    if (!(value >= 0.0 && value < 1.0)) {
        throw DomainError(std::string(name) + " must lie in [0, 1), got " + std::to_string(value));
    }
}

}  // namespace

void EngineGeometry::validate() const {
    if (!(bore > 0.0) || !(stroke > 0.0) || !(rod_length > 0.0)) {
        throw DomainError("geometry lengths must be positive");
    }
    if (!(compression_ratio > 1.0)) throw DomainError("compression_ratio must exceed 1");
    if (!(rod_length > stroke / 2.0)) {
        throw DomainError("rod_length must exceed the crank radius (stroke/2)");
    }
    if (n_cylinders < 1) throw DomainError("n_cylinders must be at least 1");
    if (!(ivc_angle < evo_angle)) throw DomainError("ivc_angle must precede evo_angle");
}

double EngineGeometry::displaced_volume() const {
    return std::numbers::pi / 4.0 * bore * bore * stroke;
}

double EngineGeometry::clearance_volume() const {
    return displaced_volume() / (compression_ratio - 1.0);
}

double cylinder_volume(double theta, const EngineGeometry& geom) {
    const double a = deg_to_rad(theta);
    const double ratio = 2.0 * geom.rod_length / geom.stroke;
    const double s = std::sin(a);
    // Piston displacement from TDC in units of the crank radius.
    const double travel = ratio + 1.0 - std::cos(a) - std::sqrt(ratio * ratio - s * s);
    const double vc = geom.clearance_volume();
    return vc * (1.0 + 0.5 * (geom.compression_ratio - 1.0) * travel);
}

IvcState make_ivc_state(double p_ivc, double t_ivc, const EngineGeometry& geom) {
    return {p_ivc, t_ivc, cylinder_volume(geom.ivc_angle, geom)};
}

PressureTemperature polytropic_state_at_volume(double volume, const IvcState& ivc, double k_c) {
    if (!(ivc.p_ivc > 0.0) || !(ivc.t_ivc > 0.0) || !(ivc.v_ivc > 0.0)) {
        throw DomainError("IVC pressure, temperature and volume must be positive");
    }
    if (!(volume > 0.0)) throw DomainError("volume must be positive");
    const double ratio = ivc.v_ivc / volume;
    return {ivc.p_ivc * std::pow(ratio, k_c), ivc.t_ivc * std::pow(ratio, k_c - 1.0)};
}

PressureTemperature polytropic_state(double theta, const IvcState& ivc, double k_c,
                                     const EngineGeometry& geom) {
    if (!(theta >= geom.ivc_angle && theta <= geom.evo_angle)) {
        throw DomainError("crank angle " + std::to_string(theta) +
                          " outside the closed-valve span");
    }
    if (theta == geom.ivc_angle) {
        if (!(ivc.p_ivc > 0.0) || !(ivc.t_ivc > 0.0)) {
            throw DomainError("IVC pressure and temperature must be positive");
        }
        return {ivc.p_ivc, ivc.t_ivc};
    }
    return polytropic_state_at_volume(cylinder_volume(theta, geom), ivc, k_c);
}

double equivalence_ratio(const MixtureState& mix) {
    if (!(mix.m_air > 0.0)) throw DomainError("air mass must be positive");
    if (!(mix.afr_stoich > 0.0)) throw DomainError("stoichiometric AFR must be positive");
    return (mix.m_fuel / mix.m_air) * mix.afr_stoich;
}

double dilution_fraction(double egr, double x_r) {
    require_fraction(egr, "egr");
    require_fraction(x_r, "x_r");
    const double x_d = egr + x_r;
    if (x_d >= 1.0) throw DomainError("dilution fraction must be below 1");
    return x_d;
}

double residual_fraction(const MixtureState& mix) {
    if (mix.m_fuel < 0.0 || mix.m_air < 0.0 || mix.m_egr < 0.0 || mix.m_r < 0.0) {
        throw DomainError("masses must be non-negative");
    }
    const double fresh = mix.m_air + mix.m_fuel + mix.m_egr;
    if (!(fresh > 0.0)) throw DomainError("trapped charge mass must be positive");
    return mix.m_r / fresh;
}

void to_json(nlohmann::json& j, const EngineGeometry& g) {
    j = nlohmann::json{{"bore", g.bore},
                       {"stroke", g.stroke},
                       {"rod_length", g.rod_length},
                       {"compression_ratio", g.compression_ratio},
                       {"n_cylinders", g.n_cylinders},
                       {"ivc_angle", g.ivc_angle},
                       {"evo_angle", g.evo_angle}};
}

void from_json(const nlohmann::json& j, EngineGeometry& g) {
    g.bore = j.value("bore", g.bore);
    g.stroke = j.value("stroke", g.stroke);
    g.rod_length = j.value("rod_length", g.rod_length);
    g.compression_ratio = j.value("compression_ratio", g.compression_ratio);
    g.n_cylinders = j.value("n_cylinders", g.n_cylinders);
    g.ivc_angle = j.value("ivc_angle", g.ivc_angle);
    g.evo_angle = j.value("evo_angle", g.evo_angle);
}

EngineGeometry load_geometry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    EngineGeometry g;
    try {
        from_json(j, g);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    g.validate();
    return g;
}

}  // namespace cphase
