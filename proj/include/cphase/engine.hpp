#pragma once

#include <filesystem>
#include <utility>

#include <json.hpp>

namespace cphase {

// Units throughout: pressure bar, temperature K, speed RPM, crank angle
// degrees aTDC, lengths m, volumes m^3.

struct EngineGeometry {
    double bore = 0.126;
    double stroke = 0.166;
    double rod_length = 0.251;
    double compression_ratio = 17.0;
    int n_cylinders = 6;
    double ivc_angle = -148.5;
    double evo_angle = 137.0;

    /// Navistar MaxxForce 13 (12.4 L, six cylinders).
    static EngineGeometry maxxforce13() { return {}; }

    /// Throws DomainError when a slider-crank invariant does not hold.
    void validate() const;

    double displaced_volume() const;
    double clearance_volume() const;
};

struct MixtureState {
    double m_fuel = 0.0;
    double m_air = 0.0;
    double m_egr = 0.0;
    double m_r = 0.0;
    double afr_stoich = 14.47;
};

struct IvcState {
    double p_ivc = 0.0;  // bar
    double t_ivc = 0.0;  // K
    double v_ivc = 0.0;  // m^3
};

struct PressureTemperature {
    double pressure = 0.0;
    double temperature = 0.0;
};

/// Slider-crank cylinder volume, 720 degree periodic, minimum at TDC.
double cylinder_volume(double theta, const EngineGeometry& geom);

/// Volume at TDC; used by the feedforward controller in place of V(SOI).
inline double tdc_volume(const EngineGeometry& geom) { return cylinder_volume(0.0, geom); }

/// IVC state for manifold-derived pressure/temperature with the geometric
/// IVC volume filled in.
IvcState make_ivc_state(double p_ivc, double t_ivc, const EngineGeometry& geom);

/// Polytropic compression/expansion from IVC to `theta`.
/// Throws DomainError if theta lies outside [ivc_angle, evo_angle].
PressureTemperature polytropic_state(double theta, const IvcState& ivc, double k_c,
                                     const EngineGeometry& geom);

/// Same relation evaluated at an explicit volume (no span check).
PressureTemperature polytropic_state_at_volume(double volume, const IvcState& ivc, double k_c);

double equivalence_ratio(const MixtureState& mix);

/// EGR + residual; throws DomainError for inputs outside [0, 1) or a sum >= 1.
double dilution_fraction(double egr, double x_r);

double residual_fraction(const MixtureState& mix);

void to_json(nlohmann::json& j, const EngineGeometry& g);
void from_json(const nlohmann::json& j, EngineGeometry& g);

/// Reads a JSON geometry file. Missing keys keep the MaxxForce 13 defaults.
EngineGeometry load_geometry(const std::filesystem::path& path);

}  // namespace cphase
