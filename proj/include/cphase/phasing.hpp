#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "cphase/engine.hpp"

namespace cphase {

/// Calibrated constants of the CA50 model. c6 is not part of the set: only
/// the composite c9 is identifiable from CA50 data.
struct ModelParams {
    double c1 = 2.000e-6;   // 1/(RPM*CAD) scale on EGR
    double c2 = 2.705e-6;   // 1/(RPM*CAD) offset
    double c3 = -0.128;     // phi exponent of the delay kernel
    double c4 = 10643.118;  // Arrhenius scale
    double c5 = -0.312;     // pressure exponent
    double c7 = 0.371;      // dilution exponent
    double c8 = 0.0165;     // phi exponent of the burn duration
    double c9 = 4.784;      // CAD, composite Wiebe/burn-duration scale
    double k_c = 1.176;     // polytropic exponent

    static constexpr std::size_t kCount = 9;
    static constexpr std::array<std::string_view, kCount> kKeys = {
        "c1", "c2", "c3", "c4", "c5", "c7", "c8", "c9", "kc"};

    static ModelParams defaults() { return {}; }

    std::array<double, kCount> to_array() const { return {c1, c2, c3, c4, c5, c7, c8, c9, k_c}; }
    static ModelParams from_array(const std::array<double, kCount>& v);

    /// Throws DomainError when c2 <= 0, c9 <= 0, k_c outside (1, 1.4) or
    /// c1*EGR + c2 vanishes for some EGR in [0, 1).
    void validate() const;
    bool valid() const noexcept;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct WiebeParams {
    double a = 5.0;
    double b = 2.0;
    double c6 = 0.0;  // CAD

    /// Factor (ln2/a)^(1/b) linking burn duration to CA50 - SOC.
    double half_burn_factor() const;
    /// Composite c9 implied by (a, b, c6).
    double composite() const { return half_burn_factor() * c6; }

    /// Solves c6 so that the composite equals `c9`.
    static WiebeParams from_composite(double a, double b, double c9);

    void validate() const;
};

struct OperatingCondition {
    double n = 1200.0;   // RPM
    double egr = 0.0;    // fraction
    double phi = 0.7;    // equivalence ratio
    IvcState ivc{};
    double x_r = 0.0;    // residual fraction
    double soi = 0.0;    // deg aTDC
};

/// Arrhenius delay kernel (dimensionless).
double arrhenius_tau(double phi, double p, double t, double egr, const ModelParams& params);

enum class IntegrandMode {
    dynamic,         // P(theta), T(theta) from polytropic compression
    frozen_at_soi,   // P, T held at their SOI values
};

/// Start of combustion from the knock integral, trapezoidal accumulation with
/// linear interpolation of the crossing. Throws MisfireError if the integral
/// stays below 1 until EVO, DomainError for a non-positive step or SOI before
/// IVC.
double soc_full_integral(const OperatingCondition& cond, const ModelParams& params,
                         const EngineGeometry& geom, double step,
                         IntegrandMode mode = IntegrandMode::dynamic);

/// Closed-form SOC with the kernel frozen at SOI conditions.
double soc_simplified(const OperatingCondition& cond, double p_soi, double t_soi,
                      const ModelParams& params);

/// Ignition delay soc_simplified - SOI.
double ignition_delay(const OperatingCondition& cond, double p_soi, double t_soi,
                      const ModelParams& params);

/// Burn duration c6*(1 + x_d)^c7*phi^c8 (CAD).
double burn_duration(double x_d, double phi, const WiebeParams& wiebe, const ModelParams& params);

/// Wiebe mass fraction burned. Throws DomainError for theta < soc or bd <= 0.
double wiebe_mfb(double theta, double soc, double bd, const WiebeParams& wiebe);

/// Crank angle at which wiebe_mfb reaches 0.5.
double wiebe_ca50(double soc, double bd, const WiebeParams& wiebe);

/// CA50 - SOC term, c9*(1 + x_d)^c7*phi^c8.
double ca50_offset(double x_d, double phi, const ModelParams& params);

/// Simplified CA50 predictor: soc_simplified + ca50_offset(egr + x_r, phi).
double ca50_predict(const OperatingCondition& cond, double p_soi, double t_soi,
                    const ModelParams& params);

/// ca50_predict with P_SOI, T_SOI obtained from the IVC state by polytropic
/// compression to cond.soi.
double ca50_predict_from_ivc(const OperatingCondition& cond, const ModelParams& params,
                             const EngineGeometry& geom);

struct SocCa50 {
    double soc = 0.0;
    double ca50 = 0.0;
};

/// soc_simplified and ca50_predict_from_ivc in one pass.
SocCa50 predict_from_ivc(const OperatingCondition& cond, const ModelParams& params,
                         const EngineGeometry& geom);

// Parameter file: one `key=value` per line, keys c1..c5, c7, c8, c9, kc,
// '#' starts a comment. Values are written in shortest round-trip form.
void write_params(std::ostream& out, const ModelParams& params);
ModelParams read_params(std::istream& in, const std::string& source = "<params>");
void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace cphase
