#include "cphase/phasing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "cphase/errors.hpp"
#include "cphase/numfmt.hpp"

namespace cphase {

namespace {

double egr_denominator(double egr, const ModelParams& params) {
    const double denom = params.c1 * egr + params.c2;
    if (!(denom > 0.0)) throw DomainError("c1*EGR + c2 must be positive");
    return denom;
}

void require_positive(double value, const char* name) {
    if (!(value > 0.0)) {
        throw DomainError(std::string(name) + " must be positive, got " + std::to_string(value));
    }
}

double delay_exponent(double p, double t, const ModelParams& params) {
    return params.c4 * std::pow(p, params.c5) / t;
}

}  // namespace

ModelParams ModelParams::from_array(const std::array<double, kCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
}

bool ModelParams::valid() const noexcept {
    const auto v = to_array();
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    // c1*EGR + c2 is affine in EGR, so checking both ends of [0, 1] covers it.
    return c2 > 0.0 && c1 + c2 > 0.0 && c9 > 0.0 && k_c > 1.0 && k_c < 1.4;
}

void ModelParams::validate() const {
    if (!valid()) {
        throw DomainError("model parameters violate c2 > 0, c1*EGR + c2 > 0, c9 > 0, 1 < kc < 1.4");
    }
}

double WiebeParams::half_burn_factor() const {
    return std::pow(std::numbers::ln2 / a, 1.0 / b);
}

WiebeParams WiebeParams::from_composite(double a, double b, double c9) {
    WiebeParams w{a, b, 0.0};
    w.c6 = c9 / w.half_burn_factor();
    w.validate();
    return w;
}

void WiebeParams::validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !(c6 > 0.0)) {
        throw DomainError("Wiebe parameters a, b, c6 must be positive");
    }
}

double arrhenius_tau(double phi, double p, double t, double egr, const ModelParams& params) {
    require_positive(p, "pressure");
    require_positive(t, "temperature");
    return std::pow(phi, params.c3) * std::exp(-delay_exponent(p, t, params)) /
           egr_denominator(egr, params);
}

double soc_full_integral(const OperatingCondition& cond, const ModelParams& params,
                         const EngineGeometry& geom, double step, IntegrandMode mode) {
    require_positive(step, "integration step");
    require_positive(cond.n, "engine speed");
    require_positive(cond.phi, "equivalence ratio");
    if (cond.soi < geom.ivc_angle || cond.soi >= geom.evo_angle) {
        throw DomainError("SOI " + std::to_string(cond.soi) + " outside the closed-valve span");
    }

    const double scale = std::pow(cond.phi, params.c3) / (egr_denominator(cond.egr, params) * cond.n);
    const PressureTemperature at_soi = polytropic_state(cond.soi, cond.ivc, params.k_c, geom);
    auto integrand = [&](double theta) {
        const PressureTemperature pt = mode == IntegrandMode::dynamic
                                           ? polytropic_state(theta, cond.ivc, params.k_c, geom)
                                           : at_soi;
        return scale * std::exp(-delay_exponent(pt.pressure, pt.temperature, params));
    };

    double accumulated = 0.0;
    double theta = cond.soi;
    double f_prev = integrand(theta);
    // Index-based stepping keeps the node positions free of accumulated drift.
    for (long i = 1; theta < geom.evo_angle; ++i) {
        const double next = std::min(cond.soi + static_cast<double>(i) * step, geom.evo_angle);
        const double h = next - theta;
        const double f_next = integrand(next);
        const double increment = 0.5 * (f_prev + f_next) * h;
        if (accumulated + increment >= 1.0) {
            return theta + h * (1.0 - accumulated) / increment;
        }
        accumulated += increment;
        theta = next;
        f_prev = f_next;
    }
    throw MisfireError("knock integral reached " + std::to_string(accumulated) +
                       " by EVO; no combustion");
}

double ignition_delay(const OperatingCondition& cond, double p_soi, double t_soi,
                      const ModelParams& params) {
    require_positive(p_soi, "P_SOI");
    require_positive(t_soi, "T_SOI");
    require_positive(cond.phi, "equivalence ratio");
    return egr_denominator(cond.egr, params) * cond.n * std::pow(cond.phi, -params.c3) *
           std::exp(delay_exponent(p_soi, t_soi, params));
}

double soc_simplified(const OperatingCondition& cond, double p_soi, double t_soi,
                      const ModelParams& params) {
    return cond.soi + ignition_delay(cond, p_soi, t_soi, params);
}

double burn_duration(double x_d, double phi, const WiebeParams& wiebe, const ModelParams& params) {
    return wiebe.c6 * std::pow(1.0 + x_d, params.c7) * std::pow(phi, params.c8);
}

double wiebe_mfb(double theta, double soc, double bd, const WiebeParams& wiebe) {
    require_positive(bd, "burn duration");
    if (theta < soc) throw DomainError("crank angle precedes start of combustion");
    return -std::expm1(-wiebe.a * std::pow((theta - soc) / bd, wiebe.b));
}

double wiebe_ca50(double soc, double bd, const WiebeParams& wiebe) {
    return soc + wiebe.half_burn_factor() * bd;
}

double ca50_offset(double x_d, double phi, const ModelParams& params) {
    return params.c9 * std::pow(1.0 + x_d, params.c7) * std::pow(phi, params.c8);
}

double ca50_predict(const OperatingCondition& cond, double p_soi, double t_soi,
                    const ModelParams& params) {
    return soc_simplified(cond, p_soi, t_soi, params) +
           ca50_offset(cond.egr + cond.x_r, cond.phi, params);
}

SocCa50 predict_from_ivc(const OperatingCondition& cond, const ModelParams& params,
                         const EngineGeometry& geom) {
    const PressureTemperature pt = polytropic_state(cond.soi, cond.ivc, params.k_c, geom);
    const double soc = soc_simplified(cond, pt.pressure, pt.temperature, params);
    return {soc, soc + ca50_offset(cond.egr + cond.x_r, cond.phi, params)};
}

double ca50_predict_from_ivc(const OperatingCondition& cond, const ModelParams& params,
                             const EngineGeometry& geom) {
    return predict_from_ivc(cond, params, geom).ca50;
}

void write_params(std::ostream& out, const ModelParams& params) {
    const auto values = params.to_array();
    for (std::size_t i = 0; i < ModelParams::kCount; ++i) {
        out << ModelParams::kKeys[i] << '=' << format_exact(values[i]) << '\n';
    }
}

ModelParams read_params(std::istream& in, const std::string& source) {
    std::array<double, ModelParams::kCount> values{};
    std::array<bool, ModelParams::kCount> seen{};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, line_no, "expected key=value");
        std::string key = line.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        std::size_t index = ModelParams::kCount;
        for (std::size_t i = 0; i < ModelParams::kCount; ++i) {
            if (ModelParams::kKeys[i] == key) index = i;
        }
        if (index == ModelParams::kCount) throw ParseError(source, line_no, "unknown key '" + key + "'");
        if (seen[index]) throw ParseError(source, line_no, "duplicate key '" + key + "'");
        const auto value = parse_double(std::string_view(line).substr(eq + 1));
        if (!value) throw ParseError(source, line_no, "invalid number for '" + key + "'");
        values[index] = *value;
        seen[index] = true;
    }
    for (std::size_t i = 0; i < ModelParams::kCount; ++i) {
        if (!seen[i]) {
            throw ParseError(source, 0, "missing key '" + std::string(ModelParams::kKeys[i]) + "'");
        }
    }
    return ModelParams::from_array(values);
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path);
    if (!out) throw ParseError(path.string(), 0, "cannot open for writing");
    write_params(out, params);
    if (!out) throw ParseError(path.string(), 0, "write failed");
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return read_params(in, path.string());
}

}  // namespace cphase
