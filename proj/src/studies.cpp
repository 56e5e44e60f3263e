#include "cphase/studies.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "cphase/errors.hpp"
#include "cphase/numfmt.hpp"

namespace cphase {

GridSpec GridSpec::experimental() {
    GridSpec g;
    g.n = {1200.0, 1500.0};
    g.egr = {0.039, 0.378};
    g.phi = {0.2971, 0.5418};
    g.p_ivc = {1.87, 4.07};
    g.t_ivc = {309.5, 325.0};
    return g;
}

GridSpec GridSpec::manifold() {
    GridSpec g;
    g.p_ivc = {1.9, 2.1};
    g.t_ivc = {300.0, 330.0};
    return g;
}

void GridSpec::validate() const {
    if (points == 0) throw DomainError("grid needs at least one point");
    const std::pair<const char*, Range> ranges[] = {{"n", n},         {"egr", egr},     {"phi", phi},
                                                    {"p_ivc", p_ivc}, {"t_ivc", t_ivc}, {"soi", soi},
                                                    {"x_r", x_r}};
    for (const auto& [name, r] : ranges) {
        if (!(r.min <= r.max)) throw DomainError(std::string("grid range ") + name + " is inverted");
    }
    if (n.min <= 0.0 || phi.min <= 0.0 || p_ivc.min <= 0.0 || t_ivc.min <= 0.0) {
        throw DomainError("grid N, phi, P_IVC and T_IVC must be positive");
    }
    if (egr.min < 0.0 || x_r.min < 0.0 || egr.max + x_r.max >= 1.0) {
        throw DomainError("grid dilution fractions must lie in [0, 1)");
    }
}

double halton(std::uint64_t index, unsigned base) {
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

std::vector<OperatingCondition> lattice(const GridSpec& grid, const EngineGeometry& geom) {
    grid.validate();
    std::vector<OperatingCondition> out;
    out.reserve(grid.points);
    for (std::uint64_t i = 1; i <= grid.points; ++i) {
        OperatingCondition c;
        c.n = grid.n.at(halton(i, 2));
        c.egr = grid.egr.at(halton(i, 3));
        c.phi = grid.phi.at(halton(i, 5));
        c.ivc = make_ivc_state(grid.p_ivc.at(halton(i, 7)), grid.t_ivc.at(halton(i, 11)), geom);
        c.soi = grid.soi.at(halton(i, 13));
        c.x_r = grid.x_r.at(halton(i, 17));
        out.push_back(c);
    }
    return out;
}

std::string to_string(TruthModel model) {
    return model == TruthModel::simplified ? "simplified" : "knock_integral";
}

TruthModel truth_model_from_string(const std::string& name) {
    if (name == "simplified") return TruthModel::simplified;
    if (name == "knock_integral") return TruthModel::knock_integral;
    throw DomainError("unknown truth model '" + name + "' (expected simplified or knock_integral)");
}

GeneratedData generate_dataset(const GridSpec& grid, const ModelParams& truth,
                               const EngineGeometry& geom, const GenerateOptions& opts) {
    truth.validate();
    const WiebeParams wiebe = WiebeParams::from_composite(5.0, 2.0, truth.c9);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    GeneratedData out;
    for (const auto& cond : lattice(grid, geom)) {
        double soc = 0.0;
        double ca50 = 0.0;
        if (opts.truth == TruthModel::simplified) {
            const SocCa50 r = predict_from_ivc(cond, truth, geom);
            soc = r.soc;
            ca50 = r.ca50;
        } else {
            try {
                soc = soc_full_integral(cond, truth, geom, opts.step);
            } catch (const MisfireError&) {
                ++out.misfires;
                continue;
            }
            const double bd = burn_duration(cond.egr + cond.x_r, cond.phi, wiebe, truth);
            ca50 = wiebe_ca50(soc, bd, wiebe);
        }
        // Draws happen in a fixed order so the noise stream is independent of
        // which noise channels are enabled.
        const double n_soc = gauss(rng);
        const double n_ca50 = gauss(rng);
        CalibrationSample s;
        s.cond = cond;
        s.observed_soc = soc + opts.soc_noise * n_soc;
        s.observed_ca50 = ca50 + opts.ca50_noise * n_ca50;
        out.data.push_back(s);
    }
    return out;
}

SocComparison compare_soc(const std::vector<OperatingCondition>& conditions, const ModelParams& params,
                          const EngineGeometry& geom, double step, IntegrandMode mode) {
    params.validate();
    SocComparison cmp;
    std::vector<double> soc_err;
    std::vector<double> ca50_err;
    for (const auto& cond : conditions) {
        SocComparisonRow row;
        row.cond = cond;
        try {
            row.soc_full = soc_full_integral(cond, params, geom, step, mode);
        } catch (const MisfireError&) {
            ++cmp.misfires;
            continue;
        }
        const SocCa50 simple = predict_from_ivc(cond, params, geom);
        row.soc_simplified = simple.soc;
        row.ca50_simplified = simple.ca50;
        row.ca50_full = row.soc_full + (simple.ca50 - simple.soc);
        const double e = row.soc_simplified - row.soc_full;
        soc_err.push_back(e);
        ca50_err.push_back(row.ca50_simplified - row.ca50_full);
        if (std::abs(e) > 1.0) ++cmp.exceed_1cad;
        cmp.rows.push_back(row);
    }
    cmp.soc = error_stats(soc_err);
    cmp.ca50 = error_stats(ca50_err);
    return cmp;
}

void write_soc_comparison(std::ostream& out, const SocComparison& cmp) {
    out << "N,EGR,phi,P_IVC,T_IVC,X_r,SOI,SOC_full,SOC_simplified,CA50_full,CA50_simplified,error\n";
    for (const auto& r : cmp.rows) {
        const auto& c = r.cond;
        out << format_exact(c.n) << ',' << format_exact(c.egr) << ',' << format_exact(c.phi) << ','
            << format_exact(c.ivc.p_ivc) << ',' << format_exact(c.ivc.t_ivc) << ','
            << format_exact(c.x_r) << ',' << format_exact(c.soi) << ',' << format_exact(r.soc_full)
            << ',' << format_exact(r.soc_simplified) << ',' << format_exact(r.ca50_full) << ','
            << format_exact(r.ca50_simplified) << ',' << format_exact(r.soc_simplified - r.soc_full)
            << '\n';
    }
    out << "# points=" << cmp.rows.size() << '\n'
        << "# misfires=" << cmp.misfires << '\n'
        << "# std=" << format_exact(cmp.soc.std_dev) << '\n'
        << "# max_abs=" << format_exact(cmp.soc.max_abs) << '\n'
        << "# mean=" << format_exact(cmp.soc.mean) << '\n'
        << "# exceed_1cad=" << cmp.exceed_1cad << '\n';
}

std::string to_string(InputChannel channel) {
    switch (channel) {
        case InputChannel::none: return "none";
        case InputChannel::p_ivc: return "P_IVC";
        case InputChannel::t_ivc: return "T_IVC";
        case InputChannel::egr: return "EGR";
        case InputChannel::phi: return "phi";
        case InputChannel::x_r: return "X_r";
    }
    return "unknown";
}

std::vector<std::pair<InputChannel, double>> default_perturbations() {
    return {{InputChannel::none, 0.0},   {InputChannel::p_ivc, 0.05}, {InputChannel::p_ivc, -0.05},
            {InputChannel::t_ivc, 5.0},  {InputChannel::t_ivc, -5.0}, {InputChannel::egr, 0.05},
            {InputChannel::egr, -0.05},  {InputChannel::phi, 0.05},   {InputChannel::phi, -0.05},
            {InputChannel::x_r, 0.03},   {InputChannel::x_r, -0.03}};
}

OperatingCondition perturb(const OperatingCondition& cond, InputChannel channel, double delta,
                           const EngineGeometry& geom) {
    OperatingCondition c = cond;
    switch (channel) {
        case InputChannel::none: break;
        case InputChannel::p_ivc: c.ivc = make_ivc_state(c.ivc.p_ivc + delta, c.ivc.t_ivc, geom); break;
        case InputChannel::t_ivc: c.ivc = make_ivc_state(c.ivc.p_ivc, c.ivc.t_ivc + delta, geom); break;
        case InputChannel::egr: c.egr = std::max(0.0, c.egr + delta); break;
        case InputChannel::phi: c.phi = c.phi + delta; break;
        case InputChannel::x_r: c.x_r = std::max(0.0, c.x_r + delta); break;
    }
    return c;
}

std::vector<SensitivityRow> sensitivity(const Dataset& data, const ModelParams& params,
                                        const EngineGeometry& geom,
                                        const std::vector<std::pair<InputChannel, double>>& rows) {
    if (data.empty()) throw DomainError("sensitivity needs a nonempty dataset");
    params.validate();
    std::vector<SensitivityRow> out;
    for (const auto& [channel, delta] : rows) {
        std::vector<double> errors;
        errors.reserve(data.size());
        for (const auto& s : data) {
            const OperatingCondition c = perturb(s.cond, channel, delta, geom);
            errors.push_back(ca50_predict_from_ivc(c, params, geom) - s.observed_ca50);
        }
        out.push_back({channel, delta, error_stats(errors)});
    }
    return out;
}

void write_sensitivity(std::ostream& out, const std::vector<SensitivityRow>& rows) {
    out << "source,delta,std,max_abs,mean\n";
    for (const auto& r : rows) {
        out << to_string(r.channel) << ',' << format_exact(r.delta) << ',' << format_exact(r.stats.std_dev)
            << ',' << format_exact(r.stats.max_abs) << ',' << format_exact(r.stats.mean) << '\n';
    }
}

}  // namespace cphase
