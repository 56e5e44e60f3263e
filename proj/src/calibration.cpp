#include "cphase/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "cphase/errors.hpp"
#include "cphase/numfmt.hpp"

namespace cphase {

namespace {

constexpr std::size_t kN = ModelParams::kCount;
using Vec = std::array<double, kN>;

struct PreparedSample {
    OperatingCondition cond;
    double v_soi = 0.0;
    std::optional<double> observed_soc;
    double observed_ca50 = 0.0;
};

std::vector<PreparedSample> prepare(const Dataset& data, const EngineGeometry& geom) {
    std::vector<PreparedSample> out;
    out.reserve(data.size());
    for (const auto& s : data) {
        out.push_back({s.cond, cylinder_volume(s.cond.soi, geom), s.observed_soc, s.observed_ca50});
    }
    return out;
}

SocCa50 predict(const PreparedSample& s, const ModelParams& params) {
    const PressureTemperature pt = polytropic_state_at_volume(s.v_soi, s.cond.ivc, params.k_c);
    const double soc = soc_simplified(s.cond, pt.pressure, pt.temperature, params);
    return {soc, soc + ca50_offset(s.cond.egr + s.cond.x_r, s.cond.phi, params)};
}

/// Weighted mean squared error; +inf for parameters outside their invariants.
class Objective {
public:
    Objective(const Dataset& data, const EngineGeometry& geom, double soc_weight)
        : samples_(prepare(data, geom)) {
        std::size_t soc_count = 0;
        for (const auto& s : samples_) soc_count += s.observed_soc.has_value() ? 1 : 0;
        if (soc_count > 0) {
            w_soc_ = soc_weight / static_cast<double>(soc_count);
            w_ca50_ = (1.0 - soc_weight) / static_cast<double>(samples_.size());
        } else {
            w_ca50_ = 1.0 / static_cast<double>(samples_.size());
        }
    }

    double operator()(const ModelParams& params) const {
        if (!params.valid()) return std::numeric_limits<double>::infinity();
        double ca50_sum = 0.0;
        double soc_sum = 0.0;
        try {
            for (const auto& s : samples_) {
                const SocCa50 p = predict(s, params);
                const double e = p.ca50 - s.observed_ca50;
                ca50_sum += e * e;
                if (s.observed_soc) {
                    const double es = p.soc - *s.observed_soc;
                    soc_sum += es * es;
                }
            }
        } catch (const DomainError&) {
            return std::numeric_limits<double>::infinity();
        }
        const double f = w_ca50_ * ca50_sum + w_soc_ * soc_sum;
        return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
    }

private:
    std::vector<PreparedSample> samples_;
    double w_ca50_ = 0.0;
    double w_soc_ = 0.0;
};

ModelParams unscale(const Vec& z, const Vec& scale) {
    Vec p{};
    for (std::size_t i = 0; i < kN; ++i) p[i] = z[i] * scale[i];
    return ModelParams::from_array(p);
}

}  // namespace

std::vector<double> ca50_errors(const Dataset& data, const ModelParams& params,
                                const EngineGeometry& geom) {
    std::vector<double> errors;
    errors.reserve(data.size());
    for (const auto& s : data) {
        errors.push_back(ca50_predict_from_ivc(s.cond, params, geom) - s.observed_ca50);
    }
    return errors;
}

double rmse(const Dataset& data, const ModelParams& params, const EngineGeometry& geom) {
    if (data.empty()) throw DomainError("rmse of an empty dataset");
    double sum = 0.0;
    for (double e : ca50_errors(data, params, geom)) sum += e * e;
    return std::sqrt(sum / static_cast<double>(data.size()));
}

ErrorStats error_stats(const std::vector<double>& errors) {
    ErrorStats st;
    if (errors.empty()) return st;
    const double n = static_cast<double>(errors.size());
    double sum = 0.0;
    double sq = 0.0;
    for (double e : errors) {
        sum += e;
        sq += e * e;
        st.max_abs = std::max(st.max_abs, std::abs(e));
    }
    st.mean = sum / n;
    st.rmse = std::sqrt(sq / n);
    double var = 0.0;
    for (double e : errors) var += (e - st.mean) * (e - st.mean);
    st.std_dev = std::sqrt(var / n);
    return st;
}

std::string to_string(CalibrationStatus status) {
    switch (status) {
        case CalibrationStatus::converged: return "converged";
        case CalibrationStatus::max_iterations: return "max_iterations";
        case CalibrationStatus::stalled: return "stalled";
    }
    return "unknown";
}

CalibrationReport calibrate(const Dataset& data, const ModelParams& init,
                            const EngineGeometry& geom, const CalibrationOptions& opts) {
    if (data.empty()) throw DomainError("calibration dataset is empty");
    init.validate();
    if (!(opts.learning_rate > 0.0) || !(opts.fd_step > 0.0) || opts.window == 0) {
        throw DomainError("calibration options must be positive");
    }

    const Objective objective(data, geom, opts.soc_weight);

    // Each parameter is expressed in units of its starting magnitude so that
    // c1 (~1e-6) and c4 (~1e4) move on comparable scales.
    Vec scale = init.to_array();
    Vec z{};
    for (std::size_t i = 0; i < kN; ++i) {
        if (scale[i] == 0.0) scale[i] = 1.0;
        scale[i] = std::abs(scale[i]);
        z[i] = init.to_array()[i] / scale[i];
    }

    double f = objective(unscale(z, scale));
    if (!std::isfinite(f)) throw DivergenceError("objective is not finite at the initial parameters");

    CalibrationReport report;
    report.rmse_trace.push_back(std::sqrt(f));
    report.status = CalibrationStatus::max_iterations;

    double lr = opts.learning_rate;
    std::size_t stalls = 0;
    for (std::size_t epoch = 0; epoch < opts.max_iters; ++epoch) {
        if (f == 0.0) {
            report.status = CalibrationStatus::converged;
            break;
        }
        Vec grad{};
        double norm2 = 0.0;
        for (std::size_t i = 0; i < kN; ++i) {
            const double h = opts.fd_step * std::max(1.0, std::abs(z[i]));
            Vec up = z;
            Vec down = z;
            up[i] += h;
            down[i] -= h;
            const double fu = objective(unscale(up, scale));
            const double fd = objective(unscale(down, scale));
            grad[i] = (std::isfinite(fu) && std::isfinite(fd)) ? (fu - fd) / (2.0 * h) : 0.0;
            norm2 += grad[i] * grad[i];
        }
        if (norm2 == 0.0) {
            report.status = CalibrationStatus::converged;
            break;
        }

        bool accepted = false;
        for (std::size_t bt = 0; bt <= opts.max_backtracks; ++bt) {
            Vec trial = z;
            for (std::size_t i = 0; i < kN; ++i) trial[i] -= lr * grad[i];
            const double ft = objective(unscale(trial, scale));
            if (ft < f) {
                z = trial;
                f = ft;
                accepted = true;
                lr *= opts.step_growth;
                break;
            }
            lr *= 0.5;
        }
        ++report.epochs;
        if (!accepted) {
            lr = opts.learning_rate;
            if (++stalls >= opts.stall_limit) {
                report.status = CalibrationStatus::stalled;
                break;
            }
            continue;
        }
        stalls = 0;
        report.rmse_trace.push_back(std::sqrt(f));

        const auto& tr = report.rmse_trace;
        if (tr.size() > opts.window) {
            const double before = tr[tr.size() - 1 - opts.window];
            if (before - tr.back() <= opts.tolerance * before) {
                report.status = CalibrationStatus::converged;
                break;
            }
        }
    }

    report.final_params = unscale(z, scale);
    report.per_sample_errors = ca50_errors(data, report.final_params, geom);
    const ErrorStats st = error_stats(report.per_sample_errors);
    report.ca50_rmse = st.rmse;
    report.std_dev = st.std_dev;
    report.max_abs_error = st.max_abs;
    return report;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
}

}  // namespace

Dataset read_dataset(std::istream& in, const EngineGeometry& geom, const std::string& source) {
    static constexpr std::array<const char*, 9> kColumns = {
        "N", "EGR", "phi", "P_IVC", "T_IVC", "X_r", "SOI", "SOC_obs", "CA50_obs"};
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (!have_header && std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cols = split_csv(line);
        if (cols.size() != kColumns.size()) {
            throw ParseError(source, line_no, std::string("missing header '") + kDatasetHeader + "'");
        }
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (trim(cols[i]) != kColumns[i]) {
                throw ParseError(source, line_no,
                                 std::string("header column ") + std::to_string(i + 1) +
                                     " must be '" + kColumns[i] + "'");
            }
        }
        have_header = true;
    }
    if (!have_header) throw ParseError(source, 0, std::string("missing header '") + kDatasetHeader + "'");

    Dataset data;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cols = split_csv(line);
        if (cols.size() != kColumns.size()) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(kColumns.size()) + " fields, got " +
                                 std::to_string(cols.size()));
        }
        std::array<double, 9> v{};
        std::optional<double> soc;
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i == 7 && trim(cols[i]).empty()) continue;
            const auto parsed = parse_double(cols[i]);
            if (!parsed || !std::isfinite(*parsed)) {
                throw ParseError(source, line_no, std::string("invalid value in column ") + kColumns[i]);
            }
            v[i] = *parsed;
            if (i == 7) soc = *parsed;
        }
        CalibrationSample s;
        s.cond.n = v[0];
        s.cond.egr = v[1];
        s.cond.phi = v[2];
        s.cond.ivc = make_ivc_state(v[3], v[4], geom);
        s.cond.x_r = v[5];
        s.cond.soi = v[6];
        s.observed_soc = soc;
        s.observed_ca50 = v[8];
        if (!(s.cond.n > 0.0) || !(s.cond.phi > 0.0) || !(v[3] > 0.0) || !(v[4] > 0.0)) {
            throw ParseError(source, line_no, "N, phi, P_IVC and T_IVC must be positive");
        }
        if (s.cond.egr < 0.0 || s.cond.egr >= 1.0 || s.cond.x_r < 0.0 || s.cond.x_r >= 1.0) {
            throw ParseError(source, line_no, "EGR and X_r must lie in [0, 1)");
        }
        if (s.observed_ca50 < -10.0 || s.observed_ca50 > 40.0) {
            throw ParseError(source, line_no, "CA50_obs outside [-10, 40] deg aTDC");
        }
        data.push_back(s);
    }
    return data;
}

Dataset load_dataset(const std::filesystem::path& path, const EngineGeometry& geom) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return read_dataset(in, geom, path.string());
}

void write_dataset(std::ostream& out, const Dataset& data) {
    out << kDatasetHeader << '\n';
    for (const auto& s : data) {
        out << format_exact(s.cond.n) << ',' << format_exact(s.cond.egr) << ','
            << format_exact(s.cond.phi) << ',' << format_exact(s.cond.ivc.p_ivc) << ','
            << format_exact(s.cond.ivc.t_ivc) << ',' << format_exact(s.cond.x_r) << ','
            << format_exact(s.cond.soi) << ','
            << (s.observed_soc ? format_exact(*s.observed_soc) : std::string()) << ','
            << format_exact(s.observed_ca50) << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw ParseError(path.string(), 0, "cannot open for writing");
    write_dataset(out, data);
}

void export_params(const ModelParams& params, const std::filesystem::path& path) {
    save_params(path, params);
}

void write_report(std::ostream& out, const CalibrationReport& report) {
    out << "iteration,rmse\n";
    for (std::size_t i = 0; i < report.rmse_trace.size(); ++i) {
        out << i << ',' << format_exact(report.rmse_trace[i]) << '\n';
    }
    out << "# status=" << to_string(report.status) << '\n';
    out << "# epochs=" << report.epochs << '\n';
    out << "# ca50_rmse=" << format_exact(report.ca50_rmse) << '\n';
    out << "# std_dev=" << format_exact(report.std_dev) << '\n';
    out << "# max_abs_error=" << format_exact(report.max_abs_error) << '\n';
    const auto values = report.final_params.to_array();
    for (std::size_t i = 0; i < ModelParams::kCount; ++i) {
        out << "# " << ModelParams::kKeys[i] << '=' << format_exact(values[i]) << '\n';
    }
}

}  // namespace cphase
