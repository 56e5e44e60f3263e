#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cphase/calibration.hpp"

namespace cphase {

struct Range {
    double min = 0.0;
    double max = 0.0;

    double at(double u) const { return min + (max - min) * u; }
};

/// Box of operating conditions sampled by a Halton sequence.
struct GridSpec {
    Range n{1200.0, 1500.0};
    Range egr{0.0, 0.5};
    Range phi{0.5, 0.9};
    Range p_ivc{2.85, 4.38};
    Range t_ivc{372.6, 413.9};
    Range soi{-5.0, 5.0};
    Range x_r{0.02, 0.06};
    std::size_t points = 516;

    /// Simulation box used for calibration data.
    static GridSpec simulation() { return {}; }
    /// Measured-engine box: manifold conditions taken as IVC conditions.
    static GridSpec experimental();
    /// Operating range of the transient scenarios, manifold taken as IVC.
    static GridSpec manifold();

    void validate() const;
};

/// Radical inverse of `index` in `base`.
double halton(std::uint64_t index, unsigned base);

/// Conditions at Halton points 1..points over the box (bases 2..17).
std::vector<OperatingCondition> lattice(const GridSpec& grid, const EngineGeometry& geom);

enum class TruthModel { simplified, knock_integral };

std::string to_string(TruthModel model);
TruthModel truth_model_from_string(const std::string& name);

struct GenerateOptions {
    TruthModel truth = TruthModel::knock_integral;
    double step = 0.1;         // CAD, knock-integral quadrature step
    double ca50_noise = 0.0;   // CAD, Gaussian std dev
    double soc_noise = 0.0;    // CAD
    std::uint64_t seed = 1;
};

struct GeneratedData {
    Dataset data;
    std::size_t misfires = 0;  // lattice points dropped
};

/// Synthetic observations over the lattice. CA50 is SOC plus the Wiebe
/// half-burn angle, which equals the model offset for consistent (a, b, c6).
GeneratedData generate_dataset(const GridSpec& grid, const ModelParams& truth,
                               const EngineGeometry& geom, const GenerateOptions& opts = {});

struct SocComparisonRow {
    OperatingCondition cond;
    double soc_full = 0.0;
    double soc_simplified = 0.0;
    double ca50_full = 0.0;
    double ca50_simplified = 0.0;
};

struct SocComparison {
    std::vector<SocComparisonRow> rows;
    ErrorStats soc;   // simplified - full
    ErrorStats ca50;  // same difference carried to CA50
    std::size_t exceed_1cad = 0;
    std::size_t misfires = 0;
};

SocComparison compare_soc(const std::vector<OperatingCondition>& conditions, const ModelParams& params,
                          const EngineGeometry& geom, double step,
                          IntegrandMode mode = IntegrandMode::dynamic);

void write_soc_comparison(std::ostream& out, const SocComparison& cmp);

enum class InputChannel { none, p_ivc, t_ivc, egr, phi, x_r };

std::string to_string(InputChannel channel);

struct SensitivityRow {
    InputChannel channel = InputChannel::none;
    double delta = 0.0;
    ErrorStats stats;  // corrupted prediction - observation
};

/// Injected measurement errors: none, P_IVC +-0.05 bar, T_IVC +-5 K,
/// EGR +-0.05, phi +-0.05, X_r +-0.03.
std::vector<std::pair<InputChannel, double>> default_perturbations();

/// Fractions pushed below zero by a perturbation are clamped at zero.
OperatingCondition perturb(const OperatingCondition& cond, InputChannel channel, double delta,
                           const EngineGeometry& geom);

std::vector<SensitivityRow> sensitivity(const Dataset& data, const ModelParams& params,
                                        const EngineGeometry& geom,
                                        const std::vector<std::pair<InputChannel, double>>& rows =
                                            default_perturbations());

void write_sensitivity(std::ostream& out, const std::vector<SensitivityRow>& rows);

}  // namespace cphase
