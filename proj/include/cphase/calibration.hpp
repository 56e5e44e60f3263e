#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cphase/engine.hpp"
#include "cphase/phasing.hpp"

namespace cphase {

struct CalibrationSample {
    OperatingCondition cond;
    std::optional<double> observed_soc;
    double observed_ca50 = 0.0;
};

using Dataset = std::vector<CalibrationSample>;

/// CA50 RMSE of the simplified predictor over the dataset.
/// Throws DomainError on an empty dataset.
double rmse(const Dataset& data, const ModelParams& params, const EngineGeometry& geom);

/// Per-sample CA50 prediction errors (predicted - observed), dataset order.
std::vector<double> ca50_errors(const Dataset& data, const ModelParams& params,
                                const EngineGeometry& geom);

struct CalibrationOptions {
    double learning_rate = 1e-3;      // initial step in scaled parameter space
    std::size_t max_iters = 10000;    // epochs
    double tolerance = 1e-9;          // relative objective change for steady state
    std::size_t window = 50;          // epochs the change is measured over
    double soc_weight = 0.5;          // weight of the SOC term when SOC is observed
    std::size_t max_backtracks = 40;  // halvings per epoch
    double step_growth = 1.5;         // step multiplier after an accepted epoch
    std::size_t stall_limit = 3;      // consecutive epochs with no descent before stopping
    double fd_step = 1e-6;            // relative central-difference step on scaled params
};

enum class CalibrationStatus { converged, max_iterations, stalled };

struct CalibrationReport {
    ModelParams final_params;
    /// Objective after each accepted epoch; element 0 is the initial value.
    /// Equals the CA50 RMSE when no sample carries an observed SOC.
    std::vector<double> rmse_trace;
    std::vector<double> per_sample_errors;  // CA50, predicted - observed
    double ca50_rmse = 0.0;
    double std_dev = 0.0;
    double max_abs_error = 0.0;
    std::size_t epochs = 0;
    CalibrationStatus status = CalibrationStatus::converged;
};

/// Batch gradient descent on affinely scaled parameters with backtracking.
/// Throws DomainError for an empty dataset or invalid init, DivergenceError
/// when the initial objective is not finite.
CalibrationReport calibrate(const Dataset& data, const ModelParams& init,
                            const EngineGeometry& geom, const CalibrationOptions& opts = {});

struct ErrorStats {
    double mean = 0.0;
    double std_dev = 0.0;  // population standard deviation
    double max_abs = 0.0;
    double rmse = 0.0;
};

ErrorStats error_stats(const std::vector<double>& errors);

std::string to_string(CalibrationStatus status);

// Dataset CSV: header N,EGR,phi,P_IVC,T_IVC,X_r,SOI,SOC_obs,CA50_obs;
// SOC_obs may be left empty.
inline constexpr const char* kDatasetHeader = "N,EGR,phi,P_IVC,T_IVC,X_r,SOI,SOC_obs,CA50_obs";

Dataset read_dataset(std::istream& in, const EngineGeometry& geom,
                     const std::string& source = "<dataset>");
Dataset load_dataset(const std::filesystem::path& path, const EngineGeometry& geom);
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

void export_params(const ModelParams& params, const std::filesystem::path& path);

/// Trace as `iteration,rmse` rows followed by a `#`-prefixed summary block.
void write_report(std::ostream& out, const CalibrationReport& report);

}  // namespace cphase
