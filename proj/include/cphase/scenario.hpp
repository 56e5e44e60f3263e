#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cphase/control.hpp"
#include "cphase/plant.hpp"

namespace cphase {

struct ControllerConfig {
    ControllerKind kind = ControllerKind::adaptive;
    ModelParams params;
    double x_r_bar = kMeanResidualFraction;
    SoiBounds bounds;
    /// Settling/steady-state band; defaults to 0.1 CAD (adaptive) or 0.5 CAD
    /// (feedforward).
    std::optional<double> settle_band;

    double band() const;
};

struct ScenarioConfig {
    std::string name = "custom";
    PlantConfig plant;
    ControllerConfig controller;
    TransientProfile profile;
    double duration = 10.0;       // s
    double step_time = 5.0;       // s, splits the run into two segments
    double steady_window = 2.0;   // s, trailing window of each segment
    std::optional<std::filesystem::path> csv_out;
    std::optional<std::filesystem::path> metrics_out;

    void validate() const;
};

/// Cases 1-5: reference CA50, speed, manifold temperature, phi and EGR
/// changes at 5 s. Operating channels ramp over 0.5 s, the reference steps
/// within 1 ms. The plant carries the default mismatch preset.
ScenarioConfig case_preset(int case_number, ControllerKind kind);
ScenarioConfig case_preset(const std::string& name, ControllerKind kind);

/// JSON scenario file; a "preset" key selects the base configuration that
/// the remaining keys override.
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig scenario_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});

struct SegmentMetrics {
    std::string name;
    double t_begin = 0.0;
    double t_end = 0.0;
    std::size_t cycles = 0;
    std::size_t fueled_cycles = 0;
    /// Ordinal (1-based) of the fueled cycle after which |error| stays in
    /// band for the rest of the segment; nullopt if it never settles.
    std::optional<std::size_t> settling_cycles;
    /// Same, counting every cycle of the segment including no-fuel ones.
    std::optional<std::size_t> settling_cycles_total;
    /// Settling counted from the first cycle starting at or after the end
    /// of the segment's operating-point ramps.
    std::optional<std::size_t> settling_after_transient;
    double transient_end = 0.0;
    double steady_min = 0.0;
    double steady_max = 0.0;
    double steady_mean = 0.0;
    /// Largest excursion past the steady-state error on the side opposite
    /// to the peak deviation.
    double overshoot = 0.0;
    /// Signed error of largest magnitude in the segment.
    double transient_peak_error = 0.0;
};

struct RunMetrics {
    double band = 0.0;
    SegmentMetrics pre;
    SegmentMetrics post;
};

struct ScenarioResult {
    std::vector<CycleRecord> records;
    RunMetrics metrics;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

/// Metrics from records alone (error = ca50 - ca50_ref on fueled cycles).
/// `transient_end` defaults to `step_time`.
RunMetrics compute_metrics(const std::vector<CycleRecord>& records, double step_time,
                           double duration, double steady_window, double band,
                           std::optional<double> transient_end = std::nullopt);

/// End of the last profile ramp that changes a channel inside
/// [step_time, duration); step_time when none does.
double transient_end(const TransientProfile& profile, double step_time, double duration);

inline constexpr const char* kRecordHeader =
    "cycle_index,time_s,soi_cmd,soi_actuated,soc,ca50,ca50_ref,x1_hat,x2_hat,lyapunov,n,egr,phi,"
    "p_ivc,t_ivc,fault";

void write_records(std::ostream& out, const std::vector<CycleRecord>& records);
std::vector<CycleRecord> read_records(std::istream& in, const std::string& source = "<records>");

void write_metrics(std::ostream& out, const RunMetrics& metrics);

}  // namespace cphase
