#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "cphase/control.hpp"
#include "cphase/engine.hpp"
#include "cphase/phasing.hpp"

namespace cphase {

enum class CombustionModel {
    /// Knock integral over the dynamic compression state, burn duration and
    /// Wiebe inversion.
    knock_integral,
    /// The controller's own algebra: delay evaluated at TDC volume. Removes
    /// all structural mismatch between plant and model.
    control_oriented,
};

std::string to_string(CombustionModel model);
CombustionModel combustion_model_from_string(const std::string& name);

/// Affine map from average manifold conditions to IVC conditions.
struct ManifoldToIvc {
    double p_gain = 1.0;
    double p_offset = 0.0;  // bar
    double t_gain = 1.0;
    double t_offset = 0.0;  // K
};

struct PlantNoise {
    double ca50 = 0.0;   // CAD, cyclic variability of the combustion outcome
    double p_ivc = 0.0;  // bar
    double t_ivc = 0.0;  // K
};

struct PlantConfig {
    EngineGeometry geom;
    ModelParams true_params;
    WiebeParams wiebe = WiebeParams::from_composite(5.0, 2.0, ModelParams{}.c9);
    std::optional<double> soi_quantum = 0.1;  // nullopt disables quantization
    int fuel_delay_cycles = 2;
    double lag_tau = 0.2;  // s
    PlantNoise noise;
    std::uint64_t seed = 1;
    double x_r = 0.04;
    double integration_step = 0.1;  // CAD
    CombustionModel model = CombustionModel::knock_integral;
    ManifoldToIvc manifold_map;

    /// Plant c4 -1 %, c9 -5 % relative to `base`, Wiebe c6 re-solved for the
    /// perturbed c9 with the configured (a, b).
    void apply_mismatch(const ModelParams& base, double c4_scale = 0.99, double c9_scale = 0.95);

    /// Plant constants identical to `base`.
    void match(const ModelParams& base);

    void validate() const;
};

/// Half-cosine transition from `initial` to `final` over [start, start + duration].
struct Ramp {
    double initial = 0.0;
    double final = 0.0;
    double start = 5.0;
    double duration = 0.5;

    static Ramp constant(double value) { return {value, value, 0.0, 0.0}; }
    double eval(double t) const;
    bool changes() const { return initial != final; }
};

struct ChannelValues {
    double n = 0.0;
    double egr = 0.0;
    double phi = 0.0;
    double p_man = 0.0;
    double t_man = 0.0;
    double ca50_ref = 0.0;
};

struct TransientProfile {
    Ramp n;
    Ramp egr;
    Ramp phi;
    Ramp p_man;
    Ramp t_man;
    Ramp ca50_ref;

    void validate() const;
};

ChannelValues profile_eval(const TransientProfile& profile, double t);

/// First-order relaxation toward `target`; the result takes the target volume.
IvcState ivc_lag_update(const IvcState& current, const IvcState& target, double dt, double tau);

/// Scalar form of the same relaxation.
double lag_update(double current, double target, double dt, double tau);

/// Nearest multiple of `quantum`, ties away from zero.
double quantize_soi(double soi, double quantum);

enum class Fault { none, misfire, saturation };

std::string to_string(Fault fault);
Fault fault_from_string(const std::string& name);

struct CycleRecord {
    long cycle_index = 0;
    double time_s = 0.0;
    double soi_cmd = 0.0;
    double soi_actuated = 0.0;
    std::optional<double> soc;
    std::optional<double> ca50;
    double ca50_ref = 0.0;
    OperatingCondition cond;  // as realized in the cylinder
    ControllerState controller;
    std::optional<double> lyapunov;
    Fault fault = Fault::none;
};

/// Cycle-discrete surrogate engine. One instance per simulation loop.
class Plant {
public:
    explicit Plant(PlantConfig config);

    /// Starts at t = 0 with the IVC lag states settled on `manifold`.
    void reset(const ChannelValues& manifold);

    /// Conditions the next cycle will see, before SOI is known.
    OperatingCondition upcoming_condition(const ChannelValues& manifold) const;

    /// Runs one cycle at the current time with manifold targets `manifold`.
    CycleRecord step_cycle(double soi_cmd, const ChannelValues& manifold);

    double time() const { return time_; }
    long cycle_index() const { return cycle_; }
    const PlantConfig& config() const { return config_; }

private:
    IvcState manifold_target(const ChannelValues& manifold) const;

    PlantConfig config_;
    std::mt19937_64 rng_;
    double time_ = 0.0;
    double time_carry_ = 0.0;
    long cycle_ = 0;
    IvcState ivc_{};
    double egr_ = 0.0;
};

}  // namespace cphase
