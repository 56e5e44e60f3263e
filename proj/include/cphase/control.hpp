#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cphase/engine.hpp"
#include "cphase/phasing.hpp"

namespace cphase {

/// Average residual fraction used by the feedforward inverse.
inline constexpr double kMeanResidualFraction = 0.0384;

struct SoiBounds {
    double min = -20.0;
    double max = 20.0;
};

/// Observer states and the measured-parameter factors of the state-space
/// CA50 model y = u + alpha*x1 + beta*x2.
struct ControllerState {
    double x1_hat = 0.0;  // exponential-delay state
    double x2_hat = 0.0;  // dilution-offset state, CAD
    double alpha = 0.0;
    double beta = 0.0;
    double eta = 0.0;     // 1/(alpha^2 + beta^2)
};

struct ControlCommand {
    double soi = 0.0;  // deg aTDC, before actuator quantization
    double ca50_ref = 0.0;
    bool saturated = false;
};

struct AlphaBeta {
    double alpha = 0.0;
    double beta = 0.0;
};

AlphaBeta alpha_beta(double n, double phi, const ModelParams& params);

/// Installs alpha, beta and the matching learning rate.
ControllerState with_alpha_beta(ControllerState state, AlphaBeta ab);

/// Deadbeat inversion at the observed states, clamped to `bounds`.
ControlCommand adaptive_soi(const ControllerState& state, double ca50_ref, SoiBounds bounds = {});

/// Gradient-descent observer step with learning rate 1/(alpha^2 + beta^2).
ControllerState observer_update(const ControllerState& state, double y_measured, double y_desired);

/// Seeds the observer from the model at TDC conditions with X_d = EGR + x_r.
ControllerState observer_init(const OperatingCondition& cond, const ModelParams& params,
                              const EngineGeometry& geom);

double lyapunov_value(double y_desired, double y_measured);

/// Model-inversion SOI with V(SOI) replaced by the TDC volume and the
/// residual fraction by `x_r_bar`. cond.soi is ignored.
ControlCommand ff_soi(double ca50_ref, const OperatingCondition& cond, const ModelParams& params,
                      const EngineGeometry& geom, double x_r_bar = kMeanResidualFraction,
                      SoiBounds bounds = {});

/// What the engine controller can see when it schedules a cycle.
struct ControllerInputs {
    OperatingCondition current;   // speed and phi measured for the upcoming cycle
    OperatingCondition previous;  // conditions realized during the last completed cycle
};

enum class ControllerKind { adaptive, feedforward };

std::string to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& name);

/// One controller per engine loop; not shared between threads.
class Controller {
public:
    virtual ~Controller() = default;

    /// Issues the SOI for the next cycle. The reference passed here is the
    /// one latched at the start of that cycle.
    virtual ControlCommand command(double ca50_ref, const ControllerInputs& inputs) = 0;

    /// Feeds back the completed cycle's CA50 (absent for a no-fuel or
    /// misfired cycle).
    virtual void observe(std::optional<double> ca50) = 0;

    virtual ControllerState snapshot() const = 0;
    virtual ControllerKind kind() const = 0;
};

class AdaptiveController final : public Controller {
public:
    AdaptiveController(const ModelParams& params, const EngineGeometry& geom,
                       const OperatingCondition& nominal, SoiBounds bounds = {});

    ControlCommand command(double ca50_ref, const ControllerInputs& inputs) override;
    void observe(std::optional<double> ca50) override;
    ControllerState snapshot() const override { return state_; }
    ControllerKind kind() const override { return ControllerKind::adaptive; }

private:
    ModelParams params_;
    SoiBounds bounds_;
    ControllerState state_;
    std::optional<double> latched_ref_;
};

class FeedforwardController final : public Controller {
public:
    FeedforwardController(const ModelParams& params, const EngineGeometry& geom,
                          double x_r_bar = kMeanResidualFraction, SoiBounds bounds = {});

    ControlCommand command(double ca50_ref, const ControllerInputs& inputs) override;
    void observe(std::optional<double>) override {}
    ControllerState snapshot() const override { return last_; }
    ControllerKind kind() const override { return ControllerKind::feedforward; }

private:
    ModelParams params_;
    EngineGeometry geom_;
    double x_r_bar_;
    SoiBounds bounds_;
    ControllerState last_;
};

/// Records V(k) = (y_d - y)^2 per fueled cycle and the residual of the
/// one-step identity V(k+1) - V(k) = -(y_d - y(k))^2.
class LyapunovMonitor {
public:
    double record(double y_desired, double y_measured);
    /// Forget the previous sample, e.g. across a no-fuel or misfired cycle.
    void reset_chain() { previous_.reset(); }

    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& residuals() const { return residuals_; }
    double max_abs_residual() const;
    std::size_t increases() const { return increases_; }

private:
    std::vector<double> values_;
    std::vector<double> residuals_;
    std::optional<double> previous_;
    std::size_t increases_ = 0;
};

}  // namespace cphase
