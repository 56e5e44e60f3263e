#include "cphase/control.hpp"

#include <algorithm>
#include <cmath>

#include "cphase/errors.hpp"

namespace cphase {

namespace {

ControlCommand clamp_command(double soi, double ca50_ref, SoiBounds bounds) {
    ControlCommand cmd{soi, ca50_ref, false};
    if (!(soi >= bounds.min)) {
        cmd.soi = bounds.min;
        cmd.saturated = true;
    } else if (soi > bounds.max) {
        cmd.soi = bounds.max;
        cmd.saturated = true;
    }
    return cmd;
}

}  // namespace

AlphaBeta alpha_beta(double n, double phi, const ModelParams& params) {
    if (!(n > 0.0) || !(phi > 0.0)) throw DomainError("alpha/beta need positive N and phi");
    return {n * std::pow(phi, -params.c3), std::pow(phi, params.c8)};
}

ControllerState with_alpha_beta(ControllerState state, AlphaBeta ab) {
    state.alpha = ab.alpha;
    state.beta = ab.beta;
    const double norm2 = ab.alpha * ab.alpha + ab.beta * ab.beta;
    state.eta = norm2 > 0.0 ? 1.0 / norm2 : 0.0;
    return state;
}

ControlCommand adaptive_soi(const ControllerState& state, double ca50_ref, SoiBounds bounds) {
    return clamp_command(ca50_ref - state.alpha * state.x1_hat - state.beta * state.x2_hat,
                         ca50_ref, bounds);
}

ControllerState observer_update(const ControllerState& state, double y_measured, double y_desired) {
    const double norm2 = state.alpha * state.alpha + state.beta * state.beta;
    if (!(norm2 > 0.0)) return state;
    const double innovation = y_measured - y_desired;
    ControllerState next = state;
    next.x1_hat += state.alpha / norm2 * innovation;
    next.x2_hat += state.beta / norm2 * innovation;
    return next;
}

ControllerState observer_init(const OperatingCondition& cond, const ModelParams& params,
                              const EngineGeometry& geom) {
    const PressureTemperature tdc = polytropic_state(0.0, cond.ivc, params.k_c, geom);
    ControllerState s;
    s.x1_hat = (params.c1 * cond.egr + params.c2) *
               std::exp(params.c4 * std::pow(tdc.pressure, params.c5) / tdc.temperature);
    s.x2_hat = params.c9 * std::pow(1.0 + cond.egr + cond.x_r, params.c7);
    return with_alpha_beta(s, alpha_beta(cond.n, cond.phi, params));
}

double lyapunov_value(double y_desired, double y_measured) {
    const double e = y_desired - y_measured;
    return e * e;
}

ControlCommand ff_soi(double ca50_ref, const OperatingCondition& cond, const ModelParams& params,
                      const EngineGeometry& geom, double x_r_bar, SoiBounds bounds) {
    const PressureTemperature at_tdc =
        polytropic_state_at_volume(tdc_volume(geom), cond.ivc, params.k_c);
    OperatingCondition c = cond;
    c.soi = 0.0;
    c.x_r = x_r_bar;
    // SOI enters the predictor additively, so prediction at SOI = 0 is the
    // total delay + offset to subtract from the reference.
    const double advance = ca50_predict(c, at_tdc.pressure, at_tdc.temperature, params);
    return clamp_command(ca50_ref - advance, ca50_ref, bounds);
}

std::string to_string(ControllerKind kind) {
    return kind == ControllerKind::adaptive ? "adaptive" : "feedforward";
}

ControllerKind controller_kind_from_string(const std::string& name) {
    if (name == "adaptive") return ControllerKind::adaptive;
    if (name == "feedforward") return ControllerKind::feedforward;
    throw DomainError("unknown controller '" + name + "' (expected adaptive or feedforward)");
}

AdaptiveController::AdaptiveController(const ModelParams& params, const EngineGeometry& geom,
                                       const OperatingCondition& nominal, SoiBounds bounds)
    : params_(params), bounds_(bounds), state_(observer_init(nominal, params, geom)) {}

ControlCommand AdaptiveController::command(double ca50_ref, const ControllerInputs& inputs) {
    state_ = with_alpha_beta(state_, alpha_beta(inputs.current.n, inputs.current.phi, params_));
    latched_ref_ = ca50_ref;
    return adaptive_soi(state_, ca50_ref, bounds_);
}

void AdaptiveController::observe(std::optional<double> ca50) {
    if (ca50 && latched_ref_) state_ = observer_update(state_, *ca50, *latched_ref_);
}

FeedforwardController::FeedforwardController(const ModelParams& params, const EngineGeometry& geom,
                                             double x_r_bar, SoiBounds bounds)
    : params_(params), geom_(geom), x_r_bar_(x_r_bar), bounds_(bounds) {}

ControlCommand FeedforwardController::command(double ca50_ref, const ControllerInputs& inputs) {
    const OperatingCondition& c = inputs.previous;
    last_ = observer_init({c.n, c.egr, c.phi, c.ivc, x_r_bar_, 0.0}, params_, geom_);
    return ff_soi(ca50_ref, c, params_, geom_, x_r_bar_, bounds_);
}

double LyapunovMonitor::record(double y_desired, double y_measured) {
    const double v = lyapunov_value(y_desired, y_measured);
    if (previous_) {
        residuals_.push_back((v - *previous_) + *previous_);
        if (v > *previous_) ++increases_;
    }
    values_.push_back(v);
    previous_ = v;
    return v;
}

double LyapunovMonitor::max_abs_residual() const {
    double m = 0.0;
    for (double r : residuals_) m = std::max(m, std::abs(r));
    return m;
}

}  // namespace cphase
