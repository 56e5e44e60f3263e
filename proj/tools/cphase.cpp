// Command-line front end for the combustion-phasing toolkit.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "cphase/calibration.hpp"
#include "cphase/errors.hpp"
#include "cphase/numfmt.hpp"
#include "cphase/scenario.hpp"
#include "cphase/studies.hpp"

using namespace cphase;

namespace {

struct Common {
    std::uint64_t seed = 1;
    std::optional<double> step;
    std::string out;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--step", c.step, "Quadrature step in CAD");
    app->add_option("--out", c.out, "Output file (default: stdout)");
}

// Writes to --out when given, otherwise stdout.
template <class F>
void emit(const std::string& path, F&& f) {
    if (path.empty()) {
        f(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    f(out);
    if (!out) throw Error("write failed: " + path);
}

GridSpec grid_for(const std::string& box, std::size_t points) {
    GridSpec g;
    if (box == "simulation") {
        g = GridSpec::simulation();
    } else if (box == "experimental") {
        g = GridSpec::experimental();
    } else if (box == "manifold") {
        g = GridSpec::manifold();
    } else {
        throw DomainError("unknown box '" + box + "' (expected simulation, experimental or manifold)");
    }
    g.points = points;
    return g;
}

ModelParams params_or_default(const std::string& path) {
    return path.empty() ? ModelParams::defaults() : load_params(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diesel combustion-phasing model, calibration and control toolkit"};
    app.require_subcommand(1);
    std::string geometry_path;
    app.add_option("--geometry", geometry_path, "Engine geometry JSON");

    // calibrate
    Common cal_c;
    std::string cal_data, cal_init, cal_report;
    CalibrationOptions cal_opts;
    auto* cal = app.add_subcommand("calibrate", "Fit model parameters to a dataset CSV");
    add_common(cal, cal_c);
    cal->add_option("--data", cal_data, "Dataset CSV")->required();
    cal->add_option("--init", cal_init, "Initial parameter file (default: built-in constants)");
    cal->add_option("--report", cal_report, "Trace and summary output");
    cal->add_option("--max-iters", cal_opts.max_iters, "Epoch limit");
    cal->add_option("--lr", cal_opts.learning_rate, "Initial step in scaled space");
    cal->add_option("--tolerance", cal_opts.tolerance, "Relative change for steady state");
    cal->add_option("--window", cal_opts.window, "Epochs the change is measured over");
    cal->add_option("--soc-weight", cal_opts.soc_weight, "Weight of the SOC term");

    // predict
    Common pre_c;
    OperatingCondition pre_cond;
    double pre_p = 3.6, pre_t = 393.0;
    std::string pre_params;
    auto* pre = app.add_subcommand("predict", "SOC and CA50 for one operating condition");
    add_common(pre, pre_c);
    pre->add_option("--n", pre_cond.n, "Engine speed (RPM)");
    pre->add_option("--egr", pre_cond.egr, "EGR fraction");
    pre->add_option("--phi", pre_cond.phi, "Equivalence ratio");
    pre->add_option("--p-ivc", pre_p, "Pressure at IVC (bar)");
    pre->add_option("--t-ivc", pre_t, "Temperature at IVC (K)");
    pre->add_option("--x-r", pre_cond.x_r, "Residual fraction");
    pre->add_option("--soi", pre_cond.soi, "Start of injection (deg aTDC)");
    pre->add_option("--params", pre_params, "Parameter file");

    // simulate
    Common sim_c;
    std::string sim_config, sim_preset, sim_controller = "adaptive", sim_metrics;
    auto* sim = app.add_subcommand("simulate", "Run a closed-loop scenario");
    add_common(sim, sim_c);
    sim->add_option("--config", sim_config, "Scenario JSON");
    sim->add_option("--preset", sim_preset, "case1..case5");
    sim->add_option("--controller", sim_controller, "adaptive or feedforward (presets only)");
    sim->add_option("--metrics", sim_metrics, "Metrics JSON output");

    // sensitivity
    Common sen_c;
    std::string sen_data, sen_params, sen_box = "experimental";
    std::size_t sen_points = 516;
    double sen_noise = 0.0;
    auto* sen = app.add_subcommand("sensitivity", "CA50 error response to input errors");
    add_common(sen, sen_c);
    sen->add_option("--data", sen_data, "Dataset CSV (default: generated)");
    sen->add_option("--params", sen_params, "Parameter file");
    sen->add_option("--box", sen_box, "Box of the generated dataset");
    sen->add_option("--points", sen_points, "Points of the generated dataset");
    sen->add_option("--noise", sen_noise, "CA50 noise of the generated dataset (CAD)");

    // compare-soc
    Common cmp_c;
    std::string cmp_params, cmp_box = "simulation", cmp_mode = "dynamic";
    std::size_t cmp_points = 516;
    auto* cmp = app.add_subcommand("compare-soc", "Full-integral versus simplified SOC");
    add_common(cmp, cmp_c);
    cmp->add_option("--params", cmp_params, "Parameter file");
    cmp->add_option("--box", cmp_box, "simulation or experimental");
    cmp->add_option("--points", cmp_points, "Lattice size");
    cmp->add_option("--mode", cmp_mode, "dynamic or frozen");

    // gen-data
    Common gen_c;
    std::string gen_params, gen_box = "simulation", gen_truth = "knock_integral";
    std::size_t gen_points = 516;
    double gen_noise = 0.0, gen_soc_noise = 0.0;
    auto* gen = app.add_subcommand("gen-data", "Synthetic calibration dataset");
    add_common(gen, gen_c);
    gen->add_option("--params", gen_params, "Generating parameter file");
    gen->add_option("--box", gen_box, "simulation or experimental");
    gen->add_option("--points", gen_points, "Lattice size");
    gen->add_option("--truth", gen_truth, "simplified or knock_integral");
    gen->add_option("--noise", gen_noise, "CA50 noise std dev (CAD)");
    gen->add_option("--soc-noise", gen_soc_noise, "SOC noise std dev (CAD)");

    CLI11_PARSE(app, argc, argv);

    try {
        const EngineGeometry geom = geometry_path.empty() ? EngineGeometry{} : load_geometry(geometry_path);

        if (*cal) {
            const Dataset data = load_dataset(cal_data, geom);
            const ModelParams init = params_or_default(cal_init);
            const CalibrationReport rep = calibrate(data, init, geom, cal_opts);
            emit(cal_c.out, [&](std::ostream& o) { write_params(o, rep.final_params); });
            if (!cal_report.empty()) emit(cal_report, [&](std::ostream& o) { write_report(o, rep); });
            std::cerr << "calibrate: " << to_string(rep.status) << " after " << rep.epochs
                      << " epochs, CA50 RMSE " << format_exact(rep.ca50_rmse) << " CAD\n";
        } else if (*pre) {
            const ModelParams params = params_or_default(pre_params);
            pre_cond.ivc = make_ivc_state(pre_p, pre_t, geom);
            const SocCa50 r = predict_from_ivc(pre_cond, params, geom);
            std::optional<double> full;
            if (pre_c.step) full = soc_full_integral(pre_cond, params, geom, *pre_c.step);
            emit(pre_c.out, [&](std::ostream& o) {
                o << "soc=" << format_exact(r.soc) << '\n' << "ca50=" << format_exact(r.ca50) << '\n';
                if (full) {
                    o << "soc_full=" << format_exact(*full) << '\n'
                      << "ca50_full=" << format_exact(*full + (r.ca50 - r.soc)) << '\n';
                }
            });
        } else if (*sim) {
            if (sim_config.empty() == sim_preset.empty()) {
                throw DomainError("simulate needs exactly one of --config or --preset");
            }
            ScenarioConfig cfg = sim_config.empty()
                                     ? case_preset(sim_preset, controller_kind_from_string(sim_controller))
                                     : load_scenario(sim_config);
            if (sim->count("--seed")) cfg.plant.seed = sim_c.seed;
            if (sim_c.step) cfg.plant.integration_step = *sim_c.step;
            const ScenarioResult res = run_scenario(cfg);
            std::string csv = sim_c.out;
            if (csv.empty() && cfg.csv_out) csv = cfg.csv_out->string();
            emit(csv, [&](std::ostream& o) { write_records(o, res.records); });
            std::string metrics = sim_metrics;
            if (metrics.empty() && cfg.metrics_out) metrics = cfg.metrics_out->string();
            if (!metrics.empty()) emit(metrics, [&](std::ostream& o) { write_metrics(o, res.metrics); });
            else write_metrics(std::cerr, res.metrics);
        } else if (*sen) {
            const ModelParams params = params_or_default(sen_params);
            Dataset data;
            if (!sen_data.empty()) {
                data = load_dataset(sen_data, geom);
            } else {
                GenerateOptions g;
                g.ca50_noise = sen_noise;
                g.seed = sen_c.seed;
                if (sen_c.step) g.step = *sen_c.step;
                data = generate_dataset(grid_for(sen_box, sen_points), params, geom, g).data;
            }
            const auto rows = sensitivity(data, params, geom);
            emit(sen_c.out, [&](std::ostream& o) { write_sensitivity(o, rows); });
        } else if (*cmp) {
            const ModelParams params = params_or_default(cmp_params);
            IntegrandMode mode;
            if (cmp_mode == "dynamic") mode = IntegrandMode::dynamic;
            else if (cmp_mode == "frozen") mode = IntegrandMode::frozen_at_soi;
            else throw DomainError("unknown mode '" + cmp_mode + "' (expected dynamic or frozen)");
            const auto conds = lattice(grid_for(cmp_box, cmp_points), geom);
            const SocComparison res = compare_soc(conds, params, geom, cmp_c.step.value_or(0.01), mode);
            emit(cmp_c.out, [&](std::ostream& o) { write_soc_comparison(o, res); });
        } else if (*gen) {
            const ModelParams params = params_or_default(gen_params);
            GenerateOptions g;
            g.truth = truth_model_from_string(gen_truth);
            g.ca50_noise = gen_noise;
            g.soc_noise = gen_soc_noise;
            g.seed = gen_c.seed;
            if (gen_c.step) g.step = *gen_c.step;
            const GeneratedData d = generate_dataset(grid_for(gen_box, gen_points), params, geom, g);
            emit(gen_c.out, [&](std::ostream& o) { write_dataset(o, d.data); });
            if (d.misfires > 0) std::cerr << "gen-data: " << d.misfires << " misfiring points dropped\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
