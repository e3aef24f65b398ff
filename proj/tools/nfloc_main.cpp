#include "nfloc/aple.hpp"
#include "nfloc/bounds.hpp"
#include "nfloc/channel.hpp"
#include "nfloc/eaple.hpp"
#include "nfloc/harness.hpp"
#include "nfloc/omp_baseline.hpp"
#include "nfloc/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace nfloc;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 0;
    std::string out;
    int workers = 0;
    double snr_db = std::numeric_limits<double>::quiet_NaN();
    int trial_index = 0;
    bool verbose = false;
};

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (args.trials > 0) cfg.trials = args.trials;
    if (!args.out.empty()) cfg.out_prefix = args.out;
    if (args.workers > 0) cfg.workers = args.workers;
    if (std::isfinite(args.snr_db)) cfg.snr_db = {args.snr_db};
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON experiment configuration");
    cmd->add_option("--seed", args.seed, "master seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--trials", args.trials, "Monte Carlo trial count");
    cmd->add_option("--out", args.out, "output path prefix");
    cmd->add_option("--workers", args.workers, "worker thread count");
    cmd->add_option("--snr", args.snr_db, "SNR in dB (overrides the config list)");
}

void print_estimate(const char* method, const Eigen::Vector3d& p,
                    const UeLocation& truth) {
    std::printf("%s: x=%.6f y=%.6f z=%.6f err=%.6f m\n", method, p.x(), p.y(), p.z(),
                (p - truth.cartesian).norm());
}

int run_single(const std::string& which, const CommonArgs& args) {
    const ExperimentConfig cfg = resolve_config(args);
    const ArrayGeometry geom = cfg.geometry.make();
    const PartitionPlan plan = partition(geom, cfg.m_x, cfg.m_y);
    const double snr = cfg.snr_db.front();
    const TrialInput input = draw_trial_input(cfg, 0, args.trial_index, snr);
    const Snapshot snap = synthesize_snapshot(geom, input.truth, input.alpha, input.sigma2,
                                              derive_seed({input.trial_seed, 0x6e6f697365ULL}));
    std::printf("truth: r=%.6f omega=%.6f phi=%.6f snr_db=%.2f\n", input.truth.r,
                input.truth.omega, input.truth.phi, snr);

    const auto warn_sfa = [&]() {
        const auto ok = sfa_check(plan, input.truth.cartesian);
        if (std::find(ok.begin(), ok.end(), false) != ok.end()) {
            std::fprintf(stderr,
                         "warning: UE inside the Fraunhofer distance of at least one subarray\n");
        }
    };

    if (which == "aple" || which == "eaple") {
        warn_sfa();
        const LocationEstimate aple_est = run_aple(snap, geom, plan, cfg.aple);
        if (args.verbose) {
            for (const auto& row : aple_est.trace) {
                std::printf("iter %d, varpi %.6e, %.6f, %.6f, %.6f\n", row.iter, row.varpi_full,
                            row.p.x(), row.p.y(), row.p.z());
            }
        }
        print_estimate("aple", aple_est.p_hat, input.truth);
        if (which == "eaple") {
            const EapleResult res =
                bca_refine(snap, geom, PolarPoint::from_cartesian(aple_est.p_hat), cfg.eaple);
            if (args.verbose) {
                for (const auto& row : res.trace) {
                    std::printf("iter %d, F %.6e, %.6f, %.6f, %.6f\n", row.iter, row.f, row.r,
                                row.omega, row.phi);
                }
            }
            print_estimate("eaple", res.p_hat, input.truth);
        }
    } else if (which == "omp") {
        const LocationEstimate est = omp_estimate(snap, geom, cfg.omp.make(geom));
        print_estimate("omp", est.p_hat, input.truth);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"near-field localization toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string axis = "snr";
    std::string snapshot_out = "snapshot.bin";
    std::string summary_in;
    std::string format = "markdown";
    int draws = 200;

    auto* sim = app.add_subcommand("simulate", "synthesize one snapshot and dump it");
    add_common(sim, args);
    sim->add_option("--trial", args.trial_index, "trial index for the truth draw");
    sim->add_option("--snapshot-out", snapshot_out, "binary snapshot output path");

    auto* aple_cmd = app.add_subcommand("aple", "run the message-passing estimator once");
    add_common(aple_cmd, args);
    aple_cmd->add_option("--trial", args.trial_index, "trial index for the truth draw");
    aple_cmd->add_flag("--verbose", args.verbose, "print the iteration trace");

    auto* eaple_cmd = app.add_subcommand("eaple", "run the ML refinement once");
    add_common(eaple_cmd, args);
    eaple_cmd->add_option("--trial", args.trial_index, "trial index for the truth draw");
    eaple_cmd->add_flag("--verbose", args.verbose, "print the iteration trace");

    auto* omp_cmd = app.add_subcommand("omp", "run the grid-correlation baseline once");
    add_common(omp_cmd, args);
    omp_cmd->add_option("--trial", args.trial_index, "trial index for the truth draw");

    auto* bounds_cmd = app.add_subcommand("bounds", "CRB/MCRB per random truth draw, CSV");
    add_common(bounds_cmd, args);
    bounds_cmd->add_option("--draws", draws, "number of random draws");

    auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo sweep over one axis");
    add_common(sweep_cmd, args);
    sweep_cmd->add_option("--axis", axis, "snr|distance|M|size")->required();

    auto* report_cmd = app.add_subcommand("report", "render a summary CSV");
    report_cmd->add_option("--summary", summary_in, "summary CSV path")->required();
    report_cmd->add_option("--format", format, "csv|markdown");
    report_cmd->add_option("--out", args.out, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const ExperimentConfig cfg = resolve_config(args);
            const ArrayGeometry geom = cfg.geometry.make();
            const double snr = cfg.snr_db.front();
            const TrialInput input = draw_trial_input(cfg, 0, args.trial_index, snr);
            const Snapshot snap =
                synthesize_snapshot(geom, input.truth, input.alpha, input.sigma2,
                                    derive_seed({input.trial_seed, 0x6e6f697365ULL}));
            write_snapshot(snapshot_out, snap);
            std::printf("snapshot: %s (N_B=%d, sigma2=%.3f)\n", snapshot_out.c_str(),
                        geom.antenna_count(), snap.noise_variance);
            std::printf("truth: r=%.6f omega=%.6f phi=%.6f\n", input.truth.r, input.truth.omega,
                        input.truth.phi);
            return 0;
        }
        if (aple_cmd->parsed()) return run_single("aple", args);
        if (eaple_cmd->parsed()) return run_single("eaple", args);
        if (omp_cmd->parsed()) return run_single("omp", args);

        if (bounds_cmd->parsed()) {
            const ExperimentConfig cfg = resolve_config(args);
            const ArrayGeometry geom = cfg.geometry.make();
            const PartitionPlan plan = partition(geom, cfg.m_x, cfg.m_y);
            const double snr = cfg.snr_db.front();
            std::ostream* os = &std::cout;
            std::ofstream file;
            if (!args.out.empty()) {
                file.open(args.out);
                if (!file) throw std::runtime_error("cannot open " + args.out);
                os = &file;
            }
            (*os) << "seed,r,omega,phi,crb_pos,mcrb_pos\n";
            for (int d = 0; d < draws; ++d) {
                const TrialInput input = draw_trial_input(cfg, 0, d, snr);
                TrueParam truth;
                truth.p_u = input.truth.cartesian;
                truth.angle_alpha = input.alpha.phase();
                truth.mag_alpha = input.alpha.magnitude();
                const double crb = crb_position(fim(geom, truth, input.sigma2));
                double mcrb_pos = std::numeric_limits<double>::quiet_NaN();
                if (cfg.bounds.mcrb) {
                    const MisParam gamma0 = pseudo_true(truth, geom, plan);
                    mcrb_pos = mcrb(truth, gamma0, geom, plan, input.sigma2).mcrb_pos;
                }
                char line[256];
                std::snprintf(line, sizeof(line), "%llu,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                              static_cast<unsigned long long>(input.trial_seed), input.truth.r,
                              input.truth.omega, input.truth.phi, crb, mcrb_pos);
                (*os) << line;
            }
            return 0;
        }

        if (sweep_cmd->parsed()) {
            if (!args.seed_set || args.trials <= 0 || args.out.empty()) {
                std::fprintf(stderr, "sweep: --seed, --trials and --out are required\n");
                return 2;
            }
            const ExperimentConfig cfg = resolve_config(args);
            const ExperimentResult result = sweep(cfg, axis);
            std::fputs(render_markdown(result.summary).c_str(), stdout);
            return result.failure_threshold_exceeded ? 3 : 0;
        }

        if (report_cmd->parsed()) {
            const auto rows = parse_summary_csv(summary_in);
            std::string text;
            if (format == "markdown") {
                text = render_markdown(rows);
            } else if (format == "csv") {
                const std::string tmp = args.out.empty() ? "/dev/stdout" : args.out;
                write_summary_csv(tmp, rows);
                return 0;
            } else {
                std::fprintf(stderr, "report: unknown format %s\n", format.c_str());
                return 2;
            }
            if (args.out.empty()) {
                std::fputs(text.c_str(), stdout);
            } else {
                std::ofstream out(args.out);
                out << text;
            }
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
