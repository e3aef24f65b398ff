#ifndef NFLOC_HARNESS_HPP
#define NFLOC_HARNESS_HPP

#include "nfloc/aple.hpp"
#include "nfloc/bounds.hpp"
#include "nfloc/eaple.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/omp_baseline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nfloc {

inline constexpr double kSpeedOfLight = 2.99792458e8; // [m/s]

struct GeometryConfig {
    int n_x = 60;
    int n_y = 60;
    double spacing_wavelengths = 0.5; // used when spacing_m == 0
    double spacing_m = 0.0;
    double frequency_hz = 1.0e10;

    double wavelength() const { return kSpeedOfLight / frequency_hz; }
    ArrayGeometry make() const;
};

struct TruthConfig {
    double r_fixed = 20.0;
    bool r_uniform = false;
    double r_lo = 0.0;
    double r_hi = 0.0;
    bool omega_uniform = true;
    double omega_fixed = 0.0;
    bool phi_uniform = true;
    double phi_fixed = 0.0;
};

struct BoundsConfig {
    bool crb = false;
    bool mcrb = false;
};

struct OmpGridConfig {
    double r_min = 0.0; // 0 = derive from the geometry
    double r_max = 0.0;
    double r_step = 0.1;
    double omega_step = 0.02;
    double phi_step = 0.02;

    PolarGrid make(const ArrayGeometry& geom) const;
};

struct ExperimentConfig {
    GeometryConfig geometry;
    int m_x = 2;
    int m_y = 2;
    TruthConfig truth;
    std::vector<double> snr_db{20.0};
    int trials = 200;
    std::uint64_t seed = 1;
    std::vector<std::string> estimators{"aple", "eaple"};
    ApleConfig aple;
    EapleConfig eaple;
    bool eaple_random_init = false;
    OmpGridConfig omp;
    BoundsConfig bounds;
    int workers = 0; // 0 = hardware concurrency
    double failure_threshold = 0.1;
    std::string out_prefix;

    // sweep-axis value lists
    std::vector<double> distance_values;
    std::vector<int> m_values;                      // per-axis subarray counts
    std::vector<std::pair<int, int>> size_points;   // (n per axis, m per axis)
};

ExperimentConfig load_config(const std::string& path);
// Parse a JSON document (file contents) into a config; throws on bad fields.
ExperimentConfig parse_config(const std::string& json_text);

struct TrialRecord {
    int trial = 0;
    std::uint64_t seed = 0;
    double snr_db = 0.0;
    double r = 0.0, omega = 0.0, phi = 0.0;
    std::string method;
    double x_hat = 0.0, y_hat = 0.0, z_hat = 0.0;
    double err_m = 0.0;
    double runtime_s = 0.0;
    std::string flags;
    bool ok = true;
    // not exported to CSV; used for cost accounting
    int aux_iterations = 0;
    double aux_core_seconds = 0.0;
};

struct SummaryRow {
    std::string sweep_axis;
    double sweep_value = 0.0;
    std::string method;
    double rmse_m = 0.0;
    int trials_ok = 0;
    int trials_flagged = 0;
    double mean_runtime_s = 0.0;
    double crb_m = std::numeric_limits<double>::quiet_NaN();
    double mcrb_m = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
    std::vector<TrialRecord> records;
    std::vector<SummaryRow> summary;
    bool failure_threshold_exceeded = false;
};

// Monte Carlo run over cfg.snr_db x trials. Estimators and bounds share the
// per-trial truth draws; trials are deterministic functions of
// (seed, point index, trial index) and run on a worker pool.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& sweep_axis = "snr");

// Sweep over one experiment axis; each point reuses run_experiment.
// Supported axes: snr, distance, M, size.
ExperimentResult sweep(const ExperimentConfig& cfg, const std::string& axis);

void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& records);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> parse_summary_csv(const std::string& path);
std::string render_markdown(const std::vector<SummaryRow>& rows);

// Exposed for tests and the CLI: one reproducible trial of one experiment
// point.
struct TrialInput {
    UeLocation truth;
    ComplexGain alpha;
    double sigma2 = 1.0;
    std::uint64_t trial_seed = 0;
};
TrialInput draw_trial_input(const ExperimentConfig& cfg, int point_index, int trial_index,
                            double snr_db);

} // namespace nfloc

#endif
