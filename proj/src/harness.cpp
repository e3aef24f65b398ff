#include "nfloc/harness.hpp"

#include "nfloc/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nfloc {

using nlohmann::json;

ArrayGeometry GeometryConfig::make() const {
    const double lambda = wavelength();
    const double d = spacing_m > 0.0 ? spacing_m : spacing_wavelengths * lambda;
    return ArrayGeometry(n_x, n_y, d, d, lambda);
}

PolarGrid OmpGridConfig::make(const ArrayGeometry& geom) const {
    PolarGrid grid = PolarGrid::for_geometry(geom);
    if (r_min > 0.0) grid.r_min = r_min;
    if (r_max > 0.0) grid.r_max = r_max;
    grid.r_step = r_step;
    grid.omega_step = omega_step;
    grid.phi_step = phi_step;
    return grid;
}

namespace {

void parse_truth(const json& j, TruthConfig& truth) {
    if (j.contains("r")) {
        const auto& r = j.at("r");
        if (r.is_array()) {
            truth.r_uniform = true;
            truth.r_lo = r.at(0).get<double>();
            truth.r_hi = r.at(1).get<double>();
        } else {
            truth.r_uniform = false;
            truth.r_fixed = r.get<double>();
        }
    }
    auto parse_angle = [&](const char* key, bool& uniform, double& fixed) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (v.is_string()) {
            if (v.get<std::string>() != "uniform") {
                throw std::invalid_argument(std::string("truth.") + key +
                                            ": expected a number or \"uniform\"");
            }
            uniform = true;
        } else {
            uniform = false;
            fixed = v.get<double>();
        }
    };
    parse_angle("omega", truth.omega_uniform, truth.omega_fixed);
    parse_angle("phi", truth.phi_uniform, truth.phi_fixed);
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        if (j.contains("geometry")) {
            const auto& g = j.at("geometry");
            cfg.geometry.n_x = g.value("n_x", cfg.geometry.n_x);
            cfg.geometry.n_y = g.value("n_y", cfg.geometry.n_y);
            cfg.geometry.spacing_wavelengths =
                g.value("spacing_wavelengths", cfg.geometry.spacing_wavelengths);
            cfg.geometry.spacing_m = g.value("spacing_m", cfg.geometry.spacing_m);
            cfg.geometry.frequency_hz = g.value("frequency_hz", cfg.geometry.frequency_hz);
        }
        if (j.contains("partition")) {
            cfg.m_x = j.at("partition").value("m_x", cfg.m_x);
            cfg.m_y = j.at("partition").value("m_y", cfg.m_y);
        }
        if (j.contains("truth")) parse_truth(j.at("truth"), cfg.truth);
        if (j.contains("snr_db")) {
            cfg.snr_db.clear();
            if (j.at("snr_db").is_array()) {
                for (const auto& v : j.at("snr_db")) cfg.snr_db.push_back(v.get<double>());
            } else {
                cfg.snr_db.push_back(j.at("snr_db").get<double>());
            }
        }
        cfg.trials = j.value("trials", cfg.trials);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("estimators")) {
            cfg.estimators = j.at("estimators").get<std::vector<std::string>>();
        }
        if (j.contains("aple")) {
            const auto& a = j.at("aple");
            cfg.aple.t1 = a.value("t1", cfg.aple.t1);
            cfg.aple.t2 = a.value("t2", cfg.aple.t2);
            cfg.aple.tp = a.value("tp", cfg.aple.tp);
            cfg.aple.sigma_u2 = a.value("sigma_u2", cfg.aple.sigma_u2);
            cfg.aple.sigma_alpha2 = a.value("sigma_alpha2", cfg.aple.sigma_alpha2);
        }
        if (j.contains("eaple")) {
            const auto& e = j.at("eaple");
            cfg.eaple.t3 = e.value("t3", cfg.eaple.t3);
            cfg.eaple.t_theta = e.value("t_theta", cfg.eaple.t_theta);
            cfg.eaple.t_r = e.value("t_r", cfg.eaple.t_r);
            cfg.eaple.rel_ftol = e.value("rel_ftol", cfg.eaple.rel_ftol);
            cfg.eaple_random_init = e.value("random_init", cfg.eaple_random_init);
        }
        if (j.contains("omp")) {
            const auto& o = j.at("omp");
            cfg.omp.r_min = o.value("r_min", cfg.omp.r_min);
            cfg.omp.r_max = o.value("r_max", cfg.omp.r_max);
            cfg.omp.r_step = o.value("r_step", cfg.omp.r_step);
            cfg.omp.omega_step = o.value("angle_step", cfg.omp.omega_step);
            cfg.omp.phi_step = o.value("angle_step", cfg.omp.phi_step);
            cfg.omp.omega_step = o.value("omega_step", cfg.omp.omega_step);
            cfg.omp.phi_step = o.value("phi_step", cfg.omp.phi_step);
        }
        if (j.contains("bounds")) {
            cfg.bounds.crb = j.at("bounds").value("crb", cfg.bounds.crb);
            cfg.bounds.mcrb = j.at("bounds").value("mcrb", cfg.bounds.mcrb);
        }
        cfg.workers = j.value("workers", cfg.workers);
        cfg.failure_threshold = j.value("failure_threshold", cfg.failure_threshold);
        cfg.out_prefix = j.value("out", cfg.out_prefix);
        if (j.contains("distance_values")) {
            cfg.distance_values = j.at("distance_values").get<std::vector<double>>();
        }
        if (j.contains("m_values")) {
            cfg.m_values = j.at("m_values").get<std::vector<int>>();
        }
        if (j.contains("size_points")) {
            for (const auto& sp : j.at("size_points")) {
                cfg.size_points.emplace_back(sp.at("n").get<int>(), sp.at("m").get<int>());
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (cfg.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (cfg.snr_db.empty()) throw std::invalid_argument("config: snr_db must be nonempty");
    if (cfg.geometry.frequency_hz <= 0.0) {
        throw std::invalid_argument("config: frequency must be positive");
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

TrialInput draw_trial_input(const ExperimentConfig& cfg, int point_index, int trial_index,
                            double snr_db) {
    TrialInput input;
    input.trial_seed = derive_seed({cfg.seed, static_cast<std::uint64_t>(point_index),
                                    static_cast<std::uint64_t>(trial_index)});
    auto rng = make_rng(input.trial_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Fixed draw order keeps truths identical across estimator sets.
    const double u_r = unit(rng);
    const double u_omega = unit(rng);
    const double u_phi = unit(rng);
    const double u_alpha = unit(rng);

    const TruthConfig& t = cfg.truth;
    const double r = t.r_uniform ? t.r_lo + (t.r_hi - t.r_lo) * u_r : t.r_fixed;
    const double omega = t.omega_uniform ? 2.0 * M_PI * u_omega : t.omega_fixed;
    // phi strictly below pi/2 so the UE stays in front of the array
    const double phi = t.phi_uniform ? 0.5 * M_PI * std::min(u_phi, 1.0 - 1e-12)
                                     : t.phi_fixed;
    input.truth = UeLocation::from_polar(r, omega, phi);
    input.sigma2 = 1.0;
    input.alpha = ComplexGain::from_polar(std::pow(10.0, snr_db / 20.0),
                                          2.0 * M_PI * u_alpha - M_PI);
    return input;
}

namespace {

std::string join_flags(const std::vector<std::string>& flags) {
    std::string out;
    for (const auto& f : flags) {
        if (!out.empty()) out += ';';
        out += f;
    }
    return out;
}

struct TrialOutputs {
    std::vector<TrialRecord> records;
    double crb_pos = std::numeric_limits<double>::quiet_NaN();
    double mcrb_pos = std::numeric_limits<double>::quiet_NaN();
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

TrialOutputs run_one_trial(const ExperimentConfig& cfg, const ArrayGeometry& geom,
                           const PartitionPlan& plan, int point_index, int trial_index,
                           double snr_db, const std::string& sweep_axis, double sweep_value) {
    (void)sweep_axis;
    (void)sweep_value;
    TrialOutputs out;
    const TrialInput input = draw_trial_input(cfg, point_index, trial_index, snr_db);
    const std::uint64_t noise_seed = derive_seed({input.trial_seed, 0x6e6f697365ULL});
    const Snapshot snap =
        synthesize_snapshot(geom, input.truth, input.alpha, input.sigma2, noise_seed);

    auto base_record = [&](const std::string& method) {
        TrialRecord rec;
        rec.trial = trial_index;
        rec.seed = input.trial_seed;
        rec.snr_db = snr_db;
        rec.r = input.truth.r;
        rec.omega = input.truth.omega;
        rec.phi = input.truth.phi;
        rec.method = method;
        return rec;
    };
    auto finish_record = [&](TrialRecord& rec, const Eigen::Vector3d& p_hat,
                             const std::vector<std::string>& flags) {
        rec.x_hat = p_hat.x();
        rec.y_hat = p_hat.y();
        rec.z_hat = p_hat.z();
        rec.err_m = (p_hat - input.truth.cartesian).norm();
        rec.flags = join_flags(flags);
    };

    const bool want_aple = std::find(cfg.estimators.begin(), cfg.estimators.end(), "aple") !=
                           cfg.estimators.end();
    const bool want_eaple = std::find(cfg.estimators.begin(), cfg.estimators.end(), "eaple") !=
                            cfg.estimators.end();
    const bool want_omp = std::find(cfg.estimators.begin(), cfg.estimators.end(), "omp") !=
                          cfg.estimators.end();

    std::optional<LocationEstimate> aple_est;
    double aple_seconds = 0.0;
    const bool need_aple = want_aple || (want_eaple && !cfg.eaple_random_init);
    if (need_aple) {
        TrialRecord rec = base_record("aple");
        try {
            Stopwatch sw;
            aple_est = run_aple(snap, geom, plan, cfg.aple);
            aple_seconds = sw.seconds();
            rec.runtime_s = aple_seconds;
            finish_record(rec, aple_est->p_hat, aple_est->flags);
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.flags = std::string("fail:") + e.what();
            rec.err_m = std::numeric_limits<double>::quiet_NaN();
        }
        if (want_aple) out.records.push_back(rec);
    }

    if (want_eaple) {
        TrialRecord rec = base_record("eaple");
        try {
            PolarPoint init;
            if (cfg.eaple_random_init) {
                auto rng = make_rng(derive_seed({input.trial_seed, 0x696e6974ULL}));
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                const TruthConfig& t = cfg.truth;
                init.r = t.r_uniform ? t.r_lo + (t.r_hi - t.r_lo) * unit(rng) : t.r_fixed;
                init.omega = 2.0 * M_PI * unit(rng);
                init.phi = 0.5 * M_PI * std::min(unit(rng), 1.0 - 1e-12);
            } else if (aple_est) {
                init = PolarPoint::from_cartesian(aple_est->p_hat);
            } else {
                throw std::runtime_error("eaple: no initialization available");
            }
            Stopwatch sw;
            const EapleResult res = bca_refine(snap, geom, init, cfg.eaple);
            const double bca_seconds = sw.seconds();
            rec.runtime_s = bca_seconds + (cfg.eaple_random_init ? 0.0 : aple_seconds);
            rec.aux_iterations = res.inner_iterations;
            rec.aux_core_seconds = bca_seconds;
            finish_record(rec, res.p_hat, res.flags);
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.flags = std::string("fail:") + e.what();
            rec.err_m = std::numeric_limits<double>::quiet_NaN();
        }
        out.records.push_back(rec);
    }

    if (want_omp) {
        TrialRecord rec = base_record("omp");
        try {
            Stopwatch sw;
            const LocationEstimate est = omp_estimate(snap, geom, cfg.omp.make(geom));
            rec.runtime_s = sw.seconds();
            finish_record(rec, est.p_hat, est.flags);
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.flags = std::string("fail:") + e.what();
            rec.err_m = std::numeric_limits<double>::quiet_NaN();
        }
        out.records.push_back(rec);
    }

    if (cfg.bounds.crb || cfg.bounds.mcrb) {
        TrueParam truth;
        truth.p_u = input.truth.cartesian;
        truth.angle_alpha = input.alpha.phase();
        truth.mag_alpha = input.alpha.magnitude();
        if (cfg.bounds.mcrb) {
            const MisParam gamma0 = pseudo_true(truth, geom, plan);
            const BoundReport report = mcrb(truth, gamma0, geom, plan, input.sigma2);
            out.mcrb_pos = report.mcrb_pos;
            out.crb_pos = report.crb_pos;
        } else {
            out.crb_pos = crb_position(fim(geom, truth, input.sigma2));
        }
    }
    return out;
}

void format_double(std::string& line, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    line += buf;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& sweep_axis) {
    const ArrayGeometry geom = cfg.geometry.make();
    const PartitionPlan plan = partition(geom, cfg.m_x, cfg.m_y);
    ExperimentResult result;

    const int workers = cfg.workers > 0
        ? cfg.workers
        : std::max(1u, std::thread::hardware_concurrency());

    for (int point = 0; point < static_cast<int>(cfg.snr_db.size()); ++point) {
        const double snr_db = cfg.snr_db[point];
        const double sweep_value = sweep_axis == "snr" ? snr_db : 0.0;

        std::vector<TrialOutputs> outputs(cfg.trials);
        std::atomic<int> next{0};
        std::vector<std::string> worker_errors(workers);
        auto work = [&](int widx) {
            try {
                for (int t = next.fetch_add(1); t < cfg.trials; t = next.fetch_add(1)) {
                    outputs[t] = run_one_trial(cfg, geom, plan, point, t, snr_db, sweep_axis,
                                               sweep_value);
                }
            } catch (const std::exception& e) {
                worker_errors[widx] = e.what();
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
            for (auto& th : pool) th.join();
        }
        for (const auto& err : worker_errors) {
            if (!err.empty()) throw std::runtime_error("run_experiment: " + err);
        }

        // Ordered reduction by trial index.
        struct MethodStats {
            std::string name;
            double sq_sum = 0.0;
            double time_sum = 0.0;
            int ok = 0;
            int flagged = 0;
        };
        std::vector<MethodStats> stats;
        auto stats_for = [&stats](const std::string& name) -> MethodStats& {
            for (auto& s : stats) {
                if (s.name == name) return s;
            }
            stats.push_back(MethodStats{name});
            return stats.back();
        };
        std::vector<double> crb_draws, mcrb_draws;
        for (int t = 0; t < cfg.trials; ++t) {
            for (const auto& rec : outputs[t].records) {
                MethodStats& s = stats_for(rec.method);
                if (rec.ok) {
                    s.sq_sum += rec.err_m * rec.err_m;
                    s.time_sum += rec.runtime_s;
                    ++s.ok;
                } else {
                    ++s.flagged;
                }
                result.records.push_back(rec);
            }
            if (std::isfinite(outputs[t].crb_pos)) crb_draws.push_back(outputs[t].crb_pos);
            if (std::isfinite(outputs[t].mcrb_pos)) mcrb_draws.push_back(outputs[t].mcrb_pos);
        }
        // Near-degenerate orientation draws produce a heavy upper tail in the
        // per-draw bounds; a trimmed RMS keeps the aggregate stable across
        // seeds (estimator errors stay bounded there, so the RMSE needs no
        // trimming).
        auto trimmed_rms = [](std::vector<double>& v) {
            if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
            std::sort(v.begin(), v.end());
            const std::size_t keep = v.size() - v.size() / 50;
            double sq = 0.0;
            for (std::size_t i = 0; i < keep; ++i) sq += v[i] * v[i];
            return std::sqrt(sq / keep);
        };
        const double crb_agg = trimmed_rms(crb_draws);
        const double mcrb_agg = trimmed_rms(mcrb_draws);

        for (const MethodStats& s : stats) {
            SummaryRow row;
            row.sweep_axis = sweep_axis;
            row.sweep_value = sweep_axis == "snr" ? snr_db : sweep_value;
            row.method = s.name;
            row.trials_ok = s.ok;
            row.trials_flagged = s.flagged;
            row.rmse_m = s.ok > 0 ? std::sqrt(s.sq_sum / s.ok)
                                  : std::numeric_limits<double>::quiet_NaN();
            row.mean_runtime_s = s.ok > 0 ? s.time_sum / s.ok : 0.0;
            row.crb_m = crb_agg;
            row.mcrb_m = mcrb_agg;
            if (row.trials_flagged >
                cfg.failure_threshold * static_cast<double>(cfg.trials)) {
                result.failure_threshold_exceeded = true;
            }
            result.summary.push_back(row);
        }
    }

    if (!cfg.out_prefix.empty()) {
        write_trials_csv(cfg.out_prefix + "_trials.csv", result.records);
        write_summary_csv(cfg.out_prefix + "_summary.csv", result.summary);
    }
    return result;
}

ExperimentResult sweep(const ExperimentConfig& cfg, const std::string& axis) {
    if (axis == "snr") return run_experiment(cfg, "snr");

    ExperimentResult total;
    auto absorb = [&total](const ExperimentResult& part, const std::string& ax, double value) {
        for (TrialRecord rec : part.records) total.records.push_back(std::move(rec));
        for (SummaryRow row : part.summary) {
            row.sweep_axis = ax;
            row.sweep_value = value;
            total.summary.push_back(std::move(row));
        }
        total.failure_threshold_exceeded |= part.failure_threshold_exceeded;
    };

    if (axis == "distance") {
        if (cfg.distance_values.empty()) {
            throw std::invalid_argument("sweep: distance_values must be set");
        }
        for (double r : cfg.distance_values) {
            ExperimentConfig point = cfg;
            point.truth.r_uniform = false;
            point.truth.r_fixed = r;
            point.out_prefix.clear();
            absorb(run_experiment(point, axis), axis, r);
        }
    } else if (axis == "M") {
        if (cfg.m_values.empty()) throw std::invalid_argument("sweep: m_values must be set");
        for (int m : cfg.m_values) {
            ExperimentConfig point = cfg;
            point.m_x = m;
            point.m_y = m;
            point.out_prefix.clear();
            absorb(run_experiment(point, axis), axis, static_cast<double>(m) * m);
        }
    } else if (axis == "size") {
        if (cfg.size_points.empty()) throw std::invalid_argument("sweep: size_points must be set");
        for (const auto& [n, m] : cfg.size_points) {
            ExperimentConfig point = cfg;
            point.geometry.n_x = n;
            point.geometry.n_y = n;
            point.m_x = m;
            point.m_y = m;
            point.out_prefix.clear();
            absorb(run_experiment(point, axis), axis, static_cast<double>(n));
        }
    } else {
        throw std::invalid_argument("sweep: unknown axis " + axis);
    }

    if (!cfg.out_prefix.empty()) {
        write_trials_csv(cfg.out_prefix + "_trials.csv", total.records);
        write_summary_csv(cfg.out_prefix + "_summary.csv", total.summary);
    }
    return total;
}

void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trials_csv: cannot open " + path);
    out << "trial,seed,snr_db,r,omega,phi,method,x_hat,y_hat,z_hat,err_m,runtime_s,flags\n";
    for (const auto& rec : records) {
        std::string line;
        line += std::to_string(rec.trial);
        line += ',';
        line += std::to_string(rec.seed);
        line += ',';
        format_double(line, rec.snr_db);
        line += ',';
        format_double(line, rec.r);
        line += ',';
        format_double(line, rec.omega);
        line += ',';
        format_double(line, rec.phi);
        line += ',';
        line += rec.method;
        line += ',';
        format_double(line, rec.x_hat);
        line += ',';
        format_double(line, rec.y_hat);
        line += ',';
        format_double(line, rec.z_hat);
        line += ',';
        format_double(line, rec.err_m);
        line += ',';
        format_double(line, rec.runtime_s);
        line += ',';
        line += rec.flags;
        out << line << '\n';
    }
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path);
    out << "sweep_axis,sweep_value,method,rmse_m,trials_ok,trials_flagged,mean_runtime_s,"
           "crb_m,mcrb_m\n";
    for (const auto& row : rows) {
        std::string line = row.sweep_axis;
        line += ',';
        format_double(line, row.sweep_value);
        line += ',';
        line += row.method;
        line += ',';
        format_double(line, row.rmse_m);
        line += ',';
        line += std::to_string(row.trials_ok);
        line += ',';
        line += std::to_string(row.trials_flagged);
        line += ',';
        format_double(line, row.mean_runtime_s);
        line += ',';
        format_double(line, row.crb_m);
        line += ',';
        format_double(line, row.mcrb_m);
        out << line << '\n';
    }
}

std::vector<SummaryRow> parse_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_summary_csv: cannot open " + path);
    std::vector<SummaryRow> rows;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        SummaryRow row;
        std::getline(ss, row.sweep_axis, ',');
        std::getline(ss, field, ',');
        row.sweep_value = std::stod(field);
        std::getline(ss, row.method, ',');
        std::getline(ss, field, ',');
        row.rmse_m = std::stod(field);
        std::getline(ss, field, ',');
        row.trials_ok = std::stoi(field);
        std::getline(ss, field, ',');
        row.trials_flagged = std::stoi(field);
        std::getline(ss, field, ',');
        row.mean_runtime_s = std::stod(field);
        std::getline(ss, field, ',');
        row.crb_m = std::stod(field);
        std::getline(ss, field, ',');
        row.mcrb_m = std::stod(field);
        rows.push_back(row);
    }
    return rows;
}

std::string render_markdown(const std::vector<SummaryRow>& rows) {
    std::string out;
    out += "| axis | value | method | RMSE (m) | ok | flagged | mean runtime (s) | CRB (m) | "
           "MCRB (m) |\n";
    out += "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "| %s | %.6g | %s | %.6g | %d | %d | %.6g | %.6g | %.6g |\n",
                      row.sweep_axis.c_str(), row.sweep_value, row.method.c_str(), row.rmse_m,
                      row.trials_ok, row.trials_flagged, row.mean_runtime_s, row.crb_m,
                      row.mcrb_m);
        out += buf;
    }
    return out;
}

} // namespace nfloc
