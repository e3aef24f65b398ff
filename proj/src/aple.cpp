#include "nfloc/aple.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfloc {

namespace {

// The estimator works with direction cosines toward the source while the
// fusion geometry uses cosines of (p_bs - p); the two differ by a sign, so
// VM means are negated when a message crosses between the modules.
VonMisesMessage flip_convention(const VonMisesMessage& msg) {
    if (msg.kappa == 0.0) return msg;
    return VonMisesMessage(wrap_angle(-msg.mu), msg.kappa);
}

// Priors fed back to the estimator stay below the global concentration cap;
// otherwise a saturated posterior minus a saturated prior leaves a
// meaningless extrinsic direction.
constexpr double kPriorKappaCap = 1e10;

VonMisesMessage cap_prior(const VonMisesMessage& msg) {
    return VonMisesMessage(msg.mu, std::min(msg.kappa, kPriorKappaCap));
}

} // namespace

LocationEstimate run_aple(const Snapshot& snapshot, const ArrayGeometry& geom,
                          const PartitionPlan& plan, const ApleConfig& cfg) {
    const int m_total = plan.count();
    if (snapshot.y.size() != geom.antenna_count()) {
        throw std::invalid_argument("run_aple: snapshot length does not match the geometry");
    }
    if (plan.parent.antenna_count() != geom.antenna_count()) {
        throw std::invalid_argument("run_aple: partition plan does not match the geometry");
    }

    LocationEstimate est;
    auto add_flag = [&est](const char* flag) {
        if (std::find(est.flags.begin(), est.flags.end(), flag) == est.flags.end()) {
            est.flags.emplace_back(flag);
        }
    };
    if (m_total == 1) add_flag("single_subarray_range_ambiguous");

    std::vector<Eigen::VectorXcd> views(m_total);
    for (int m = 1; m <= m_total; ++m) views[m - 1] = subarray_view(snapshot, plan, m);

    // The estimator marginalizes the gain under CN(0, sigma_alpha2); with a
    // broad prior this reduces to the 1/(sigma2 N_m) correlation scaling.
    const double sigma2 = std::max(snapshot.noise_variance, 1e-12);
    const int n_m = plan.antennas_per_subarray();
    const double sigma2_eff =
        sigma2 * (sigma2 + cfg.sigma_alpha2 * n_m) / (cfg.sigma_alpha2 * n_m);

    AoaEstimatorConfig est_cfg;
    est_cfg.iteration_budget = cfg.t2;
    est_cfg.grad_tol = cfg.estimator_grad_tol;

    FusionOpts fusion_opts;
    fusion_opts.max_iters = cfg.tp;
    fusion_opts.grad_tol = cfg.fusion_grad_tol;
    // Angle messages carry no information beyond the Fraunhofer region;
    // bounding the search keeps noisy near-plane geometries from running off.
    fusion_opts.max_range =
        std::max({2.0 * region_boundaries(geom).fraunhofer_m, 1.0});

    FusionState state;
    state.incoming.assign(2 * m_total, VonMisesMessage::uniform());
    state.outgoing.assign(2 * m_total, VonMisesMessage::uniform());
    state.beliefs.assign(2 * m_total, GaussianBelief3());
    state.anchors.assign(2 * m_total, Eigen::Vector3d::Zero());
    est.posteriors.assign(m_total, AoaPosterior{});

    bool anchors_ready = false;
    const double nominal_range = 2.0 * region_boundaries(geom).fresnel_m;

    // |a(p)^H y|^2; monotone in the exact-model likelihood of p.
    auto exact_score = [&](const Eigen::Vector3d& p) {
        return std::norm(nearfield_steering(geom, p).dot(snapshot.y));
    };
    VarpiMax best_candidate;
    double best_score = -std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= cfg.t1; ++iter) {
        for (int m = 1; m <= m_total; ++m) {
            const VonMisesMessage prior_x = flip_convention(state.outgoing[fusion_slot(m, 0)]);
            const VonMisesMessage prior_y = flip_convention(state.outgoing[fusion_slot(m, 1)]);
            const AoaPosterior post =
                estimate_posterior(views[m - 1], plan.n_mx, plan.n_my, geom.d_x, geom.d_y,
                                   geom.wavelength, sigma2_eff, prior_x, prior_y, est_cfg);
            const auto [ext_x, ext_y] = extrinsic_from_posterior(post, prior_x, prior_y);
            state.incoming[fusion_slot(m, 0)] = flip_convention(ext_x);
            state.incoming[fusion_slot(m, 1)] = flip_convention(ext_y);
            est.posteriors[m - 1] = post;
        }

        if (!anchors_ready) {
            const Eigen::Vector3d p0 = triangulate_init(plan, state.incoming, nominal_range);
            std::fill(state.anchors.begin(), state.anchors.end(), p0);
            anchors_ready = true;
        }

        for (int idx = 0; idx < 2 * m_total; ++idx) {
            const VarpiMax res =
                maximize_varpi(state.anchors[idx], plan, state.incoming, idx, fusion_opts);
            state.anchors[idx] = res.p;
            bool regularized = false;
            state.beliefs[idx] = gaussian_belief(res.p, res.hessian, &regularized);
            bool degenerate = false;
            if (regularized) {
                // The Laplace fit failed (boundary or saddle); an invented
                // covariance would poison the next round of extrinsics.
                add_flag("belief_hessian_regularized");
                state.outgoing[idx] = VonMisesMessage::uniform();
            } else {
                state.outgoing[idx] = cap_prior(projection_message(
                    state.beliefs[idx], plan.subarray_centers[idx / 2], idx % 2, &degenerate));
            }
            if (degenerate) add_flag("projection_degenerate");
        }

        int best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (int idx = 0; idx < 2 * m_total; ++idx) {
            const double v = varpi(state.anchors[idx], plan, state.incoming);
            if (v > best_val) {
                best_val = v;
                best = idx;
            }
        }
        est.trace.push_back({iter, best_val, state.anchors[best]});

        // Track the per-iteration solution under the exact-model correlation;
        // message passing can diverge on near-degenerate geometries, and the
        // received signal itself is the arbiter between iterations.
        const VarpiMax cand =
            maximize_varpi(state.anchors[best], plan, state.incoming, -1, fusion_opts);
        const double score = exact_score(cand.p);
        if (score > best_score) {
            best_score = score;
            best_candidate = cand;
        }
    }

    if (!std::isfinite(best_score)) {
        const Eigen::Vector3d start = triangulate_init(plan, state.incoming, nominal_range);
        best_candidate = maximize_varpi(start, plan, state.incoming, -1, fusion_opts);
        add_flag("no_scored_candidate");
    }
    est.p_hat = best_candidate.p;
    bool regularized = false;
    est.belief = gaussian_belief(best_candidate.p, best_candidate.hessian, &regularized);
    if (regularized) add_flag("final_hessian_regularized");
    return est;
}

} // namespace nfloc
