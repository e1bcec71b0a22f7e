#pragma once

#include <Eigen/Dense>

#include "vortexlab/profile.hpp"
#include "vortexlab/routh.hpp"

namespace vortexlab {

// The two small parameters of the rescaled problem. delta is derived from
// eps and p exactly; w-variables keep plateau levels O(1).
struct ScaleParams {
    double eps = 0.0;
    double p = 2.0;
    double delta = 0.0;
    double abs_ln_eps = 0.0;

    static ScaleParams make(double eps, double p) {
        require(eps > 0.0 && eps < 1.0, ErrorCode::config_invalid, "eps must lie in (0,1)");
        require(p > 1.0, ErrorCode::config_invalid, "p must exceed 1");
        ScaleParams s;
        s.eps = eps;
        s.p = p;
        s.abs_ln_eps = std::abs(std::log(eps));
        s.delta = eps * std::pow(two_pi / s.abs_ln_eps, (p - 1.0) / 2.0);
        return s;
    }

    // plateau level of vortex j at x, in w-variables
    double threshold(double kappa_j, double q_x) const {
        return kappa_j + two_pi * q_x / abs_ln_eps;
    }
};

// Per-vortex core radii s_i and plateau levels a_i solving the coupled
// matching/level system, found by alternating a bracketed scalar root solve
// for each s_i with the linear solve for a.
struct AnsatzParams {
    std::vector<double> s;
    std::vector<double> a;
    std::vector<bool> s_in_bracket;  // s_i within [delta/|ln delta|, delta |ln delta|]
    std::vector<bool> a_in_bracket;  // a_i within [kappa_i/2, 3 kappa_i/2]
    double residual_s = 0.0;         // relative residual of the matching equations
    double residual_a = 0.0;         // relative residual of the level equations
    int iterations = 0;
};

namespace detail {

// matching condition for one vortex:
// theta(s) = s^{2/(p-1)}/ln(R/s) + phi'(1)/a * delta^{2/(p-1)}
inline double matching_theta(double s, double R, double p, double delta, double a,
                             double phi_prime_1) {
    return std::pow(s, 2.0 / (p - 1.0)) / std::log(R / s) +
           phi_prime_1 / a * std::pow(delta, 2.0 / (p - 1.0));
}

inline double solve_matching_root(double R, double p, double delta, double a,
                                  double phi_prime_1, double lo, double hi) {
    double flo = matching_theta(lo, R, p, delta, a, phi_prime_1);
    double fhi = matching_theta(hi, R, p, delta, a, phi_prime_1);
    require(flo < 0.0 && fhi > 0.0, ErrorCode::bracket_sign,
            "matching bracket endpoints have equal signs (eps too large)");
    for (int it = 0; it < 240; ++it) {
        const double mid = std::sqrt(lo * hi);  // geometric bisection suits the log scale
        const double fm = matching_theta(mid, R, p, delta, a, phi_prime_1);
        (fm < 0.0 ? lo : hi) = mid;
        if ((hi - lo) < 1e-16 * hi) break;
    }
    return std::sqrt(lo * hi);
}

} // namespace detail

inline AnsatzParams solve_params(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                                 const VortexConfig& cfg, const ScaleParams& scale,
                                 const ProfileSolution& profile) {
    check_admissible(eval.domain(), cfg, cfg.z);
    require(std::abs(profile.p - scale.p) < 1e-12, ErrorCode::config_invalid,
            "profile exponent does not match the scale parameters");

    const int m = cfg.m();
    const double R = eval.enclosing_radius();
    const double delta = scale.delta;
    const double abs_ln_delta = std::abs(std::log(delta));

    // search bracket: the asymptotic bracket, widened so the construction
    // still works at desk-scale eps, capped so cores stay inside the default
    // mask radius min(d(z, boundary), half separation)/2
    const double lem_lo = delta / std::max(abs_ln_delta, 1.0);
    const double lem_hi = delta * std::max(abs_ln_delta, 1.0);
    const double lo = 0.25 * delta / std::max(abs_ln_delta, 1.5);
    std::vector<double> hi(m);
    for (int i = 0; i < m; ++i) {
        double room = eval.domain().boundary_distance(cfg.z[i]);
        for (int j = 0; j < m; ++j)
            if (j != i) room = std::min(room, 0.5 * dist(cfg.z[i], cfg.z[j]));
        hi[i] = 0.49 * room;
        require(hi[i] > lo, ErrorCode::bracket_sign, "no room for a vortex core here");
    }

    // potential couplings are fixed during the iteration
    Eigen::VectorXd rhs(m);
    Eigen::MatrixXd gbar(m, m);
    Eigen::VectorXd gdiag(m);
    for (int i = 0; i < m; ++i) {
        rhs[i] = cfg.kappa[i] + two_pi * flow.q_at(cfg.z[i]) / scale.abs_ln_eps;
        gdiag[i] = eval.g_fun(cfg.z[i], cfg.z[i]);
        for (int j = 0; j < m; ++j) {
            gbar(i, j) = (i == j) ? 0.0 : eval.g_bar(cfg.z[i], cfg.z[j]);
        }
    }

    AnsatzParams out;
    out.s.resize(m);
    out.a = cfg.kappa;
    for (int i = 0; i < m; ++i) {
        // asymptotic core-radius estimate as the starting point
        const double est = delta * std::pow(std::abs(profile.phi_prime_1) *
                                                std::max(std::log(R / delta), 1.0) /
                                                cfg.kappa[i],
                                            (scale.p - 1.0) / 2.0);
        out.s[i] = std::clamp(est, 2.0 * lo, 0.7 * hi[i]);
    }

    for (out.iterations = 1; out.iterations <= 200; ++out.iterations) {
        // level equations: linear in a for fixed s
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m);
        for (int i = 0; i < m; ++i) {
            A(i, i) -= gdiag[i] / std::log(R / out.s[i]);
            for (int j = 0; j < m; ++j) {
                if (j != i) A(i, j) += gbar(i, j) / std::log(R / out.s[j]);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        require(lu.isInvertible(), ErrorCode::linear_system_singular,
                "level system for a is singular");
        const Eigen::VectorXd a = lu.solve(rhs);
        for (int i = 0; i < m; ++i) {
            // a breaking down on the first pass means the scales themselves
            // are outside the constructible regime
            require(out.iterations > 1 || (a[i] > 0.0 && a[i] <= 5.0 * cfg.kappa[i]),
                    ErrorCode::bracket_sign,
                    "level equations break down at this eps (eps too large)");
            require(a[i] > 0.0 && a[i] <= 5.0 * cfg.kappa[i], ErrorCode::a_out_of_range,
                    "plateau level a[" + std::to_string(i) + "] left (0, 5 kappa]");
            out.a[i] = a[i];
        }

        // matching equations: bracketed root per vortex
        double move = 0.0;
        for (int i = 0; i < m; ++i) {
            const double s_new = detail::solve_matching_root(R, scale.p, delta, out.a[i],
                                                             profile.phi_prime_1, lo, hi[i]);
            move = std::max(move, std::abs(s_new - out.s[i]) / s_new);
            out.s[i] = s_new;
        }

        double rs = 0.0, ra = 0.0;
        for (int i = 0; i < m; ++i) {
            const double th = detail::matching_theta(out.s[i], R, scale.p, delta, out.a[i],
                                                     profile.phi_prime_1);
            rs = std::max(rs, std::abs(th) / (std::pow(out.s[i], 2.0 / (scale.p - 1.0)) /
                                              std::log(R / out.s[i])));
            double lvl = rhs[i] + gdiag[i] * out.a[i] / std::log(R / out.s[i]);
            for (int j = 0; j < m; ++j)
                if (j != i) lvl -= gbar(i, j) * out.a[j] / std::log(R / out.s[j]);
            ra = std::max(ra, std::abs(out.a[i] - lvl) / cfg.kappa[i]);
        }
        out.residual_s = rs;
        out.residual_a = ra;
        if (std::max(rs, ra) < 1e-12 && move < 1e-13) break;
    }
    require(std::max(out.residual_s, out.residual_a) < 1e-12, ErrorCode::newton_diverged,
            "parameter iteration failed to reach the residual target");

    out.s_in_bracket.resize(m);
    out.a_in_bracket.resize(m);
    for (int i = 0; i < m; ++i) {
        out.s_in_bracket[i] = (out.s[i] >= lem_lo && out.s[i] <= lem_hi);
        out.a_in_bracket[i] = (out.a[i] >= 0.5 * cfg.kappa[i] && out.a[i] <= 1.5 * cfg.kappa[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// truncated profile and assembled approximate solution
// ---------------------------------------------------------------------------

// W_{delta,a} at radius r: the scaled ground-state cap over the plateau for
// r <= s, the truncated logarithm a ln(r/R)/ln(s/R) for s <= r <= R.
inline double eval_wprofile(const ScaleParams& scale, double s, double a,
                            const ProfileSolution& profile, double r, double R) {
    require(s > 0.0 && a > 0.0, ErrorCode::config_invalid, "wprofile needs s, a > 0");
    require(r <= R, ErrorCode::config_invalid, "wprofile radius exceeds R");
    if (r <= s) {
        const double amp = std::pow(scale.delta / s, 2.0 / (scale.p - 1.0));
        return a + amp * profile.value(r / s);
    }
    return a * std::log(r / R) / std::log(s / R);
}

// radial derivative of W_{delta,a}
inline double eval_wprofile_deriv(const ScaleParams& scale, double s, double a,
                                  const ProfileSolution& profile, double r, double R) {
    if (r <= s) {
        const double amp = std::pow(scale.delta / s, 2.0 / (scale.p - 1.0));
        return amp * profile.eval(r / s).second / s;
    }
    return a / (r * std::log(s / R));
}

// assembled approximate solution at one point:
// P(x) = sum_j [ W_{delta,z_j,a_j}(x) - a_j/ln(R/s_j) * g(x, z_j) ]
inline double ansatz_value(const PotentialEvaluator& eval, const VortexConfig& cfg,
                           const AnsatzParams& params, const ScaleParams& scale,
                           const ProfileSolution& profile, const Vec2& x) {
    const double R = eval.enclosing_radius();
    double v = 0.0;
    for (int j = 0; j < cfg.m(); ++j) {
        const double r = dist(x, cfg.z[j]);
        v += eval_wprofile(scale, params.s[j], params.a[j], profile, std::min(r, R), R);
        v -= params.a[j] / std::log(R / params.s[j]) * eval.g_fun(x, cfg.z[j]);
    }
    return v;
}

inline Vec2 ansatz_gradient(const PotentialEvaluator& eval, const VortexConfig& cfg,
                            const AnsatzParams& params, const ScaleParams& scale,
                            const ProfileSolution& profile, const Vec2& x) {
    const double R = eval.enclosing_radius();
    Vec2 g{0.0, 0.0};
    for (int j = 0; j < cfg.m(); ++j) {
        const Vec2 d = x - cfg.z[j];
        const double r = d.norm();
        if (r > 1e-14) {
            const double dr = eval_wprofile_deriv(scale, params.s[j], params.a[j], profile,
                                                  std::min(r, R), R);
            g += (dr / r) * d;
        }
        g -= params.a[j] / std::log(R / params.s[j]) * eval.grad_x_g(x, cfg.z[j]);
    }
    return g;
}

// checks that every core ball sits inside the domain and its mask
inline void check_cores_fit(const DomainDescriptor& dom, const VortexConfig& cfg,
                            const AnsatzParams& params) {
    for (int j = 0; j < cfg.m(); ++j) {
        require(dom.boundary_distance(cfg.z[j]) > params.s[j], ErrorCode::core_touches_mask,
                "core ball " + std::to_string(j) + " reaches the domain boundary");
        if (cfg.use_masks && !cfg.masks.empty()) {
            require(dist(cfg.z[j], cfg.masks[j].center) + params.s[j] < cfg.masks[j].radius,
                    ErrorCode::core_touches_mask,
                    "core ball " + std::to_string(j) + " reaches its mask boundary");
        }
    }
}

// samples P_{delta,Z} on the grid; non-interior cells carry exactly 0
inline GridField assemble_ansatz(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                                 const VortexConfig& cfg, const AnsatzParams& params,
                                 const ScaleParams& scale, const ProfileSolution& profile,
                                 const Grid& grid) {
    (void)flow;
    check_cores_fit(eval.domain(), cfg, params);
    GridField f(grid, FieldTag::w);
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const Vec2 x = grid.center(i, j);
            if (!eval.domain().inside(x)) continue;
            f.mask[grid.index(i, j)] = 1;
            f.at(i, j) = ansatz_value(eval, cfg, params, scale, profile, x);
        }
    }
    return f;
}

// local expansion residual at the vortex centers: P(z_i) should reproduce
// the plateau plus the profile peak up to O(s^2/|ln eps|)
inline std::vector<double> ansatz_center_residuals(const PotentialEvaluator& eval,
                                                   const BackgroundFlow& flow,
                                                   const VortexConfig& cfg,
                                                   const AnsatzParams& params,
                                                   const ScaleParams& scale,
                                                   const ProfileSolution& profile) {
    std::vector<double> res(cfg.m());
    for (int i = 0; i < cfg.m(); ++i) {
        const double peak =
            std::pow(scale.delta / params.s[i], 2.0 / (scale.p - 1.0)) * profile.phi0;
        const double lhs = ansatz_value(eval, cfg, params, scale, profile, cfg.z[i]) -
                           scale.threshold(cfg.kappa[i], flow.q_at(cfg.z[i]));
        res[i] = lhs - peak;
    }
    return res;
}

} // namespace vortexlab
