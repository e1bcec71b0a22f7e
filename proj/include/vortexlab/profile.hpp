#pragma once

#include <array>
#include <utility>

#include "vortexlab/common.hpp"

namespace vortexlab {

// Radial ground state of  -Laplace(phi) = phi^p  on the unit disk with zero
// boundary data, normalized so the first zero sits exactly at r = 1.
// Outside r = 1 the C1 log extension  phi'(1) * ln r  is used.
struct ProfileSolution {
    double p = 2.0;
    std::vector<double> r;     // uniform samples on [0, 1]
    std::vector<double> phi;
    std::vector<double> dphi;
    double phi0 = 0.0;         // center height after rescaling
    double phi_prime_1 = 0.0;  // boundary slope, negative
    double I_p = 0.0;          // integral of phi^p over the unit disk
    double I_p1 = 0.0;         // integral of phi^{p+1}
    double pohozaev_res_p = 0.0;   // relative residual of I_p  = 2*pi*|phi'(1)|
    double pohozaev_res_p1 = 0.0;  // relative residual of I_p1 = pi(p+1)/2*phi'(1)^2

    // value and radial derivative at any r >= 0 (cubic Hermite inside,
    // log extension outside)
    std::pair<double, double> eval(double rr) const {
        if (rr >= 1.0) {
            return {phi_prime_1 * std::log(rr), phi_prime_1 / rr};
        }
        if (rr < 0.0) rr = 0.0;
        const std::size_t n = r.size() - 1;
        const double t = rr * n;
        std::size_t k = std::min<std::size_t>(std::size_t(t), n - 1);
        const double h = 1.0 / n;
        const double u = (rr - r[k]) / h;
        const double u2 = u * u, u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
        const double v = h00 * phi[k] + h * h10 * dphi[k] + h01 * phi[k + 1] + h * h11 * dphi[k + 1];
        const double d = ((6 * u2 - 6 * u) * phi[k] + h * (3 * u2 - 4 * u + 1) * dphi[k] +
                          (6 * u - 6 * u2) * phi[k + 1] + h * (3 * u2 - 2 * u) * dphi[k + 1]) / h;
        return {v, d};
    }

    double value(double rr) const { return eval(rr).first; }
};

namespace detail {

struct ProfileState {
    double y;   // phi
    double z;   // phi'
    double mp;  // integral of phi^p  * s
    double mq;  // integral of phi^{p+1} * s
};

inline ProfileState profile_rhs(double r, const ProfileState& s, double p) {
    const double yp = s.y > 0 ? std::pow(s.y, p) : 0.0;
    return {s.z, -s.z / r - yp, yp * r, (s.y > 0 ? std::pow(s.y, p + 1) : 0.0) * r};
}

inline ProfileState rk4_step(double r, const ProfileState& s, double h, double p) {
    auto add = [](const ProfileState& a, const ProfileState& b, double c) {
        return ProfileState{a.y + c * b.y, a.z + c * b.z, a.mp + c * b.mp, a.mq + c * b.mq};
    };
    const ProfileState k1 = profile_rhs(r, s, p);
    const ProfileState k2 = profile_rhs(r + h / 2, add(s, k1, h / 2), p);
    const ProfileState k3 = profile_rhs(r + h / 2, add(s, k2, h / 2), p);
    const ProfileState k4 = profile_rhs(r + h, add(s, k3, h), p);
    ProfileState out = s;
    out.y += h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
    out.z += h / 6 * (k1.z + 2 * k2.z + 2 * k3.z + k4.z);
    out.mp += h / 6 * (k1.mp + 2 * k2.mp + 2 * k3.mp + k4.mp);
    out.mq += h / 6 * (k1.mq + 2 * k2.mq + 2 * k3.mq + k4.mq);
    return out;
}

// series start handles the removable z/r singularity at the origin
inline ProfileState profile_series(double r, double p) {
    ProfileState s;
    s.y = 1.0 - r * r / 4.0 + p * std::pow(r, 4) / 64.0;
    s.z = -r / 2.0 + p * std::pow(r, 3) / 16.0;
    s.mp = r * r / 2.0 - p * std::pow(r, 4) / 16.0;  // leading terms of int phi^p s ds
    s.mq = r * r / 2.0 - (p + 1) * std::pow(r, 4) / 16.0;
    return s;
}

} // namespace detail

// Integrates the normalized problem phi(0)=1, phi'(0)=0, finds the first
// zero r0, and rescales by the symmetry phi -> r0^{2/(p-1)} phi(r0 r).
// base_step controls the fixed RK4 step of the normalized integration.
inline ProfileSolution solve_profile(double p, double tol = 1e-12,
                                     double base_step = 2.5e-4, int n_samples = 8000) {
    require(p > 1.0 && p <= 10.0, ErrorCode::config_invalid,
            "profile exponent p must lie in (1, 10]");
    require(tol > 0.0 && tol <= 1e-4, ErrorCode::config_invalid,
            "profile tolerance must lie in (0, 1e-4]");

    constexpr double r_start = 1e-3;
    constexpr double r_max = 50.0;
    const double h = base_step;

    // pass 1: march until the sign change, keeping the pre-crossing state
    detail::ProfileState s = detail::profile_series(r_start, p);
    double r = r_start;
    detail::ProfileState s_prev = s;
    double r_prev = r;
    bool crossed = false;
    while (r < r_max) {
        s_prev = s;
        r_prev = r;
        s = detail::rk4_step(r, s, h, p);
        r += h;
        if (s.y <= 0.0) {
            crossed = true;
            break;
        }
    }
    require(crossed, ErrorCode::bracket_sign,
            "no zero crossing before r = 50; p outside the supported regime");

    // bisection on the crossing radius, re-integrating the final partial step
    double lo = r_prev, hi = r;
    for (int it = 0; it < 80 && (hi - lo) > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const detail::ProfileState sm = detail::rk4_step(r_prev, s_prev, mid - r_prev, p);
        (sm.y > 0.0 ? lo : hi) = mid;
    }
    const double r0 = 0.5 * (lo + hi);
    const detail::ProfileState s_end = detail::rk4_step(r_prev, s_prev, r0 - r_prev, p);

    const double alpha = std::pow(r0, 2.0 / (p - 1.0));

    ProfileSolution sol;
    sol.p = p;
    sol.phi0 = alpha;
    sol.phi_prime_1 = alpha * r0 * s_end.z;
    sol.I_p = two_pi * alpha * s_end.mp;
    sol.I_p1 = two_pi * alpha * alpha * s_end.mq;

    // pass 2: land exactly on the rescaled uniform sample radii
    sol.r.resize(n_samples + 1);
    sol.phi.resize(n_samples + 1);
    sol.dphi.resize(n_samples + 1);
    detail::ProfileState cur = detail::profile_series(r_start, p);
    double rc = r_start;
    sol.r[0] = 0.0;
    sol.phi[0] = alpha;
    sol.dphi[0] = 0.0;
    for (int k = 1; k <= n_samples; ++k) {
        const double target = std::min(r0 * double(k) / n_samples, r0);
        if (target > rc) {
            const int nsub = std::max(1, int(std::ceil((target - rc) / h)));
            const double hs = (target - rc) / nsub;
            for (int q = 0; q < nsub; ++q) cur = detail::rk4_step(rc + q * hs, cur, hs, p);
            rc = target;
        }
        sol.r[k] = double(k) / n_samples;
        sol.phi[k] = alpha * cur.y;
        sol.dphi[k] = alpha * r0 * cur.z;
    }
    sol.phi[n_samples] = 0.0;  // the zero is pinned at r = 1 by construction
    sol.dphi[n_samples] = sol.phi_prime_1;

    sol.pohozaev_res_p = std::abs(sol.I_p - two_pi * std::abs(sol.phi_prime_1)) / sol.I_p;
    sol.pohozaev_res_p1 =
        std::abs(sol.I_p1 - pi * (p + 1.0) / 2.0 * sq(sol.phi_prime_1)) / sol.I_p1;
    return sol;
}

inline std::pair<double, double> eval_profile(const ProfileSolution& sol, double r) {
    require(r >= 0.0, ErrorCode::config_invalid, "profile radius must be nonnegative");
    return sol.eval(r);
}

} // namespace vortexlab
