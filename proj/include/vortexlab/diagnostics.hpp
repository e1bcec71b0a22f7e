#pragma once

#include "vortexlab/solver.hpp"

namespace vortexlab {

namespace detail {

// Gauss-Legendre nodes/weights on [0,1], computed once per order
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre01(int n) {
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lk(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[i] = 0.5 * (1.0 + t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

} // namespace detail

// ---------------------------------------------------------------------------
// circulation
// ---------------------------------------------------------------------------

struct CirculationResult {
    double total = 0.0;
    std::vector<double> per_core;  // aligned with cores
    std::vector<CoreComponent> cores;
};

// total = 1/eps^2 sum_j int_{Omega_j} (u - q - kappa_j |ln eps|/(2 pi))_+^p by
// midpoint quadrature; per-core values restrict the sum to each detected
// component (active cells are attached to the nearest component centroid)
inline CirculationResult circulation(const GridField& u, const DomainDescriptor& dom,
                                     const BackgroundFlow& flow, const VortexConfig& cfg,
                                     const ScaleParams& scale,
                                     bool require_cores = true) {
    FreeBoundaryWorkspace ws(dom, u.grid, flow, cfg, scale);
    GridField w = u;
    w.tag = FieldTag::w;
    const double to_w = two_pi / scale.abs_ln_eps;
    for (double& v : w.values) v *= to_w;

    CirculationResult out;
    out.cores = ws.detect_cores(w);
    double umax = 0.0;
    for (double v : u.values) umax = std::max(umax, std::abs(v));
    if (out.cores.empty()) {
        require(!require_cores || umax == 0.0, ErrorCode::no_cores,
                "no vortex cores detected in a nonzero field");
        return out;
    }

    const Grid& g = u.grid;
    const double cell = g.dx * g.dy;
    const double u_scale = scale.abs_ln_eps / two_pi;  // (u-..)_+ = u_scale * (w - tau)_+
    out.per_core.assign(out.cores.size(), 0.0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int k = ws.cell_index(i, j);
            if (k < 0 || ws.mask_id_of_cell(k) < 0) continue;
            const double excess = w.at(i, j) - ws.threshold_at_cell(k);
            if (excess <= 0.0) continue;
            const double integrand =
                std::pow(u_scale * excess, scale.p) * cell / sq(scale.eps);
            out.total += integrand;
            const Vec2 x = g.center(i, j);
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < out.cores.size(); ++c) {
                const double d = dist(x, out.cores[c].centroid);
                if (d < bd) {
                    bd = d;
                    best = int(c);
                }
            }
            out.per_core[best] += integrand;
        }
    }
    return out;
}

// finite-eps circulation of the constructed solution: sum_j a_j |ln eps| / ln(R/s_j)
inline double predicted_circulation(const AnsatzParams& params, const ScaleParams& scale,
                                    double R) {
    double c = 0.0;
    for (std::size_t j = 0; j < params.a.size(); ++j) {
        c += params.a[j] * scale.abs_ln_eps / std::log(R / params.s[j]);
    }
    return c;
}

// ---------------------------------------------------------------------------
// energies
// ---------------------------------------------------------------------------

// grid quadrature of the energy functional in w-variables:
// delta^2/2 * int |D_h w|^2 - sum_j 1/(p+1) int chi_j (w - tau_j)_+^{p+1}
inline double energy(const GridField& w, const DomainDescriptor& dom,
                     const BackgroundFlow& flow, const VortexConfig& cfg,
                     const ScaleParams& scale) {
    FreeBoundaryWorkspace ws(dom, w.grid, flow, cfg, scale);
    const Grid& g = w.grid;
    const double cell = g.dx * g.dy;
    double grad2 = 0.0, pot = 0.0;
    auto val = [&](int i, int j) {
        return (g.contains(i, j) && w.interior(i, j)) ? w.at(i, j) : 0.0;
    };
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int k = ws.cell_index(i, j);
            if (k < 0) continue;
            const double gx = (val(i + 1, j) - val(i - 1, j)) / (2.0 * g.dx);
            const double gy = (val(i, j + 1) - val(i, j - 1)) / (2.0 * g.dy);
            grad2 += (gx * gx + gy * gy) * cell;
            if (ws.mask_id_of_cell(k) >= 0) {
                pot += plus_pow(w.at(i, j) - ws.threshold_at_cell(k), scale.p + 1.0) * cell;
            }
        }
    }
    return 0.5 * sq(scale.delta) * grad2 - pot / (scale.p + 1.0);
}

// Semi-analytic energy of the assembled approximate solution, by polar
// quadrature around each vortex. The gradient term uses the exact identity
// delta^2 int |DP|^2 = sum_{i,j} int_{B_i} (W_i - a_i)_+^p P_j, which confines
// every integral to the core balls; uniform grids cannot resolve those at
// small eps, polar Gauss-Legendre can.
inline double ansatz_energy(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                            const VortexConfig& cfg, const AnsatzParams& params,
                            const ScaleParams& scale, const ProfileSolution& profile,
                            int n_r = 96, int n_theta = 128) {
    const double R = eval.enclosing_radius();
    const int m = cfg.m();
    const auto& [gx, gw] = detail::gauss_legendre01(n_r);

    auto P_at = [&](const Vec2& x) {
        return ansatz_value(eval, cfg, params, scale, profile, x);
    };

    // sum_i int_{B_{s_i}(z_i)} (W_i - a_i)^p * P_j summed over j
    double grad_term = 0.0;
    for (int i = 0; i < m; ++i) {
        const double s = params.s[i];
        const double amp = std::pow(scale.delta / s, 2.0 / (scale.p - 1.0));
        for (int t = 0; t < n_theta; ++t) {
            const double th = two_pi * (t + 0.5) / n_theta;
            const Vec2 e{std::cos(th), std::sin(th)};
            double radial = 0.0;
            for (int q = 0; q < n_r; ++q) {
                const double r = s * gx[q];
                const double cap = amp * profile.value(r / s);  // (W_i - a_i) at radius r
                if (cap <= 0.0) continue;
                const Vec2 x = cfg.z[i] + r * e;
                radial += gw[q] * std::pow(cap, scale.p) * P_at(x) * r;
            }
            grad_term += radial * s * (two_pi / n_theta);
        }
    }

    // potential term: the active set around z_j, radial extent found per ray
    double pot_term = 0.0;
    for (int j = 0; j < m; ++j) {
        const double s = params.s[j];
        double r_cap = 2.0 * s;
        if (cfg.use_masks && !cfg.masks.empty()) {
            r_cap = std::min(r_cap, cfg.masks[j].radius - dist(cfg.z[j], cfg.masks[j].center));
        }
        r_cap = std::min(r_cap, 0.98 * eval.domain().boundary_distance(cfg.z[j]));
        for (int t = 0; t < n_theta; ++t) {
            const double th = two_pi * (t + 0.5) / n_theta;
            const Vec2 e{std::cos(th), std::sin(th)};
            auto excess = [&](double r) {
                const Vec2 x = cfg.z[j] + r * e;
                return P_at(x) - scale.threshold(cfg.kappa[j], flow.q_at(x));
            };
            double lo = 0.0, hi = r_cap;
            if (excess(hi) > 0.0) {
                // active set unexpectedly reaches the cap; integrate to the cap
                lo = hi;
            } else {
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (excess(mid) > 0.0 ? lo : hi) = mid;
                }
            }
            const double rstar = 0.5 * (lo + hi);
            double radial = 0.0;
            for (int q = 0; q < n_r; ++q) {
                const double r = rstar * gx[q];
                radial += gw[q] * plus_pow(excess(r), scale.p + 1.0) * r;
            }
            pot_term += radial * rstar * (two_pi / n_theta);
        }
    }

    return 0.5 * grad_term - pot_term / (scale.p + 1.0);
}

// exact finite-parameter form of the reduced energy expansion, evaluated with
// the computed (a_i, s_i); the drop-in comparison target for ansatz_energy
// differences
inline double reduced_energy(const PotentialEvaluator& eval, const VortexConfig& cfg,
                             const AnsatzParams& params, const ScaleParams& scale) {
    const double R = eval.enclosing_radius();
    const int m = cfg.m();
    const double d2 = sq(scale.delta);
    double val = 0.0;
    for (int i = 0; i < m; ++i) {
        const double L = std::log(R / params.s[i]);
        const double a2 = sq(params.a[i]);
        val += pi * (scale.p + 1.0) / 4.0 * d2 * a2 / sq(L);
        val += pi * d2 * a2 / L;
        val -= pi * d2 * a2 * eval.g_fun(cfg.z[i], cfg.z[i]) / sq(L);
        val -= 0.5 * pi * d2 * a2 / sq(L);
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            const double Lj = std::log(R / params.s[j]);
            val += pi * eval.g_bar(cfg.z[j], cfg.z[i]) * d2 * params.a[i] * params.a[j] /
                   (L * Lj);
        }
    }
    return val;
}

// ---------------------------------------------------------------------------
// energy gradient check
// ---------------------------------------------------------------------------

struct EnergyGradientReport {
    std::vector<double> fd_grad;        // length 2m, finite differences of ansatz_energy
    std::vector<double> closed_grad;    // expansion with computed (a_i, s_i)
    double max_abs_residual = 0.0;
    double scaled_residual = 0.0;       // * |ln eps|^3 / (delta^2 ln |ln eps|)
    double cosine_vs_grad_phi = 0.0;
    double cosine_vs_minus_4pi2_grad_w = 0.0;
};

inline EnergyGradientReport energy_gradient_check(const PotentialEvaluator& eval,
                                                  const BackgroundFlow& flow,
                                                  const VortexConfig& cfg_in,
                                                  const ScaleParams& scale,
                                                  const ProfileSolution& profile,
                                                  const std::vector<Vec2>& Z, double h_fd) {
    VortexConfig cfg = cfg_in;
    cfg.z = Z;
    if (cfg.use_masks) cfg.masks = default_masks(eval.domain(), cfg);
    check_admissible(eval.domain(), cfg, Z);
    const int m = cfg.m();
    const double R = eval.enclosing_radius();

    auto K_of = [&](const std::vector<Vec2>& zz) {
        VortexConfig c2 = cfg;
        c2.z = zz;
        if (c2.use_masks) c2.masks = default_masks(eval.domain(), c2);
        const AnsatzParams pp = solve_params(eval, flow, c2, scale, profile);
        return ansatz_energy(eval, flow, c2, pp, scale, profile);
    };

    EnergyGradientReport rep;
    rep.fd_grad.resize(2 * m);
    for (int k = 0; k < 2 * m; ++k) {
        auto zp = Z, zm = Z;
        double* cp = (k % 2 == 0) ? &zp[k / 2].x : &zp[k / 2].y;
        double* cm = (k % 2 == 0) ? &zm[k / 2].x : &zm[k / 2].y;
        *cp += h_fd;
        *cm -= h_fd;
        check_admissible(eval.domain(), cfg, zp);
        check_admissible(eval.domain(), cfg, zm);
        rep.fd_grad[k] = (K_of(zp) - K_of(zm)) / (2.0 * h_fd);
    }

    const AnsatzParams params = solve_params(eval, flow, cfg, scale, profile);
    rep.closed_grad.assign(2 * m, 0.0);
    const double d2 = sq(scale.delta);
    for (int i = 0; i < m; ++i) {
        const double Li = std::log(R / params.s[i]);
        const Vec2 dq = flow.grad_q(Z[i]);
        // x-slot derivative of g on the diagonal is half the diagonal derivative
        const Vec2 dg = pi * eval.grad_robin(Z[i]);  // = 2 pi * grad_x H at (z,z)
        Vec2 gi = (4.0 * pi * pi * d2 * params.a[i] / (scale.abs_ln_eps * Li)) * dq;
        gi += (2.0 * pi * d2 * sq(params.a[i]) / sq(Li)) * dg;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            const double Lj = std::log(R / params.s[j]);
            const Vec2 dgb = eval.grad_x_gbar(Z[i], Z[j]);
            gi -= (2.0 * pi * d2 * params.a[i] * params.a[j] / (Li * Lj)) * dgb;
        }
        rep.closed_grad[2 * i] = gi.x;
        rep.closed_grad[2 * i + 1] = gi.y;
    }

    for (int k = 0; k < 2 * m; ++k) {
        rep.max_abs_residual =
            std::max(rep.max_abs_residual, std::abs(rep.fd_grad[k] - rep.closed_grad[k]));
    }
    rep.scaled_residual = rep.max_abs_residual * std::pow(scale.abs_ln_eps, 3) /
                          (d2 * std::log(scale.abs_ln_eps));

    auto cosine = [&](const Eigen::VectorXd& ref) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int k = 0; k < 2 * m; ++k) {
            dot += rep.fd_grad[k] * ref[k];
            na += sq(rep.fd_grad[k]);
            nb += sq(ref[k]);
        }
        return (na > 0 && nb > 0) ? dot / std::sqrt(na * nb) : 0.0;
    };
    const Eigen::VectorXd gphi = (d2 / sq(scale.abs_ln_eps)) * grad_Phi(eval, flow, cfg, Z);
    const Eigen::VectorXd gw =
        (-4.0 * pi * pi * d2 / sq(scale.abs_ln_eps)) * grad_W(eval, flow, cfg, Z);
    rep.cosine_vs_grad_phi = cosine(gphi);
    rep.cosine_vs_minus_4pi2_grad_w = cosine(gw);
    return rep;
}

// ---------------------------------------------------------------------------
// velocity / pressure / vorticity reconstruction
// ---------------------------------------------------------------------------

struct FlowFields {
    GridField vx, vy;        // velocity = perp gradient of (u - q)
    GridField pressure;
    GridField vorticity;
    double max_divergence = 0.0;      // centered discrete divergence of v
    double stationarity_rel = 0.0;    // |v . grad(omega)| relative to |v||grad omega|
};

inline FlowFields reconstruct_flow(const GridField& u, const DomainDescriptor& dom,
                                   const BackgroundFlow& flow, const VortexConfig& cfg,
                                   const ScaleParams& scale) {
    FreeBoundaryWorkspace ws(dom, u.grid, flow, cfg, scale);
    const Grid& g = u.grid;

    GridField psi = u;  // u - q on interior cells
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (!u.interior(i, j)) continue;
            psi.at(i, j) = u.at(i, j) - flow.q_at(g.center(i, j));
        }
    }

    FlowFields out{GridField(g), GridField(g), GridField(g), GridField(g, FieldTag::vorticity)};
    out.vx.mask = out.vy.mask = out.pressure.mask = out.vorticity.mask = u.mask;

    // validity rings: velocity needs the psi stencil, curl/divergence need
    // the velocity stencil, transport needs the vorticity stencil
    std::vector<std::uint8_t> v_ok(g.size(), 0), c_ok(g.size(), 0);
    auto interior4 = [&](int i, int j) {
        return i >= 1 && i + 1 < g.nx && j >= 1 && j + 1 < g.ny && u.interior(i, j) &&
               u.interior(i + 1, j) && u.interior(i - 1, j) && u.interior(i, j + 1) &&
               u.interior(i, j - 1);
    };
    for (int j = 1; j + 1 < g.ny; ++j) {
        for (int i = 1; i + 1 < g.nx; ++i) {
            if (!interior4(i, j)) continue;
            v_ok[g.index(i, j)] = 1;
            const double px = (psi.at(i + 1, j) - psi.at(i - 1, j)) / (2 * g.dx);
            const double py = (psi.at(i, j + 1) - psi.at(i, j - 1)) / (2 * g.dy);
            out.vx.at(i, j) = py;
            out.vy.at(i, j) = -px;
            const int k = ws.cell_index(i, j);
            double pot = 0.0;
            if (k >= 0 && ws.mask_id_of_cell(k) >= 0) {
                const double uexcess =
                    u.at(i, j) - flow.q_at(g.center(i, j)) -
                    cfg.kappa[ws.mask_id_of_cell(k)] * scale.abs_ln_eps / two_pi;
                pot = plus_pow(uexcess, scale.p + 1.0) / (scale.p + 1.0);
            }
            out.pressure.at(i, j) = pot - 0.5 * (px * px + py * py);
        }
    }
    auto ring_ok = [&](const std::vector<std::uint8_t>& ok, int i, int j) {
        return ok[g.index(i, j)] && ok[g.index(i + 1, j)] && ok[g.index(i - 1, j)] &&
               ok[g.index(i, j + 1)] && ok[g.index(i, j - 1)];
    };
    for (int j = 2; j + 2 < g.ny; ++j) {
        for (int i = 2; i + 2 < g.nx; ++i) {
            if (!ring_ok(v_ok, i, j)) continue;
            c_ok[g.index(i, j)] = 1;
            const double curl = (out.vy.at(i + 1, j) - out.vy.at(i - 1, j)) / (2 * g.dx) -
                                (out.vx.at(i, j + 1) - out.vx.at(i, j - 1)) / (2 * g.dy);
            out.vorticity.at(i, j) = curl;
            const double div = (out.vx.at(i + 1, j) - out.vx.at(i - 1, j)) / (2 * g.dx) +
                               (out.vy.at(i, j + 1) - out.vy.at(i, j - 1)) / (2 * g.dy);
            out.max_divergence = std::max(out.max_divergence, std::abs(div));
        }
    }

    // transport residual over the region carrying the vorticity (cells above
    // 2% of the peak); the boundary staircase residue stays excluded
    double peak = 0.0;
    for (double v : out.vorticity.values) peak = std::max(peak, std::abs(v));
    double num = 0.0, den = 0.0;
    for (int j = 3; j + 3 < g.ny; ++j) {
        for (int i = 3; i + 3 < g.nx; ++i) {
            if (!ring_ok(c_ok, i, j)) continue;
            if (std::abs(out.vorticity.at(i, j)) < 0.02 * peak) continue;
            const double wx = (out.vorticity.at(i + 1, j) - out.vorticity.at(i - 1, j)) / (2 * g.dx);
            const double wy = (out.vorticity.at(i, j + 1) - out.vorticity.at(i, j - 1)) / (2 * g.dy);
            const double transport = out.vx.at(i, j) * wx + out.vy.at(i, j) * wy;
            const double speed = std::hypot(out.vx.at(i, j), out.vy.at(i, j));
            const double slope = std::hypot(wx, wy);
            num += sq(transport);
            den += sq(speed * slope);
        }
    }
    out.stationarity_rel = den > 0 ? std::sqrt(num / den) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// convergence study across an eps sweep
// ---------------------------------------------------------------------------

struct ConvergenceRow {
    double eps = 0.0;
    std::vector<double> dist_to_zstar;   // per vortex, grid units are up to the caller
    std::vector<double> radius_over_eps;
    double circulation = 0.0;
    double circulation_error = 0.0;        // vs sum kappa
    double circulation_error_vs_pred = 0.0; // vs the finite-eps prediction
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    bool circulation_error_decreasing = true;
    bool radius_ratio_stable = true;   // within +-20% of the sweep mean
    double radius_ratio_spread = 0.0;  // max relative deviation from the mean
};

inline ConvergenceStudy convergence_study(const std::vector<ContinuationStep>& steps,
                                          const DomainDescriptor& dom,
                                          const BackgroundFlow& flow, const VortexConfig& cfg,
                                          const std::vector<Vec2>& z_star, double R) {
    require(steps.size() >= 3, ErrorCode::config_invalid,
            "a convergence study needs at least 3 eps values");
    ConvergenceStudy st;
    std::vector<double> ratios;
    double prev_err = std::numeric_limits<double>::infinity();
    double kappa_sum = 0.0;
    for (double k : cfg.kappa) kappa_sum += k;
    for (const auto& step : steps) {
        require(int(step.report.cores.size()) == cfg.m(), ErrorCode::core_split,
                "vortex count differs across reports");
        const ScaleParams scale = ScaleParams::make(step.eps, step.report.p);
        ConvergenceRow row;
        row.eps = step.eps;
        for (const auto& core : step.report.cores) {
            const Vec2 target = core.mask_id >= 0 && core.mask_id < int(z_star.size())
                                    ? z_star[core.mask_id]
                                    : z_star[0];
            row.dist_to_zstar.push_back(dist(core.centroid, target));
            row.radius_over_eps.push_back(core.radius / step.eps);
            ratios.push_back(core.radius / step.eps);
        }
        const CirculationResult circ = circulation(step.u, dom, flow, cfg, scale);
        row.circulation = circ.total;
        row.circulation_error = std::abs(circ.total - kappa_sum);
        row.circulation_error_vs_pred =
            std::abs(circ.total - predicted_circulation(step.params, scale, R));
        st.circulation_error_decreasing &= (row.circulation_error < prev_err);
        prev_err = row.circulation_error;
        st.rows.push_back(std::move(row));
    }
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= double(ratios.size());
    for (double r : ratios) {
        st.radius_ratio_spread = std::max(st.radius_ratio_spread, std::abs(r - mean) / mean);
    }
    st.radius_ratio_stable = st.radius_ratio_spread <= 0.20;
    return st;
}

} // namespace vortexlab
