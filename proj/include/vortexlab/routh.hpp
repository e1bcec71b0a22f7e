#pragma once

#include <functional>

#include <Eigen/Dense>

#include "vortexlab/potential.hpp"

namespace vortexlab {

struct MaskDisk {
    Vec2 center;
    double radius = 0.0;
    bool contains(const Vec2& p) const { return dist(p, center) < radius; }
};

// A vortex configuration: strengths, positions, and the subdomain masks that
// localize each nonlinearity. use_masks = false is the equi-strength mode
// with one global nonlinearity.
struct VortexConfig {
    std::vector<double> kappa;
    std::vector<Vec2> z;
    std::vector<MaskDisk> masks;  // empty: derived defaults
    bool use_masks = true;
    double rho_floor = 0.0;       // 0: default 0.1 * inradius
    double Lbar = 2.0;

    int m() const { return int(kappa.size()); }
};

inline double admissibility_floor(const DomainDescriptor& dom, const VortexConfig& cfg) {
    return cfg.rho_floor > 0.0 ? cfg.rho_floor : 0.1 * dom.inradius;
}

// throws with the violated constraint named; mirrors the barrier that keeps
// the search inside the admissible set
inline void check_admissible(const DomainDescriptor& dom, const VortexConfig& cfg,
                             const std::vector<Vec2>& z) {
    const double rho = admissibility_floor(dom, cfg);
    const double sep = std::pow(rho, cfg.Lbar);
    for (std::size_t i = 0; i < z.size(); ++i) {
        require(cfg.kappa[i] > 0.0, ErrorCode::admissibility, "vortex strengths must be positive");
        require(dom.inside(z[i]), ErrorCode::admissibility,
                "vortex " + std::to_string(i) + " outside the domain");
        if (dom.boundary_distance(z[i]) < rho) {
            fail(ErrorCode::admissibility,
                 "vortex " + std::to_string(i) + " closer than rho to the boundary");
        }
        for (std::size_t j = i + 1; j < z.size(); ++j) {
            if (dist(z[i], z[j]) < sep) {
                fail(ErrorCode::admissibility, "vortices " + std::to_string(i) + "," +
                                                   std::to_string(j) + " closer than rho^Lbar");
            }
        }
    }
    if (!cfg.masks.empty()) {
        for (std::size_t j = 0; j < z.size(); ++j) {
            require(cfg.masks[j].contains(z[j]), ErrorCode::admissibility,
                    "vortex " + std::to_string(j) + " outside its mask");
        }
        for (std::size_t i = 0; i < cfg.masks.size(); ++i) {
            for (std::size_t j = i + 1; j < cfg.masks.size(); ++j) {
                require(dist(cfg.masks[i].center, cfg.masks[j].center) >=
                            cfg.masks[i].radius + cfg.masks[j].radius,
                        ErrorCode::admissibility, "masks overlap");
            }
        }
    }
}

inline bool is_admissible(const DomainDescriptor& dom, const VortexConfig& cfg,
                          const std::vector<Vec2>& z) {
    try {
        check_admissible(dom, cfg, z);
        return true;
    } catch (const Error&) {
        return false;
    }
}

// disjoint default masks: disks of radius min(d(z_j, boundary), half the
// nearest-neighbor distance) / 2
inline std::vector<MaskDisk> default_masks(const DomainDescriptor& dom,
                                           const VortexConfig& cfg) {
    std::vector<MaskDisk> masks(cfg.z.size());
    for (std::size_t j = 0; j < cfg.z.size(); ++j) {
        double r = dom.boundary_distance(cfg.z[j]);
        for (std::size_t i = 0; i < cfg.z.size(); ++i) {
            if (i != j) r = std::min(r, 0.5 * dist(cfg.z[i], cfg.z[j]));
        }
        masks[j] = {cfg.z[j], 0.5 * r};
    }
    return masks;
}

// ---------------------------------------------------------------------------
// Kirchhoff-Routh function and the reduced function Phi
// ---------------------------------------------------------------------------

inline double eval_W(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                     const VortexConfig& cfg, const std::vector<Vec2>& z) {
    check_admissible(eval.domain(), cfg, z);
    const int m = int(z.size());
    double w = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            w += 0.5 * cfg.kappa[i] * cfg.kappa[j] * eval.green(z[i], z[j]);
        }
        w += 0.5 * sq(cfg.kappa[i]) * eval.robin(z[i]);
        w += cfg.kappa[i] * flow.psi0_at(z[i]);
    }
    return w;
}

inline double eval_W(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                     const VortexConfig& cfg) {
    return eval_W(eval, flow, cfg, cfg.z);
}

inline double eval_Phi(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                       const VortexConfig& cfg, const std::vector<Vec2>& z) {
    check_admissible(eval.domain(), cfg, z);
    const int m = int(z.size());
    double phi = 0.0;
    for (int i = 0; i < m; ++i) {
        phi += 4.0 * pi * pi * cfg.kappa[i] * flow.q_at(z[i]);
        phi += pi * sq(cfg.kappa[i]) * eval.g_fun(z[i], z[i]);
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            phi -= pi * cfg.kappa[i] * cfg.kappa[j] * eval.g_bar(z[j], z[i]);
        }
    }
    return phi;
}

inline double eval_Phi(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                       const VortexConfig& cfg) {
    return eval_Phi(eval, flow, cfg, cfg.z);
}

// analytic on the disk backend, central differences otherwise
inline Eigen::VectorXd grad_W(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                              const VortexConfig& cfg, const std::vector<Vec2>& z,
                              double h_fd = 0.0) {
    const int m = int(z.size());
    Eigen::VectorXd g(2 * m);
    if (eval.backend() == PotentialEvaluator::Backend::analytic_disk) {
        for (int k = 0; k < m; ++k) {
            Vec2 gk{0.0, 0.0};
            for (int j = 0; j < m; ++j) {
                if (j == k) continue;
                gk += cfg.kappa[k] * cfg.kappa[j] * eval.grad_x_green(z[k], z[j]);
            }
            gk += 0.5 * sq(cfg.kappa[k]) * eval.grad_robin(z[k]);
            const Vec2 gq = flow.grad_q(z[k]);
            gk += cfg.kappa[k] * Vec2{-gq.x, -gq.y};  // grad psi0 = -grad q
            g[2 * k] = gk.x;
            g[2 * k + 1] = gk.y;
        }
        return g;
    }
    if (h_fd <= 0.0) h_fd = 2.0 * eval.poisson()->grid().dx;
    auto zs = z;
    for (int k = 0; k < 2 * m; ++k) {
        double* comp = (k % 2 == 0) ? &zs[k / 2].x : &zs[k / 2].y;
        const double save = *comp;
        *comp = save + h_fd;
        const double wp = eval_W(eval, flow, cfg, zs);
        *comp = save - h_fd;
        const double wm = eval_W(eval, flow, cfg, zs);
        *comp = save;
        g[k] = (wp - wm) / (2.0 * h_fd);
    }
    return g;
}

inline Eigen::VectorXd grad_Phi(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                                const VortexConfig& cfg, const std::vector<Vec2>& z,
                                double h_fd = 0.0) {
    const int m = int(z.size());
    Eigen::VectorXd g(2 * m);
    if (eval.backend() == PotentialEvaluator::Backend::analytic_disk) {
        for (int k = 0; k < m; ++k) {
            Vec2 gk = 4.0 * pi * pi * cfg.kappa[k] * flow.grad_q(z[k]);
            gk += 2.0 * pi * pi * sq(cfg.kappa[k]) * eval.grad_robin(z[k]);
            for (int j = 0; j < m; ++j) {
                if (j == k) continue;
                gk -= 2.0 * pi * cfg.kappa[k] * cfg.kappa[j] * eval.grad_x_gbar(z[k], z[j]);
            }
            g[2 * k] = gk.x;
            g[2 * k + 1] = gk.y;
        }
        return g;
    }
    if (h_fd <= 0.0) h_fd = 2.0 * eval.poisson()->grid().dx;
    auto zs = z;
    for (int k = 0; k < 2 * m; ++k) {
        double* comp = (k % 2 == 0) ? &zs[k / 2].x : &zs[k / 2].y;
        const double save = *comp;
        *comp = save + h_fd;
        const double fp = eval_Phi(eval, flow, cfg, zs);
        *comp = save - h_fd;
        const double fm = eval_Phi(eval, flow, cfg, zs);
        *comp = save;
        g[k] = (fp - fm) / (2.0 * h_fd);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Critical point search
// ---------------------------------------------------------------------------

enum class CriticalKind { nondegenerate_min, nondegenerate_max, saddle, degenerate };

inline const char* critical_kind_name(CriticalKind k) {
    switch (k) {
        case CriticalKind::nondegenerate_min: return "nondegenerate-min";
        case CriticalKind::nondegenerate_max: return "nondegenerate-max";
        case CriticalKind::saddle: return "saddle";
        case CriticalKind::degenerate: return "degenerate";
    }
    return "unknown";
}

struct CriticalPoint {
    std::vector<Vec2> z;
    double grad_norm = 0.0;
    std::vector<double> hessian_eigs;  // sorted ascending
    CriticalKind kind = CriticalKind::degenerate;
    CriticalKind transversal_kind = CriticalKind::degenerate;  // orbit mode excluded
    bool orbit_degenerate = false;  // near-zero mode along a rotation orbit
    int iterations = 0;
    std::vector<std::pair<std::vector<Vec2>, double>> trajectory;  // (Z, |grad|)
};

struct FindCriticalOptions {
    double tol = 1e-10;
    int max_iter = 200;
    double h_fd = 0.0;       // gradient FD step (grid backend)
    double hess_step = 0.0;  // Hessian FD step; 0: auto
    double eig_zero_tol = 1e-6;
    bool record_trajectory = false;
};

using ObjectiveGradient =
    std::function<Eigen::VectorXd(const std::vector<Vec2>&)>;

namespace detail {

inline Eigen::MatrixXd fd_hessian(const ObjectiveGradient& grad, std::vector<Vec2> z,
                                  double h) {
    const int n = int(z.size()) * 2;
    Eigen::MatrixXd H(n, n);
    for (int k = 0; k < n; ++k) {
        double* comp = (k % 2 == 0) ? &z[k / 2].x : &z[k / 2].y;
        const double save = *comp;
        *comp = save + h;
        const Eigen::VectorXd gp = grad(z);
        *comp = save - h;
        const Eigen::VectorXd gm = grad(z);
        *comp = save;
        H.col(k) = (gp - gm) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

inline bool rotationally_symmetric(const DomainDescriptor& dom, const BackgroundFlow& flow) {
    return flow.is_zero &&
           (dom.kind == DomainKind::disk || dom.kind == DomainKind::annulus);
}

} // namespace detail

// Damped Newton on the gradient with a Levenberg trust fallback. Iterates are
// kept inside the admissible set; leaving it is a hard error naming the
// constraint. Classification uses the Hessian spectrum; on rotationally
// symmetric data the near-zero orbit mode is recognized and the transversal
// classification is reported alongside.
inline CriticalPoint find_critical_of(const PotentialEvaluator& eval,
                                      const BackgroundFlow& flow, const VortexConfig& cfg,
                                      const ObjectiveGradient& grad,
                                      std::vector<Vec2> z0,
                                      const FindCriticalOptions& opts = {}) {
    const DomainDescriptor& dom = eval.domain();
    check_admissible(dom, cfg, z0);
    const int n = int(z0.size()) * 2;

    const double hess_h =
        opts.hess_step > 0.0
            ? opts.hess_step
            : (eval.backend() == PotentialEvaluator::Backend::analytic_disk
                   ? 1e-5 * dom.inradius
                   : 2.5 * eval.poisson()->grid().dx);

    auto pack = [](const std::vector<Vec2>& zz) {
        Eigen::VectorXd v(2 * zz.size());
        for (std::size_t i = 0; i < zz.size(); ++i) {
            v[2 * i] = zz[i].x;
            v[2 * i + 1] = zz[i].y;
        }
        return v;
    };
    auto unpack = [](const Eigen::VectorXd& v) {
        std::vector<Vec2> zz(v.size() / 2);
        for (std::size_t i = 0; i < zz.size(); ++i) zz[i] = {v[2 * i], v[2 * i + 1]};
        return zz;
    };

    CriticalPoint out;
    std::vector<Vec2> z = z0;
    Eigen::VectorXd g = grad(z);
    double gn = g.norm();
    double lambda = 0.0;
    if (opts.record_trajectory) out.trajectory.push_back({z, gn});

    int it = 0;
    for (; it < opts.max_iter && gn > opts.tol; ++it) {
        Eigen::MatrixXd H = detail::fd_hessian(grad, z, hess_h);
        bool accepted = false;
        for (int attempt = 0; attempt < 25 && !accepted; ++attempt) {
            Eigen::MatrixXd Hreg = H + lambda * Eigen::MatrixXd::Identity(n, n);
            Eigen::VectorXd d = Hreg.fullPivLu().solve(-g);
            if (!d.allFinite()) {
                lambda = std::max(1e-8, lambda * 10.0);
                continue;
            }
            double alpha = 1.0;
            for (int ls = 0; ls < 30; ++ls) {
                const Eigen::VectorXd zt = pack(z) + alpha * d;
                const std::vector<Vec2> zz = unpack(zt);
                if (!is_admissible(dom, cfg, zz)) {
                    alpha *= 0.5;
                    continue;
                }
                const Eigen::VectorXd gt = grad(zz);
                if (gt.norm() < gn * (1.0 - 1e-4 * alpha) || gt.norm() < opts.tol) {
                    z = zz;
                    g = gt;
                    gn = gt.norm();
                    accepted = true;
                    lambda = std::max(0.0, lambda * 0.25);
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) lambda = std::max(1e-8, lambda * 10.0);
        }
        if (opts.record_trajectory) out.trajectory.push_back({z, gn});
        if (!accepted) {
            // either a barrier contact or genuine stagnation
            check_admissible(dom, cfg, z);
            fail(ErrorCode::newton_diverged,
                 "critical point search stalled at |grad| = " + std::to_string(gn));
        }
    }
    require(gn <= opts.tol, ErrorCode::newton_diverged,
            "critical point search did not converge");

    out.z = z;
    out.grad_norm = gn;
    out.iterations = it;

    Eigen::MatrixXd H = detail::fd_hessian(grad, z, hess_h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    out.hessian_eigs.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);

    const double scale = std::max(std::abs(out.hessian_eigs.front()),
                                  std::abs(out.hessian_eigs.back()));
    const double zero_tol = opts.eig_zero_tol * std::max(scale, 1e-12);

    auto classify = [&](const std::vector<double>& eigs) {
        int pos = 0, neg = 0, zero = 0;
        for (double e : eigs) {
            if (e > zero_tol) ++pos;
            else if (e < -zero_tol) ++neg;
            else ++zero;
        }
        if (zero > 0) return CriticalKind::degenerate;
        if (neg == 0) return CriticalKind::nondegenerate_min;
        if (pos == 0) return CriticalKind::nondegenerate_max;
        return CriticalKind::saddle;
    };
    out.kind = classify(out.hessian_eigs);
    out.transversal_kind = out.kind;

    if (out.kind == CriticalKind::degenerate &&
        detail::rotationally_symmetric(dom, flow)) {
        // rotation orbits of critical points carry one exact zero mode;
        // classify the remaining spectrum
        int zero_count = 0;
        std::vector<double> rest;
        for (double e : out.hessian_eigs) {
            if (std::abs(e) <= zero_tol) ++zero_count;
            else rest.push_back(e);
        }
        bool off_center = false;
        for (const auto& p : z)
            if (p.norm() > 10.0 * hess_h) off_center = true;
        if (zero_count == 1 && off_center) {
            out.orbit_degenerate = true;
            out.transversal_kind = classify(rest);
        }
    }
    return out;
}

inline CriticalPoint find_critical(const PotentialEvaluator& eval, const BackgroundFlow& flow,
                                   const VortexConfig& cfg, const std::vector<Vec2>& z0,
                                   const FindCriticalOptions& opts = {}) {
    return find_critical_of(
        eval, flow, cfg,
        [&](const std::vector<Vec2>& zz) { return grad_W(eval, flow, cfg, zz, opts.h_fd); },
        z0, opts);
}

inline CriticalPoint find_critical_phi(const PotentialEvaluator& eval,
                                       const BackgroundFlow& flow, const VortexConfig& cfg,
                                       const std::vector<Vec2>& z0,
                                       const FindCriticalOptions& opts = {}) {
    return find_critical_of(
        eval, flow, cfg,
        [&](const std::vector<Vec2>& zz) { return grad_Phi(eval, flow, cfg, zz, opts.h_fd); },
        z0, opts);
}

} // namespace vortexlab
