#pragma once

#include <chrono>
#include <deque>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "vortexlab/ansatz.hpp"

namespace vortexlab {

struct CoreComponent {
    int mask_id = -1;
    int n_cells = 0;
    double area = 0.0;
    Vec2 centroid;           // weighted by the active nonlinearity
    Vec2 centroid_geometric;
    double radius = 0.0;     // circumscribed about the weighted centroid
    double radius_equiv = 0.0;  // sqrt(area/pi)
    double max_excess = 0.0;    // max of (w - threshold) over the component
};

struct SolveReport {
    bool converged = false;
    std::string status;      // converged | converged-trivial | collapsed | diverged
    int iterations = 0;
    double final_residual = 0.0;
    std::vector<CoreComponent> cores;
    bool core_split = false;
    double eps = 0.0, delta = 0.0, p = 0.0;
    int nx = 0, ny = 0;
    double wall_seconds = 0.0;
};

struct NewtonOptions {
    double tol_rel = 1e-10;  // residual inf-norm below tol_rel * max kappa
    int max_iter = 50;
    bool use_cg = true;
    int cg_max_iter = 500;
    double cg_tol = 1e-10;
    bool check_cores = true;
    bool trace = false;  // per-iteration progress on stderr
};

// Grid discretization of the rescaled free-boundary problem. Cells whose
// centers fall outside the domain are Dirichlet ghosts (plain masking; the
// quantitative targets all live on interior cores). The workspace carries
// the cell classification, thresholds, and the symmetric 5-point Laplacian.
class FreeBoundaryWorkspace {
public:
    FreeBoundaryWorkspace(const DomainDescriptor& dom, const Grid& grid,
                          const BackgroundFlow& flow, const VortexConfig& cfg,
                          const ScaleParams& scale)
        : dom_(&dom), grid_(grid), cfg_(cfg), scale_(scale) {
        if (cfg_.use_masks && cfg_.masks.empty()) cfg_.masks = default_masks(dom, cfg_);
        if (!cfg_.use_masks) {
            for (double k : cfg_.kappa) {
                require(std::abs(k - cfg_.kappa[0]) < 1e-14, ErrorCode::config_invalid,
                        "the unmasked mode requires equal strengths");
            }
        }
        build(flow);
    }

    const Grid& grid() const { return grid_; }
    const VortexConfig& config() const { return cfg_; }
    const ScaleParams& scale() const { return scale_; }
    const std::vector<std::uint8_t>& mask() const { return interior_; }
    int n_interior() const { return n_; }
    double threshold_at_cell(int k) const { return tau_[k]; }
    int mask_id_of_cell(int k) const { return mask_id_[k]; }
    // interior cell index at (i,j), or -1
    int cell_index(int i, int j) const {
        return grid_.contains(i, j) ? cell_of_index_[grid_.index(i, j)] : -1;
    }

    GridField blank_field(FieldTag tag) const {
        GridField f(grid_, tag);
        f.mask = interior_;
        return f;
    }

    // F(w) = -delta^2 Lap_h(w) - sum_j chi_j (w - tau_j)_+^p on interior cells
    GridField residual(const GridField& w) const {
        check_field(w);
        GridField out = blank_field(FieldTag::generic);
        const double d2h2 = sq(scale_.delta) / sq(grid_.dx);
        for (int k = 0; k < n_; ++k) {
            const int i = cells_[k].i, j = cells_[k].j;
            const double wc = w.at(i, j);
            double lap = 4.0 * wc;
            lap -= value_or_zero(w, i + 1, j);
            lap -= value_or_zero(w, i - 1, j);
            lap -= value_or_zero(w, i, j + 1);
            lap -= value_or_zero(w, i, j - 1);
            double r = d2h2 * lap;
            if (mask_id_[k] >= 0) r -= plus_pow(wc - tau_[k], scale_.p);
            out.at(i, j) = r;
        }
        return out;
    }

    double residual_inf_norm(const GridField& w) const {
        const GridField r = residual(w);
        double v = 0.0;
        for (double x : r.values) v = std::max(v, std::abs(x));
        return v;
    }

    // connected components (4-connectivity) of the active set, grouped by mask
    std::vector<CoreComponent> detect_cores(const GridField& w) const {
        check_field(w);
        std::vector<int> label(grid_.size(), -1);
        std::vector<CoreComponent> comps;
        for (int k = 0; k < n_; ++k) {
            const int i0 = cells_[k].i, j0 = cells_[k].j;
            const int idx0 = grid_.index(i0, j0);
            if (label[idx0] >= 0 || mask_id_[k] < 0) continue;
            if (w.values[idx0] <= tau_[k]) continue;

            CoreComponent c;
            c.mask_id = group_of_cell(k);
            std::deque<int> queue{k};
            label[idx0] = int(comps.size());
            double wx = 0.0, wsum = 0.0;
            Vec2 gsum{0, 0}, wvec{0, 0};
            std::vector<Vec2> members;
            while (!queue.empty()) {
                const int kc = queue.front();
                queue.pop_front();
                const int ci = cells_[kc].i, cj = cells_[kc].j;
                const Vec2 x = grid_.center(ci, cj);
                const double excess = w.at(ci, cj) - tau_[kc];
                const double wgt = plus_pow(excess, scale_.p);
                ++c.n_cells;
                c.max_excess = std::max(c.max_excess, excess);
                gsum += x;
                wvec += wgt * x;
                wsum += wgt;
                members.push_back(x);
                const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int ni = ci + di[d], nj = cj + dj[d];
                    if (!grid_.contains(ni, nj)) continue;
                    const int nidx = grid_.index(ni, nj);
                    if (label[nidx] >= 0 || !interior_[nidx]) continue;
                    const int nk = cell_of_index_[nidx];
                    if (mask_id_[nk] < 0) continue;
                    if (group_of_cell(nk) != c.mask_id) continue;
                    if (w.values[nidx] <= tau_[nk]) continue;
                    label[nidx] = label[idx0];
                    queue.push_back(nk);
                }
                (void)wx;
            }
            c.area = c.n_cells * grid_.dx * grid_.dy;
            c.centroid_geometric = gsum / double(c.n_cells);
            c.centroid = wsum > 0 ? wvec / wsum : c.centroid_geometric;
            double rmax = 0.0;
            for (const Vec2& x : members) rmax = std::max(rmax, dist(x, c.centroid));
            c.radius = rmax + 0.5 * grid_.dx;
            c.radius_equiv = std::sqrt(c.area / pi);
            comps.push_back(std::move(c));
        }
        std::sort(comps.begin(), comps.end(),
                  [](const CoreComponent& a, const CoreComponent& b) {
                      return a.mask_id < b.mask_id;
                  });
        return comps;
    }

    // Damped Newton from a seed satisfying the boundary condition. Linear
    // solves try diagonally preconditioned CG first and fall back to a sparse
    // LU step when curvature turns negative or CG stalls (the linearization
    // is symmetric but can be indefinite across vortex cores).
    std::pair<GridField, SolveReport> newton_solve(const GridField& seed,
                                                   const NewtonOptions& opts = {}) const {
        check_field(seed);
        const auto t_start = std::chrono::steady_clock::now();

        double kmax = 0.0, kmin = std::numeric_limits<double>::infinity();
        for (double k : cfg_.kappa) {
            kmax = std::max(kmax, k);
            kmin = std::min(kmin, k);
        }
        const double tol = opts.tol_rel * kmax;

        GridField w = blank_field(FieldTag::w);
        for (int k = 0; k < n_; ++k) {
            const int idx = grid_.index(cells_[k].i, cells_[k].j);
            w.values[idx] = seed.values[idx];
        }
        double seed_max = 0.0;
        for (double v : w.values) seed_max = std::max(seed_max, v);
        const bool vortex_seed = seed_max > 0.5 * kmin;

        SolveReport rep;
        rep.eps = scale_.eps;
        rep.delta = scale_.delta;
        rep.p = scale_.p;
        rep.nx = grid_.nx;
        rep.ny = grid_.ny;

        GridField F = residual(w);
        double fn = inf_norm(F);
        double fn2 = two_norm(F);
        int it = 0;
        for (; it < opts.max_iter && fn > tol; ++it) {
            Eigen::VectorXd rhs(n_);
            Eigen::VectorXd diag_nl(n_);
            for (int k = 0; k < n_; ++k) {
                rhs[k] = -F.values[grid_.index(cells_[k].i, cells_[k].j)];
                const double wc = w.at(cells_[k].i, cells_[k].j);
                diag_nl[k] = mask_id_[k] >= 0
                                 ? scale_.p * plus_pow(wc - tau_[k], scale_.p - 1.0)
                                 : 0.0;
            }

            // Levenberg ladder: the linearization can be near-singular along
            // symmetry orbits of multi-vortex configurations
            const double lam_unit = 4.0 * sq(scale_.delta) / sq(grid_.dx);
            bool accepted = false;
            double lambda = 0.0;
            for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
                Eigen::VectorXd d;
                bool have_dir = (lambda == 0.0 && opts.use_cg) &&
                                cg_solve(diag_nl, rhs, lambda, opts, d);
                if (!have_dir) d = lu_solve(diag_nl, lambda, rhs);

                double alpha = 1.0, alpha_used = 0.0;
                for (int ls = 0; ls < 14; ++ls) {
                    GridField wt = w;
                    for (int k = 0; k < n_; ++k) {
                        wt.values[grid_.index(cells_[k].i, cells_[k].j)] += alpha * d[k];
                    }
                    GridField Ft = residual(wt);
                    const double fnt = inf_norm(Ft);
                    const double fnt2 = two_norm(Ft);
                    if (fnt2 <= fn2 * (1.0 - 1e-4 * alpha) || fnt < tol) {
                        w = std::move(wt);
                        F = std::move(Ft);
                        fn = fnt;
                        fn2 = fnt2;
                        accepted = true;
                        alpha_used = alpha;
                        break;
                    }
                    alpha *= 0.5;
                }
                if (opts.trace) {
                    std::fprintf(stderr,
                                 "  newton it=%d attempt=%d lambda=%.1e accepted=%d "
                                 "alpha=%.2e |d|=%.3e fn=%.3e fn2=%.3e\n",
                                 it, attempt, lambda, int(accepted), alpha_used,
                                 d.lpNorm<Eigen::Infinity>(), fn, fn2);
                }
                if (!accepted) lambda = (lambda == 0.0) ? 1e-6 * lam_unit : lambda * 30.0;
            }
            if (!accepted) {
                rep.status = "diverged";
                rep.iterations = it + 1;
                rep.final_residual = fn;
                fail(ErrorCode::newton_diverged,
                     "damped Newton stalled at residual " + std::to_string(fn));
            }

            double wmax = 0.0;
            for (double v : w.values) wmax = std::max(wmax, v);
            if (vortex_seed && wmax < 0.5 * kmin) {
                rep.status = "collapsed";
                rep.iterations = it + 1;
                rep.final_residual = fn;
                rep.wall_seconds = elapsed(t_start);
                fail(ErrorCode::vortex_collapsed,
                     "solution collapsed to the trivial branch from a vortex seed");
            }
        }

        rep.converged = fn <= tol;
        rep.iterations = it;
        rep.final_residual = fn;
        require(rep.converged, ErrorCode::newton_diverged,
                "Newton did not reach tolerance in " + std::to_string(opts.max_iter) +
                    " iterations");

        rep.cores = detect_cores(w);
        double wmax = 0.0;
        for (double v : w.values) wmax = std::max(wmax, v);
        if (rep.cores.empty()) {
            rep.status = vortex_seed ? "collapsed" : "converged-trivial";
            if (vortex_seed) {
                rep.wall_seconds = elapsed(t_start);
                fail(ErrorCode::vortex_collapsed,
                     "no active set in the converged solution from a vortex seed");
            }
        } else {
            rep.status = "converged";
            if (opts.check_cores) validate_cores(rep);
        }
        rep.wall_seconds = elapsed(t_start);
        return {std::move(w), std::move(rep)};
    }

    // u = |ln eps| / (2 pi) * w
    GridField recover_u(const GridField& w) const {
        GridField u = w;
        u.tag = FieldTag::u;
        const double c = scale_.abs_ln_eps / two_pi;
        for (double& v : u.values) v *= c;
        return u;
    }

private:
    struct Cell { int i, j; };

    static double elapsed(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    static double inf_norm(const GridField& f) {
        double v = 0.0;
        for (double x : f.values) v = std::max(v, std::abs(x));
        return v;
    }

    static double two_norm(const GridField& f) {
        double v = 0.0;
        for (double x : f.values) v += x * x;
        return std::sqrt(v);
    }

    double value_or_zero(const GridField& w, int i, int j) const {
        if (!grid_.contains(i, j)) return 0.0;
        const int idx = grid_.index(i, j);
        return interior_[idx] ? w.values[idx] : 0.0;
    }

    void check_field(const GridField& f) const {
        require(f.grid.nx == grid_.nx && f.grid.ny == grid_.ny, ErrorCode::shape_mismatch,
                "field grid does not match the workspace grid");
    }

    int group_of_cell(int k) const {
        if (cfg_.use_masks) return mask_id_[k];
        // unmasked mode: group activity by the nearest vortex
        const Vec2 x = grid_.center(cells_[k].i, cells_[k].j);
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int j = 0; j < cfg_.m(); ++j) {
            const double d = dist(x, cfg_.z[j]);
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        return best;
    }

    void validate_cores(SolveReport& rep) const {
        std::vector<int> count(cfg_.m(), 0);
        for (const auto& c : rep.cores) {
            if (c.mask_id >= 0 && c.mask_id < cfg_.m()) ++count[c.mask_id];
            if (cfg_.use_masks) {
                const MaskDisk& mk = cfg_.masks[c.mask_id];
                require(dist(c.centroid, mk.center) + c.radius < mk.radius + grid_.dx,
                        ErrorCode::core_touches_mask,
                        "core " + std::to_string(c.mask_id) + " touches its mask boundary");
            }
        }
        for (int j = 0; j < cfg_.m(); ++j) {
            if (count[j] > 1) rep.core_split = true;
        }
    }

    void build(const BackgroundFlow& flow) {
        interior_.assign(grid_.size(), 0);
        cell_of_index_.assign(grid_.size(), -1);
        for (int j = 0; j < grid_.ny; ++j) {
            for (int i = 0; i < grid_.nx; ++i) {
                if (dom_->inside(grid_.center(i, j))) {
                    interior_[grid_.index(i, j)] = 1;
                    cell_of_index_[grid_.index(i, j)] = int(cells_.size());
                    cells_.push_back({i, j});
                }
            }
        }
        n_ = int(cells_.size());
        tau_.resize(n_);
        mask_id_.resize(n_);
        for (int k = 0; k < n_; ++k) {
            const Vec2 x = grid_.center(cells_[k].i, cells_[k].j);
            int id = -1;
            if (cfg_.use_masks) {
                for (int j = 0; j < cfg_.m(); ++j) {
                    if (cfg_.masks[j].contains(x)) {
                        id = j;
                        break;
                    }
                }
            } else {
                id = 0;
            }
            mask_id_[k] = id;
            const double q = flow.q_at(x);
            tau_[k] = id >= 0 ? scale_.threshold(cfg_.kappa[id], q) : 0.0;
        }

        // symmetric masked 5-point Laplacian, h^2-scaled
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(std::size_t(n_) * 5);
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < n_; ++k) {
            trip.emplace_back(k, k, 4.0);
            for (int d = 0; d < 4; ++d) {
                const int ii = cells_[k].i + di[d], jj = cells_[k].j + dj[d];
                if (grid_.contains(ii, jj) && interior_[grid_.index(ii, jj)]) {
                    trip.emplace_back(k, cell_of_index_[grid_.index(ii, jj)], -1.0);
                }
            }
        }
        lap_.resize(n_, n_);
        lap_.setFromTriplets(trip.begin(), trip.end());
        lap_.makeCompressed();
    }

    // J = delta^2/h^2 * L - diag(diag_nl) + lambda I
    Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& diag_nl, double lambda) const {
        Eigen::SparseMatrix<double> J = (sq(scale_.delta) / sq(grid_.dx)) * lap_;
        for (int k = 0; k < n_; ++k) J.coeffRef(k, k) += lambda - diag_nl[k];
        return J;
    }

    bool cg_solve(const Eigen::VectorXd& diag_nl, const Eigen::VectorXd& rhs, double lambda,
                  const NewtonOptions& opts, Eigen::VectorXd& x) const {
        const double scale_lap = sq(scale_.delta) / sq(grid_.dx);
        auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            Eigen::VectorXd out = scale_lap * (lap_ * v);
            out += (lambda * v - diag_nl.cwiseProduct(v).eval()).eval();
            return out;
        };
        Eigen::VectorXd precond(n_);
        for (int k = 0; k < n_; ++k) {
            const double dkk = 4.0 * scale_lap + lambda - diag_nl[k];
            precond[k] = std::abs(dkk) > 1e-300 ? 1.0 / dkk : 1.0;
        }

        x = Eigen::VectorXd::Zero(n_);
        Eigen::VectorXd r = rhs;
        Eigen::VectorXd z = precond.cwiseProduct(r);
        Eigen::VectorXd pdir = z;
        double rz = r.dot(z);
        const double target = opts.cg_tol * rhs.norm();
        for (int it = 0; it < opts.cg_max_iter; ++it) {
            if (r.norm() <= target) return true;
            const Eigen::VectorXd Ap = apply(pdir);
            const double pAp = pdir.dot(Ap);
            if (pAp <= 0.0) return false;  // negative curvature: hand off to LU
            const double alpha = rz / pAp;
            x += alpha * pdir;
            r -= alpha * Ap;
            z = precond.cwiseProduct(r);
            const double rz_new = r.dot(z);
            pdir = z + (rz_new / rz) * pdir;
            rz = rz_new;
        }
        return r.norm() <= target;
    }

    Eigen::VectorXd lu_solve(const Eigen::VectorXd& diag_nl, double lambda,
                             const Eigen::VectorXd& rhs) const {
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jacobian(diag_nl, lambda));
        require(lu.info() == Eigen::Success, ErrorCode::linear_system_singular,
                "Newton linearization is singular");
        Eigen::VectorXd d = lu.solve(rhs);
        require(lu.info() == Eigen::Success, ErrorCode::linear_system_singular,
                "Newton step solve failed");
        return d;
    }

    const DomainDescriptor* dom_;
    Grid grid_;
    VortexConfig cfg_;
    ScaleParams scale_;
    std::vector<std::uint8_t> interior_;
    std::vector<int> cell_of_index_;
    std::vector<Cell> cells_;
    std::vector<double> tau_;
    std::vector<int> mask_id_;
    Eigen::SparseMatrix<double> lap_;
    int n_ = 0;
};

// spec-shaped free functions

inline GridField residual(const GridField& w, const DomainDescriptor& dom,
                          const BackgroundFlow& flow, const VortexConfig& cfg,
                          const ScaleParams& scale) {
    FreeBoundaryWorkspace ws(dom, w.grid, flow, cfg, scale);
    return ws.residual(w);
}

struct ContinuationStep {
    double eps = 0.0;
    GridField w;
    GridField u;
    SolveReport report;
    AnsatzParams params;
};

// Continuation in eps: the first solve is seeded by the ansatz, later ones by
// the previous solution shifted by the ansatz difference at the new scale.
inline std::vector<ContinuationStep> continue_in_eps(
    const PotentialEvaluator& eval, const BackgroundFlow& flow, const VortexConfig& cfg_in,
    const std::vector<double>& eps_list, const ProfileSolution& profile, const Grid& grid,
    const NewtonOptions& opts = {}) {
    require(!eps_list.empty(), ErrorCode::config_invalid, "empty eps list");
    require(eps_list.front() <= 0.2, ErrorCode::config_invalid,
            "continuation must start at eps <= 0.2");
    for (std::size_t i = 1; i < eps_list.size(); ++i) {
        require(eps_list[i] < eps_list[i - 1], ErrorCode::config_invalid,
                "eps list must be strictly decreasing");
    }

    VortexConfig cfg = cfg_in;
    if (cfg.use_masks && cfg.masks.empty()) cfg.masks = default_masks(eval.domain(), cfg);

    std::vector<ContinuationStep> steps;
    GridField prev_w;
    GridField prev_ansatz;
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        const ScaleParams scale = ScaleParams::make(eps_list[i], profile.p);
        try {
            AnsatzParams params = solve_params(eval, flow, cfg, scale, profile);
            GridField ans = assemble_ansatz(eval, flow, cfg, params, scale, profile, grid);
            GridField seed = ans;
            if (i > 0) {
                seed = prev_w;
                for (std::size_t k = 0; k < seed.values.size(); ++k) {
                    seed.values[k] += ans.values[k] - prev_ansatz.values[k];
                }
            }
            FreeBoundaryWorkspace ws(eval.domain(), grid, flow, cfg, scale);
            auto [w, rep] = ws.newton_solve(seed, opts);
            prev_w = w;
            prev_ansatz = std::move(ans);
            ContinuationStep st;
            st.eps = eps_list[i];
            st.u = ws.recover_u(w);
            st.w = std::move(w);
            st.report = std::move(rep);
            st.params = std::move(params);
            steps.push_back(std::move(st));
        } catch (const Error& e) {
            throw Error(e.code(), "continuation failed at eps = " +
                                      std::to_string(eps_list[i]) + ": " + e.what());
        }
    }
    return steps;
}

} // namespace vortexlab
