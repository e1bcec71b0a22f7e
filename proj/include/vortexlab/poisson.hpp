#pragma once

#include <functional>
#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "vortexlab/domain.hpp"

namespace vortexlab {

// Dirichlet Laplace/Poisson solver on a masked Cartesian grid.
//
// Interior cells are grid cells whose centers satisfy the domain indicator.
// Edges cut by the boundary use Shortley-Weller coefficients with the cut
// fraction found by bisection on the indicator, and the boundary value is
// imposed at the actual cut point. The operator matrix is factored once and
// reused across right-hand sides, which is what makes per-source Green
// function solves cheap.
class DirichletPoisson {
public:
    using BoundaryFn = std::function<double(const Vec2&)>;
    using SourceFn = std::function<double(const Vec2&)>;

    DirichletPoisson(const DomainDescriptor& dom, const Grid& grid)
        : dom_(&dom), grid_(grid) {
        build();
    }

    const Grid& grid() const { return grid_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }
    int n_interior() const { return n_; }

    // solve  -Laplace(u) = f  in Omega,  u = bc  on the boundary.
    // f == nullptr means the homogeneous (harmonic extension) problem.
    GridField solve(const BoundaryFn& bc, const SourceFn& f = nullptr,
                    FieldTag tag = FieldTag::generic) const {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_);
        const double h2 = grid_.dx * grid_.dx;
        if (f) {
            for (int k = 0; k < n_; ++k) rhs[k] = h2 * f(grid_.center(cells_[k].i, cells_[k].j));
        }
        for (const auto& b : bc_terms_) rhs[b.row] += b.coeff * bc(b.point);

        Eigen::VectorXd u = lu_.solve(rhs);
        require(lu_.info() == Eigen::Success, ErrorCode::laplace_no_convergence,
                "sparse solve failed");

        GridField out(grid_);
        out.tag = tag;
        out.mask = mask_;
        for (int k = 0; k < n_; ++k) out.values[grid_.index(cells_[k].i, cells_[k].j)] = u[k];
        // exterior cells carry the boundary data so interpolation stays
        // accurate right up to the boundary
        for (int j = 0; j < grid_.ny; ++j) {
            for (int i = 0; i < grid_.nx; ++i) {
                const int idx = grid_.index(i, j);
                if (!mask_[idx]) out.values[idx] = bc(grid_.center(i, j));
            }
        }
        return out;
    }

    // max |5-point Laplacian| over interior cells with all-interior stencils;
    // used by harmonicity checks
    static double interior_laplacian_residual(const GridField& u) {
        double worst = 0.0;
        const Grid& g = u.grid;
        for (int j = 1; j + 1 < g.ny; ++j) {
            for (int i = 1; i + 1 < g.nx; ++i) {
                if (!u.interior(i, j) || !u.interior(i - 1, j) || !u.interior(i + 1, j) ||
                    !u.interior(i, j - 1) || !u.interior(i, j + 1))
                    continue;
                const double lap = (u.at(i + 1, j) + u.at(i - 1, j) + u.at(i, j + 1) +
                                    u.at(i, j - 1) - 4.0 * u.at(i, j)) /
                                   (g.dx * g.dx);
                worst = std::max(worst, std::abs(lap));
            }
        }
        return worst;
    }

private:
    struct Cell { int i, j; };
    struct BcTerm {
        int row;
        double coeff;  // multiplies the boundary value in the RHS
        Vec2 point;    // cut point on the true boundary
    };

    void build() {
        mask_.assign(grid_.size(), 0);
        idx_.assign(grid_.size(), -1);
        for (int j = 0; j < grid_.ny; ++j) {
            for (int i = 0; i < grid_.nx; ++i) {
                if (dom_->inside(grid_.center(i, j))) {
                    mask_[grid_.index(i, j)] = 1;
                    idx_[grid_.index(i, j)] = int(cells_.size());
                    cells_.push_back({i, j});
                }
            }
        }
        n_ = int(cells_.size());
        require(n_ > 0, ErrorCode::unresolved_geometry, "no interior cells at this resolution");

        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(std::size_t(n_) * 5);
        const int di[4] = {1, -1, 0, 0};
        const int dj[4] = {0, 0, 1, -1};
        constexpr double theta_min = 1e-2;

        for (int k = 0; k < n_; ++k) {
            const int i = cells_[k].i, j = cells_[k].j;
            const Vec2 c = grid_.center(i, j);
            double theta[4];
            int nb[4];
            Vec2 cut[4];
            for (int d = 0; d < 4; ++d) {
                const int ii = i + di[d], jj = j + dj[d];
                if (grid_.contains(ii, jj) && mask_[grid_.index(ii, jj)]) {
                    nb[d] = idx_[grid_.index(ii, jj)];
                    theta[d] = 1.0;
                } else {
                    nb[d] = -1;
                    const Vec2 e = grid_.center(ii, jj);
                    double lo = 0.0, hi = 1.0;
                    for (int it = 0; it < 50; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        (dom_->inside(c + mid * (e - c)) ? lo : hi) = mid;
                    }
                    theta[d] = std::max(0.5 * (lo + hi), theta_min);
                    cut[d] = c + 0.5 * (lo + hi) * (e - c);
                }
            }
            // Shortley-Weller coefficients for -u'' on the pair (d, d_opp),
            // scaled by h^2 (the RHS carries h^2 f)
            double diag = 0.0;
            for (int axis = 0; axis < 2; ++axis) {
                const int dp = 2 * axis, dm = 2 * axis + 1;
                const double tp = theta[dp], tm = theta[dm];
                diag += 2.0 / (tp * tm);
                const double cp = 2.0 / (tp * (tp + tm));
                const double cm = 2.0 / (tm * (tp + tm));
                if (nb[dp] >= 0) trip.emplace_back(k, nb[dp], -cp);
                else bc_terms_.push_back({k, cp, cut[dp]});
                if (nb[dm] >= 0) trip.emplace_back(k, nb[dm], -cm);
                else bc_terms_.push_back({k, cm, cut[dm]});
            }
            trip.emplace_back(k, k, diag);
        }

        mat_.resize(n_, n_);
        mat_.setFromTriplets(trip.begin(), trip.end());
        mat_.makeCompressed();
        lu_.compute(mat_);
        require(lu_.info() == Eigen::Success, ErrorCode::linear_system_singular,
                "Laplace operator factorization failed");
    }

    const DomainDescriptor* dom_;
    Grid grid_;
    std::vector<std::uint8_t> mask_;
    std::vector<int> idx_;
    std::vector<Cell> cells_;
    std::vector<BcTerm> bc_terms_;
    Eigen::SparseMatrix<double> mat_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    int n_ = 0;
};

} // namespace vortexlab
