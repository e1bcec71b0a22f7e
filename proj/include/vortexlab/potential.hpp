#pragma once

#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "vortexlab/poisson.hpp"

namespace vortexlab {

// Potential-theoretic objects of a domain: Dirichlet Green function G, its
// regular part H (Robin function on the diagonal), and the projection
// kernels g(x,z) = ln R + 2*pi*H(x,z), Gbar(x,z) = ln(R/|x-z|) - g(x,z).
//
// Backends: closed image formulas on a disk, or grid-harmonic solves with a
// cached factorization everywhere else. Immutable after construction; the
// internal field cache is guarded so concurrent reads are safe.
class PotentialEvaluator {
public:
    enum class Backend { analytic_disk, grid_harmonic };

    static PotentialEvaluator analytic_disk(const DomainDescriptor& dom) {
        require(dom.kind == DomainKind::disk, ErrorCode::config_invalid,
                "analytic backend requires a disk domain");
        PotentialEvaluator ev;
        ev.dom_ = &dom;
        ev.backend_ = Backend::analytic_disk;
        ev.rho_ = dom.shape_params[0];
        return ev;
    }

    static PotentialEvaluator grid_harmonic(const DomainDescriptor& dom, int resolution = 0) {
        PotentialEvaluator ev;
        ev.dom_ = &dom;
        ev.backend_ = Backend::grid_harmonic;
        const int res = resolution > 0 ? resolution : dom.resolution;
        ev.poisson_ = std::make_shared<DirichletPoisson>(dom, make_grid(dom, res));
        return ev;
    }

    Backend backend() const { return backend_; }
    const DomainDescriptor& domain() const { return *dom_; }
    double enclosing_radius() const { return dom_->enclosing_radius; }
    const DirichletPoisson* poisson() const { return poisson_.get(); }

    // G(x,y), the Green function of -Laplace with zero Dirichlet data
    double green(const Vec2& x, const Vec2& y) const {
        check_pair(x, y);
        return newton_kernel(x, y) - regular_part(x, y);
    }

    // H(x,y): harmonic in x, equal to the Newton kernel on the boundary
    double regular_part(const Vec2& x, const Vec2& y) const {
        if (backend_ == Backend::analytic_disk) {
            const Vec2 u = x / rho_, v = y / rho_;
            const double Q = u.norm2() * v.norm2() - 2.0 * u.dot(v) + 1.0;
            return -std::log(Q) / (4.0 * pi) - std::log(rho_) / two_pi;
        }
        return h_field(y)->sample(x);
    }

    // Robin function H(z,z)
    double robin(const Vec2& z) const {
        require(dom_->inside(z), ErrorCode::point_outside_domain, "robin: z outside domain");
        if (backend_ == Backend::analytic_disk) {
            return -std::log((rho_ * rho_ - z.norm2()) / rho_) / two_pi;
        }
        return h_field(z)->sample(z);
    }

    // h(x,z): sign fixed by the requirement Gbar = 2*pi*G (checked in tests)
    double h_fun(const Vec2& x, const Vec2& z) const { return regular_part(x, z); }

    // g(x,z): harmonic in x with boundary values ln(R/|x-z|)
    double g_fun(const Vec2& x, const Vec2& z) const {
        return std::log(dom_->enclosing_radius) + two_pi * regular_part(x, z);
    }

    double g_bar(const Vec2& x, const Vec2& z) const {
        check_pair(x, z);
        return std::log(dom_->enclosing_radius / dist(x, z)) - g_fun(x, z);
    }

    // x-gradients (analytic backend exact; grid backend interpolated)
    Vec2 grad_x_regular_part(const Vec2& x, const Vec2& y) const {
        if (backend_ == Backend::analytic_disk) {
            const Vec2 u = x / rho_, v = y / rho_;
            const double Q = u.norm2() * v.norm2() - 2.0 * u.dot(v) + 1.0;
            return (-1.0 / (two_pi * Q * rho_)) * (v.norm2() * u - v);
        }
        return h_field(y)->sample_gradient(x);
    }

    Vec2 grad_x_green(const Vec2& x, const Vec2& y) const {
        check_pair(x, y);
        const Vec2 d = x - y;
        return (-1.0 / (two_pi * d.norm2())) * d - grad_x_regular_part(x, y);
    }

    // full derivative of the diagonal map z -> H(z,z); equals 2*grad_x H by symmetry
    Vec2 grad_robin(const Vec2& z) const {
        if (backend_ == Backend::analytic_disk) {
            return (1.0 / (pi * (rho_ * rho_ - z.norm2()))) * z;
        }
        return 2.0 * h_field(z)->sample_gradient(z);
    }

    Vec2 grad_x_g(const Vec2& x, const Vec2& z) const {
        return two_pi * grad_x_regular_part(x, z);
    }

    Vec2 grad_x_gbar(const Vec2& x, const Vec2& z) const {
        const Vec2 d = x - z;
        return (-1.0 / d.norm2()) * d - grad_x_g(x, z);
    }

    // harmonic field H(.,y) on the grid (grid backend); exposed for reuse by
    // the projection assembly
    std::shared_ptr<const GridField> h_field(const Vec2& y) const {
        require(backend_ == Backend::grid_harmonic, ErrorCode::config_invalid,
                "h_field requires the grid backend");
        {
            std::lock_guard<std::mutex> lk(cache_->mutex);
            auto it = cache_->fields.find(key(y));
            if (it != cache_->fields.end()) return it->second;
        }
        auto field = std::make_shared<GridField>(
            poisson_->solve([&](const Vec2& b) { return newton_kernel(b, y); }));
        {
            std::lock_guard<std::mutex> lk(cache_->mutex);
            if (cache_->fields.size() > 256) cache_->fields.clear();
            cache_->fields[key(y)] = field;
        }
        return field;
    }

    static double newton_kernel(const Vec2& x, const Vec2& y) {
        return std::log(1.0 / dist(x, y)) / two_pi;
    }

private:
    PotentialEvaluator() = default;

    void check_pair(const Vec2& x, const Vec2& y) const {
        require(dom_->inside(x) && dom_->inside(y), ErrorCode::point_outside_domain,
                "evaluation point outside domain");
        require(dist(x, y) > 1e-14, ErrorCode::singular_evaluation, "x == y is singular");
    }

    static std::pair<double, double> key(const Vec2& y) { return {y.x, y.y}; }

    struct FieldCache {
        std::mutex mutex;
        std::map<std::pair<double, double>, std::shared_ptr<const GridField>> fields;
    };

    const DomainDescriptor* dom_ = nullptr;
    Backend backend_ = Backend::analytic_disk;
    double rho_ = 1.0;
    std::shared_ptr<DirichletPoisson> poisson_;
    std::shared_ptr<FieldCache> cache_ = std::make_shared<FieldCache>();
};

// ---------------------------------------------------------------------------
// Background flow from prescribed boundary flux
// ---------------------------------------------------------------------------

// Stream function psi0 of the harmonic field with outward normal velocity
// v_n on the boundary, and q = -psi0. Gauge: psi0 = 0 at the start of the
// boundary parametrization.
struct BackgroundFlow {
    bool is_zero = true;
    std::vector<double> vn_samples;     // at loop-0 sample points
    std::vector<double> psi0_boundary;  // cumulative -integral of v_n
    GridField psi0;                     // sampled field (tag psi0)
    double flux_integral = 0.0;
    double harmonic_residual = 0.0;     // interior 5-point residual (grid backend)

    // analytic-disk representation: psi0 = c0 + sum_k (r/rho)^k (ak cos + bk sin)
    bool analytic = false;
    double rho = 1.0;
    std::vector<double> fourier_a, fourier_b;
    double fourier_c0 = 0.0;

    double psi0_at(const Vec2& p) const {
        if (is_zero) return 0.0;
        if (analytic) {
            const double r = p.norm() / rho, th = std::atan2(p.y, p.x);
            double v = fourier_c0, rk = 1.0;
            for (std::size_t k = 1; k <= fourier_a.size(); ++k) {
                rk *= r;
                v += rk * (fourier_a[k - 1] * std::cos(k * th) +
                           fourier_b[k - 1] * std::sin(k * th));
            }
            return v;
        }
        return psi0.sample(p);
    }

    double q_at(const Vec2& p) const { return -psi0_at(p); }

    Vec2 grad_q(const Vec2& p) const {
        if (is_zero) return {0.0, 0.0};
        if (analytic) {
            // differentiate the trig expansion in Cartesian form via r,theta
            const double r = p.norm();
            if (r < 1e-12) {
                // only the k=1 mode contributes at the center
                Vec2 g{0.0, 0.0};
                if (!fourier_a.empty()) {
                    g = {fourier_a[0] / rho, fourier_b[0] / rho};
                }
                return {-g.x, -g.y};
            }
            const double th = std::atan2(p.y, p.x);
            double dpsi_dr = 0.0, dpsi_dth = 0.0, rk = 1.0;
            for (std::size_t k = 1; k <= fourier_a.size(); ++k) {
                const double rr = std::pow(r / rho, double(k));
                dpsi_dr += double(k) / r * rr *
                           (fourier_a[k - 1] * std::cos(k * th) + fourier_b[k - 1] * std::sin(k * th));
                dpsi_dth += rr * double(k) *
                            (-fourier_a[k - 1] * std::sin(k * th) + fourier_b[k - 1] * std::cos(k * th));
                (void)rk;
            }
            const Vec2 er{std::cos(th), std::sin(th)}, eth{-std::sin(th), std::cos(th)};
            const Vec2 gpsi = dpsi_dr * er + (dpsi_dth / r) * eth;
            return {-gpsi.x, -gpsi.y};
        }
        const Vec2 g = psi0.sample_gradient(p);
        return {-g.x, -g.y};
    }
};

namespace detail {

// interpolated arclength of the projection of p onto the loop polyline
inline double loop_arclength_of(const BoundaryLoop& loop, const Vec2& p) {
    double best = std::numeric_limits<double>::infinity();
    double s_best = 0.0;
    for (std::size_t i = 0; i + 1 < loop.pts.size(); ++i) {
        const Vec2 a = loop.pts[i], b = loop.pts[i + 1];
        const Vec2 ab = b - a;
        const double len2 = ab.norm2();
        const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const double d = dist(p, a + t * ab);
        if (d < best) {
            best = d;
            s_best = loop.s[i] + t * (loop.s[i + 1] - loop.s[i]);
        }
    }
    return s_best;
}

inline double interp_periodic(const std::vector<double>& s, const std::vector<double>& v,
                              double sq) {
    // s strictly increasing with s.front()=0; v has one value per sample of s
    const double L = s.back();
    double t = std::fmod(sq, L);
    if (t < 0) t += L;
    auto it = std::upper_bound(s.begin(), s.end(), t);
    std::size_t hi = std::min<std::size_t>(it - s.begin(), s.size() - 1);
    std::size_t lo = hi - 1;
    const double w = (t - s[lo]) / (s[hi] - s[lo]);
    return v[lo] + w * (v[hi] - v[lo]);
}

} // namespace detail

// vn_samples holds one value per boundary sample point of the outer loop
// (the closing duplicate is implied). Rejects nonzero net flux.
inline BackgroundFlow solve_background(const PotentialEvaluator& eval,
                                       std::vector<double> vn_samples) {
    const DomainDescriptor& dom = eval.domain();
    const BoundaryLoop& loop = dom.loops[0];
    const std::size_t n = loop.pts.size() - 1;
    require(vn_samples.size() == n || vn_samples.empty(), ErrorCode::config_invalid,
            "flux sample count must match the boundary parametrization");

    BackgroundFlow flow;
    if (vn_samples.empty()) vn_samples.assign(n, 0.0);
    flow.vn_samples = vn_samples;

    double vmax = 0.0;
    for (double v : vn_samples) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0.0) {
        flow.is_zero = true;
        if (eval.backend() == PotentialEvaluator::Backend::grid_harmonic) {
            flow.psi0 = GridField(eval.poisson()->grid(), FieldTag::psi0);
            flow.psi0.mask = eval.poisson()->mask();
        }
        return flow;
    }

    require(dom.simply_connected(), ErrorCode::config_invalid,
            "nonzero boundary flux is supported on simply connected domains only");

    // trapezoid on the closed polyline
    double flux = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ds = loop.s[i + 1] - loop.s[i];
        flux += 0.5 * (vn_samples[i] + vn_samples[(i + 1) % n]) * ds;
    }
    flow.flux_integral = flux;
    require(std::abs(flux) <= 1e-8 * vmax * loop.length(), ErrorCode::flux_nonzero,
            "net boundary flux must vanish");

    // psi0 on the boundary: -cumulative integral, zero at the start
    flow.psi0_boundary.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double ds = loop.s[i + 1] - loop.s[i];
        flow.psi0_boundary[i + 1] =
            flow.psi0_boundary[i] - 0.5 * (vn_samples[i] + vn_samples[(i + 1) % n]) * ds;
    }

    flow.is_zero = false;
    if (eval.backend() == PotentialEvaluator::Backend::analytic_disk) {
        flow.analytic = true;
        flow.rho = dom.shape_params[0];
        const std::size_t K = std::min<std::size_t>(64, n / 2 - 1);
        flow.fourier_a.assign(K, 0.0);
        flow.fourier_b.assign(K, 0.0);
        double c0 = 0.0;
        for (std::size_t j = 0; j < n; ++j) c0 += flow.psi0_boundary[j];
        flow.fourier_c0 = c0 / n;
        for (std::size_t k = 1; k <= K; ++k) {
            double ak = 0.0, bk = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double th = two_pi * double(j) / double(n);
                ak += flow.psi0_boundary[j] * std::cos(k * th);
                bk += flow.psi0_boundary[j] * std::sin(k * th);
            }
            flow.fourier_a[k - 1] = 2.0 * ak / n;
            flow.fourier_b[k - 1] = 2.0 * bk / n;
        }
        return flow;
    }

    const auto* poisson = eval.poisson();
    flow.psi0 = poisson->solve(
        [&](const Vec2& b) {
            const double s = detail::loop_arclength_of(loop, b);
            return detail::interp_periodic(loop.s, flow.psi0_boundary, s);
        },
        nullptr, FieldTag::psi0);
    flow.harmonic_residual = DirichletPoisson::interior_laplacian_residual(flow.psi0);
    return flow;
}

// convenience: sample a flux function of the normalized boundary angle
// u = 2 pi s / |boundary| over the outer loop (u is the polar angle on disks)
inline std::vector<double> sample_flux(const DomainDescriptor& dom,
                                       const std::function<double(double)>& vn_of_u) {
    const BoundaryLoop& loop = dom.loops[0];
    const std::size_t n = loop.pts.size() - 1;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = vn_of_u(two_pi * loop.s[i] / loop.length());
    return out;
}

} // namespace vortexlab
