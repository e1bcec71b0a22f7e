#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "vortexlab/common.hpp"

namespace vortexlab {

enum class DomainKind { disk, ellipse, rectangle, annulus, polygon };

inline const char* domain_kind_name(DomainKind k) {
    switch (k) {
        case DomainKind::disk: return "disk";
        case DomainKind::ellipse: return "ellipse";
        case DomainKind::rectangle: return "rectangle";
        case DomainKind::annulus: return "annulus";
        case DomainKind::polygon: return "polygon";
    }
    return "unknown";
}

// One closed boundary loop sampled at (nearly) uniform arclength.
// pts.front() == pts.back(); s holds cumulative arclength, s.front() = 0.
struct BoundaryLoop {
    std::vector<Vec2> pts;
    std::vector<double> s;
    double length() const { return s.empty() ? 0.0 : s.back(); }
};

// A bounded planar domain with a parametrized boundary, an interior
// indicator, and the enclosing radius R used by the log-potential kernels.
class DomainDescriptor {
public:
    DomainKind kind = DomainKind::disk;
    std::vector<double> shape_params;   // disk: {r}; ellipse: {a,b}; rectangle: {w,h}; annulus: {ri,ro}
    std::vector<Vec2> polygon_vertices; // polygon only
    int resolution = 128;               // cells across the longer bounding-box side

    std::vector<BoundaryLoop> loops;    // outer loop first
    double diameter = 0.0;
    double enclosing_radius = 0.0;      // R, fixed as 1.5 * diameter
    double inradius = 0.0;
    Vec2 bbox_lo, bbox_hi;

    bool inside(const Vec2& p) const {
        switch (kind) {
            case DomainKind::disk:
                return p.norm2() < sq(shape_params[0]);
            case DomainKind::ellipse: {
                const double a = shape_params[0], b = shape_params[1];
                return sq(p.x / a) + sq(p.y / b) < 1.0;
            }
            case DomainKind::rectangle: {
                const double w = shape_params[0], h = shape_params[1];
                return std::abs(p.x) < 0.5 * w && std::abs(p.y) < 0.5 * h;
            }
            case DomainKind::annulus: {
                const double r2 = p.norm2();
                return r2 > sq(shape_params[0]) && r2 < sq(shape_params[1]);
            }
            case DomainKind::polygon:
                return polygon_inside(p);
        }
        return false;
    }

    // signed distance is not needed; a plain distance to the sampled boundary
    // is enough for admissibility margins and mask sizing
    double boundary_distance(const Vec2& p) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& loop : loops) {
            for (std::size_t i = 0; i + 1 < loop.pts.size(); ++i) {
                d = std::min(d, segment_distance(p, loop.pts[i], loop.pts[i + 1]));
            }
        }
        return d;
    }

    bool simply_connected() const { return kind != DomainKind::annulus; }

private:
    bool polygon_inside(const Vec2& p) const {
        bool in = false;
        const auto& v = polygon_vertices;
        for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
            if ((v[i].y > p.y) != (v[j].y > p.y)) {
                const double xc = v[j].x + (v[i].x - v[j].x) * (p.y - v[j].y) / (v[i].y - v[j].y);
                if (p.x < xc) in = !in;
            }
        }
        return in;
    }

    static double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
        const Vec2 ab = b - a;
        const double len2 = ab.norm2();
        if (len2 == 0.0) return dist(p, a);
        const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
        return dist(p, a + t * ab);
    }
};

namespace detail {

inline BoundaryLoop sample_closed_curve(const std::function<Vec2(double)>& gamma,
                                        int n) {
    // parameter t in [0,1); arclength accumulated over the polyline
    BoundaryLoop loop;
    loop.pts.reserve(n + 1);
    loop.s.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
        loop.pts.push_back(gamma(double(i % n) / n));
    }
    loop.pts.back() = loop.pts.front();
    loop.s.push_back(0.0);
    for (int i = 1; i <= n; ++i) {
        loop.s.push_back(loop.s[i - 1] + dist(loop.pts[i], loop.pts[i - 1]));
    }
    return loop;
}

inline BoundaryLoop sample_polygon(const std::vector<Vec2>& v, int n) {
    std::vector<double> edge_len(v.size());
    double per = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        edge_len[i] = dist(v[i], v[(i + 1) % v.size()]);
        per += edge_len[i];
    }
    auto gamma = [&](double t) {
        double target = t * per;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (target <= edge_len[i] || i + 1 == v.size()) {
                const double u = edge_len[i] > 0 ? target / edge_len[i] : 0.0;
                return v[i] + std::min(u, 1.0) * (v[(i + 1) % v.size()] - v[i]);
            }
            target -= edge_len[i];
        }
        return v[0];
    };
    return sample_closed_curve(gamma, n);
}

} // namespace detail

// Builds a validated descriptor. Boundary loops get ~4*resolution samples so
// that flux data and cut-point lookups are well resolved on the grid.
inline DomainDescriptor make_domain(DomainKind kind,
                                    const std::vector<double>& shape_params,
                                    int grid_resolution,
                                    const std::vector<Vec2>& polygon = {}) {
    require(grid_resolution >= 32, ErrorCode::unresolved_geometry,
            "grid resolution must be at least 32 per side");

    DomainDescriptor d;
    d.kind = kind;
    d.shape_params = shape_params;
    d.polygon_vertices = polygon;
    d.resolution = grid_resolution;

    const int nb = 4 * grid_resolution;
    switch (kind) {
        case DomainKind::disk: {
            require(shape_params.size() == 1 && shape_params[0] > 0,
                    ErrorCode::degenerate_shape, "disk requires radius > 0");
            const double r = shape_params[0];
            d.loops.push_back(detail::sample_closed_curve(
                [r](double t) { return Vec2{r * std::cos(two_pi * t), r * std::sin(two_pi * t)}; }, nb));
            d.diameter = 2 * r;
            d.inradius = r;
            d.bbox_lo = {-r, -r};
            d.bbox_hi = {r, r};
            break;
        }
        case DomainKind::ellipse: {
            require(shape_params.size() == 2 && shape_params[0] > 0 && shape_params[1] > 0,
                    ErrorCode::degenerate_shape, "ellipse requires semi-axes > 0");
            const double a = shape_params[0], b = shape_params[1];
            d.loops.push_back(detail::sample_closed_curve(
                [a, b](double t) { return Vec2{a * std::cos(two_pi * t), b * std::sin(two_pi * t)}; }, nb));
            d.diameter = 2 * std::max(a, b);
            d.inradius = std::min(a, b);
            d.bbox_lo = {-a, -b};
            d.bbox_hi = {a, b};
            break;
        }
        case DomainKind::rectangle: {
            require(shape_params.size() == 2 && shape_params[0] > 0 && shape_params[1] > 0,
                    ErrorCode::degenerate_shape, "rectangle requires width, height > 0");
            const double w = shape_params[0], h = shape_params[1];
            const std::vector<Vec2> corners = {
                {-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
            d.loops.push_back(detail::sample_polygon(corners, nb));
            d.diameter = std::hypot(w, h);
            d.inradius = 0.5 * std::min(w, h);
            d.bbox_lo = {-w / 2, -h / 2};
            d.bbox_hi = {w / 2, h / 2};
            break;
        }
        case DomainKind::annulus: {
            require(shape_params.size() == 2 && shape_params[0] > 0 &&
                        shape_params[1] > shape_params[0],
                    ErrorCode::degenerate_shape, "annulus requires 0 < r_inner < r_outer");
            const double ri = shape_params[0], ro = shape_params[1];
            d.loops.push_back(detail::sample_closed_curve(
                [ro](double t) { return Vec2{ro * std::cos(two_pi * t), ro * std::sin(two_pi * t)}; }, nb));
            d.loops.push_back(detail::sample_closed_curve(
                [ri](double t) { return Vec2{ri * std::cos(-two_pi * t), ri * std::sin(-two_pi * t)}; }, nb));
            d.diameter = 2 * ro;
            d.inradius = 0.5 * (ro - ri);
            d.bbox_lo = {-ro, -ro};
            d.bbox_hi = {ro, ro};
            break;
        }
        case DomainKind::polygon: {
            require(polygon.size() >= 3, ErrorCode::degenerate_shape,
                    "polygon requires at least 3 vertices");
            double area2 = 0.0;
            for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
                area2 += polygon[j].x * polygon[i].y - polygon[i].x * polygon[j].y;
            }
            require(std::abs(area2) > 1e-12, ErrorCode::degenerate_shape, "polygon area is zero");
            d.loops.push_back(detail::sample_polygon(polygon, nb));
            double dm = 0.0;
            for (const auto& a : polygon)
                for (const auto& b : polygon) dm = std::max(dm, dist(a, b));
            d.diameter = dm;
            d.bbox_lo = d.bbox_hi = polygon[0];
            for (const auto& v : polygon) {
                d.bbox_lo.x = std::min(d.bbox_lo.x, v.x);
                d.bbox_lo.y = std::min(d.bbox_lo.y, v.y);
                d.bbox_hi.x = std::max(d.bbox_hi.x, v.x);
                d.bbox_hi.y = std::max(d.bbox_hi.y, v.y);
            }
            // crude inradius: max boundary distance over a coarse interior scan
            double best = 0.0;
            for (int i = 1; i < 32; ++i) {
                for (int j = 1; j < 32; ++j) {
                    Vec2 p{d.bbox_lo.x + (d.bbox_hi.x - d.bbox_lo.x) * i / 32.0,
                           d.bbox_lo.y + (d.bbox_hi.y - d.bbox_lo.y) * j / 32.0};
                    if (d.inside(p)) best = std::max(best, d.boundary_distance(p));
                }
            }
            d.inradius = best;
            break;
        }
    }

    d.enclosing_radius = 1.5 * d.diameter;

    for (const auto& loop : d.loops) {
        require(dist(loop.pts.front(), loop.pts.back()) < 1e-12 * std::max(1.0, d.diameter),
                ErrorCode::degenerate_shape, "boundary loop is not closed");
    }
    return d;
}

// Uniform cell-centered Cartesian grid covering the domain bounding box.
struct Grid {
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0; // center of cell (0,0)
    double dx = 0.0, dy = 0.0;

    Vec2 center(int i, int j) const { return {x0 + i * dx, y0 + j * dy}; }
    int index(int i, int j) const { return j * nx + i; }
    bool contains(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }
    std::size_t size() const { return std::size_t(nx) * ny; }
};

// Grid with square cells, the longer box side carrying `resolution` cells,
// padded by `margin` ghost cells on every side.
inline Grid make_grid(const DomainDescriptor& d, int resolution, int margin = 2) {
    Grid g;
    const double wx = d.bbox_hi.x - d.bbox_lo.x;
    const double wy = d.bbox_hi.y - d.bbox_lo.y;
    const double h = std::max(wx, wy) / resolution;
    g.dx = g.dy = h;
    g.nx = int(std::ceil(wx / h)) + 2 * margin;
    g.ny = int(std::ceil(wy / h)) + 2 * margin;
    g.x0 = d.bbox_lo.x + 0.5 * h - margin * h;
    g.y0 = d.bbox_lo.y + 0.5 * h - margin * h;
    return g;
}

enum class FieldTag { generic, w, u, psi0, vorticity };

// Scalar field on a masked grid. Non-interior cells of Dirichlet fields carry
// exactly 0; mask[k] != 0 marks interior cells.
struct GridField {
    Grid grid;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
    FieldTag tag = FieldTag::generic;

    GridField() = default;
    GridField(const Grid& g, FieldTag t = FieldTag::generic)
        : grid(g), values(g.size(), 0.0), mask(g.size(), 0), tag(t) {}

    double& at(int i, int j) { return values[grid.index(i, j)]; }
    double at(int i, int j) const { return values[grid.index(i, j)]; }
    bool interior(int i, int j) const {
        return grid.contains(i, j) && mask[grid.index(i, j)] != 0;
    }

    // C1 bicubic (Catmull-Rom) sampling with bilinear fallback where the
    // 4x4 stencil leaves the grid
    double sample(const Vec2& p) const;
    Vec2 sample_gradient(const Vec2& p) const;
};

namespace detail {
inline double catmull_rom(double pm1, double p0, double p1, double p2, double t) {
    const double a = 2.0 * p0;
    const double b = p1 - pm1;
    const double c = 2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2;
    const double d = -pm1 + 3.0 * p0 - 3.0 * p1 + p2;
    return 0.5 * (a + b * t + c * t * t + d * t * t * t);
}
inline double catmull_rom_d(double pm1, double p0, double p1, double p2, double t) {
    const double b = p1 - pm1;
    const double c = 2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2;
    const double d = -pm1 + 3.0 * p0 - 3.0 * p1 + p2;
    return 0.5 * (b + 2.0 * c * t + 3.0 * d * t * t);
}
} // namespace detail

inline double GridField::sample(const Vec2& p) const {
    const double fx = (p.x - grid.x0) / grid.dx;
    const double fy = (p.y - grid.y0) / grid.dy;
    int i = int(std::floor(fx)), j = int(std::floor(fy));
    i = std::clamp(i, 0, grid.nx - 2);
    j = std::clamp(j, 0, grid.ny - 2);
    const double tx = std::clamp(fx - i, 0.0, 1.0);
    const double ty = std::clamp(fy - j, 0.0, 1.0);

    if (i >= 1 && i + 2 < grid.nx && j >= 1 && j + 2 < grid.ny) {
        double col[4];
        for (int dj = -1; dj <= 2; ++dj) {
            col[dj + 1] = detail::catmull_rom(at(i - 1, j + dj), at(i, j + dj),
                                              at(i + 1, j + dj), at(i + 2, j + dj), tx);
        }
        return detail::catmull_rom(col[0], col[1], col[2], col[3], ty);
    }
    const double v00 = at(i, j), v10 = at(i + 1, j);
    const double v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
    return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 +
           (1 - tx) * ty * v01 + tx * ty * v11;
}

inline Vec2 GridField::sample_gradient(const Vec2& p) const {
    const double fx = (p.x - grid.x0) / grid.dx;
    const double fy = (p.y - grid.y0) / grid.dy;
    int i = int(std::floor(fx)), j = int(std::floor(fy));
    i = std::clamp(i, 1, grid.nx - 3);
    j = std::clamp(j, 1, grid.ny - 3);
    const double tx = std::clamp(fx - i, 0.0, 1.0);
    const double ty = std::clamp(fy - j, 0.0, 1.0);

    double col[4], dcol[4];
    for (int dj = -1; dj <= 2; ++dj) {
        col[dj + 1] = detail::catmull_rom(at(i - 1, j + dj), at(i, j + dj),
                                          at(i + 1, j + dj), at(i + 2, j + dj), tx);
        dcol[dj + 1] = detail::catmull_rom_d(at(i - 1, j + dj), at(i, j + dj),
                                             at(i + 1, j + dj), at(i + 2, j + dj), tx);
    }
    const double gx = detail::catmull_rom(dcol[0], dcol[1], dcol[2], dcol[3], ty) / grid.dx;
    const double gy = detail::catmull_rom_d(col[0], col[1], col[2], col[3], ty) / grid.dy;
    return {gx, gy};
}

} // namespace vortexlab
