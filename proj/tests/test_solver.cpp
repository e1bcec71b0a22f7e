#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "vortexlab/poisson.hpp"
#include "vortexlab/solver.hpp"

using namespace vortexlab;

namespace {

struct Rig {
    DomainDescriptor dom = make_domain(DomainKind::disk, {1.0}, 96);
    PotentialEvaluator eval = PotentialEvaluator::analytic_disk(dom);
    BackgroundFlow flow0;
    ProfileSolution profile = solve_profile(2.0);
    Rig() { flow0 = solve_background(eval, {}); }

    VortexConfig centered(double kappa = 1.0) const {
        VortexConfig cfg;
        cfg.kappa = {kappa};
        cfg.z = {{0.0, 0.0}};
        cfg.masks = default_masks(dom, cfg);
        return cfg;
    }
};

double inf_norm(const GridField& f) {
    double v = 0.0;
    for (double x : f.values) v = std::max(v, std::abs(x));
    return v;
}

} // namespace

TEST_CASE("zero field solves the problem exactly and in one pass") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 64);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);
    const GridField zero = ws.blank_field(FieldTag::w);
    REQUIRE(ws.residual_inf_norm(zero) == 0.0);
    auto [w, rep] = ws.newton_solve(zero);
    REQUIRE(rep.status == "converged-trivial");
    REQUIRE(rep.iterations == 0);
    REQUIRE(inf_norm(w) == 0.0);
    REQUIRE(ws.detect_cores(w).empty());
}

TEST_CASE("residual matches an independent cell-by-cell evaluation") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 64);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);

    // smooth manufactured field with its bump strictly inside the mask
    GridField v = ws.blank_field(FieldTag::w);
    auto smooth = [&](const Vec2& p) {
        const double r2 = p.norm2();
        return 2.1 * std::exp(-25.0 * r2) + 0.3 * p.x * p.y;
    };
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            if (v.interior(i, j)) v.at(i, j) = smooth(grid.center(i, j));

    const GridField F = ws.residual(v);
    double worst = 0.0;
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            if (!v.interior(i, j)) continue;
            auto val = [&](int ii, int jj) {
                return (grid.contains(ii, jj) && v.interior(ii, jj)) ? v.at(ii, jj) : 0.0;
            };
            const double lap = (4.0 * v.at(i, j) - val(i + 1, j) - val(i - 1, j) -
                                val(i, j + 1) - val(i, j - 1)) /
                               sq(grid.dx);
            const Vec2 x = grid.center(i, j);
            double nl = 0.0;
            if (cfg.masks[0].contains(x)) {
                nl = plus_pow(v.at(i, j) - sc.threshold(cfg.kappa[0], rig.flow0.q_at(x)),
                              sc.p);
            }
            worst = std::max(worst, std::abs(F.at(i, j) - (sq(sc.delta) * lap - nl)));
        }
    }
    REQUIRE(worst < 1e-14);
}

TEST_CASE("Jacobian directional derivative converges at first order in t") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 64);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);
    const AnsatzParams ap = solve_params(rig.eval, rig.flow0, cfg, sc, rig.profile);
    const GridField w = assemble_ansatz(rig.eval, rig.flow0, cfg, ap, sc, rig.profile, grid);

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridField dir = ws.blank_field(FieldTag::generic);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            if (dir.interior(i, j)) dir.at(i, j) = u(rng);

    // analytic directional derivative: delta^2 L v - p chi (w - tau)_+^{p-1} v
    const GridField F0 = ws.residual(w);
    auto fd_error = [&](double t) {
        GridField wt = w;
        for (std::size_t k = 0; k < wt.values.size(); ++k)
            wt.values[k] += t * dir.values[k] * double(wt.mask[k]);
        const GridField Ft = ws.residual(wt);
        double worst = 0.0;
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                if (!w.interior(i, j)) continue;
                auto val = [&](int ii, int jj) {
                    return (grid.contains(ii, jj) && dir.interior(ii, jj)) ? dir.at(ii, jj)
                                                                           : 0.0;
                };
                const double lapv = (4.0 * dir.at(i, j) - val(i + 1, j) - val(i - 1, j) -
                                     val(i, j + 1) - val(i, j - 1)) /
                                    sq(grid.dx);
                const Vec2 x = grid.center(i, j);
                double jac_v = sq(sc.delta) * lapv;
                if (cfg.masks[0].contains(x)) {
                    const double excess =
                        w.at(i, j) - sc.threshold(cfg.kappa[0], rig.flow0.q_at(x));
                    jac_v -= sc.p * plus_pow(excess, sc.p - 1.0) * dir.at(i, j);
                }
                const double fd = (Ft.at(i, j) - F0.at(i, j)) / t;
                worst = std::max(worst, std::abs(fd - jac_v));
            }
        }
        return worst;
    };
    const double e4 = fd_error(1e-4);
    const double e5 = fd_error(1e-5);
    REQUIRE(e5 < 0.2 * e4);  // first-order decay of the linearization error
}

TEST_CASE("single-vortex solve on the disk behaves and obeys the maximum principle") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 128);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    const AnsatzParams ap = solve_params(rig.eval, rig.flow0, cfg, sc, rig.profile);
    const GridField seed = assemble_ansatz(rig.eval, rig.flow0, cfg, ap, sc, rig.profile, grid);
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);
    auto [w, rep] = ws.newton_solve(seed);
    REQUIRE(rep.converged);
    REQUIRE(rep.iterations <= 15);
    REQUIRE(rep.cores.size() == 1);
    REQUIRE(rep.cores[0].centroid.norm() < 2.0 * grid.dx);
    for (double v : w.values) REQUIRE(v >= -1e-12);

    // detected core radius sits inside the loose band around s
    const double s = ap.s[0];
    REQUIRE(rep.cores[0].radius >= std::max(s * (1.0 - 10.0 * s), 0.0));
    REQUIRE(rep.cores[0].radius <= s * (1.0 + std::pow(s, 0.5)) + 2.0 * grid.dx);

    // u-recovery is the stated rescaling
    const GridField u = ws.recover_u(w);
    REQUIRE(u.values[grid.index(grid.nx / 2, grid.ny / 2)] ==
            Catch::Approx(w.values[grid.index(grid.nx / 2, grid.ny / 2)] * sc.abs_ln_eps /
                          two_pi));
}

TEST_CASE("collapse from a vortex seed is reported distinctly") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 64);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);
    // a lump far below the plateau cannot sustain a core
    GridField seed = ws.blank_field(FieldTag::w);
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            if (!seed.interior(i, j)) continue;
            seed.at(i, j) = 0.8 * std::exp(-8.0 * grid.center(i, j).norm2());
        }
    }
    try {
        ws.newton_solve(seed);
        FAIL("expected the collapsed branch to be flagged");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::vortex_collapsed);
    }
}

TEST_CASE("masked and unmasked solves agree in the equi-strength mode") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 96);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    VortexConfig masked = rig.centered();
    VortexConfig bare = masked;
    bare.use_masks = false;

    const AnsatzParams ap = solve_params(rig.eval, rig.flow0, masked, sc, rig.profile);
    const GridField seed =
        assemble_ansatz(rig.eval, rig.flow0, masked, ap, sc, rig.profile, grid);
    FreeBoundaryWorkspace ws_m(rig.dom, grid, rig.flow0, masked, sc);
    FreeBoundaryWorkspace ws_b(rig.dom, grid, rig.flow0, bare, sc);
    auto [wm, rm] = ws_m.newton_solve(seed);
    auto [wb, rb] = ws_b.newton_solve(seed);
    double dev = 0.0;
    for (std::size_t k = 0; k < wm.values.size(); ++k)
        dev = std::max(dev, std::abs(wm.values[k] - wb.values[k]));
    REQUIRE(dev < 1e-9);
    REQUIRE_THROWS_AS(FreeBoundaryWorkspace(rig.dom, grid, rig.flow0,
                                            [] {
                                                VortexConfig c;
                                                c.kappa = {1.0, 2.0};
                                                c.z = {{0.4, 0.0}, {-0.4, 0.0}};
                                                c.use_masks = false;
                                                return c;
                                            }(),
                                            sc),
                      Error);
}

TEST_CASE("plain fixed-point iteration reproduces the Newton solution on 64^2") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 64);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    const AnsatzParams ap = solve_params(rig.eval, rig.flow0, cfg, sc, rig.profile);
    const GridField seed = assemble_ansatz(rig.eval, rig.flow0, cfg, ap, sc, rig.profile, grid);
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);
    auto [wn, rep] = ws.newton_solve(seed);

    // w <- (-delta^2 Lap)^{-1} N(w) via the Poisson solver on the same mask
    DirichletPoisson pois(rig.dom, grid);
    GridField w = seed;
    bool converged = false;
    for (int it = 0; it < 300; ++it) {
        const GridField F = ws.residual(w);
        const GridField e = pois.solve([](const Vec2&) { return 0.0; },
                                       [&](const Vec2& x) { return F.sample(x) / sq(sc.delta); });
        for (std::size_t k = 0; k < w.values.size(); ++k)
            w.values[k] -= e.values[k] * double(w.mask[k]);
        if (ws.residual_inf_norm(w) < 1e-10) {
            converged = true;
            break;
        }
    }
    REQUIRE(converged);
    double dev = 0.0;
    for (std::size_t k = 0; k < w.values.size(); ++k)
        dev = std::max(dev, std::abs(w.values[k] - wn.values[k]));
    REQUIRE(dev < 1e-8);
}

TEST_CASE("refinement study: coarse-grid error shrinks at second order") {
    Rig rig;
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    const AnsatzParams ap = solve_params(rig.eval, rig.flow0, cfg, sc, rig.profile);

    auto solve_at = [&](int res) {
        const Grid grid = make_grid(rig.dom, res);
        FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);
        auto [w, rep] =
            ws.newton_solve(assemble_ansatz(rig.eval, rig.flow0, cfg, ap, sc, rig.profile, grid));
        return w;
    };
    const GridField w64 = solve_at(64);
    const GridField w128 = solve_at(128);
    const GridField w256 = solve_at(256);

    auto deviation = [&](const GridField& coarse) {
        double dev = 0.0;
        const Grid& g = coarse.grid;
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                if (!coarse.interior(i, j)) continue;
                const Vec2 x = g.center(i, j);
                if (rig.dom.boundary_distance(x) < 0.1) continue;
                if (std::abs(dist(x, cfg.z[0]) - ap.s[0]) < 0.06) continue;
                dev = std::max(dev, std::abs(coarse.at(i, j) - w256.sample(x)));
            }
        }
        return dev;
    };
    const double e64 = deviation(w64);
    const double e128 = deviation(w128);
    REQUIRE(e128 < e64 / 2.5);  // close to the h^2 factor of 4
}

TEST_CASE("continuation chains seeds and a single entry degenerates to one solve") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 96);
    VortexConfig cfg = rig.centered();

    const auto sweep =
        continue_in_eps(rig.eval, rig.flow0, cfg, {0.1, 0.07, 0.05}, rig.profile, grid);
    REQUIRE(sweep.size() == 3);
    double prev_radius = std::numeric_limits<double>::infinity();
    for (const auto& st : sweep) {
        REQUIRE(st.report.converged);
        REQUIRE(st.report.cores.size() == 1);
        REQUIRE(st.report.cores[0].radius < prev_radius);
        prev_radius = st.report.cores[0].radius;
    }

    const auto single = continue_in_eps(rig.eval, rig.flow0, cfg, {0.05}, rig.profile, grid);
    REQUIRE(single.size() == 1);
    REQUIRE(single[0].report.converged);
    // same eps as the tail of the sweep: the fields agree to solver tolerance
    double dev = 0.0;
    for (std::size_t k = 0; k < single[0].w.values.size(); ++k)
        dev = std::max(dev, std::abs(single[0].w.values[k] - sweep[2].w.values[k]));
    REQUIRE(dev < 1e-7);

    REQUIRE_THROWS_AS(
        continue_in_eps(rig.eval, rig.flow0, cfg, {0.05, 0.07}, rig.profile, grid), Error);
    REQUIRE_THROWS_AS(
        continue_in_eps(rig.eval, rig.flow0, cfg, {0.5, 0.05}, rig.profile, grid), Error);
}

TEST_CASE("core detection flags splits and empty masks") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 64);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    VortexConfig cfg = rig.centered();
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, cfg, sc);

    GridField w = ws.blank_field(FieldTag::w);
    REQUIRE(ws.detect_cores(w).empty());

    // two bumps inside the single mask: a split core
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            if (!w.interior(i, j)) continue;
            const Vec2 x = grid.center(i, j);
            w.at(i, j) = 1.6 * (std::exp(-400.0 * (x - Vec2{0.12, 0.0}).norm2()) +
                                std::exp(-400.0 * (x + Vec2{0.12, 0.0}).norm2()));
        }
    }
    const auto cores = ws.detect_cores(w);
    REQUIRE(cores.size() == 2);
    for (const auto& c : cores) REQUIRE(c.mask_id == 0);
}
