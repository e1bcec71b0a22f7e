#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "vortexlab/diagnostics.hpp"

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

    ContinuationStep solve_one(const VortexConfig& cfg, double eps, int res) const {
        const ScaleParams sc = ScaleParams::make(eps, 2.0);
        const Grid grid = make_grid(dom, res);
        const AnsatzParams ap = solve_params(eval, flow0, cfg, sc, profile);
        FreeBoundaryWorkspace ws(dom, grid, flow0, cfg, sc);
        auto [w, rep] = ws.newton_solve(assemble_ansatz(eval, flow0, cfg, ap, sc, profile, grid));
        ContinuationStep st;
        st.eps = eps;
        st.u = ws.recover_u(w);
        st.w = std::move(w);
        st.report = std::move(rep);
        st.params = ap;
        return st;
    }
};

} // namespace

TEST_CASE("circulation of the zero field is empty") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 64);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    GridField u(grid, FieldTag::u);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            if (rig.dom.inside(grid.center(i, j))) u.mask[grid.index(i, j)] = 1;
    const CirculationResult c = circulation(u, rig.dom, rig.flow0, rig.centered(), sc, false);
    REQUIRE(c.total == 0.0);
    REQUIRE(c.per_core.empty());
}

TEST_CASE("measured circulation tracks the finite-eps prediction") {
    Rig rig;
    const VortexConfig cfg = rig.centered();
    const ContinuationStep st = rig.solve_one(cfg, 0.05, 128);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const CirculationResult c = circulation(st.u, rig.dom, rig.flow0, cfg, sc);
    const double pred = predicted_circulation(st.params, sc, rig.dom.enclosing_radius);
    REQUIRE(c.total == Catch::Approx(pred).epsilon(0.03));
    REQUIRE(c.per_core.size() == 1);
    REQUIRE(c.per_core[0] == Catch::Approx(c.total).epsilon(1e-12));
    // quadrature refinement moves the total by well under half a percent
    const ContinuationStep fine = rig.solve_one(cfg, 0.05, 256);
    const CirculationResult cf = circulation(fine.u, rig.dom, rig.flow0, cfg, sc);
    REQUIRE(std::abs(cf.total - c.total) / c.total < 0.005);
}

TEST_CASE("grid energy vanishes on the zero field and tracks the quadrature energy") {
    Rig rig;
    const Grid grid = make_grid(rig.dom, 128);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const VortexConfig cfg = rig.centered();
    GridField zero(grid, FieldTag::w);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            if (rig.dom.inside(grid.center(i, j))) zero.mask[grid.index(i, j)] = 1;
    REQUIRE(energy(zero, rig.dom, rig.flow0, cfg, sc) == 0.0);

    const AnsatzParams ap = solve_params(rig.eval, rig.flow0, cfg, sc, rig.profile);
    const GridField P = assemble_ansatz(rig.eval, rig.flow0, cfg, ap, sc, rig.profile, grid);
    const double K_grid = energy(P, rig.dom, rig.flow0, cfg, sc);
    const double K_quad = ansatz_energy(rig.eval, rig.flow0, cfg, ap, sc, rig.profile);
    REQUIRE(K_grid == Catch::Approx(K_quad).epsilon(0.05));
}

TEST_CASE("quadrature energy matches the finite-parameter expansion to high accuracy") {
    Rig rig;
    VortexConfig cfg;
    cfg.kappa = {1.0, 1.5};
    cfg.z = {{0.45, 0.05}, {-0.4, -0.1}};
    cfg.masks = default_masks(rig.dom, cfg);
    for (double eps : {1e-2, 1e-3}) {
        const ScaleParams sc = ScaleParams::make(eps, 2.0);
        const AnsatzParams ap = solve_params(rig.eval, rig.flow0, cfg, sc, rig.profile);
        const double K = ansatz_energy(rig.eval, rig.flow0, cfg, ap, sc, rig.profile);
        const double K_form = reduced_energy(rig.eval, cfg, ap, sc);
        INFO("eps = " << eps);
        REQUIRE(K == Catch::Approx(K_form).epsilon(2e-2));
    }
}

TEST_CASE("energy differences follow the reduced function") {
    Rig rig;
    VortexConfig ca = rig.centered();
    ca.z = {{0.3, 0.0}};
    ca.masks = default_masks(rig.dom, ca);
    VortexConfig cb = rig.centered();
    cb.z = {{-0.1, 0.2}};
    cb.masks = default_masks(rig.dom, cb);

    double prev_rel = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 3e-3, 1e-3}) {
        const ScaleParams sc = ScaleParams::make(eps, 2.0);
        const AnsatzParams pa = solve_params(rig.eval, rig.flow0, ca, sc, rig.profile);
        const AnsatzParams pb = solve_params(rig.eval, rig.flow0, cb, sc, rig.profile);
        const double dK = ansatz_energy(rig.eval, rig.flow0, ca, pa, sc, rig.profile) -
                          ansatz_energy(rig.eval, rig.flow0, cb, pb, sc, rig.profile);
        const double dPhi = (sq(sc.delta) / sq(sc.abs_ln_eps)) *
                            (eval_Phi(rig.eval, rig.flow0, ca) -
                             eval_Phi(rig.eval, rig.flow0, cb));
        const double dForm = reduced_energy(rig.eval, ca, pa, sc) -
                             reduced_energy(rig.eval, cb, pb, sc);
        // same sign and shrinking gap against the leading-order form;
        // near-exact match against the finite-parameter form
        REQUIRE(dK * dPhi > 0.0);
        const double rel = std::abs(dK - dPhi) / std::abs(dK);
        REQUIRE(rel < prev_rel);
        prev_rel = rel;
        REQUIRE(std::abs(dK - dForm) / std::abs(dK) < 5e-3);
    }
}

TEST_CASE("energy gradient: both sides vanish at the center and match off-center") {
    Rig rig;
    const ScaleParams sc = ScaleParams::make(1e-2, 2.0);
    VortexConfig cfg = rig.centered();

    const auto center =
        energy_gradient_check(rig.eval, rig.flow0, cfg, sc, rig.profile, {{0.0, 0.0}}, 1e-4);
    REQUIRE(std::abs(center.fd_grad[0]) < 1e-9);
    REQUIRE(std::abs(center.closed_grad[0]) < 1e-14);

    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-3}) {
        const ScaleParams sce = ScaleParams::make(eps, 2.0);
        const auto rep = energy_gradient_check(rig.eval, rig.flow0, cfg, sce, rig.profile,
                                               {{0.3, 0.1}}, 1e-4);
        REQUIRE(rep.scaled_residual < 1.0);
        REQUIRE(rep.scaled_residual < prev + 1e-9);
        prev = rep.scaled_residual;
        // the measured reduced gradient is along grad Phi
        REQUIRE(rep.cosine_vs_grad_phi > 0.999);
    }
}

TEST_CASE("reconstructed flow is discretely divergence free with localized vorticity") {
    Rig rig;
    const VortexConfig cfg = rig.centered();
    const ContinuationStep st = rig.solve_one(cfg, 0.05, 128);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);
    const FlowFields ff = reconstruct_flow(st.u, rig.dom, rig.flow0, cfg, sc);
    REQUIRE(ff.max_divergence < 1e-12);

    // vorticity support: every cell above 1% of the peak lies on the dilated
    // core, and the mass outside it is below 1% (the wide-stencil curl leaves
    // a small staircase residue along the wall)
    double peak = 0.0;
    for (double v : ff.vorticity.values) peak = std::max(peak, std::abs(v));
    const double core_r = st.report.cores[0].radius + 3.0 * st.u.grid.dx;
    double mass_in = 0.0, mass_out = 0.0;
    for (int j = 0; j < st.u.grid.ny; ++j) {
        for (int i = 0; i < st.u.grid.nx; ++i) {
            const Vec2 x = st.u.grid.center(i, j);
            const double om = std::abs(ff.vorticity.at(i, j));
            const bool inside = dist(x, st.report.cores[0].centroid) <= core_r;
            (inside ? mass_in : mass_out) += om;
            if (om > 0.01 * peak) REQUIRE(inside);
        }
    }
    REQUIRE(mass_out < 0.02 * mass_in);

    // stationarity improves under refinement
    const ContinuationStep fine = rig.solve_one(cfg, 0.05, 256);
    const FlowFields ff2 = reconstruct_flow(fine.u, rig.dom, rig.flow0, cfg, sc);
    REQUIRE(ff2.stationarity_rel < ff.stationarity_rel);
    REQUIRE(ff2.stationarity_rel < 0.05);
}

TEST_CASE("gauge shift of psi0 leaves core geometry and energy differences stable") {
    Rig rig;
    const VortexConfig cfg = rig.centered();
    const double c_shift = 0.01;

    BackgroundFlow shifted = rig.flow0;
    shifted.is_zero = false;
    shifted.analytic = true;
    shifted.rho = 1.0;
    shifted.fourier_c0 = c_shift;  // psi0 = const

    const ContinuationStep base = rig.solve_one(cfg, 0.05, 128);
    const ScaleParams sc = ScaleParams::make(0.05, 2.0);

    const Grid grid = make_grid(rig.dom, 128);
    const AnsatzParams ap = solve_params(rig.eval, shifted, cfg, sc, rig.profile);
    FreeBoundaryWorkspace ws(rig.dom, grid, shifted, cfg, sc);
    auto [w, rep] = ws.newton_solve(assemble_ansatz(rig.eval, shifted, cfg, ap, sc, rig.profile, grid));

    REQUIRE(dist(rep.cores[0].centroid, base.report.cores[0].centroid) < 1.5 * grid.dx);
    REQUIRE(rep.cores[0].radius ==
            Catch::Approx(base.report.cores[0].radius).epsilon(0.05));

    // K(Z)-differences are exactly gauge independent through constant q
    VortexConfig ca = cfg, cb = cfg;
    ca.z = {{0.25, 0.0}};
    ca.masks = default_masks(rig.dom, ca);
    cb.z = {{-0.15, 0.1}};
    cb.masks = default_masks(rig.dom, cb);
    const double dPhi0 = eval_Phi(rig.eval, rig.flow0, ca) - eval_Phi(rig.eval, rig.flow0, cb);
    const double dPhi1 = eval_Phi(rig.eval, shifted, ca) - eval_Phi(rig.eval, shifted, cb);
    REQUIRE(dPhi0 == Catch::Approx(dPhi1).epsilon(1e-12));
}

TEST_CASE("convergence study assembles trends over the sweep") {
    Rig rig;
    VortexConfig cfg = rig.centered();
    const Grid grid = make_grid(rig.dom, 128);
    const auto steps =
        continue_in_eps(rig.eval, rig.flow0, cfg, {0.1, 0.07, 0.05}, rig.profile, grid);
    const auto study = convergence_study(steps, rig.dom, rig.flow0, cfg, {{0.0, 0.0}},
                                         rig.dom.enclosing_radius);
    REQUIRE(study.rows.size() == 3);
    REQUIRE(study.circulation_error_decreasing);
    REQUIRE(study.radius_ratio_stable);
    for (const auto& row : study.rows) {
        REQUIRE(row.dist_to_zstar[0] <= 2.0 * grid.dx);
        REQUIRE(row.circulation_error_vs_pred / row.circulation < 0.03);
    }
    REQUIRE_THROWS_AS(convergence_study({steps[0], steps[1]}, rig.dom, rig.flow0, cfg,
                                        {{0.0, 0.0}}, rig.dom.enclosing_radius),
                      Error);
}

TEST_CASE("asymmetric pair diagnostics at the collinear critical point") {
    // strengths (1,2): critical point located on the diameter by a 2-D scan
    Rig rig;
    VortexConfig cfg;
    cfg.kappa = {1.0, 2.0};
    cfg.z = {{0.55, 0.0}, {-0.45, 0.0}};
    const CriticalPoint cp = find_critical(rig.eval, rig.flow0, cfg, cfg.z);
    REQUIRE(cp.grad_norm < 1e-9);
    REQUIRE(std::abs(cp.z[0].y) < 1e-8);
    REQUIRE(std::abs(cp.z[1].y) < 1e-8);
    REQUIRE(cp.z[0].x > 0.0);
    REQUIRE(cp.z[1].x < 0.0);

    // ansatz-level per-core circulations match the finite-eps prediction
    // (the weak vortex sits near the wall; eps = 0.02 keeps its core inside
    // the default mask)
    VortexConfig at_cp = cfg;
    at_cp.z = cp.z;
    at_cp.masks = default_masks(rig.dom, at_cp);
    const ScaleParams sc = ScaleParams::make(0.02, 2.0);
    const AnsatzParams ap = solve_params(rig.eval, rig.flow0, at_cp, sc, rig.profile);
    const Grid grid = make_grid(rig.dom, 192);
    const GridField P = assemble_ansatz(rig.eval, rig.flow0, at_cp, ap, sc, rig.profile, grid);
    FreeBoundaryWorkspace ws(rig.dom, grid, rig.flow0, at_cp, sc);
    const GridField uP = ws.recover_u(P);
    const CirculationResult c = circulation(uP, rig.dom, rig.flow0, at_cp, sc);
    REQUIRE(c.per_core.size() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
        const int vid = c.cores[j].mask_id;
        const double pred = ap.a[vid] * sc.abs_ln_eps /
                            std::log(rig.dom.enclosing_radius / ap.s[vid]);
        // the companion's log tail inflates the active set at desk eps, so
        // the leading-order prediction is only matched to ~10%
        REQUIRE(c.per_core[j] == Catch::Approx(pred).epsilon(0.12));
    }
    // the stronger vortex carries the larger per-core circulation
    REQUIRE(c.per_core[c.cores[0].mask_id == 1 ? 0 : 1] >
            c.per_core[c.cores[0].mask_id == 1 ? 1 : 0]);
}
