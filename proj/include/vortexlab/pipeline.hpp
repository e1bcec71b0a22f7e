#pragma once

#include <atomic>
#include <thread>

#include "vortexlab/io.hpp"

namespace vortexlab {

// Desk-scale verification thresholds applied by the pipeline's verify stage.
// The circulation check compares against the finite-eps prediction
// sum_j a_j |ln eps| / ln(R/s_j); convergence to sum kappa itself is
// logarithmic and is reported as a trend, not a threshold.
struct VerifyTolerances {
    int max_newton_iters = 15;
    double circulation_vs_predicted = 0.03;
    double centroid_cells = 3.0;
    double radius_ratio_spread = 0.20;
    double energy_consistency = 0.05;
};

struct VerificationReport {
    json to_json() const { return data; }
    json data;
    bool all_passed = false;
};

struct PipelineResult {
    int exit_code = 1;
    json run_log;
    std::string output_dir;
};

namespace detail {

inline void for_each_parallel(std::size_t count, int jobs,
                              const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int nw = std::min<int>(jobs, int(count));
    for (int t = 0; t < nw; ++t) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

// Runs verification diagnostics on a finished sweep and assembles the report.
inline VerificationReport verify_sweep(const std::vector<ContinuationStep>& steps,
                                       const PotentialEvaluator& eval,
                                       const BackgroundFlow& flow, const VortexConfig& cfg,
                                       const ProfileSolution& profile,
                                       const std::vector<Vec2>& z_star,
                                       const VerifyTolerances& tols = {}, int jobs = 1) {
    const DomainDescriptor& dom = eval.domain();
    const double R = dom.enclosing_radius;
    double kappa_sum = 0.0;
    for (double k : cfg.kappa) kappa_sum += k;

    struct PerEps {
        json row;
        bool newton_ok = true, circ_ok = true, centroid_ok = true, cores_ok = true;
        bool energy_ok = true;
        double circ_err_raw = 0.0;
        std::vector<double> radius_ratio;
    };
    std::vector<PerEps> rows(steps.size());

    detail::for_each_parallel(steps.size(), jobs, [&](std::size_t i) {
        const ContinuationStep& st = steps[i];
        PerEps& r = rows[i];
        const ScaleParams scale = ScaleParams::make(st.eps, profile.p);
        const double h = st.w.grid.dx;

        const CirculationResult circ = circulation(st.u, dom, flow, cfg, scale);
        const double pred = predicted_circulation(st.params, scale, R);
        const double circ_rel_pred = std::abs(circ.total - pred) / pred;
        r.circ_err_raw = std::abs(circ.total - kappa_sum);

        r.newton_ok = st.report.converged && st.report.iterations <= tols.max_newton_iters;
        r.circ_ok = circ_rel_pred <= tols.circulation_vs_predicted;
        r.cores_ok = int(st.report.cores.size()) == cfg.m() && !st.report.core_split;

        double max_dist_cells = 0.0;
        json dists = json::array();
        for (const auto& core : st.report.cores) {
            const Vec2 target = (core.mask_id >= 0 && core.mask_id < int(z_star.size()))
                                    ? z_star[core.mask_id]
                                    : z_star.front();
            const double d = dist(core.centroid, target);
            dists.push_back(d);
            max_dist_cells = std::max(max_dist_cells, d / h);
            r.radius_ratio.push_back(core.radius / st.eps);
        }
        r.centroid_ok = max_dist_cells <= tols.centroid_cells;

        const double K_grid = energy(st.w, dom, flow, cfg, scale);
        const double K_ans = ansatz_energy(eval, flow, cfg, st.params, scale, profile);
        const double e_res = std::abs(K_grid - K_ans) / std::max(std::abs(K_grid), 1e-300);
        r.energy_ok = e_res <= tols.energy_consistency;

        r.row = json{{"eps", st.eps},
                     {"newton_iterations", st.report.iterations},
                     {"final_residual", st.report.final_residual},
                     {"circulation", circ.total},
                     {"circulation_predicted", pred},
                     {"circulation_rel_vs_predicted", circ_rel_pred},
                     {"circulation_err_vs_kappa_sum", r.circ_err_raw},
                     {"per_core_circulation", circ.per_core},
                     {"dist_to_zstar", dists},
                     {"max_dist_to_zstar_cells", max_dist_cells},
                     {"energy_grid", K_grid},
                     {"energy_ansatz", K_ans},
                     {"energy_residual", e_res}};
    });

    bool newton_all = true, circ_all = true, centroid_all = true, cores_all = true,
         energy_all = true;
    std::vector<double> ratios;
    json rows_json = json::array();
    double prev_err = std::numeric_limits<double>::infinity();
    bool err_decreasing = true;
    for (auto& r : rows) {
        newton_all &= r.newton_ok;
        circ_all &= r.circ_ok;
        centroid_all &= r.centroid_ok;
        cores_all &= r.cores_ok;
        energy_all &= r.energy_ok;
        err_decreasing &= (r.circ_err_raw < prev_err);
        prev_err = r.circ_err_raw;
        for (double x : r.radius_ratio) ratios.push_back(x);
        rows_json.push_back(r.row);
    }
    double mean = 0.0, spread = 0.0;
    for (double x : ratios) mean += x;
    mean /= std::max<std::size_t>(1, ratios.size());
    for (double x : ratios) spread = std::max(spread, std::abs(x - mean) / mean);
    const bool radius_ok = steps.size() < 3 || spread <= tols.radius_ratio_spread;
    const bool trend_ok = steps.size() < 2 || err_decreasing;

    VerificationReport rep;
    rep.all_passed =
        newton_all && circ_all && centroid_all && cores_all && energy_all && radius_ok && trend_ok;
    rep.data = json{{"schema_version", schema_version},
                    {"tolerances",
                     {{"max_newton_iters", tols.max_newton_iters},
                      {"circulation_vs_predicted", tols.circulation_vs_predicted},
                      {"centroid_cells", tols.centroid_cells},
                      {"radius_ratio_spread", tols.radius_ratio_spread},
                      {"energy_consistency", tols.energy_consistency}}},
                    {"per_eps", rows_json},
                    {"radius_over_eps_spread", spread},
                    {"checks",
                     {{"newton", newton_all},
                      {"circulation_vs_predicted", circ_all},
                      {"circulation_error_decreasing", trend_ok},
                      {"centroids", centroid_all},
                      {"cores", cores_all},
                      {"energy_consistency", energy_all},
                      {"radius_ratio_stable", radius_ok}}},
                    {"all_passed", rep.all_passed}};
    return rep;
}

// Full pipeline: profile -> critical point -> ansatz -> solve sweep -> verify.
// Every stage writes its artifact; failures land in the run log with the
// stage name and machine-readable code.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    PipelineResult result;
    result.output_dir = cfg.output_dir;
    fs::create_directories(cfg.output_dir);
    json stages = json::array();
    auto out_path = [&](const std::string& name) { return cfg.output_dir + "/" + name; };

    auto run_stage = [&](const std::string& name, auto&& body) -> bool {
        const auto t0 = std::chrono::steady_clock::now();
        json entry{{"stage", name}, {"status", "ok"}};
        bool ok = true;
        try {
            body();
        } catch (const Error& e) {
            entry["status"] = "error";
            entry["error_code"] = error_code_name(e.code());
            entry["message"] = e.what();
            ok = false;
        } catch (const std::exception& e) {
            entry["status"] = "error";
            entry["error_code"] = "INTERNAL";
            entry["message"] = e.what();
            ok = false;
        }
        entry["timing"] = {
            {"wall_seconds",
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
        stages.push_back(entry);
        return ok;
    };

    DomainDescriptor dom;
    std::optional<PotentialEvaluator> eval;
    std::optional<BackgroundFlow> flow;
    std::optional<ProfileSolution> profile;
    std::optional<CriticalPoint> critical;
    VortexConfig vcfg;
    std::vector<ContinuationStep> steps;
    std::optional<VerificationReport> verification;

    bool ok = run_stage("setup", [&] {
        dom = make_domain(cfg.kind, cfg.shape_params, cfg.resolution, cfg.polygon);
        const bool analytic = (cfg.backend == "analytic") ||
                              (cfg.backend == "auto" && cfg.kind == DomainKind::disk);
        require(!(cfg.backend == "analytic" && cfg.kind != DomainKind::disk),
                ErrorCode::config_invalid, "the analytic backend requires a disk");
        if (analytic) eval = PotentialEvaluator::analytic_disk(dom);
        else eval = PotentialEvaluator::grid_harmonic(dom, cfg.resolution);
        vcfg.kappa = cfg.kappa;
        vcfg.z = cfg.seed_z;
        vcfg.use_masks = cfg.use_masks;
        vcfg.rho_floor = cfg.rho_floor;
    });

    ok = ok && run_stage("flow", [&] {
        flow = solve_background(*eval, flow_samples_for(cfg, dom));
        if (eval->backend() == PotentialEvaluator::Backend::grid_harmonic &&
            !flow->is_zero) {
            write_grid_csv(flow->psi0, out_path("psi0.csv"));
        }
    });

    ok = ok && run_stage("profile", [&] {
        profile = solve_profile(cfg.p);
        write_profile_csv(*profile, out_path("profile.csv"));
        write_json(to_json(*profile), out_path("profile.json"));
    });

    ok = ok && run_stage("critical_points", [&] {
        FindCriticalOptions opts;
        opts.record_trajectory = true;
        if (eval->backend() == PotentialEvaluator::Backend::grid_harmonic) opts.tol = 1e-8;
        critical = find_critical(*eval, *flow, vcfg, cfg.seed_z, opts);
        vcfg.z = critical->z;
        vcfg.masks = default_masks(dom, vcfg);
        write_json(to_json(*critical), out_path("critical_point.json"));
        std::ofstream traj(out_path("trajectory.csv"));
        traj << "iter,grad_norm";
        for (int v = 0; v < vcfg.m(); ++v) traj << ",z" << v << "x,z" << v << "y";
        traj << '\n';
        traj.precision(17);
        for (std::size_t it = 0; it < critical->trajectory.size(); ++it) {
            traj << it << ',' << critical->trajectory[it].second;
            for (const auto& z : critical->trajectory[it].first)
                traj << ',' << z.x << ',' << z.y;
            traj << '\n';
        }
    });

    ok = ok && run_stage("ansatz", [&] {
        const ScaleParams scale = ScaleParams::make(cfg.eps_list.front(), cfg.p);
        const AnsatzParams params = solve_params(*eval, *flow, vcfg, scale, *profile);
        write_json(to_json(params), out_path("ansatz_params.json"));
        const Grid grid = make_grid(dom, cfg.resolution);
        write_grid_csv(assemble_ansatz(*eval, *flow, vcfg, params, scale, *profile, grid),
                       out_path("ansatz_field.csv"));
    });

    ok = ok && run_stage("solve", [&] {
        NewtonOptions opts;
        opts.tol_rel = cfg.tol;
        opts.max_iter = cfg.max_iter;
        const Grid grid = make_grid(dom, cfg.resolution);
        steps = continue_in_eps(*eval, *flow, vcfg, cfg.eps_list, *profile, grid, opts);
        for (const auto& st : steps) {
            std::ostringstream tag;
            tag << "eps" << st.eps;
            write_grid_csv(st.w, out_path("solution_w_" + tag.str() + ".csv"));
            write_grid_csv(st.u, out_path("solution_u_" + tag.str() + ".csv"));
            write_json(to_json(st.report), out_path("solve_report_" + tag.str() + ".json"));
        }
    });

    ok = ok && run_stage("verify", [&] {
        verification =
            verify_sweep(steps, *eval, *flow, vcfg, *profile, critical->z, {}, cfg.jobs);
        write_json(verification->data, out_path("verification.json"));
        std::ofstream study(out_path("study.csv"));
        study << "eps,circulation_err,core_radius_over_eps,dist_to_Zstar,energy_residual\n";
        study.precision(17);
        for (const auto& row : verification->data["per_eps"]) {
            double rmean = 0.0;
            int cnt = 0;
            for (std::size_t c = 0; c < steps.size(); ++c) (void)c;
            const double eps = row["eps"].get<double>();
            for (const auto& st : steps) {
                if (st.eps == eps) {
                    for (const auto& core : st.report.cores) {
                        rmean += core.radius / eps;
                        ++cnt;
                    }
                }
            }
            rmean /= std::max(1, cnt);
            double dmax = 0.0;
            for (const auto& d : row["dist_to_zstar"]) dmax = std::max(dmax, d.get<double>());
            study << eps << ',' << row["circulation_err_vs_kappa_sum"].get<double>() << ','
                  << rmean << ',' << dmax << ',' << row["energy_residual"].get<double>()
                  << '\n';
        }
    });

    const bool passed = ok && verification && verification->all_passed;
    result.run_log = json{{"schema_version", schema_version},
                          {"stages", stages},
                          {"all_stages_ok", ok},
                          {"verification_passed", verification ? verification->all_passed : false},
                          {"ok", passed}};
    write_json(result.run_log, out_path("run_log.json"));
    result.exit_code = passed ? 0 : 1;
    return result;
}

} // namespace vortexlab
