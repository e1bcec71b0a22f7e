// Command-line front end: each subcommand is independently runnable on the
// others' outputs, and `pipeline` chains them end to end.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "vortexlab/pipeline.hpp"

using namespace vortexlab;

namespace {

std::string default_output_root() {
    const char* env = std::getenv("VORTEXLAB_OUT");
    return env ? env : "out";
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
};

RunConfig load_with_overrides(const CommonArgs& args) {
    RunConfig cfg = load_config(args.config_path);
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    else if (cfg.output_dir == "out") cfg.output_dir = default_output_root();
    return cfg;
}

// subcommands chain through the output directory: when a critical-point
// artifact is present, ansatz and solve pick the located positions over the
// raw config seed
void adopt_critical_point(VortexConfig& vcfg, const std::string& out_dir) {
    const std::string path = out_dir + "/critical_point.json";
    if (!std::filesystem::exists(path)) return;
    const json cp = read_json(path);
    std::vector<Vec2> z;
    for (const auto& zz : cp["Z_star"]) z.push_back({zz[0], zz[1]});
    if (z.size() == vcfg.z.size()) vcfg.z = z;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

// the evaluator references the descriptor, so the descriptor needs a stable
// address across moves of this bundle
struct Instruments {
    std::shared_ptr<DomainDescriptor> dom_ptr;
    PotentialEvaluator eval;
    BackgroundFlow flow;
    VortexConfig vcfg;
    const DomainDescriptor& dom() const { return *dom_ptr; }
};

Instruments make_instruments(const RunConfig& cfg) {
    auto dom = std::make_shared<DomainDescriptor>(
        make_domain(cfg.kind, cfg.shape_params, cfg.resolution, cfg.polygon));
    const bool analytic = (cfg.backend == "analytic") ||
                          (cfg.backend == "auto" && cfg.kind == DomainKind::disk);
    require(!(cfg.backend == "analytic" && cfg.kind != DomainKind::disk),
            ErrorCode::config_invalid, "the analytic backend requires a disk");
    PotentialEvaluator eval = analytic
                                  ? PotentialEvaluator::analytic_disk(*dom)
                                  : PotentialEvaluator::grid_harmonic(*dom, cfg.resolution);
    BackgroundFlow flow = solve_background(eval, flow_samples_for(cfg, *dom));
    VortexConfig vcfg;
    vcfg.kappa = cfg.kappa;
    vcfg.z = cfg.seed_z;
    vcfg.use_masks = cfg.use_masks;
    vcfg.rho_floor = cfg.rho_floor;
    return Instruments{std::move(dom), std::move(eval), std::move(flow), std::move(vcfg)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desingularized point-vortex equilibria: profile, Kirchhoff-Routh "
                 "critical points, vortex-core ansatz, free-boundary solves, and "
                 "verification diagnostics"};
    app.require_subcommand(1);

    // profile
    double profile_p = 2.0;
    std::string profile_out = default_output_root();
    auto* sub_profile = app.add_subcommand("profile", "solve the radial core profile");
    sub_profile->add_option("--p", profile_p, "nonlinearity exponent (1, 10]")->required();
    sub_profile->add_option("--out", profile_out, "output directory");

    // shared config-driven subcommands
    CommonArgs cp_args, ansatz_args, solve_args, verify_args, pipe_args;
    auto add_common = [&](CLI::App* sub, CommonArgs& args) {
        sub->add_option("--config", args.config_path, "run configuration file")->required();
        sub->add_option("--out", args.out_dir, "output directory override");
    };
    auto* sub_cp = app.add_subcommand("critical-points",
                                      "locate and classify a Kirchhoff-Routh critical point");
    add_common(sub_cp, cp_args);
    auto* sub_ansatz =
        app.add_subcommand("ansatz", "solve the core parameters and assemble the field");
    add_common(sub_ansatz, ansatz_args);

    auto* sub_solve = app.add_subcommand("solve", "Newton solve of the free-boundary problem");
    add_common(sub_solve, solve_args);
    std::vector<double> solve_eps;
    std::string solve_seed = "ansatz";
    std::string seed_file;
    double solve_p = 0.0;
    int solve_grid = 0;
    bool no_masks = false;
    sub_solve->add_option("--eps", solve_eps, "override eps list (strictly decreasing)");
    sub_solve->add_option("--p", solve_p, "override exponent");
    sub_solve->add_option("--grid", solve_grid, "override grid resolution");
    sub_solve->add_option("--seed", solve_seed, "seed choice: ansatz | file | zero");
    sub_solve->add_option("--seed-file", seed_file, "grid CSV for --seed file");
    sub_solve->add_flag("--no-masks", no_masks, "equi-strength mode without subdomain masks");

    auto* sub_verify =
        app.add_subcommand("verify", "diagnostics on saved solve outputs");
    add_common(sub_verify, verify_args);
    std::vector<double> verify_eps;
    sub_verify->add_option("--eps", verify_eps, "eps values whose artifacts to verify");

    auto* sub_pipe = app.add_subcommand("pipeline", "run the full chain");
    add_common(sub_pipe, pipe_args);
    int pipe_jobs = 0;
    sub_pipe->add_option("--jobs", pipe_jobs, "verification worker cap");

    CLI11_PARSE(app, argc, argv);

    if (sub_profile->parsed()) {
        return guarded([&] {
            std::filesystem::create_directories(profile_out);
            const ProfileSolution sol = solve_profile(profile_p);
            write_profile_csv(sol, profile_out + "/profile.csv");
            write_json(to_json(sol), profile_out + "/profile.json");
            std::cout << "phi'(1) = " << sol.phi_prime_1
                      << ", pohozaev residuals = " << sol.pohozaev_res_p << ", "
                      << sol.pohozaev_res_p1 << "\n";
            return 0;
        });
    }

    if (sub_cp->parsed()) {
        return guarded([&] {
            RunConfig cfg = load_with_overrides(cp_args);
            std::filesystem::create_directories(cfg.output_dir);
            Instruments ins = make_instruments(cfg);
            FindCriticalOptions opts;
            opts.record_trajectory = true;
            if (ins.eval.backend() == PotentialEvaluator::Backend::grid_harmonic)
                opts.tol = 1e-8;
            const CriticalPoint cp = find_critical(ins.eval, ins.flow, ins.vcfg, cfg.seed_z, opts);
            write_json(to_json(cp), cfg.output_dir + "/critical_point.json");
            std::ofstream traj(cfg.output_dir + "/trajectory.csv");
            traj << "iter,grad_norm";
            for (int v = 0; v < ins.vcfg.m(); ++v) traj << ",z" << v << "x,z" << v << "y";
            traj << '\n';
            traj.precision(17);
            for (std::size_t it = 0; it < cp.trajectory.size(); ++it) {
                traj << it << ',' << cp.trajectory[it].second;
                for (const auto& z : cp.trajectory[it].first) traj << ',' << z.x << ',' << z.y;
                traj << '\n';
            }
            std::cout << to_json(cp).dump(2) << "\n";
            return 0;
        });
    }

    if (sub_ansatz->parsed()) {
        return guarded([&] {
            RunConfig cfg = load_with_overrides(ansatz_args);
            std::filesystem::create_directories(cfg.output_dir);
            Instruments ins = make_instruments(cfg);
            adopt_critical_point(ins.vcfg, cfg.output_dir);
            ins.vcfg.masks = default_masks(ins.dom(), ins.vcfg);
            const ProfileSolution profile = solve_profile(cfg.p);
            const ScaleParams scale = ScaleParams::make(cfg.eps_list.front(), cfg.p);
            const AnsatzParams params = solve_params(ins.eval, ins.flow, ins.vcfg, scale, profile);
            write_json(to_json(params), cfg.output_dir + "/ansatz_params.json");
            const Grid grid = make_grid(ins.dom(), cfg.resolution);
            write_grid_csv(
                assemble_ansatz(ins.eval, ins.flow, ins.vcfg, params, scale, profile, grid),
                cfg.output_dir + "/ansatz_field.csv");
            std::cout << to_json(params).dump(2) << "\n";
            return 0;
        });
    }

    if (sub_solve->parsed()) {
        return guarded([&] {
            RunConfig cfg = load_with_overrides(solve_args);
            if (!solve_eps.empty()) cfg.eps_list = solve_eps;
            if (solve_p > 0) cfg.p = solve_p;
            if (solve_grid > 0) cfg.resolution = solve_grid;
            if (no_masks) cfg.use_masks = false;
            std::filesystem::create_directories(cfg.output_dir);
            Instruments ins = make_instruments(cfg);
            adopt_critical_point(ins.vcfg, cfg.output_dir);
            ins.vcfg.masks = default_masks(ins.dom(), ins.vcfg);
            const ProfileSolution profile = solve_profile(cfg.p);
            const Grid grid = make_grid(ins.dom(), cfg.resolution);
            NewtonOptions opts;
            opts.tol_rel = cfg.tol;
            opts.max_iter = cfg.max_iter;

            if (solve_seed == "ansatz") {
                const auto steps = continue_in_eps(ins.eval, ins.flow, ins.vcfg, cfg.eps_list,
                                                   profile, grid, opts);
                for (const auto& st : steps) {
                    std::ostringstream tag;
                    tag << "eps" << st.eps;
                    write_grid_csv(st.w, cfg.output_dir + "/solution_w_" + tag.str() + ".csv");
                    write_grid_csv(st.u, cfg.output_dir + "/solution_u_" + tag.str() + ".csv");
                    write_json(to_json(st.report),
                               cfg.output_dir + "/solve_report_" + tag.str() + ".json");
                    std::cout << "eps " << st.eps << ": " << st.report.status << " in "
                              << st.report.iterations << " iterations\n";
                }
                return 0;
            }

            const ScaleParams scale = ScaleParams::make(cfg.eps_list.front(), cfg.p);
            FreeBoundaryWorkspace ws(ins.dom(), grid, ins.flow, ins.vcfg, scale);
            GridField seed = ws.blank_field(FieldTag::w);
            if (solve_seed == "file") {
                seed = read_grid_csv(seed_file);
            } else {
                require(solve_seed == "zero", ErrorCode::config_invalid,
                        "--seed must be ansatz, file, or zero");
            }
            auto [w, rep] = ws.newton_solve(seed, opts);
            std::ostringstream tag;
            tag << "eps" << scale.eps;
            write_grid_csv(w, cfg.output_dir + "/solution_w_" + tag.str() + ".csv");
            write_grid_csv(ws.recover_u(w), cfg.output_dir + "/solution_u_" + tag.str() + ".csv");
            write_json(to_json(rep), cfg.output_dir + "/solve_report_" + tag.str() + ".json");
            std::cout << "eps " << scale.eps << ": " << rep.status << "\n";
            return 0;
        });
    }

    if (sub_verify->parsed()) {
        return guarded([&] {
            RunConfig cfg = load_with_overrides(verify_args);
            if (!verify_eps.empty()) cfg.eps_list = verify_eps;
            Instruments ins = make_instruments(cfg);
            const ProfileSolution profile = solve_profile(cfg.p);
            const json cpj = read_json(cfg.output_dir + "/critical_point.json");
            std::vector<Vec2> z_star;
            for (const auto& z : cpj["Z_star"]) z_star.push_back({z[0], z[1]});
            ins.vcfg.z = z_star;
            ins.vcfg.masks = default_masks(ins.dom(), ins.vcfg);

            std::vector<ContinuationStep> steps;
            for (double eps : cfg.eps_list) {
                std::ostringstream tag;
                tag << "eps" << eps;
                ContinuationStep st;
                st.eps = eps;
                st.w = read_grid_csv(cfg.output_dir + "/solution_w_" + tag.str() + ".csv");
                st.u = read_grid_csv(cfg.output_dir + "/solution_u_" + tag.str() + ".csv");
                const ScaleParams scale = ScaleParams::make(eps, cfg.p);
                st.params = solve_params(ins.eval, ins.flow, ins.vcfg, scale, profile);
                FreeBoundaryWorkspace ws(ins.dom(), st.w.grid, ins.flow, ins.vcfg, scale);
                SolveReport rep;
                rep.converged = true;
                rep.status = "loaded";
                rep.eps = eps;
                rep.delta = scale.delta;
                rep.p = cfg.p;
                rep.nx = st.w.grid.nx;
                rep.ny = st.w.grid.ny;
                rep.cores = ws.detect_cores(st.w);
                st.report = std::move(rep);
                steps.push_back(std::move(st));
            }
            const VerificationReport rep =
                verify_sweep(steps, ins.eval, ins.flow, ins.vcfg, profile, z_star, {}, cfg.jobs);
            write_json(rep.data, cfg.output_dir + "/verification.json");
            std::cout << rep.data.dump(2) << "\n";
            return rep.all_passed ? 0 : 1;
        });
    }

    if (sub_pipe->parsed()) {
        return guarded([&] {
            RunConfig cfg = load_with_overrides(pipe_args);
            if (pipe_jobs > 0) cfg.jobs = pipe_jobs;
            const PipelineResult res = run_pipeline(cfg);
            std::cout << (res.exit_code == 0 ? "pipeline passed" : "pipeline failed")
                      << "; artifacts in " << res.output_dir << "\n";
            return res.exit_code;
        });
    }

    return 0;
}
