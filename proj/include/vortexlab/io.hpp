#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vortexlab/diagnostics.hpp"

namespace vortexlab {

using json = nlohmann::ordered_json;
inline constexpr int schema_version = 1;

// ---------------------------------------------------------------------------
// grid CSV: header line "nx,ny,x0,y0,dx,dy", one line with the six values,
// then ny rows of nx comma-separated values (row-major, j = 0 first);
// non-interior cells are written as nan
// ---------------------------------------------------------------------------

inline void write_grid_csv(const GridField& f, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::io_error, "cannot open " + path + " for writing");
    out << "nx,ny,x0,y0,dx,dy\n";
    out.precision(17);
    out << f.grid.nx << ',' << f.grid.ny << ',' << f.grid.x0 << ',' << f.grid.y0 << ','
        << f.grid.dx << ',' << f.grid.dy << '\n';
    for (int j = 0; j < f.grid.ny; ++j) {
        for (int i = 0; i < f.grid.nx; ++i) {
            if (i) out << ',';
            if (f.interior(i, j)) out << f.at(i, j);
            else out << "nan";
        }
        out << '\n';
    }
    require(out.good(), ErrorCode::io_error, "write failed for " + path);
}

inline GridField read_grid_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::getline(in, line);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream hdr(line);
    Grid g;
    hdr >> g.nx >> g.ny >> g.x0 >> g.y0 >> g.dx >> g.dy;
    require(g.nx > 0 && g.ny > 0 && g.dx > 0 && g.dy > 0, ErrorCode::io_error,
            "malformed grid header in " + path);
    GridField f(g);
    for (int j = 0; j < g.ny; ++j) {
        require(bool(std::getline(in, line)), ErrorCode::io_error, "truncated grid in " + path);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        for (int i = 0; i < g.nx; ++i) {
            std::string tok;
            row >> tok;
            if (tok == "nan" || tok == "NaN") {
                f.at(i, j) = 0.0;
            } else {
                f.at(i, j) = std::stod(tok);
                f.mask[g.index(i, j)] = 1;
            }
        }
    }
    return f;
}

inline void write_profile_csv(const ProfileSolution& sol, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::io_error, "cannot open " + path);
    out.precision(17);
    out << "r,phi,dphi\n";
    for (std::size_t k = 0; k < sol.r.size(); ++k) {
        out << sol.r[k] << ',' << sol.phi[k] << ',' << sol.dphi[k] << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON report pieces
// ---------------------------------------------------------------------------

inline json to_json(const ProfileSolution& sol) {
    return json{{"schema_version", schema_version},
                {"p", sol.p},
                {"phi0", sol.phi0},
                {"phi_prime_1", sol.phi_prime_1},
                {"I_p", sol.I_p},
                {"I_p1", sol.I_p1},
                {"pohozaev_residuals", {sol.pohozaev_res_p, sol.pohozaev_res_p1}}};
}

inline json to_json(const CriticalPoint& cp) {
    json zs = json::array();
    for (const auto& z : cp.z) zs.push_back({z.x, z.y});
    return json{{"schema_version", schema_version},
                {"Z_star", zs},
                {"grad_norm", cp.grad_norm},
                {"hessian_eigs", cp.hessian_eigs},
                {"class", critical_kind_name(cp.kind)},
                {"class_transversal", critical_kind_name(cp.transversal_kind)},
                {"orbit_degenerate", cp.orbit_degenerate},
                {"iterations", cp.iterations}};
}

inline json to_json(const AnsatzParams& p) {
    return json{{"schema_version", schema_version},
                {"s", p.s},
                {"a", p.a},
                {"s_in_bracket", p.s_in_bracket},
                {"a_in_bracket", p.a_in_bracket},
                {"residual_s", p.residual_s},
                {"residual_a", p.residual_a},
                {"iterations", p.iterations}};
}

inline json to_json(const CoreComponent& c) {
    return json{{"mask_id", c.mask_id},
                {"n_cells", c.n_cells},
                {"area", c.area},
                {"centroid", {c.centroid.x, c.centroid.y}},
                {"centroid_geometric", {c.centroid_geometric.x, c.centroid_geometric.y}},
                {"radius", c.radius},
                {"radius_equiv", c.radius_equiv},
                {"max_excess", c.max_excess}};
}

inline json to_json(const SolveReport& r) {
    json cores = json::array();
    for (const auto& c : r.cores) cores.push_back(to_json(c));
    json out{{"schema_version", schema_version},
             {"converged", r.converged},
             {"status", r.status},
             {"iterations", r.iterations},
             {"final_residual", r.final_residual},
             {"eps", r.eps},
             {"delta", r.delta},
             {"p", r.p},
             {"grid", {r.nx, r.ny}},
             {"core_split", r.core_split},
             {"cores", cores}};
    // wall-clock lives in its own subobject so reproducibility checks can
    // drop it
    out["timing"] = {{"wall_seconds", r.wall_seconds}};
    return out;
}

inline void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::io_error, "cannot open " + path);
    out << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open " + path);
    return json::parse(in);
}

// ---------------------------------------------------------------------------
// run configuration: plain-text sections of key = value lines
// ---------------------------------------------------------------------------

struct RunConfig {
    // domain
    DomainKind kind = DomainKind::disk;
    std::vector<double> shape_params = {1.0};
    std::vector<Vec2> polygon;
    int resolution = 128;
    // flow
    std::string flow_preset = "zero";  // zero | cos_theta | sin_cos2 | file
    std::string flow_file;
    // vortex
    std::vector<double> kappa = {1.0};
    std::vector<Vec2> seed_z = {{0.0, 0.0}};
    bool use_masks = true;
    double rho_floor = 0.0;
    // solver
    double p = 2.0;
    std::vector<double> eps_list = {0.05};
    double tol = 1e-10;
    int max_iter = 50;
    std::string backend = "auto";  // auto | analytic | grid
    // output
    std::string output_dir = "out";
    int jobs = 1;
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& s) {
    std::istringstream iss(s);
    std::vector<double> out;
    double v;
    while (iss >> v) out.push_back(v);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    const auto b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

} // namespace detail

inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']', ErrorCode::config_invalid,
                    "malformed section header at line " + std::to_string(lineno));
            section = line.substr(1, line.size() - 2);
            require(section == "domain" || section == "flow" || section == "vortex" ||
                        section == "solver" || section == "output",
                    ErrorCode::config_invalid, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::config_invalid,
                "expected key = value at line " + std::to_string(lineno));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        auto nums = detail::parse_numbers(val);

        auto unknown = [&]() {
            fail(ErrorCode::config_invalid, "unknown key '" + key + "' in [" + section + "]");
        };
        if (section == "domain") {
            if (key == "kind") {
                if (val == "disk") cfg.kind = DomainKind::disk;
                else if (val == "ellipse") cfg.kind = DomainKind::ellipse;
                else if (val == "rectangle") cfg.kind = DomainKind::rectangle;
                else if (val == "annulus") cfg.kind = DomainKind::annulus;
                else if (val == "polygon") cfg.kind = DomainKind::polygon;
                else fail(ErrorCode::config_invalid, "unknown domain kind " + val);
            } else if (key == "params") cfg.shape_params = nums;
            else if (key == "vertices") {
                require(nums.size() % 2 == 0, ErrorCode::config_invalid,
                        "vertices must hold x y pairs");
                cfg.polygon.clear();
                for (std::size_t k = 0; k + 1 < nums.size(); k += 2)
                    cfg.polygon.push_back({nums[k], nums[k + 1]});
            } else if (key == "resolution") cfg.resolution = int(nums.at(0));
            else unknown();
        } else if (section == "flow") {
            if (key == "preset") cfg.flow_preset = val;
            else if (key == "file") {
                cfg.flow_preset = "file";
                cfg.flow_file = val;
            } else unknown();
        } else if (section == "vortex") {
            if (key == "kappa") cfg.kappa = nums;
            else if (key == "seed") {
                require(nums.size() % 2 == 0, ErrorCode::config_invalid,
                        "seed must hold x y pairs");
                cfg.seed_z.clear();
                for (std::size_t k = 0; k + 1 < nums.size(); k += 2)
                    cfg.seed_z.push_back({nums[k], nums[k + 1]});
            } else if (key == "use_masks") cfg.use_masks = (val == "true" || val == "1");
            else if (key == "rho_floor") cfg.rho_floor = nums.at(0);
            else unknown();
        } else if (section == "solver") {
            if (key == "p") cfg.p = nums.at(0);
            else if (key == "eps") cfg.eps_list = nums;
            else if (key == "tol") cfg.tol = nums.at(0);
            else if (key == "max_iter") cfg.max_iter = int(nums.at(0));
            else if (key == "backend") cfg.backend = val;
            else unknown();
        } else if (section == "output") {
            if (key == "dir") cfg.output_dir = val;
            else if (key == "jobs") cfg.jobs = std::max(1, int(nums.at(0)));
            else unknown();
        } else {
            fail(ErrorCode::config_invalid, "key '" + key + "' outside any section");
        }
    }
    require(cfg.kappa.size() == cfg.seed_z.size(), ErrorCode::config_invalid,
            "kappa and seed must list the same number of vortices");
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open config " + path);
    return parse_config(in);
}

inline std::vector<double> flow_samples_for(const RunConfig& cfg, const DomainDescriptor& dom) {
    if (cfg.flow_preset == "zero") return {};
    if (cfg.flow_preset == "cos_theta") {
        return sample_flux(dom, [](double u) { return std::cos(u); });
    }
    if (cfg.flow_preset == "sin_cos2") {
        return sample_flux(dom, [](double u) { return std::sin(u) + std::cos(2 * u); });
    }
    if (cfg.flow_preset == "file") {
        std::ifstream in(cfg.flow_file);
        require(in.good(), ErrorCode::io_error, "cannot open flux file " + cfg.flow_file);
        std::vector<double> vals;
        double v;
        while (in >> v) vals.push_back(v);
        return vals;
    }
    fail(ErrorCode::config_invalid, "unknown flow preset " + cfg.flow_preset);
}

} // namespace vortexlab
