#pragma once

// Command-line front end. Exit codes: 0 success with all checks passing,
// 1 checks failed or solver did not converge, 2 bad input.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cone_model.hpp"
#include "conformal_models.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "solver.hpp"
#include "verification.hpp"

namespace expandernet::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failed = 1;
inline constexpr int exit_input = 2;

struct InputError : Error {
    using Error::Error;
};

namespace detail {

namespace fs = std::filesystem;

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        const std::string item = s.substr(start, comma - start);
        try {
            out.push_back(parse_double(item));
        } catch (const InvalidArgument&) {
            throw InputError("bad number '" + item + "' in list '" + s + "'");
        }
        start = comma + 1;
    }
    return out;
}

inline nlohmann::ordered_json solve_json(const SolveConfig& c) {
    nlohmann::ordered_json j;
    j["max_iters"] = c.max_iters;
    j["grad_tol"] = c.grad_tol;
    j["c1"] = c.c1;
    j["shrink"] = c.shrink;
    j["remesh_every"] = c.remesh_every;
    j["radius_schedule"] = c.radius_schedule;
    j["seed"] = c.seed;
    j["perturbation"] = c.perturbation;
    j["lbfgs_memory"] = c.lbfgs_memory;
    j["frame_refresh"] = c.frame_refresh;
    j["blend_rings"] = c.blend_rings;
    j["max_backtracks"] = c.max_backtracks;
    j["max_step_fraction"] = c.max_step_fraction;
    return j;
}

inline nlohmann::ordered_json report_json(const ReportConfig& c) {
    nlohmann::ordered_json j;
    j["h"] = c.h;
    j["k_ring"] = c.k_ring;
    j["j_fit"] = c.j_fit;
    j["tolerances"] = {{"triple_deg", c.tol.triple_deg},
                       {"quad_deg", c.tol.quad_deg},
                       {"balance", c.tol.balance},
                       {"quad_balance", c.tol.quad_balance},
                       {"residual_factor", c.tol.residual_factor},
                       {"hausdorff_factor", c.tol.hausdorff_factor},
                       {"persistence_factor", c.tol.persistence_factor},
                       {"solid_angle_slack", c.tol.solid_angle_slack},
                       {"monotone_floor", c.tol.monotone_floor}};
    j["shells"] = c.shells;
    j["shell_width"] = c.shell_width;
    j["end_radii"] = c.end_radii;
    j["end_width"] = c.end_width;
    j["end_spacing"] = c.end_fit.spacing;
    j["end_angular_margin"] = c.end_fit.angular_margin;
    return j;
}

inline ConeSpec load_cone(const std::string& path) { return read_conespec(read_text_file(path)); }

/// Collects inputs and outputs of one run and writes its manifest.
class Recorder {
public:
    Recorder(std::string command, std::vector<std::string> args)
        : start_(std::chrono::steady_clock::now()) {
        m_.command = std::move(command);
        m_.arguments = std::move(args);
        m_.threads = static_cast<std::size_t>(thread_count());
    }

    std::string input(const std::string& path) {
        std::string text = read_text_file(path);
        m_.inputs[path] = digest_hex(text);
        return text;
    }

    void output(const std::string& path, const std::string& text) {
        write_text_file(path, text);
        m_.outputs[path] = digest_hex(text);
    }

    RunManifest& manifest() { return m_; }

    void finish(const std::string& path) {
        m_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_text_file(path, write_manifest(m_));
    }

private:
    RunManifest m_;
    std::chrono::steady_clock::time_point start_;
};

inline bool is_input_error(const Error& e) {
    return dynamic_cast<const InputError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
           dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const InvalidComplex*>(&e) ||
           dynamic_cast<const TemplateMismatch*>(&e) || dynamic_cast<const NotOnHyperboloid*>(&e) ||
           dynamic_cast<const OnIdealBoundary*>(&e);
}

inline std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

inline ReportConfig report_config_for(const SurfaceComplex& c, double h) {
    ReportConfig rc;
    rc.h = h > 0.0 ? h : expandernet::detail::mean_edge_length(c, build_topology(c));
    return rc;
}

}  // namespace detail

/// Runs the tool; argv[0] is the program name. Output streams are injectable for tests.
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace detail;
    CLI::App app{"Self-expanding multiphase surface networks: build, minimize, verify."};
    app.require_subcommand(1);
    const std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());

    // validate-cone
    auto* vc = app.add_subcommand("validate-cone", "Check a cone spec and print node angles");
    std::string vc_path;
    double vc_tol = 0.1;
    vc->add_option("spec", vc_path, "cone spec file")->required();
    vc->add_option("--tol-deg", vc_tol, "node angle tolerance in degrees")->capture_default_str();

    // init
    auto* in = app.add_subcommand("init", "Instantiate a template mesh");
    std::string in_cone, in_tmpl, in_out;
    double in_R = 0.0, in_h = 0.0, in_strip = 0.0;
    bool in_nonregular = false;
    in->add_option("--cone", in_cone)->required();
    in->add_option("--template", in_tmpl)->required();
    in->add_option("--radius", in_R)->required();
    in->add_option("--edge", in_h)->required();
    in->add_option("--out", in_out)->required();
    in->add_option("--strip-width", in_strip, "connector strip width (0: 0.3 R)")->capture_default_str();
    in->add_flag("--allow-nonregular", in_nonregular, "accept cones with non-120 degree nodes");

    // minimize
    auto* mn = app.add_subcommand("minimize", "Minimize the weighted area of a mesh");
    std::string mn_mesh, mn_cone, mn_out, mn_log;
    SolveConfig mn_cfg;
    mn->add_option("--mesh", mn_mesh)->required();
    mn->add_option("--cone", mn_cone)->required();
    mn->add_option("--out", mn_out)->required();
    mn->add_option("--tol", mn_cfg.grad_tol, "gradient RMS tolerance")->capture_default_str();
    mn->add_option("--max-iters", mn_cfg.max_iters)->capture_default_str();
    mn->add_option("--seed", mn_cfg.seed)->capture_default_str();
    mn->add_option("--perturb", mn_cfg.perturbation, "seeded normal perturbation amplitude")->capture_default_str();
    mn->add_option("--remesh-every", mn_cfg.remesh_every)->capture_default_str();
    mn->add_option("--log", mn_log, "iteration log file");

    // continue
    auto* co = app.add_subcommand("continue", "Solve along an increasing radius schedule");
    std::string co_cone, co_tmpl, co_radii, co_dir;
    double co_h = 0.0;
    bool co_nonregular = false;
    SolveConfig co_cfg;
    co->add_option("--cone", co_cone)->required();
    co->add_option("--template", co_tmpl)->required();
    co->add_option("--radii", co_radii, "comma separated, increasing")->required();
    co->add_option("--edge", co_h)->required();
    co->add_option("--outdir", co_dir)->required();
    co->add_option("--tol", co_cfg.grad_tol)->capture_default_str();
    co->add_option("--max-iters", co_cfg.max_iters)->capture_default_str();
    co->add_option("--seed", co_cfg.seed)->capture_default_str();
    co->add_flag("--allow-nonregular", co_nonregular);

    // verify
    auto* ve = app.add_subcommand("verify", "Run all checks and write a report");
    std::string ve_mesh, ve_cone, ve_report;
    double ve_h = 0.0;
    ve->add_option("--mesh", ve_mesh)->required();
    ve->add_option("--cone", ve_cone)->required();
    ve->add_option("--report", ve_report)->required();
    ve->add_option("--edge", ve_h, "mesh resolution for tolerances (0: mean edge length)")->capture_default_str();

    // map
    auto* mp = app.add_subcommand("map", "Convert points between models");
    std::string mp_from, mp_to, mp_points, mp_out;
    mp->add_option("--from", mp_from)->required()->check(CLI::IsMember({"euclid", "ball", "hyperboloid"}));
    mp->add_option("--to", mp_to)->required()->check(CLI::IsMember({"euclid", "ball", "hyperboloid"}));
    mp->add_option("points", mp_points, "one point per line")->required();
    mp->add_option("--out", mp_out, "output file (default stdout)");

    // export
    auto* ex = app.add_subcommand("export", "Write plot data as CSV");
    std::string ex_mesh, ex_what, ex_out, ex_cone, ex_radii;
    double ex_width = 0.0;
    ex->add_option("--mesh", ex_mesh)->required();
    ex->add_option("--what", ex_what)->required()->check(CLI::IsMember({"residual", "angles", "ends"}));
    ex->add_option("--out", ex_out)->required();
    ex->add_option("--cone", ex_cone, "cone spec (ends only)");
    ex->add_option("--radii", ex_radii, "annulus inner radii (ends; default 3R/8..6R/8)");
    ex->add_option("--width", ex_width, "annulus width (ends; default R/8)");

    // replay
    auto* rp = app.add_subcommand("replay", "Re-run a manifest and compare output digests");
    std::string rp_manifest;
    rp->add_option("manifest", rp_manifest)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_input;
    }

    try {
        if (*vc) {
            const ConeSpec spec = load_cone(vc_path);
            const ConeValidation v = validate_cone(spec, vc_tol);
            for (const NodeAngles& n : v.node_angles) {
                out << "node " << n.node + 1 << " angles";
                for (double a : n.angles_deg) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, " %.3f", a);
                    out << buf;
                }
                out << "\n";
            }
            for (const RegionInfo& r : v.regions) out << "region " << r.label.value << " sides " << r.side_count << "\n";
            for (const std::string& n : v.notes) out << "note " << n << "\n";
            for (const Violation& x : v.outcome.violations) err << "violation: " << x.kind << ": " << x.message << "\n";
            return v.ok() ? exit_ok : exit_failed;
        }

        if (*in) {
            Recorder rec("init", args);
            const auto tmpl = find_template(in_tmpl);
            if (!tmpl) throw InputError("unknown template '" + in_tmpl + "'; available: " + template_names());
            const ConeSpec spec = read_conespec(rec.input(in_cone));
            InstantiateOptions o;
            o.allow_nonregular = in_nonregular;
            o.strip_width = in_strip;
            rec.manifest().config = {{"template", tmpl->name}, {"radius", in_R}, {"edge", in_h},
                                     {"strip_width", in_strip}, {"allow_nonregular", in_nonregular}};
            const SurfaceComplex c = instantiate(*tmpl, spec, in_R, in_h, o);
            rec.output(in_out, write_meshnet(c));
            rec.finish(manifest_path_for(in_out));
            out << "vertices " << c.vertices.size() << " faces " << c.faces.size() << "\n";
            return exit_ok;
        }

        if (*mn) {
            Recorder rec("minimize", args);
            const SurfaceComplex c = read_meshnet(rec.input(mn_mesh));
            const ConeSpec spec = read_conespec(rec.input(mn_cone));
            rec.manifest().seed = mn_cfg.seed;
            rec.manifest().config = {{"solve", solve_json(mn_cfg)}};
            std::string log;
            const OptimizerState st =
                minimize(c, spec, mn_cfg, [&](const IterationRecord& r) { log += format_iteration(r) + "\n"; });
            rec.output(mn_out, write_meshnet(st.complex));
            if (!mn_log.empty()) rec.output(mn_log, log);
            rec.finish(manifest_path_for(mn_out));
            out << "status " << status_name(st.status) << " iterations " << st.iterations << " gradrms "
                << format_double(st.gradrms) << " logenergy " << format_double(st.log_energy()) << "\n";
            return st.status == SolveStatus::converged ? exit_ok : exit_failed;
        }

        if (*co) {
            Recorder rec("continue", args);
            const auto tmpl = find_template(co_tmpl);
            if (!tmpl) throw InputError("unknown template '" + co_tmpl + "'; available: " + template_names());
            const ConeSpec spec = read_conespec(rec.input(co_cone));
            co_cfg.radius_schedule = parse_list(co_radii);
            InstantiateOptions o;
            o.allow_nonregular = co_nonregular;
            rec.manifest().seed = co_cfg.seed;
            ReportConfig rc;
            rc.h = co_h;
            rec.manifest().config = {{"template", tmpl->name}, {"edge", co_h}, {"allow_nonregular", co_nonregular},
                                     {"solve", solve_json(co_cfg)}, {"report", report_json(rc)}};
            std::map<double, std::string> logs;
            const auto steps = continue_in_radius(spec, *tmpl, co_cfg, co_h, o, [&](double R, const IterationRecord& r) {
                logs[R] += format_iteration(r) + "\n";
            });
            bool ok = true;
            std::vector<std::pair<double, const SurfaceComplex*>> states;
            for (const ContinuationStep& s : steps) {
                const std::string tag = "R" + format_double(s.radius);
                const fs::path base = fs::path(co_dir);
                rec.output((base / ("mesh_" + tag + ".meshnet")).string(), write_meshnet(s.state.complex));
                rec.output((base / ("log_" + tag + ".txt")).string(), logs[s.radius]);
                const VerificationReport rep = full_report(s.state.complex, spec, rc);
                rec.output((base / ("report_" + tag + ".txt")).string(), write_report(rep));
                ok = ok && rep.passed() && s.state.status == SolveStatus::converged;
                out << tag << " status " << status_name(s.state.status) << " iterations " << s.state.iterations
                    << " report " << (rep.passed() ? "pass" : "fail") << "\n";
                states.emplace_back(s.radius, &s.state.complex);
            }
            if (states.size() >= 2) {
                const PersistenceRecord p = check_persistence(states, rc.tol.persistence_factor);
                std::string text = "persistence 1\n";
                text += "metric inner_radius " + format_double(p.inner_radius) + "\n";
                text += "metric tolerance " + format_double(p.tolerance) + "\n";
                text += "metric delta1 " + format_double(p.delta1) + "\n";
                for (const PersistenceEntry& e : p.entries)
                    text += "radius " + format_double(e.radius) + " curves " + std::to_string(e.triple_curves) +
                            " quads " + std::to_string(e.quadruple_points) + " core_chart_radius " +
                            format_double(e.core_chart_radius) + " hausdorff_prev " +
                            format_double(e.hausdorff_to_previous) + "\n";
                text += std::string("check persistence ") + (p.passed() ? "pass" : "fail") + "\n";
                rec.output((fs::path(co_dir) / "persistence.txt").string(), text);
                ok = ok && p.passed();
                out << "persistence " << (p.passed() ? "pass" : "fail") << "\n";
            }
            rec.finish((fs::path(co_dir) / "manifest.json").string());
            return ok ? exit_ok : exit_failed;
        }

        if (*ve) {
            Recorder rec("verify", args);
            const SurfaceComplex c = read_meshnet(rec.input(ve_mesh));
            const ConeSpec spec = read_conespec(rec.input(ve_cone));
            const ReportConfig rc = report_config_for(c, ve_h);
            rec.manifest().config = {{"report", report_json(rc)}};
            const VerificationReport rep = full_report(c, spec, rc);
            rec.output(ve_report, write_report(rep));
            rec.finish(manifest_path_for(ve_report));
            for (const auto& [name, ok] : rep.checks) out << name << " " << (ok ? "pass" : "fail") << "\n";
            return rep.passed() ? exit_ok : exit_failed;
        }

        if (*mp) {
            const Model from = parse_model(mp_from), to = parse_model(mp_to);
            const auto pts = read_points(read_text_file(mp_points), model_dimension(from));
            std::vector<std::vector<double>> mapped;
            for (const auto& p : pts) mapped.push_back(map_point(p, from, to));
            if (mp_out.empty()) out << write_points(mapped);
            else write_text_file(mp_out, write_points(mapped));
            return exit_ok;
        }

        if (*ex) {
            Recorder rec("export", args);
            const SurfaceComplex c = read_meshnet(rec.input(ex_mesh));
            std::string csv;
            if (ex_what == "residual") {
                csv = residual_csv(c);
            } else if (ex_what == "angles") {
                csv = angles_csv(c);
            } else {
                if (ex_cone.empty()) throw InputError("--what ends needs --cone");
                const ConeSpec spec = read_conespec(rec.input(ex_cone));
                const double R = c.truncation_radius;
                std::vector<double> radii = ex_radii.empty() ? std::vector<double>{} : parse_list(ex_radii);
                if (radii.empty())
                    for (int k = 3; k <= 6; ++k) radii.push_back(k * R / 8.0);
                csv = ends_csv(c, spec, radii, ex_width > 0.0 ? ex_width : R / 8.0);
            }
            rec.output(ex_out, csv);
            rec.finish(manifest_path_for(ex_out));
            return exit_ok;
        }

        if (*rp) {
            const RunManifest m = read_manifest(read_text_file(rp_manifest));
            std::vector<std::string> again{"expandernet", m.command};
            again.insert(again.end(), m.arguments.begin() + 1, m.arguments.end());
            std::ostringstream sink;
            const int code = run(again, sink, err);
            if (code == exit_input) return exit_input;
            bool same = true;
            for (const auto& [path, want] : m.outputs) {
                const std::string got = digest_hex(read_text_file(path));
                out << path << " " << (got == want ? "identical" : "differs") << "\n";
                same = same && got == want;
            }
            return same ? exit_ok : exit_failed;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return is_input_error(e) ? exit_input : exit_failed;
    }
    return exit_input;
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace expandernet::cli
