// Command-line surface: verify single properties, search breakpoints over
// templates, answer interpretability questions, and shape trajectory rewards.

#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "reinverify/breakpoints.hpp"
#include "reinverify/drlp/classify.hpp"
#include "reinverify/drlp/parser.hpp"
#include "reinverify/drlp/printer.hpp"
#include "reinverify/errors.hpp"
#include "reinverify/interpret.hpp"
#include "reinverify/mdp.hpp"
#include "reinverify/network.hpp"
#include "reinverify/shaping.hpp"
#include "reinverify/solver.hpp"

namespace rv = reinverify;
using nlohmann::json;

namespace {

constexpr int kExitProven = 0;
constexpr int kExitFalsified = 1;
constexpr int kExitUnknown = 2;
constexpr int kExitError = 3;
constexpr int kExitUsage = 64;

rv::SolveOptions solve_options_from_env(long node_budget_flag) {
    rv::SolveOptions opts;
    if (node_budget_flag > 0) {
        opts.node_budget = node_budget_flag;
    } else if (const char* env = std::getenv("REINVERIFY_NODE_BUDGET")) {
        opts.node_budget = std::atol(env);
    }
    return opts;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content << "\n";
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content << "\n";
}

// wall_ms is zeroed unless timing is requested so identical inputs give
// byte-identical outputs
bool g_timing = false;

json result_json(const rv::VerifyResult& r) {
    json j;
    j["status"] = rv::status_text(r.status);
    j["depth"] = r.depth;
    if (r.witness) {
        j["witness"] = {{"x", r.witness->x}, {"y", r.witness->y}};
    } else {
        j["witness"] = nullptr;
    }
    j["stats"] = {{"nodes", r.stats.nodes},
                  {"lp_calls", r.stats.lp_calls},
                  {"wall_ms", g_timing ? r.stats.wall_ms : 0.0}};
    return j;
}

json breakpoint_json(const rv::Breakpoint& bp) {
    json j;
    j["variable"] = bp.variable;
    j["value_lo"] = bp.value_lo;
    j["value_hi"] = bp.value_hi;
    j["value"] = (bp.value_lo + bp.value_hi) / 2;
    j["from"] = rv::status_text(bp.from_status);
    j["to"] = rv::status_text(bp.to_status);
    j["slice"] = bp.slice;
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

rv::SearchSpec search_spec_from_json(const json& j) {
    rv::SearchSpec spec;
    for (auto it = j.begin(); it != j.end(); ++it) {
        rv::VarSpec v;
        const json& jv = it.value();
        v.lower_bound = jv.at("lower_bound").get<double>();
        v.upper_bound = jv.at("upper_bound").get<double>();
        v.precision = jv.at("precise").get<double>();
        v.method = rv::search_method_from_string(jv.value("method", "binary"));
        v.iterative_step = jv.value("iterative_step", 2.0);
        spec.vars[it.key()] = v;
    }
    return spec;
}

int cmd_verify(const std::string& drlp_path, const std::string& net_path,
               const std::string& method, int k_max, long node_budget, bool emit_ast,
               const std::string& out_path) {
    rv::drlp::ParseResult parsed = rv::drlp::parse_file(drlp_path);
    if (emit_ast) {
        if (auto* t = std::get_if<rv::drlp::Template>(&parsed))
            write_output(out_path, rv::drlp::ast_json(*t));
        else
            write_output(out_path, rv::drlp::ast_json(std::get<rv::drlp::Script>(parsed)));
        return kExitProven;
    }
    if (net_path.empty()) {
        std::cerr << "error: verify needs --net\n";
        return kExitUsage;
    }
    if (std::holds_alternative<rv::drlp::Template>(parsed)) {
        const auto& t = std::get<rv::drlp::Template>(parsed);
        // iterables expand into a batch; other free parameters are a usage error
        for (const std::string& p : t.free_parameters) {
            bool iterable = false;
            for (const auto& a : t.script.variables) iterable |= a.name == p && a.iterable;
            if (!iterable) {
                std::cerr << "error: '" << drlp_path << "' is a template (free parameter '" << p
                          << "'); use the search command\n";
                return kExitUsage;
            }
        }
    }
    rv::Network net = rv::load_network(net_path);
    rv::SolveOptions opts = solve_options_from_env(node_budget);

    std::vector<rv::drlp::Script> scripts;
    if (auto* t = std::get_if<rv::drlp::Template>(&parsed))
        scripts = rv::drlp::expand_iterables(*t);
    else
        scripts.push_back(std::get<rv::drlp::Script>(parsed));

    json out = json::array();
    rv::Status worst = rv::Status::Proven;
    for (const rv::drlp::Script& script : scripts) {
        rv::VerifyResult r;
        if (method == "bmc") r = rv::bmc(script, net, k_max, opts);
        else if (method == "interval") {
            bool saw_unknown = false;
            rv::VerifyResult step;
            for (int k = 1; k <= k_max; ++k) {
                step = rv::solve_interval(rv::build_query(script, net, k, opts.lower), opts);
                if (step.status != rv::Status::Proven) saw_unknown = true;
            }
            r = step;
            r.status = saw_unknown ? rv::Status::Unknown : rv::Status::Proven;
            r.depth = k_max;
        } else if (method == "kind") {
            if (net.has_tanh() || rv::drlp::post_is_exist(script)) r = rv::bmc(script, net, k_max, opts);
            else r = rv::k_induction(script, net, k_max, opts);
        } else {
            std::cerr << "error: unknown method '" << method << "'\n";
            return kExitUsage;
        }
        out.push_back(result_json(r));
        if (r.status == rv::Status::Falsified && worst != rv::Status::Falsified)
            worst = rv::Status::Falsified;
        if (r.status == rv::Status::Unknown && worst == rv::Status::Proven)
            worst = rv::Status::Unknown;
    }
    write_output(out_path, scripts.size() == 1 ? out[0].dump(2) : out.dump(2));
    switch (worst) {
        case rv::Status::Proven: return kExitProven;
        case rv::Status::Falsified: return kExitFalsified;
        case rv::Status::Unknown: return kExitUnknown;
    }
    return kExitError;
}

int cmd_search(const std::string& drlp_path, const std::string& net_path,
               const std::string& spec_path, const std::string& method, int k_max,
               long node_budget, int jobs, const std::string& out_path,
               const std::string& csv_path) {
    rv::drlp::ParseResult parsed = rv::drlp::parse_file(drlp_path);
    auto* tmpl = std::get_if<rv::drlp::Template>(&parsed);
    if (!tmpl) {
        std::cerr << "error: '" << drlp_path << "' has no free parameters to search\n";
        return kExitUsage;
    }
    rv::SearchSpec spec = search_spec_from_json(json::parse(read_file(spec_path)));
    for (const std::string& p : tmpl->free_parameters) {
        if (!spec.vars.count(p)) {
            std::cerr << "error: search spec is missing free variable '" << p << "'\n";
            return kExitUsage;
        }
    }
    rv::Network net = rv::load_network(net_path);
    rv::SolveOptions opts = solve_options_from_env(node_budget);
    rv::VerifyFn verify = [&](const rv::drlp::Script& s) {
        if (method == "bmc" || net.has_tanh() || rv::drlp::post_is_exist(s))
            return rv::bmc(s, net, k_max, opts);
        return rv::k_induction(s, net, k_max, opts);
    };

    rv::SearchReport report;
    const std::string& first = tmpl->free_parameters.front();
    rv::VarSpec first_spec = spec.vars.at(first);
    long grid = static_cast<long>((first_spec.upper_bound - first_spec.lower_bound) /
                                  first_spec.precision) + 1;
    if (jobs > 1 && tmpl->free_parameters.size() > 1 && grid >= 2 * jobs) {
        // parallel over chunks of the outermost linear grid; chunk order is
        // preserved so output stays deterministic
        std::vector<std::future<rv::SearchReport>> futures;
        long chunk = (grid + jobs - 1) / jobs;
        for (long c = 0; c < grid; c += chunk) {
            rv::SearchSpec sub = spec;
            rv::VarSpec vs = first_spec;
            vs.lower_bound = first_spec.lower_bound + c * first_spec.precision;
            vs.upper_bound = first_spec.lower_bound +
                             std::min(c + chunk - 1, grid - 1) * first_spec.precision;
            sub.vars[first] = vs;
            futures.push_back(std::async(std::launch::async, [sub, tmpl, &verify]() {
                return rv::find_breakpoints(*tmpl, sub, verify);
            }));
        }
        for (auto& f : futures) {
            rv::SearchReport part = f.get();
            for (auto& bp : part.breakpoints) report.breakpoints.push_back(std::move(bp));
            for (auto& a : part.aborted_slices) report.aborted_slices.push_back(std::move(a));
            report.probe_count += part.probe_count;
        }
    } else {
        report = rv::find_breakpoints(*tmpl, spec, verify);
    }

    rv::BreaklineSummary summary = rv::analyze_breakpoints(report.breakpoints);
    json j;
    j["breakpoints"] = json::array();
    for (const rv::Breakpoint& bp : report.breakpoints) j["breakpoints"].push_back(breakpoint_json(bp));
    j["aborted_slices"] = report.aborted_slices;
    j["probes"] = report.probe_count;
    j["summary"] = {{"total", summary.total}, {"monotone", summary.monotone}};
    write_output(out_path, j.dump(2));

    if (!csv_path.empty()) {
        std::ostringstream csv;
        std::vector<std::string> outer(tmpl->free_parameters.begin(),
                                       tmpl->free_parameters.end() - 1);
        for (const std::string& name : outer) csv << name << ",";
        csv << tmpl->free_parameters.back() << "\n";
        for (const rv::Breakpoint& bp : report.breakpoints) {
            for (const std::string& name : outer)
                csv << rv::drlp::format_number(bp.slice.at(name)) << ",";
            csv << rv::drlp::format_number((bp.value_lo + bp.value_hi) / 2) << "\n";
        }
        std::ofstream out(csv_path);
        out << csv.str();
    }
    std::cerr << "search: " << report.breakpoints.size() << " breakpoint(s), "
              << report.probe_count << " probes\n";
    return kExitProven;
}

int cmd_interpret(const std::string& question, const std::string& drlp_path,
                  const std::string& net_path, const json& args, long node_budget,
                  const std::string& out_path, const std::string& csv_path) {
    rv::Network net = rv::load_network(net_path);
    rv::InterpretOptions opts;
    opts.precision = args.value("precision", 0.01);
    opts.approx_eps = args.value("eps", 1e-3);
    opts.solve = solve_options_from_env(node_budget);
    json answer;
    answer["question"] = question;

    if (question == "sensitivity" || question == "importance" || question == "counterfactual") {
        rv::PerturbationQuestion q;
        q.original_input = args.at("input").get<std::vector<double>>();
        if (args.contains("discussed"))
            q.discussed = args.at("discussed").get<std::vector<int>>();
        else
            for (int j = 0; j < net.input_dim(); ++j) q.discussed.push_back(j);
        q.epsilon = args.value("perturbation", 0.1);
        q.distance = rv::distance_fn_from_string(args.value("distance", "l2"));
        if (question == "sensitivity") {
            std::optional<std::pair<double, double>> y_range;
            if (args.contains("y_range"))
                y_range = {args["y_range"][0].get<double>(), args["y_range"][1].get<double>()};
            try {
                answer["sensitivity"] = rv::sensitivity(net, q, y_range, opts);
            } catch (const rv::NoBreakpoint&) {
                answer["sensitivity"] = 0.0;
                answer["note"] = "no breakpoint: output constant over the box";
            }
        } else if (question == "importance") {
            double eps_out = args.value("eps", 1e-3);
            std::pair<double, double> range{args.value("eps_min", opts.precision),
                                            args.value("eps_max", 10.0)};
            try {
                rv::ImportanceAnswer ia = rv::importance(net, q, eps_out, range, opts);
                answer["min_perturbation"] = ia.min_perturbation;
                answer["importance"] = ia.score;
            } catch (const rv::NeverChanges&) {
                answer["importance"] = 0.0;
                answer["note"] = "never changes: no perturbation in range flips the output";
            }
        } else {
            std::vector<double> target = args.at("target").get<std::vector<double>>();
            double tolerance = args.value("eps", 1e-2);
            std::pair<double, double> range{args.value("eps_min", opts.precision),
                                            args.value("eps_max", 10.0)};
            rv::CounterfactualAnswer ca =
                rv::counterfactual(net, q.original_input, target, tolerance, range, opts);
            answer["point"] = ca.point;
            answer["distance"] = ca.distance;
        }
    } else if (question == "intuitiveness" || question == "boundary") {
        rv::drlp::ParseResult parsed = rv::drlp::parse_file(drlp_path);
        auto* tmpl = std::get_if<rv::drlp::Template>(&parsed);
        if (!tmpl) {
            std::cerr << "error: interpretation over templates needs free parameters\n";
            return kExitUsage;
        }
        rv::SearchSpec spec = search_spec_from_json(args.at("spec"));
        int k_max = args.value("k_max", 1);
        rv::VerifyFn verify = [&](const rv::drlp::Script& s) {
            if (net.has_tanh() || rv::drlp::post_is_exist(s)) return rv::bmc(s, net, k_max, opts.solve);
            return rv::k_induction(s, net, k_max, opts.solve);
        };
        if (question == "intuitiveness") {
            const std::string& var = tmpl->free_parameters.front();
            answer["intuitive"] = rv::intuitiveness(*tmpl, var, spec.vars.at(var), verify);
        } else {
            const std::string& a = tmpl->free_parameters[0];
            const std::string& b = tmpl->free_parameters[1];
            rv::DecisionBoundary db =
                rv::decision_boundary(*tmpl, a, spec.vars.at(a), b, spec.vars.at(b), verify);
            answer["var_a"] = db.var_a;
            answer["var_b"] = db.var_b;
            answer["points"] = json::array();
            for (const auto& p : db.points) answer["points"].push_back({p.a, p.b});
            answer["slices"] = json::array();
            for (const auto& s : db.slices) {
                json js;
                js["a"] = s.a;
                js["at_lower"] = rv::status_text(s.at_lower);
                js["at_upper"] = rv::status_text(s.at_upper);
                if (s.flip) js["flip"] = *s.flip;
                answer["slices"].push_back(js);
            }
            if (!csv_path.empty()) {
                std::ofstream csv(csv_path);
                csv << db.var_a << "," << db.var_b << "\n";
                for (const auto& p : db.points)
                    csv << rv::drlp::format_number(p.a) << "," << rv::drlp::format_number(p.b)
                        << "\n";
            }
        }
    } else {
        std::cerr << "error: unknown question '" << question << "'\n";
        return kExitUsage;
    }
    write_output(out_path, answer.dump(2));
    return kExitProven;
}

int cmd_shape(const std::vector<std::string>& prop_paths, const std::string& net_path,
              const std::string& traj_path, const std::string& config_path,
              const std::string& out_path, bool report_flag) {
    json cfg_json = config_path.empty() ? json::object() : json::parse(read_file(config_path));
    rv::ShapingConfig cfg;
    cfg.p1 = cfg_json.value("p1", 1.0);
    cfg.p2 = cfg_json.value("p2", 2.0);
    cfg.lambda = cfg_json.value("lambda", 0.99);
    cfg.mu = cfg_json.value("mu", 0.0);
    cfg.beta = cfg_json.value("beta", 1.0);
    cfg.density_eps = cfg_json.value("density_eps", 0.01);
    cfg.fixed_action_dist = cfg_json.value("fixed_action_dist", 1.0);
    cfg.action_interval_dist = cfg_json.value("action_dist", std::string("fixed")) == "interval";

    std::vector<double> env_lower = cfg_json.at("env_lower").get<std::vector<double>>();
    std::vector<double> env_upper = cfg_json.at("env_upper").get<std::vector<double>>();

    rv::Network net = rv::load_network(net_path);

    std::vector<rv::PropertyPipeline> pipelines;
    for (std::size_t i = 0; i < prop_paths.size(); ++i) {
        rv::drlp::Script script = rv::drlp::parse_concrete(read_file(prop_paths[i]));
        rv::PropertyKind kind = rv::PropertyKind::ActionAvoidance;
        if (cfg_json.contains("kinds"))
            kind = cfg_json["kinds"][i].get<std::string>() == "destination-reach"
                       ? rv::PropertyKind::DestinationReach
                       : rv::PropertyKind::ActionAvoidance;
        rv::PropertyPipeline p;
        p.box = rv::property_box_from_script(script, env_lower, env_upper, kind);
        p.densities = rv::measure_densities(net, p.box, cfg.density_eps);
        p.middles = rv::exact_middles(p.box, p.densities);
        p.weight = cfg_json.contains("weights") ? cfg_json["weights"][i].get<double>() : 1.0;
        p.gap_value = cfg_json.contains("gaps") ? cfg_json["gaps"][i].get<double>() : 0.0;
        if (cfg_json.contains("single_step")) p.single_step = cfg_json["single_step"][i].get<bool>();
        pipelines.push_back(std::move(p));
    }

    // trajectory: one JSON object per line {s:[..], a:[..]|int, r: float}
    rv::Trajectory traj;
    std::istringstream lines(read_file(traj_path));
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json js;
        try {
            js = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(traj_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        rv::TrajectoryStep step;
        step.state = js.at("s").get<std::vector<double>>();
        if (js.at("a").is_number_integer())
            step.action.value = js.at("a").get<int>();
        else
            step.action.value = js.at("a").get<std::vector<double>>();
        step.reward = js.at("r").get<double>();
        traj.push_back(std::move(step));
    }

    std::vector<rv::ShapedStep> shaped = rv::shape_rewards(traj, pipelines, cfg);

    std::ostringstream out;
    lines.clear();
    lines.seekg(0);
    int t = 0;
    while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json js = json::parse(line);
        js["F"] = shaped[t].per_property_f;
        js["r_shaped"] = shaped[t].reward_shaped;
        out << js.dump() << "\n";
        ++t;
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << out.str();
    } else {
        std::ofstream f(out_path, std::ios::binary);
        f << out.str();
    }

    if (report_flag) {
        json rep;
        rep["steps"] = static_cast<int>(traj.size());
        rep["properties"] = json::array();
        for (std::size_t i = 0; i < pipelines.size(); ++i) {
            int violations = 0, satisfactions = 0, outside = 0;
            double diff_sum = 0, diff_min = 0, diff_max = 0;
            for (const auto& step : traj) {
                double d = rv::diff(pipelines[i].box, pipelines[i].densities,
                                    pipelines[i].middles, step.state, step.action, cfg);
                diff_sum += d;
                diff_min = std::min(diff_min, d);
                diff_max = std::max(diff_max, d);
                if (d < 0) ++violations;
                else if (d > 0) ++satisfactions;
                else ++outside;
            }
            rep["properties"].push_back({{"violations", violations},
                                         {"satisfactions", satisfactions},
                                         {"no_signal", outside},
                                         {"diff_sum", diff_sum},
                                         {"diff_min", diff_min},
                                         {"diff_max", diff_max}});
        }
        std::cerr << rep.dump(2) << "\n";
    }
    return kExitProven;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DRLP property verification, breakpoint search, interpretation and "
                 "reward shaping for feedforward policies"};
    app.require_subcommand(1);

    std::string drlp_path, net_path, out_path = "-", csv_path, spec_path, config_path;
    std::string method = "kind", question, traj_path, args_json = "{}";
    std::vector<std::string> prop_paths;
    int k_max = 10, jobs = 1;
    long node_budget = 0;
    bool emit_ast = false, report_flag = false;
    int seed = 0;

    CLI::App* verify = app.add_subcommand("verify", "verify a concrete DRLP property");
    verify->add_option("drlp", drlp_path, "property script")->required();
    verify->add_option("--net", net_path, "network file");
    verify->add_option("--method", method, "kind|bmc|interval");
    verify->add_option("--k-max", k_max, "maximum verification depth");
    verify->add_option("--node-budget", node_budget, "branch-and-bound node budget");
    verify->add_flag("--emit-ast", emit_ast, "dump the parsed AST as JSON and exit");
    verify->add_option("--out", out_path, "output path (default stdout)");

    CLI::App* search = app.add_subcommand("search", "breakpoint search over a DRLP template");
    search->add_option("drlp", drlp_path)->required();
    search->add_option("--net", net_path)->required();
    search->add_option("--spec", spec_path, "per-variable search spec JSON")->required();
    search->add_option("--method", method, "kind|bmc");
    search->add_option("--k-max", k_max);
    search->add_option("--node-budget", node_budget);
    search->add_option("--jobs", jobs, "parallel slices");
    search->add_option("--out", out_path);
    search->add_option("--csv", csv_path, "breakpoints as CSV");

    CLI::App* interpret = app.add_subcommand("interpret", "answer an interpretability question");
    interpret->add_option("--question", question,
                          "sensitivity|importance|counterfactual|intuitiveness|boundary")
        ->required();
    interpret->add_option("--net", net_path)->required();
    interpret->add_option("--drlp", drlp_path, "template (intuitiveness/boundary)");
    interpret->add_option("--args", args_json, "question arguments as JSON");
    interpret->add_option("--node-budget", node_budget);
    interpret->add_option("--out", out_path);
    interpret->add_option("--csv", csv_path, "boundary points as CSV");

    CLI::App* shape = app.add_subcommand("shape", "inject property-metric rewards");
    shape->add_option("--props", prop_paths, "concrete DRLP properties")->required();
    shape->add_option("--net", net_path)->required();
    shape->add_option("--traj", traj_path, "trajectory JSONL")->required();
    shape->add_option("--config", config_path, "shaping config JSON")->required();
    shape->add_option("--out", out_path);
    shape->add_flag("--report", report_flag, "per-property statistics to stderr");

    app.add_option("--seed", seed, "seed for randomized oracles");
    app.add_flag("--timing", g_timing, "include wall-clock timing in JSON outputs");
    (void)seed;

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed())
            return cmd_verify(drlp_path, net_path, method, k_max, node_budget, emit_ast, out_path);
        if (search->parsed())
            return cmd_search(drlp_path, net_path, spec_path, method, k_max, node_budget, jobs,
                              out_path, csv_path);
        if (interpret->parsed())
            return cmd_interpret(question, drlp_path, net_path, json::parse(args_json),
                                 node_budget, out_path, csv_path);
        if (shape->parsed())
            return cmd_shape(prop_paths, net_path, traj_path, config_path, out_path, report_flag);
    } catch (const rv::SyntaxError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}
