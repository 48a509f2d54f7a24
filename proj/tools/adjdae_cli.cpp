// Command-line experiment runner.
//
//   adjdae run <config.json> [--output PATH] [--format csv|markdown] [--jobs K]
//   adjdae list-problems
//   adjdae describe <problem>
//
// Exit codes: 0 success, 2 some cells failed, 1 config or usage error.

#include <adjdae/experiment.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

int cmd_run(const std::string &path, const std::string &output, const std::string &format, std::size_t jobs)
{
    adjdae::ExperimentConfig cfg;
    try
    {
        cfg = adjdae::load_config(path);
        if(!output.empty())
            cfg.output_path = output;
        if(!format.empty())
            cfg.format = adjdae::parse_format(format);
        if(jobs > 0)
            cfg.jobs = jobs;
    }
    catch(const adjdae::Error &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    const adjdae::ResultTable table = adjdae::run_experiment(cfg);
    try
    {
        if(cfg.output_path.empty())
            std::cout << adjdae::render(table, cfg.format);
        else
            adjdae::emit_report(table, cfg.format, cfg.output_path);
    }
    catch(const adjdae::Error &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    for(const auto &row : table.rows)
        if(!row.ok())
            std::cerr << "cell dt=" << row.dt << " T=" << row.T << " " << row.method << " failed: " << row.error
                      << '\n';
    return table.failures() == 0 ? 0 : 2;
}

int cmd_list()
{
    for(const auto &info : adjdae::list_problems())
        std::printf("%-10s  %s\n", info.name.c_str(), info.summary.c_str());
    return 0;
}

void print_vec(const char *label, const adjdae::Vec &v)
{
    std::printf("%-22s [", label);
    const std::size_t shown = std::min<std::size_t>(v.size(), 8);
    for(std::size_t i = 0; i < shown; ++i)
        std::printf("%s%.10g", i ? ", " : "", v[i]);
    if(v.size() > shown)
        std::printf(", ... (%zu entries)", v.size());
    std::printf("]\n");
}

int cmd_describe(const std::string &name)
{
    try
    {
        const adjdae::DAEProblem p = adjdae::build_problem(name);
        std::printf("%-22s %s\n", "name", p.name.c_str());
        std::printf("%-22s %s\n", "index", adjdae::to_string(p.index));
        std::printf("%-22s n=%zu, m=%zu\n", "dimensions", p.n, p.m);
        for(const auto &[k, v] : p.params)
            std::printf("%-22s %s = %.10g\n", "parameter", k.c_str(), v);
        std::printf("%-22s %.10g\n", "t0", p.t0);
        print_vec("y0", p.y0);
        print_vec("z0", p.z0);
        std::printf("%-22s %s\n", "exact solution", p.has_analytic() ? "yes" : "no");
        std::printf("%-22s %s\n", "default reference", adjdae::to_string(p.preferred_reference));
        std::printf("%-22s %zu\n", "default refinement r", p.default_refinement);
        std::printf("%-22s %s\n", "adjoint ODE path", p.supports_ode_path ? "supported" : "unsupported");
        const adjdae::ConsistencyReport c = adjdae::check_consistency(p);
        std::printf("%-22s |g| = %.3e, hidden = %.3e, %s\n", "initial consistency", c.constraint_residual,
                    c.hidden_residual, c.pass ? "consistent" : "INCONSISTENT");
        return 0;
    }
    catch(const adjdae::Error &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Implicit-Euler DAE solver with adjoint-based QoI error estimates"};
    app.require_subcommand(1);

    std::string config_path, output, format, problem;
    std::size_t jobs = 0;

    auto *run = app.add_subcommand("run", "run an experiment sweep from a JSON config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--output", output, "write the report here instead of stdout");
    run->add_option("--format", format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown", "md"}));
    run->add_option("--jobs", jobs, "cells to run in parallel")->check(CLI::PositiveNumber);

    auto *list = app.add_subcommand("list-problems", "list built-in problems");
    auto *describe = app.add_subcommand("describe", "show a problem's defaults and initial data");
    describe->add_option("problem", problem, "problem name")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch(const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if(*run)
        return cmd_run(config_path, output, format, jobs);
    if(*list)
        return cmd_list();
    if(*describe)
        return cmd_describe(problem);
    return 1;
}
