#include <adjdae/experiment.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace adjdae {

using json = nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string &msg) { throw Error(ErrorKind::ConfigError, msg); }

void reject_unknown_keys(const json &j, std::initializer_list<const char *> known, const std::string &where)
{
    for(const auto &[key, _] : j.items())
        if(std::find_if(known.begin(), known.end(), [&](const char *k) { return key == k; }) == known.end())
            config_error("unknown key '" + key + "' in " + where);
}

double as_number(const json &j, const std::string &what)
{
    if(!j.is_number())
        config_error(what + " must be a number");
    return j.get<double>();
}

std::size_t as_count(const json &j, const std::string &what)
{
    if(!j.is_number_integer() || j.get<long long>() < 0)
        config_error(what + " must be a non-negative integer");
    return j.get<std::size_t>();
}

std::vector<double> number_list(const json &j, const std::string &what)
{
    if(!j.is_array() || j.empty())
        config_error(what + " must be a non-empty array of numbers");
    std::vector<double> out;
    for(const auto &v : j)
        out.push_back(as_number(v, what + " entry"));
    return out;
}

VectorSpec parse_vector(const json &j, const std::string &what)
{
    VectorSpec v;
    if(j.is_number())
    {
        v.kind = VectorSpec::Kind::Fill;
        v.fill = j.get<double>();
    }
    else if(j.is_array())
    {
        v.kind = VectorSpec::Kind::Explicit;
        for(const auto &x : j)
            v.values.push_back(as_number(x, what + " entry"));
    }
    else if(j.is_object() && j.size() == 1 && j.contains("blocks"))
    {
        v.kind = VectorSpec::Kind::Blocks;
        v.values = number_list(j["blocks"], what + ".blocks");
    }
    else if(j.is_object() && j.size() == 1 && j.contains("fill"))
    {
        v.kind = VectorSpec::Kind::Fill;
        v.fill = as_number(j["fill"], what + ".fill");
    }
    else
        config_error(what + " must be a number, an array, {\"blocks\": [...]} or {\"fill\": x}");
    return v;
}

ReferenceOptions reference_options(const ExperimentConfig &cfg)
{
    ReferenceOptions o;
    o.rk = cfg.rk;
    o.newton = cfg.newton;
    return o;
}

double ms_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char *f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string num(double v) { return fmt("%.16e", v); }
std::string num(const std::optional<double> &v) { return v ? num(*v) : std::string(); }

std::string csv_quote(const std::string &s)
{
    std::string out = "\"";
    for(char c : s)
    {
        if(c == '"')
            out += "\"\"";
        else if(c == '\n' || c == '\r')
            out += ' ';
        else
            out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string &line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for(std::size_t i = 0; i < line.size(); ++i)
    {
        const char c = line[i];
        if(quoted)
        {
            if(c == '"' && i + 1 < line.size() && line[i + 1] == '"')
            {
                cur += '"';
                ++i;
            }
            else if(c == '"')
                quoted = false;
            else
                cur += c;
        }
        else if(c == '"')
            quoted = true;
        else if(c == ',')
        {
            out.push_back(cur);
            cur.clear();
        }
        else
            cur += c;
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string &s, const std::string &col)
{
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if(s.empty() || end != s.c_str() + s.size())
        throw Error(ErrorKind::IoError, "bad number '" + s + "' in column " + col);
    return v;
}

std::vector<std::string> ordered_names(const ResultTable &t, bool diag)
{
    std::vector<std::string> names;
    std::set<std::string> seen;
    for(const auto &row : t.rows)
        for(const auto &term : diag ? row.diagnostics : row.terms)
            if(seen.insert(term.name).second)
                names.push_back(term.name);
    return names;
}

std::optional<double> find_term(const std::vector<NamedTerm> &terms, const std::string &name)
{
    for(const auto &t : terms)
        if(t.name == name)
            return t.value;
    return std::nullopt;
}

std::string method_label(const std::string &m) { return m == "adjoint-ode" ? "Adjoint ODE" : "Adjoint DAE"; }

std::string ratio_text(const ResultRow &row)
{
    if(!row.effectivity)
        return row.ok() ? "n/a" : "failed";
    std::string s = fmt("%.5g", *row.effectivity);
    if(s.find_first_of(".e") == std::string::npos)
        s += ".0";
    return row.unreliable ? s + "*" : s;
}

} // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

Vec VectorSpec::resolve(std::size_t len) const
{
    switch(kind)
    {
    case Kind::Fill: return Vec(len, fill);
    case Kind::Explicit:
        if(values.size() != len)
            throw Error(ErrorKind::DimensionMismatch, "vector has " + std::to_string(values.size()) +
                                                          " entries, expected " + std::to_string(len));
        return values;
    case Kind::Blocks:
    {
        const std::size_t k = values.size();
        if(k == 0 || len % k != 0)
            throw Error(ErrorKind::DimensionMismatch, "block pattern of " + std::to_string(k) +
                                                          " entries does not divide length " + std::to_string(len));
        Vec out(len);
        for(std::size_t i = 0; i < len; ++i)
            out[i] = values[i / (len / k)];
        return out;
    }
    }
    return {};
}

QoISpec QoIConfig::resolve(const DAEProblem &p) const
{
    if(kind == QoIKind::Terminal)
        return QoISpec::terminal(zeta_y.resolve(p.n), zeta_z.resolve(p.m));
    return QoISpec::cumulative(psi_y.resolve(p.n), psi_z.resolve(p.m));
}

const char *to_string(MethodSelection m) noexcept
{
    switch(m)
    {
    case MethodSelection::AdjointDAE: return "adjoint-dae";
    case MethodSelection::AdjointODE: return "adjoint-ode";
    case MethodSelection::Both: return "both";
    }
    return "unknown";
}

const char *to_string(OutputFormat f) noexcept { return f == OutputFormat::Csv ? "csv" : "markdown"; }

OutputFormat parse_format(const std::string &s)
{
    if(s == "csv")
        return OutputFormat::Csv;
    if(s == "markdown" || s == "md")
        return OutputFormat::Markdown;
    config_error("unknown output format '" + s + "' (expected csv or markdown)");
}

ReferenceBackend parse_backend(const std::string &s)
{
    for(ReferenceBackend b : {ReferenceBackend::Auto, ReferenceBackend::Analytic, ReferenceBackend::RkAdaptive,
                              ReferenceBackend::FineBdfRichardson})
        if(s == to_string(b))
            return b;
    config_error("unknown reference backend '" + s + "'");
}

ExperimentConfig parse_config(const std::string &json_text)
{
    json j;
    try
    {
        j = json::parse(json_text);
    }
    catch(const json::parse_error &e)
    {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    if(!j.is_object())
        config_error("config must be a JSON object");
    reject_unknown_keys(j, {"schema_version", "title", "problem", "dt", "T", "qoi", "method", "r", "reference",
                            "newton", "diagnostics", "output", "jobs"},
                        "config");

    ExperimentConfig cfg;
    if(!j.contains("schema_version"))
        config_error("missing schema_version");
    cfg.schema_version = static_cast<int>(as_count(j["schema_version"], "schema_version"));
    if(cfg.schema_version != experiment_schema_version)
        config_error("unsupported schema_version " + std::to_string(cfg.schema_version));
    if(j.contains("title"))
    {
        if(!j["title"].is_string())
            config_error("title must be a string");
        cfg.title = j["title"].get<std::string>();
    }

    if(!j.contains("problem") || !j["problem"].is_object() || !j["problem"].contains("name") ||
       !j["problem"]["name"].is_string())
        config_error("problem.name is required");
    reject_unknown_keys(j["problem"], {"name", "params"}, "problem");
    cfg.problem = j["problem"]["name"].get<std::string>();
    if(j["problem"].contains("params"))
    {
        const json &pj = j["problem"]["params"];
        if(!pj.is_object())
            config_error("problem.params must be an object");
        for(const auto &[k, v] : pj.items())
            cfg.params[k] = v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : as_number(v, "problem.params." + k);
    }

    if(!j.contains("dt") || !j.contains("T"))
        config_error("dt and T lists are required");
    cfg.dt = number_list(j["dt"], "dt");
    cfg.T = number_list(j["T"], "T");

    if(!j.contains("qoi") || !j["qoi"].is_object())
        config_error("qoi is required");
    const json &qj = j["qoi"];
    reject_unknown_keys(qj, {"kind", "psi_y", "psi_z", "zeta_y", "zeta_z"}, "qoi");
    const std::string kind = qj.value("kind", "");
    if(kind == "cumulative")
    {
        cfg.qoi.kind = QoIKind::Cumulative;
        if(qj.contains("zeta_y") || qj.contains("zeta_z"))
            config_error("cumulative QoI takes psi_y/psi_z, not zeta_y/zeta_z");
        if(qj.contains("psi_y"))
            cfg.qoi.psi_y = parse_vector(qj["psi_y"], "qoi.psi_y");
        if(qj.contains("psi_z"))
            cfg.qoi.psi_z = parse_vector(qj["psi_z"], "qoi.psi_z");
    }
    else if(kind == "terminal")
    {
        cfg.qoi.kind = QoIKind::Terminal;
        if(qj.contains("psi_y") || qj.contains("psi_z"))
            config_error("terminal QoI takes zeta_y/zeta_z, not psi_y/psi_z");
        if(qj.contains("zeta_y"))
            cfg.qoi.zeta_y = parse_vector(qj["zeta_y"], "qoi.zeta_y");
        if(qj.contains("zeta_z"))
            cfg.qoi.zeta_z = parse_vector(qj["zeta_z"], "qoi.zeta_z");
    }
    else
        config_error("qoi.kind must be 'cumulative' or 'terminal'");

    const std::string method = j.value("method", "both");
    if(method == "adjoint-dae")
        cfg.method = MethodSelection::AdjointDAE;
    else if(method == "adjoint-ode")
        cfg.method = MethodSelection::AdjointODE;
    else if(method == "both")
        cfg.method = MethodSelection::Both;
    else
        config_error("method must be adjoint-dae, adjoint-ode or both");

    if(j.contains("r"))
    {
        cfg.r = as_count(j["r"], "r");
        if(cfg.r == 0)
            config_error("r must be at least 1");
    }
    if(j.contains("reference"))
    {
        const json &rj = j["reference"];
        if(!rj.is_object())
            config_error("reference must be an object");
        reject_unknown_keys(rj, {"backend", "atol", "rtol", "max_steps"}, "reference");
        if(rj.contains("backend"))
            cfg.reference = parse_backend(rj["backend"].is_string() ? rj["backend"].get<std::string>() : "");
        if(rj.contains("atol"))
            cfg.rk.atol = as_number(rj["atol"], "reference.atol");
        if(rj.contains("rtol"))
            cfg.rk.rtol = as_number(rj["rtol"], "reference.rtol");
        if(rj.contains("max_steps"))
            cfg.rk.max_steps = as_count(rj["max_steps"], "reference.max_steps");
        if(!(cfg.rk.atol > 0.0) || !(cfg.rk.rtol > 0.0))
            config_error("reference tolerances must be positive");
    }
    if(j.contains("newton"))
    {
        const json &nj = j["newton"];
        if(!nj.is_object())
            config_error("newton must be an object");
        reject_unknown_keys(nj, {"tol", "max_iters", "damping", "max_halvings", "reuse_jacobian"}, "newton");
        if(nj.contains("tol"))
            cfg.newton.tol = as_number(nj["tol"], "newton.tol");
        if(nj.contains("max_iters"))
            cfg.newton.max_iters = as_count(nj["max_iters"], "newton.max_iters");
        if(nj.contains("damping"))
            cfg.newton.damping = as_number(nj["damping"], "newton.damping");
        if(nj.contains("max_halvings"))
            cfg.newton.max_halvings = as_count(nj["max_halvings"], "newton.max_halvings");
        if(nj.contains("reuse_jacobian"))
        {
            if(!nj["reuse_jacobian"].is_boolean())
                config_error("newton.reuse_jacobian must be a boolean");
            cfg.newton.reuse_jacobian = nj["reuse_jacobian"].get<bool>();
        }
        try
        {
            cfg.newton.validate();
        }
        catch(const Error &e)
        {
            config_error(std::string("newton: ") + e.what());
        }
    }
    if(j.contains("diagnostics"))
    {
        const json &dj = j["diagnostics"];
        if(!dj.is_object())
            config_error("diagnostics must be an object");
        reject_unknown_keys(dj, {"cancellation_parts"}, "diagnostics");
        if(dj.contains("cancellation_parts"))
            cfg.cancellation_parts = as_count(dj["cancellation_parts"], "diagnostics.cancellation_parts");
    }
    if(j.contains("output"))
    {
        const json &oj = j["output"];
        if(!oj.is_object())
            config_error("output must be an object");
        reject_unknown_keys(oj, {"path", "format"}, "output");
        if(oj.contains("path"))
        {
            if(!oj["path"].is_string())
                config_error("output.path must be a string");
            cfg.output_path = oj["path"].get<std::string>();
        }
        if(oj.contains("format"))
            cfg.format = parse_format(oj["format"].is_string() ? oj["format"].get<std::string>() : "");
    }
    if(j.contains("jobs"))
    {
        cfg.jobs = as_count(j["jobs"], "jobs");
        if(cfg.jobs == 0)
            config_error("jobs must be at least 1");
    }

    // Semantic checks against the problem: names, params, grids, QoI sizes.
    try
    {
        const DAEProblem p = build_problem(cfg.problem, cfg.params);
        (void)cfg.qoi.resolve(p);
        for(double dt : cfg.dt)
            for(double T : cfg.T)
                (void)TimeGrid::from_step(p.t0, T, dt);
        if(cfg.cancellation_parts > 0 && p.n % cfg.cancellation_parts != 0)
            config_error("diagnostics.cancellation_parts does not divide n = " + std::to_string(p.n));
    }
    catch(const Error &e)
    {
        if(e.kind() == ErrorKind::ConfigError)
            throw;
        config_error(e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if(!in)
        throw Error(ErrorKind::IoError, "cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

std::size_t ResultTable::failures() const
{
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ResultRow &r) { return !r.ok(); }));
}

namespace {

/// Reference solutions for a sweep: one shared (analytic or RK) or one per dt (Richardson).
class ReferencePool
{
public:
    ReferencePool(const DAEProblem &p, const ExperimentConfig &cfg, std::size_t jobs)
    {
        const double Tmax = *std::max_element(cfg.T.begin(), cfg.T.end());
        const ReferenceBackend backend = resolve_backend(p, cfg.reference);
        const ReferenceOptions opts = reference_options(cfg);
        bool per_dt = backend == ReferenceBackend::FineBdfRichardson;
        if(!per_dt)
        {
            try
            {
                m_shared = backend == ReferenceBackend::Analytic ? ReferenceSolution::analytic(p, Tmax)
                                                                 : ReferenceSolution::rk(p, Tmax, opts.rk);
            }
            catch(const Error &e)
            {
                const bool fallback = cfg.reference == ReferenceBackend::Auto &&
                                      (e.kind() == ErrorKind::StepSizeUnderflow ||
                                       e.kind() == ErrorKind::ToleranceUnreachable);
                if(!fallback)
                    m_shared_error = std::string("reference: ") + e.what();
                per_dt = fallback;
            }
        }
        if(!per_dt)
            return;
        // Richardson references depend on dt; build one per distinct dt at T_max.
        std::vector<double> dts;
        for(double dt : cfg.dt)
            if(std::find(dts.begin(), dts.end(), dt) == dts.end())
                dts.push_back(dt);
        m_per_dt.resize(dts.size());
        m_dts = dts;
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for(std::size_t i = next++; i < dts.size(); i = next++)
            {
                try
                {
                    m_per_dt[i].ref = ReferenceSolution::richardson(p, dts[i], Tmax, opts.newton);
                }
                catch(const std::exception &e)
                {
                    m_per_dt[i].error = std::string("reference: ") + e.what();
                }
            }
        };
        run_parallel(work, std::min(jobs, dts.size()));
    }

    /// Reference for cells with step dt, or an error message.
    [[nodiscard]] std::pair<const ReferenceSolution *, std::string> get(double dt) const
    {
        if(m_shared)
            return {&*m_shared, {}};
        for(std::size_t i = 0; i < m_dts.size(); ++i)
            if(m_dts[i] == dt)
                return {m_per_dt[i].ref ? &*m_per_dt[i].ref : nullptr, m_per_dt[i].error};
        return {nullptr, m_shared_error};
    }

    template <class F>
    static void run_parallel(F &work, std::size_t jobs)
    {
        if(jobs <= 1)
        {
            work();
            return;
        }
        std::vector<std::thread> pool;
        for(std::size_t k = 0; k < jobs; ++k)
            pool.emplace_back(work);
        for(auto &t : pool)
            t.join();
    }

private:
    struct Entry
    {
        std::optional<ReferenceSolution> ref;
        std::string error;
    };
    std::optional<ReferenceSolution> m_shared;
    std::string m_shared_error;
    std::vector<double> m_dts;
    std::vector<Entry> m_per_dt;
};

void run_method(const DAEProblem &p, const Trajectory &traj, const QoISpec &q, AdjointPath path, std::size_t r,
                double qoi_num, const std::pair<const ReferenceSolution *, std::string> &ref,
                std::size_t parts, ResultRow &row)
{
    const AdjointSolution adj = solve_adjoint_backward(p, traj, q, path, r);
    ErrorReport rep = estimate_error(p, traj, q, adj);
    rep.qoi_numerical = qoi_num;
    row.estimate = rep.total_estimate;
    row.terms = rep.terms;
    row.qoi_numerical = qoi_num;
    if(parts > 0)
    {
        const CancellationSplit split = cancellation_split(p, traj, adj, parts);
        for(std::size_t i = 0; i < split.parts.size(); ++i)
            row.diagnostics.push_back({"I" + std::to_string(i + 1), split.parts[i]});
    }
    if(!ref.first)
    {
        row.error = ref.second.empty() ? "reference unavailable" : ref.second;
        return;
    }
    attach_reference(rep, reference_qoi_error(p, traj, q, *ref.first, r));
    row.reference_error = rep.reference_error;
    row.effectivity = rep.effectivity;
    row.unreliable = rep.unreliable;
    if(!rep.effectivity)
        row.error = "ZeroReference: reference error is exactly zero";
}

} // namespace

ResultTable run_experiment(const ExperimentConfig &cfg)
{
    const DAEProblem p = build_problem(cfg.problem, cfg.params);
    const QoISpec q = cfg.qoi.resolve(p);
    const std::size_t r = cfg.r ? cfg.r : p.default_refinement;
    std::vector<AdjointPath> methods;
    if(cfg.method != MethodSelection::AdjointODE)
        methods.push_back(AdjointPath::DAE);
    if(cfg.method != MethodSelection::AdjointDAE)
        methods.push_back(AdjointPath::ODE);

    struct Cell
    {
        double dt, T;
    };
    std::vector<Cell> cells;
    for(double dt : cfg.dt)
        for(double T : cfg.T)
            cells.push_back({dt, T});

    const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
    const ReferencePool refs(p, cfg, jobs);

    ResultTable table;
    table.title = cfg.title;
    table.rows.resize(cells.size() * methods.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for(std::size_t c = next++; c < cells.size(); c = next++)
        {
            const Cell cell = cells[c];
            ResultRow *rows = &table.rows[c * methods.size()];
            for(std::size_t k = 0; k < methods.size(); ++k)
            {
                rows[k].problem = p.name;
                rows[k].dt = cell.dt;
                rows[k].T = cell.T;
                rows[k].method = to_string(methods[k]);
            }
            const auto t0 = std::chrono::steady_clock::now();
            Trajectory traj;
            double qoi_num = 0.0;
            try
            {
                traj = bdf1_solve(p, TimeGrid::from_step(p.t0, cell.T, cell.dt), cfg.newton);
                qoi_num = qoi_value(traj, q, r);
            }
            catch(const std::exception &e)
            {
                for(std::size_t k = 0; k < methods.size(); ++k)
                {
                    rows[k].error = std::string("forward: ") + e.what();
                    rows[k].wall_ms = ms_since(t0);
                }
                continue;
            }
            const double forward_ms = ms_since(t0);
            const auto ref = refs.get(cell.dt);
            for(std::size_t k = 0; k < methods.size(); ++k)
            {
                const auto t1 = std::chrono::steady_clock::now();
                try
                {
                    run_method(p, traj, q, methods[k], r, qoi_num, ref, cfg.cancellation_parts, rows[k]);
                }
                catch(const std::exception &e)
                {
                    rows[k].error = e.what();
                }
                rows[k].wall_ms = forward_ms + ms_since(t1);
            }
        }
    };
    ReferencePool::run_parallel(work, std::min(jobs, cells.size()));
    return table;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string to_csv(const ResultTable &table)
{
    const auto terms = ordered_names(table, false);
    const auto diags = ordered_names(table, true);
    std::ostringstream out;
    out << "problem,dt,T,method,estimate,reference_error,effectivity";
    for(const auto &t : terms)
        out << ",term:" << t;
    out << ",wall_ms,qoi_numerical,unreliable";
    for(const auto &d : diags)
        out << ",diag:" << d;
    out << ",error\n";
    for(const auto &row : table.rows)
    {
        out << row.problem << ',' << num(row.dt) << ',' << num(row.T) << ',' << row.method << ','
            << num(row.estimate) << ',' << num(row.reference_error) << ',' << num(row.effectivity);
        for(const auto &t : terms)
            out << ',' << num(find_term(row.terms, t));
        out << ',' << num(row.wall_ms) << ',' << num(row.qoi_numerical) << ',' << (row.unreliable ? 1 : 0);
        for(const auto &d : diags)
            out << ',' << num(find_term(row.diagnostics, d));
        out << ',' << (row.error.empty() ? std::string() : csv_quote(row.error)) << '\n';
    }
    return out.str();
}

ResultTable parse_csv(const std::string &text)
{
    std::istringstream in(text);
    std::string line;
    if(!std::getline(in, line))
        throw Error(ErrorKind::IoError, "empty CSV");
    const std::vector<std::string> header = csv_split(line);
    const std::vector<std::string> fixed = {"problem", "dt", "T", "method", "estimate", "reference_error",
                                            "effectivity"};
    if(header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
        throw Error(ErrorKind::IoError, "unexpected CSV header");
    ResultTable table;
    while(std::getline(in, line))
    {
        if(line.empty())
            continue;
        const std::vector<std::string> f = csv_split(line);
        if(f.size() != header.size())
            throw Error(ErrorKind::IoError, "CSV row has " + std::to_string(f.size()) + " fields, expected " +
                                                std::to_string(header.size()));
        ResultRow row;
        auto opt = [&](std::size_t i) -> std::optional<double> {
            if(f[i].empty())
                return std::nullopt;
            return parse_double(f[i], header[i]);
        };
        for(std::size_t i = 0; i < header.size(); ++i)
        {
            const std::string &h = header[i];
            if(h == "problem")
                row.problem = f[i];
            else if(h == "dt")
                row.dt = parse_double(f[i], h);
            else if(h == "T")
                row.T = parse_double(f[i], h);
            else if(h == "method")
                row.method = f[i];
            else if(h == "estimate")
                row.estimate = opt(i);
            else if(h == "reference_error")
                row.reference_error = opt(i);
            else if(h == "effectivity")
                row.effectivity = opt(i);
            else if(h == "wall_ms")
                row.wall_ms = parse_double(f[i], h);
            else if(h == "qoi_numerical")
                row.qoi_numerical = opt(i);
            else if(h == "unreliable")
                row.unreliable = f[i] == "1";
            else if(h == "error")
                row.error = f[i];
            else if(h.rfind("term:", 0) == 0)
            {
                if(auto v = opt(i))
                    row.terms.push_back({h.substr(5), *v});
            }
            else if(h.rfind("diag:", 0) == 0)
            {
                if(auto v = opt(i))
                    row.diagnostics.push_back({h.substr(5), *v});
            }
            else
                throw Error(ErrorKind::IoError, "unknown CSV column " + h);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string to_markdown(const ResultTable &table)
{
    std::vector<std::string> methods;
    for(const auto &row : table.rows)
        if(std::find(methods.begin(), methods.end(), row.method) == methods.end())
            methods.push_back(row.method);
    // Group rows by (dt, T) preserving order.
    std::vector<std::pair<double, double>> cells;
    std::map<std::pair<double, double>, std::map<std::string, const ResultRow *>> by_cell;
    for(const auto &row : table.rows)
    {
        const auto key = std::make_pair(row.dt, row.T);
        if(!by_cell.count(key))
            cells.push_back(key);
        by_cell[key][row.method] = &row;
    }

    std::ostringstream out;
    if(!table.rows.empty())
        out << "### " << (table.title.empty() ? table.rows.front().problem : table.title) << "\n\n";
    out << "| dt | T |";
    for(const auto &m : methods)
        out << " Error Estimate (" << method_label(m) << ") |";
    for(const auto &m : methods)
        out << " E-Ratio (" << method_label(m) << ") |";
    out << "\n|---|---|";
    for(std::size_t i = 0; i < 2 * methods.size(); ++i)
        out << "---|";
    out << '\n';
    bool any_unreliable = false;
    std::vector<std::string> failures;
    for(const auto &key : cells)
    {
        out << "| " << fmt("%g", key.first) << " | " << fmt("%g", key.second) << " |";
        const auto &rows = by_cell[key];
        for(const auto &m : methods)
        {
            const auto it = rows.find(m);
            const ResultRow *row = it == rows.end() ? nullptr : it->second;
            out << ' ' << (row && row->estimate ? fmt("%.4e", *row->estimate) : std::string("failed")) << " |";
        }
        for(const auto &m : methods)
        {
            const auto it = rows.find(m);
            const ResultRow *row = it == rows.end() ? nullptr : it->second;
            out << ' ' << (row ? ratio_text(*row) : std::string("n/a")) << " |";
            if(row)
            {
                any_unreliable = any_unreliable || row->unreliable;
                if(!row->ok())
                    failures.push_back("dt=" + fmt("%g", row->dt) + ", T=" + fmt("%g", row->T) + ", " + row->method +
                                       ": " + row->error);
            }
        }
        out << '\n';
    }
    if(any_unreliable)
        out << "\n\\* reference error is below 1e-10 relative to the QoI value; the ratio is not meaningful.\n";

    const auto diags = ordered_names(table, true);
    if(!diags.empty())
    {
        out << "\n| dt | T | method |";
        for(const auto &d : diags)
            out << ' ' << d << " |";
        out << "\n|---|---|---|";
        for(std::size_t i = 0; i < diags.size(); ++i)
            out << "---|";
        out << '\n';
        for(const auto &row : table.rows)
        {
            if(row.diagnostics.empty())
                continue;
            out << "| " << fmt("%g", row.dt) << " | " << fmt("%g", row.T) << " | " << row.method << " |";
            for(const auto &d : diags)
            {
                const auto v = find_term(row.diagnostics, d);
                out << ' ' << (v ? fmt("%.17g", *v) : std::string()) << " |";
            }
            out << '\n';
        }
    }
    if(!failures.empty())
    {
        out << "\nFailed cells:\n\n";
        for(const auto &f : failures)
            out << "- " << f << '\n';
    }
    return out.str();
}

std::string render(const ResultTable &table, OutputFormat format)
{
    if(table.rows.empty())
        throw Error(ErrorKind::IoError, "cannot emit an empty table");
    return format == OutputFormat::Csv ? to_csv(table) : to_markdown(table);
}

void emit_report(const ResultTable &table, OutputFormat format, const std::string &path)
{
    const std::string text = render(table, format);
    std::ofstream out(path, std::ios::binary);
    if(!out)
        throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
    out << text;
    if(!out)
        throw Error(ErrorKind::IoError, "write to " + path + " failed");
}

} // namespace adjdae
