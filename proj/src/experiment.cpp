#include "sticky/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sticky/error.hpp"

namespace sticky {

using nlohmann::json;

std::string_view to_string(Mode mode) noexcept {
    switch (mode) {
        case Mode::Nash: return "nash";
        case Mode::Social: return "social";
        case Mode::Compare: return "compare";
        case Mode::Table1: return "table1";
        case Mode::Example1: return "example1";
    }
    return "nash";
}

std::optional<Mode> parse_mode(std::string_view name) noexcept {
    for (Mode m : {Mode::Nash, Mode::Social, Mode::Compare, Mode::Table1, Mode::Example1}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

// Typed access to one JSON object; remembers which keys were read so that
// leftovers can be reported as unknown.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) config_error("'" + path_ + "' must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) config_error("missing '" + where(key) + "'");
            return *fallback;
        }
        const auto& v = obj_.at(key);
        if (!v.is_number()) config_error("'" + where(key) + "' must be a number");
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) config_error("missing '" + where(key) + "'");
            return *fallback;
        }
        const auto& v = obj_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            config_error("'" + where(key) + "' must be a nonnegative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_boolean()) config_error("'" + where(key) + "' must be true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) config_error("missing '" + where(key) + "'");
            return *fallback;
        }
        const auto& v = obj_.at(key);
        if (!v.is_string()) config_error("'" + where(key) + "' must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        if (!has(key)) return out;
        const auto& v = obj_.at(key);
        if (!v.is_array()) config_error("'" + where(key) + "' must be an array");
        for (const auto& x : v) {
            if (!x.is_number()) config_error("'" + where(key) + "' must contain numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::vector<std::size_t> counts(const std::string& key) {
        std::vector<std::size_t> out;
        for (double x : numbers(key)) {
            if (!(x >= 1.0) || std::floor(x) != x) config_error("'" + where(key) + "' must contain positive integers");
            out.push_back(static_cast<std::size_t>(x));
        }
        return out;
    }

    const json* child(const std::string& key) { return has(key) ? &obj_.at(key) : nullptr; }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) config_error("unknown key '" + where(it.key()) + "'");
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

MarketParams read_params(const json& j) {
    Reader r(j, "params");
    MarketParams m;
    m.alpha = r.number("alpha");
    m.beta = r.number("beta");
    m.mu = r.number("mu");
    m.sigma = r.number("sigma");
    m.rho = r.number("rho");
    m.r = r.number("r");
    m.c = r.number("c");
    r.finish();
    return validate_params(m);
}

Mixture read_atoms(const json& j, const std::string& where) {
    if (!j.is_array()) config_error("'" + where + "' must be an array of {theta, weight}");
    Mixture out;
    for (const auto& a : j) {
        Reader r(a, where + "[]");
        out.push_back({r.number("theta"), r.number("weight")});
        r.finish();
    }
    return out;
}

PopulationSpec read_population(const json& j) {
    Reader r(j, "population");
    PopulationSpec p;
    const std::string kind = r.text("kind", "uniform");
    p.theta_bound = r.number("theta_bound", 0.0);
    if (kind == "uniform") {
        p.kind = PopulationSpec::Kind::Uniform;
        p.n = r.count("n", 50);
        p.b = r.number("b", 1.0);
    } else if (kind == "gains") {
        p.kind = PopulationSpec::Kind::Gains;
        p.gains = r.numbers("gains");
        if (p.gains.empty()) throw Error(ErrorCode::EmptyGains, "population.gains is empty");
        p.n = p.gains.size();
        if (const json* lim = r.child("limit")) p.mixture = read_atoms(*lim, "population.limit");
    } else if (kind == "mixture") {
        p.kind = PopulationSpec::Kind::Mixture;
        const json* atoms = r.child("atoms");
        if (atoms == nullptr) config_error("missing 'population.atoms'");
        p.mixture = read_atoms(*atoms, "population.atoms");
        p.n = r.count("n", 50);
        p.seed = r.count("seed", 1);
    } else {
        config_error("population.kind must be uniform, gains or mixture");
    }
    r.finish();
    if (p.n < 1) config_error("population.n must be >= 1");
    validate_population(p.build());
    return p;
}

InitialConditions read_init(const json& j) {
    Reader r(j, "init");
    InitialConditions init;
    init.p0 = r.number("p0");
    init.q0_mean = r.number("q0_mean");
    init.q0_var = r.number("q0_var", 0.0);
    init.truncate_initial_output = r.flag("truncate_initial_output", false);
    r.finish();
    return validate_initial(init);
}

SimSpec read_sim(const json& j) {
    Reader r(j, "sim");
    SimSpec s;
    s.enabled = r.flag("enabled", true);
    auto& c = s.config;
    c.dt = r.number("dt", c.dt);
    c.horizon = r.number("horizon", 0.0);
    c.horizon_override = r.flag("horizon_override", false);
    c.n_paths = r.count("n_paths", c.n_paths);
    c.seed = r.count("seed", c.seed);
    c.threads = static_cast<unsigned>(r.count("threads", 1));
    c.record_every = r.count("record_every", 0);
    c.firm_paths = r.count("firm_paths", 20);
    if (r.has("quantiles")) c.quantiles = r.numbers("quantiles");
    s.mf_ladder = r.counts("mf_ladder");
    if (const json* g = r.child("deviation_gap")) {
        Reader gr(*g, "sim.deviation_gap");
        s.gap.enabled = gr.flag("enabled", true);
        s.gap.ladder = gr.counts("ladder");
        s.gap.firm = gr.count("firm", 0);
        gr.finish();
    }
    if (const json* p = r.child("passivity")) {
        Reader pr(*p, "sim.passivity");
        s.passivity.enabled = pr.flag("enabled", true);
        s.passivity.trials = pr.count("trials", 20);
        const std::string kind = pr.text("kind", "random_one_firm");
        if (kind == "random_one_firm") {
            s.passivity.kind = DeviationKind::RandomOneFirm;
        } else if (kind == "constant_shift_all") {
            s.passivity.kind = DeviationKind::ConstantShiftAll;
        } else if (kind == "none") {
            s.passivity.kind = DeviationKind::None;
        } else {
            config_error("sim.passivity.kind must be random_one_firm, constant_shift_all or none");
        }
        s.passivity.amplitude = pr.number("amplitude", 1.0);
        pr.finish();
    }
    r.finish();
    if (c.n_paths < 1) config_error("sim.n_paths must be >= 1");
    if (c.threads < 1) config_error("sim.threads must be >= 1");
    if (!(c.dt > 0.0)) config_error("sim.dt must be > 0");
    return s;
}

SolverSpec read_solver(const json& j) {
    Reader r(j, "solver");
    SolverSpec s;
    const std::string route = r.text("route", "auto");
    if (route == "auto") {
        s.route = Route::Auto;
    } else if (route == "spectral") {
        s.route = Route::Spectral;
    } else if (route == "fixed_point") {
        s.route = Route::FixedPoint;
    } else {
        config_error("solver.route must be auto, spectral or fixed_point");
    }
    auto& f = s.fixed_point;
    f.t_max = r.number("t_max", 0.0);
    f.dt = r.number("dt", f.dt);
    f.tol = r.number("tol", f.tol);
    f.max_iters = static_cast<int>(r.count("max_iters", static_cast<std::uint64_t>(f.max_iters)));
    f.damping = r.number("damping", f.damping);
    f.retry_damped = r.flag("retry_damped", f.retry_damped);
    r.finish();
    if (!(f.dt > 0.0) || !(f.tol > 0.0) || !(f.damping > 0.0 && f.damping <= 1.0) || f.max_iters < 1) {
        config_error("solver settings out of range");
    }
    return s;
}

const std::vector<std::string>& param_names() {
    static const std::vector<std::string> names{"alpha", "beta", "mu", "sigma", "rho", "r", "c"};
    return names;
}

SweepSpec read_sweep(const json& j) {
    Reader r(j, "sweep");
    SweepSpec s;
    s.parameter = r.text("parameter");
    s.values = r.numbers("values");
    r.finish();
    if (std::find(param_names().begin(), param_names().end(), s.parameter) == param_names().end()) {
        config_error("sweep.parameter must name a scalar market parameter");
    }
    if (s.values.empty()) config_error("sweep.values is empty");
    return s;
}

OutputSpec read_outputs(const json& j) {
    Reader r(j, "outputs");
    OutputSpec o;
    o.directory = r.text("directory", o.directory);
    o.dt = r.number("dt", o.dt);
    o.horizon = r.number("horizon", 0.0);
    r.finish();
    if (!(o.dt > 0.0)) config_error("outputs.dt must be > 0");
    return o;
}

}  // namespace

Population PopulationSpec::build(std::optional<std::size_t> n_override) const {
    const std::size_t count = n_override.value_or(n);
    switch (kind) {
        case Kind::Uniform: {
            Population pop = Population::uniform(count, b);
            pop.theta_bound = theta_bound > 0.0 ? theta_bound : b;
            return pop;
        }
        case Kind::Gains: {
            if (n_override && *n_override != gains.size()) {
                config_error("an explicit gains list cannot be resized");
            }
            Population pop;
            pop.gains = gains;
            pop.limit_dist = mixture.empty() ? empirical_distribution(gains) : mixture;
            pop.theta_bound = theta_bound;
            return pop;
        }
        case Kind::Mixture:
            return Population::sample(mixture, count, seed, theta_bound);
    }
    return {};
}

Mixture PopulationSpec::limit() const { return normalize_mixture(build().limit_dist); }

void set_param(MarketParams& m, const std::string& name, double value) {
    if (name == "alpha") {
        m.alpha = value;
    } else if (name == "beta") {
        m.beta = value;
    } else if (name == "mu") {
        m.mu = value;
    } else if (name == "sigma") {
        m.sigma = value;
    } else if (name == "rho") {
        m.rho = value;
    } else if (name == "r") {
        m.r = value;
    } else if (name == "c") {
        m.c = value;
    } else {
        config_error("unknown parameter '" + name + "'");
    }
}

ExperimentConfig parse_config(const json& doc) {
    if (!doc.is_object()) config_error("config must be a JSON object");
    Reader r(doc, "");
    if (!r.has("schema")) config_error("missing 'schema'");
    if (!doc.at("schema").is_number_integer() || doc.at("schema").get<int>() != 1) {
        config_error("unsupported schema (expected 1)");
    }
    ExperimentConfig cfg;
    const std::string mode = r.text("mode");
    const auto parsed = parse_mode(mode);
    if (!parsed) config_error("mode must be one of nash, social, compare, table1, example1");
    cfg.mode = *parsed;
    const json* params = r.child("params");
    if (params == nullptr) config_error("missing 'params'");
    cfg.params = read_params(*params);
    if (const json* p = r.child("population")) cfg.population = read_population(*p);
    const json* init = r.child("init");
    if (init == nullptr) config_error("missing 'init'");
    cfg.init = read_init(*init);
    if (const json* s = r.child("sim")) cfg.sim = read_sim(*s);
    if (const json* s = r.child("solver")) cfg.solver = read_solver(*s);
    if (const json* s = r.child("sweep")) cfg.sweep = read_sweep(*s);
    if (const json* o = r.child("outputs")) cfg.outputs = read_outputs(*o);
    r.finish();
    cfg.sim.config.n_firms = cfg.population.n;
    if (cfg.sim.enabled) validate_sim(cfg.sim.config, cfg.params);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema"] = 1;
    j["mode"] = std::string(to_string(cfg.mode));
    const auto& m = cfg.params;
    j["params"] = {{"alpha", m.alpha}, {"beta", m.beta}, {"mu", m.mu}, {"sigma", m.sigma},
                   {"rho", m.rho},     {"r", m.r},       {"c", m.c}};
    const auto& p = cfg.population;
    json pop;
    pop["theta_bound"] = p.theta_bound;
    auto atoms = [](const Mixture& mix) {
        json a = json::array();
        for (const auto& x : mix) a.push_back({{"theta", x.theta}, {"weight", x.weight}});
        return a;
    };
    switch (p.kind) {
        case PopulationSpec::Kind::Uniform:
            pop["kind"] = "uniform";
            pop["n"] = p.n;
            pop["b"] = p.b;
            break;
        case PopulationSpec::Kind::Gains:
            pop["kind"] = "gains";
            pop["gains"] = p.gains;
            if (!p.mixture.empty()) pop["limit"] = atoms(p.mixture);
            break;
        case PopulationSpec::Kind::Mixture:
            pop["kind"] = "mixture";
            pop["atoms"] = atoms(p.mixture);
            pop["n"] = p.n;
            pop["seed"] = p.seed;
            break;
    }
    j["population"] = pop;
    j["init"] = {{"p0", cfg.init.p0},
                 {"q0_mean", cfg.init.q0_mean},
                 {"q0_var", cfg.init.q0_var},
                 {"truncate_initial_output", cfg.init.truncate_initial_output}};
    const auto& s = cfg.sim;
    const auto& c = s.config;
    json sim = {{"enabled", s.enabled},         {"dt", c.dt},
                {"horizon", c.horizon},         {"horizon_override", c.horizon_override},
                {"n_paths", c.n_paths},         {"seed", c.seed},
                {"threads", c.threads},         {"record_every", c.record_every},
                {"firm_paths", c.firm_paths},   {"quantiles", c.quantiles},
                {"mf_ladder", s.mf_ladder}};
    sim["deviation_gap"] = {{"enabled", s.gap.enabled}, {"ladder", s.gap.ladder}, {"firm", s.gap.firm}};
    const char* kind = s.passivity.kind == DeviationKind::RandomOneFirm      ? "random_one_firm"
                       : s.passivity.kind == DeviationKind::ConstantShiftAll ? "constant_shift_all"
                                                                            : "none";
    sim["passivity"] = {{"enabled", s.passivity.enabled},
                        {"trials", s.passivity.trials},
                        {"kind", kind},
                        {"amplitude", s.passivity.amplitude}};
    j["sim"] = sim;
    const auto& f = cfg.solver.fixed_point;
    const char* route = cfg.solver.route == Route::Auto ? "auto" : cfg.solver.route == Route::Spectral ? "spectral"
                                                                                                        : "fixed_point";
    j["solver"] = {{"route", route},       {"t_max", f.t_max},         {"dt", f.dt},
                   {"tol", f.tol},         {"max_iters", f.max_iters}, {"damping", f.damping},
                   {"retry_damped", f.retry_damped}};
    if (cfg.sweep) j["sweep"] = {{"parameter", cfg.sweep->parameter}, {"values", cfg.sweep->values}};
    j["outputs"] = {{"directory", cfg.outputs.directory}, {"dt", cfg.outputs.dt}, {"horizon", cfg.outputs.horizon}};
    return j;
}

SolutionSummary summarize(const NashLimit& lim) { return {"nash", lim.params, lim.z[0], lim.z[1], lim.j_nash_inf}; }

SolutionSummary summarize(const SocialLimit& lim) {
    return {"social", lim.params, lim.z_s[0], lim.z_s[3], lim.j_soc_inf};
}

ComparisonRecord compare_report(const SolutionSummary& nash, const SolutionSummary& social) {
    if (!(nash.params == social.params)) {
        throw Error(ErrorCode::ParamsMismatch, "solutions were computed at different parameters");
    }
    auto sign = [](double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); };
    ComparisonRecord c;
    c.price_nash = nash.price_inf;
    c.price_social = social.price_inf;
    c.output_nash = nash.output_inf;
    c.output_social = social.output_inf;
    c.j_nash = nash.j_inf;
    c.j_social = social.j_inf;
    c.delta_price = social.price_inf - nash.price_inf;
    c.delta_output = social.output_inf - nash.output_inf;
    c.delta_j = social.j_inf - nash.j_inf;
    c.sign_price = sign(c.delta_price);
    c.sign_output = sign(c.delta_output);
    c.sign_j = sign(c.delta_j);
    return c;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {

json closed_form(double x) { return {{"value", x}, {"provenance", "closed_form"}}; }
json quadrature(double x) { return {{"value", x}, {"provenance", "quadrature"}}; }
json monte_carlo(double x, double se) { return {{"value", x}, {"stderr", se}, {"provenance", "monte_carlo"}}; }

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) {
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << fmt(values[i]);
        out_ << '\n';
    }
    void labeled_row(const std::string& label, const std::vector<double>& values) {
        out_ << label;
        for (double v : values) out_ << ',' << fmt(v);
        out_ << '\n';
    }
    [[nodiscard]] std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

json complex_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

json spectral_block(const std::optional<SpectralData>& sd, const std::optional<RouthVerdict>& routh,
                    const std::vector<cplx>& coeffs) {
    json j;
    if (!sd) return j;
    json mat = json::array();
    for (Eigen::Index i = 0; i < sd->matrix.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < sd->matrix.cols(); ++k) row.push_back(sd->matrix(i, k));
        mat.push_back(row);
    }
    j["matrix"] = mat;
    j["char_poly"] = char_poly(sd->matrix);
    json vals = json::array();
    json vecs = json::array();
    for (std::size_t i = 0; i < sd->eigenvalues.size(); ++i) {
        vals.push_back(complex_json(sd->eigenvalues[i]));
        json v = json::array();
        for (Eigen::Index k = 0; k < sd->eigenvectors[i].size(); ++k) v.push_back(complex_json(sd->eigenvectors[i][k]));
        vecs.push_back(v);
    }
    j["eigenvalues"] = vals;
    j["eigenvectors"] = vecs;
    json stable = json::array();
    for (auto z : sd->stable_values()) stable.push_back(complex_json(z));
    j["stable_eigenvalues"] = stable;
    j["stable_count"] = sd->stable_count;
    j["max_residual"] = sd->max_residual();
    json a = json::array();
    for (auto z : coeffs) a.push_back(complex_json(z));
    j["boundary_coefficients"] = a;
    if (routh) {
        j["routh"] = {{"first_column", routh->first_column},
                      {"sign_changes", routh->sign_changes},
                      {"unstable_count", routh->unstable_count},
                      {"stable_count", routh->stable_count}};
    }
    return j;
}

json fixed_point_block(const std::optional<FixedPointReport>& fp) {
    if (!fp) return nullptr;
    return {{"converged", fp->converged},
            {"iterations", fp->iterations},
            {"damping", fp->damping},
            {"final_change", fp->final_change}};
}

NashLimit solve_nash(const ExperimentConfig& cfg, const MarketParams& m) {
    const Mixture dist = cfg.population.limit();
    if (cfg.solver.route != Route::FixedPoint) return solve_spectral(m, dist, cfg.init);
    return solve_fixedpoint(m, dist, cfg.init, cfg.solver.fixed_point);
}

SocialLimit solve_social(const ExperimentConfig& cfg, const MarketParams& m) {
    const Mixture dist = cfg.population.limit();
    if (cfg.solver.route != Route::FixedPoint) return solve_social_spectral(m, dist, cfg.init);
    return solve_social_fixedpoint(m, dist, cfg.init, cfg.solver.fixed_point);
}

double output_horizon(const ExperimentConfig& cfg) {
    if (cfg.outputs.horizon > 0.0) return cfg.outputs.horizon;
    return cfg.sim.config.resolved_horizon(cfg.params);
}

std::size_t output_nodes(const ExperimentConfig& cfg) {
    return static_cast<std::size_t>(std::floor(output_horizon(cfg) / cfg.outputs.dt + 1e-9)) + 1;
}

std::string limit_csv(const ExperimentConfig& cfg, const std::vector<std::string>& names,
                      const std::vector<const ScalarPath*>& paths) {
    std::vector<std::string> header{"t"};
    header.insert(header.end(), names.begin(), names.end());
    Csv csv(header);
    const std::size_t n = output_nodes(cfg);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = cfg.outputs.dt * static_cast<double>(k);
        std::vector<double> row{t};
        for (const auto* p : paths) row.push_back((*p)(t));
        csv.row(row);
    }
    return csv.str();
}

json nash_summary(const NashLimit& lim, const InitialConditions& init) {
    json j;
    j["route"] = lim.modal ? "spectral" : "fixed_point";
    j["price_inf"] = closed_form(lim.z[0]);
    j["output_inf"] = closed_form(lim.z[1]);
    j["s_inf"] = closed_form(lim.z[2]);
    j["contraction_bound"] = closed_form(lim.contraction_bound);
    if (lim.modal) {
        const NashCost c = nash_cost_closed_form(lim, std::sqrt(second_moment(lim.dist)), init.q0_mean);
        j["j_inf"] = closed_form(c.value);
        j["j_inf_quadrature"] = quadrature(c.quadrature_value);
        j["cost_terms"] = {{"linear_term", closed_form(c.linear_term)},
                           {"g0", closed_form(c.g0)},
                           {"g0_unweighted", closed_form(c.g0_unweighted)}};
    } else {
        j["j_inf"] = quadrature(lim.j_nash_inf);
    }
    return j;
}

json social_summary(const SocialLimit& lim, const InitialConditions& init) {
    json j;
    j["route"] = lim.modal ? "spectral" : "fixed_point";
    j["price_inf"] = closed_form(lim.z_s[0]);
    j["output_inf"] = closed_form(lim.z_s[3]);
    j["s1_inf"] = closed_form(lim.z_s[1]);
    j["s2_inf"] = closed_form(lim.z_s[2]);
    j["v_convolution_gap"] = quadrature(lim.v_convolution_gap);
    if (lim.modal) {
        const SocialCost c = social_cost_closed_form(lim, init.q0_mean);
        j["j_inf"] = closed_form(c.value);
        j["j_inf_quadrature"] = quadrature(c.quadrature_value);
        j["cost_terms"] = {{"linear_term", closed_form(c.linear_term)},
                           {"g_term", closed_form(c.g_term)},
                           {"qv_term", closed_form(c.qv_term)}};
    } else {
        j["j_inf"] = quadrature(lim.j_soc_inf);
    }
    return j;
}

json sim_summary(const SimResult& r) {
    json j;
    j["n_firms"] = r.n_firms;
    j["n_paths"] = r.n_paths;
    j["dt"] = closed_form(r.dt);
    j["horizon"] = closed_form(r.horizon);
    j["social_cost"] = monte_carlo(r.social_cost, r.social_cost_stderr);
    j["tail_fraction"] = monte_carlo(r.tail_fraction, 0.0);
    j["mf_error_price"] = monte_carlo(r.mf_errors.price, r.mf_errors.price_stderr);
    j["mf_error_output"] = monte_carlo(r.mf_errors.output, r.mf_errors.output_stderr);
    if (r.social) j["mf_error_v"] = monte_carlo(r.mf_errors.v, r.mf_errors.v_stderr);
    return j;
}

std::string sim_csv(const SimResult& r, const ScalarPath& p_ref, const ScalarPath& q_ref) {
    std::vector<std::string> header{"t", "p_mean", "q_avg_mean"};
    if (r.social) header.push_back("v_avg_mean");
    header.insert(header.end(), {"p_bar", "q_bar"});
    for (double l : r.quantile_levels) header.push_back("p_q" + fmt(l));
    for (double l : r.quantile_levels) header.push_back("q_avg_q" + fmt(l));
    Csv csv(header);
    for (std::size_t j = 0; j < r.t.size(); ++j) {
        std::vector<double> row{r.t[j], r.price_mean[j], r.avg_output_mean[j]};
        if (r.social) row.push_back(r.v_mean[j]);
        row.push_back(p_ref(r.t[j]));
        row.push_back(q_ref(r.t[j]));
        for (const auto& band : r.price_quantiles) row.push_back(band[j]);
        for (const auto& band : r.output_quantiles) row.push_back(band[j]);
        csv.row(row);
    }
    return csv.str();
}

std::string firm_csv(const SimResult& r) {
    std::vector<std::string> header{"t"};
    for (std::size_t i = 0; i < r.firm_paths.size(); ++i) header.push_back("q_" + std::to_string(i + 1));
    Csv csv(header);
    for (std::size_t j = 0; j < r.t.size(); ++j) {
        std::vector<double> row{r.t[j]};
        for (const auto& f : r.firm_paths) row.push_back(f[j]);
        csv.row(row);
    }
    return csv.str();
}

template <class Simulate>
json mf_ladder(const ExperimentConfig& cfg, Simulate&& simulate, bool social) {
    json entries = json::array();
    std::vector<double> ns;
    std::vector<double> out_err;
    std::vector<double> price_err;
    std::vector<double> v_err;
    for (std::size_t n : cfg.sim.mf_ladder) {
        SimConfig c = cfg.sim.config;
        c.n_firms = n;
        c.firm_paths = 0;
        const Population pop = cfg.population.build(n);
        const SimResult r = simulate(pop, c);
        json e = {{"n_firms", n},
                  {"mf_error_price", monte_carlo(r.mf_errors.price, r.mf_errors.price_stderr)},
                  {"mf_error_output", monte_carlo(r.mf_errors.output, r.mf_errors.output_stderr)}};
        if (social) e["mf_error_v"] = monte_carlo(r.mf_errors.v, r.mf_errors.v_stderr);
        e["epsilon_n"] = closed_form(epsilon_n(pop));
        entries.push_back(e);
        ns.push_back(static_cast<double>(n));
        out_err.push_back(r.mf_errors.output);
        price_err.push_back(r.mf_errors.price);
        v_err.push_back(r.mf_errors.v);
    }
    json j = {{"entries", entries},
              {"slope_output", monte_carlo(loglog_slope(ns, out_err), 0.0)},
              {"slope_price", monte_carlo(loglog_slope(ns, price_err), 0.0)}};
    if (social) j["slope_v"] = monte_carlo(loglog_slope(ns, v_err), 0.0);
    return j;
}

json gap_ladder(const ExperimentConfig& cfg, const NashLimit& lim) {
    json entries = json::array();
    std::vector<double> ns;
    std::vector<double> eps;
    std::vector<double> net;
    std::vector<std::size_t> ladder = cfg.sim.gap.ladder;
    if (ladder.empty()) ladder.push_back(cfg.population.n);
    for (std::size_t n : ladder) {
        SimConfig c = cfg.sim.config;
        c.n_firms = n;
        const Population pop = cfg.population.build(n);
        const DeviationGap g = deviation_gap(cfg.params, pop, cfg.init, lim, c, std::min(cfg.sim.gap.firm, n - 1));
        entries.push_back({{"n_firms", n},
                           {"eps_hat", monte_carlo(g.eps_hat, g.stderr)},
                           {"gain_raw", monte_carlo(g.gain_raw, g.stderr)},
                           {"discretization_floor", quadrature(g.discretization_floor)},
                           {"eps_hat_net", monte_carlo(g.eps_hat_net, g.stderr)},
                           {"j_nominal", monte_carlo(g.j_nominal, 0.0)},
                           {"j_deviated", monte_carlo(g.j_deviated, 0.0)}});
        ns.push_back(static_cast<double>(n));
        eps.push_back(g.eps_hat);
        net.push_back(g.eps_hat_net);
    }
    return {{"entries", entries},
            {"slope_eps_hat", monte_carlo(loglog_slope(ns, eps), 0.0)},
            {"slope_eps_hat_net", monte_carlo(loglog_slope(ns, net), 0.0)}};
}

json passivity_block(const ExperimentConfig& cfg, const SocialLimit& lim) {
    json trials = json::array();
    double worst_gap = 0.0;
    bool all_ok = true;
    const Population pop = cfg.population.build();
    for (std::size_t t = 0; t < cfg.sim.passivity.trials; ++t) {
        SimConfig c = cfg.sim.config;
        c.seed = cfg.sim.config.seed + 1000003ULL * (t + 1);
        const auto trial =
            run_passivity_trial(cfg.params, pop, cfg.init, lim, c, cfg.sim.passivity.kind, cfg.sim.passivity.amplitude);
        const auto& r = trial.result;
        all_ok = all_ok && r.integral_mean >= -3.0 * r.integral_stderr;
        worst_gap = std::max(worst_gap, r.max_identity_gap);
        trials.push_back({{"seed", c.seed},
                          {"integral", monte_carlo(r.integral_mean, r.integral_stderr)},
                          {"max_identity_gap", monte_carlo(r.max_identity_gap, 0.0)}});
    }
    return {{"trials", trials},
            {"all_nonnegative_within_3se", all_ok},
            {"max_identity_gap", monte_carlo(worst_gap, 0.0)}};
}

struct Sweep {
    std::string parameter;
    std::vector<double> values;
};

Sweep sweep_for(const ExperimentConfig& cfg) {
    if (cfg.sweep) return {cfg.sweep->parameter, cfg.sweep->values};
    return {"alpha", {0.1, 0.2, 0.5, 1.0, 5.0}};
}

struct SweepRow {
    double value;
    NashLimit nash;
    SocialLimit social;
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const Sweep& sw) {
    std::vector<SweepRow> rows;
    for (double v : sw.values) {
        MarketParams m = cfg.params;
        set_param(m, sw.parameter, v);
        m = validate_params(m);
        rows.push_back({v, solve_nash(cfg, m), solve_social(cfg, m)});
    }
    return rows;
}

std::string sweep_csv(const std::string& parameter, const std::vector<SweepRow>& rows) {
    Csv csv({parameter, "j_nash", "j_soc", "delta_j", "p_nash_inf", "p_soc_inf", "q_nash_inf", "q_soc_inf",
             "nash_linear_term", "nash_g0", "soc_linear_term", "soc_g_term", "soc_qv_term"});
    for (const auto& r : rows) {
        std::vector<double> row{r.value, r.nash.j_nash_inf, r.social.j_soc_inf, r.social.j_soc_inf - r.nash.j_nash_inf,
                                r.nash.z[0], r.social.z_s[0], r.nash.z[1], r.social.z_s[3]};
        if (r.nash.modal && r.social.modal) {
            const auto nc = nash_cost_closed_form(r.nash, std::sqrt(second_moment(r.nash.dist)), r.nash.init.q0_mean);
            const auto sc = social_cost_closed_form(r.social, r.social.init.q0_mean);
            row.insert(row.end(), {nc.linear_term, nc.g0, sc.linear_term, sc.g_term, sc.qv_term});
        } else {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.insert(row.end(), {nan, nan, nan, nan, nan});
        }
        csv.row(row);
    }
    return csv.str();
}

json comparison_json(const ComparisonRecord& c) {
    return {{"price_nash", closed_form(c.price_nash)},     {"price_social", closed_form(c.price_social)},
            {"output_nash", closed_form(c.output_nash)},   {"output_social", closed_form(c.output_social)},
            {"j_nash", closed_form(c.j_nash)},             {"j_social", closed_form(c.j_social)},
            {"delta_price", closed_form(c.delta_price)},   {"delta_output", closed_form(c.delta_output)},
            {"delta_j", closed_form(c.delta_j)},           {"sign_price", c.sign_price},
            {"sign_output", c.sign_output},                {"sign_j", c.sign_j}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void nash_artifacts(const ExperimentConfig& cfg, const NashLimit& lim, const std::string& prefix, Artifacts& out,
                    json& summary) {
    out[prefix + "limit_paths.csv"] = limit_csv(cfg, {"p_bar", "q_bar", "s"}, {&lim.p, &lim.q, &lim.s});
    json spec = spectral_block(lim.spectral, lim.routh, lim.a_coeffs);
    spec["kind"] = "nash";
    spec["z"] = {lim.z[0], lim.z[1], lim.z[2]};
    spec["contraction_bound"] = lim.contraction_bound;
    spec["fixed_point"] = fixed_point_block(lim.fixed_point);
    out[prefix + "spectral.json"] = dump(spec);
    summary["nash"] = nash_summary(lim, cfg.init);
    if (!cfg.sim.enabled) return;
    const Population pop = cfg.population.build();
    const SimResult r = simulate_nash(cfg.params, pop, cfg.init, lim, cfg.sim.config);
    out[prefix + "sim_paths.csv"] = sim_csv(r, lim.p, lim.q);
    if (!r.firm_paths.empty()) out[prefix + "firm_paths.csv"] = firm_csv(r);
    summary["nash_simulation"] = sim_summary(r);
    if (!cfg.sim.mf_ladder.empty()) {
        summary["nash_mf_scaling"] = mf_ladder(
            cfg, [&](const Population& p, const SimConfig& c) { return simulate_nash(cfg.params, p, cfg.init, lim, c); },
            false);
    }
    if (cfg.sim.gap.enabled) summary["deviation_gap"] = gap_ladder(cfg, lim);
}

void social_artifacts(const ExperimentConfig& cfg, const SocialLimit& lim, const std::string& prefix, Artifacts& out,
                      json& summary) {
    out[prefix + "limit_paths.csv"] =
        limit_csv(cfg, {"p_bar", "q_bar", "s1", "s2", "v_bar"}, {&lim.p, &lim.q, &lim.s1, &lim.s2, &lim.v});
    json spec = spectral_block(lim.spectral, lim.routh, lim.a_coeffs);
    spec["kind"] = "social";
    spec["z"] = std::vector<double>(lim.z_s.data(), lim.z_s.data() + 5);
    spec["fixed_point"] = fixed_point_block(lim.fixed_point);
    out[prefix + "spectral.json"] = dump(spec);
    summary["social"] = social_summary(lim, cfg.init);
    if (!cfg.sim.enabled) return;
    const Population pop = cfg.population.build();
    const SimResult r = simulate_social(cfg.params, pop, cfg.init, lim, cfg.sim.config);
    out[prefix + "sim_paths.csv"] = sim_csv(r, lim.p, lim.q);
    if (!r.firm_paths.empty()) out[prefix + "firm_paths.csv"] = firm_csv(r);
    summary["social_simulation"] = sim_summary(r);
    if (!cfg.sim.mf_ladder.empty()) {
        summary["social_mf_scaling"] = mf_ladder(
            cfg,
            [&](const Population& p, const SimConfig& c) { return simulate_social(cfg.params, p, cfg.init, lim, c); },
            true);
    }
    if (cfg.sim.passivity.enabled) summary["passivity"] = passivity_block(cfg, lim);
}

}  // namespace

Artifacts run_experiment(const ExperimentConfig& cfg) {
    Artifacts out;
    json summary;
    summary["schema"] = 1;
    summary["mode"] = std::string(to_string(cfg.mode));
    switch (cfg.mode) {
        case Mode::Nash:
            nash_artifacts(cfg, solve_nash(cfg, cfg.params), "", out, summary);
            break;
        case Mode::Social:
            social_artifacts(cfg, solve_social(cfg, cfg.params), "", out, summary);
            break;
        case Mode::Compare: {
            const NashLimit n = solve_nash(cfg, cfg.params);
            const SocialLimit s = solve_social(cfg, cfg.params);
            json nsum;
            json ssum;
            nash_artifacts(cfg, n, "nash/", out, nsum);
            social_artifacts(cfg, s, "social/", out, ssum);
            summary.update(nsum);
            summary.update(ssum);
            summary["comparison"] = comparison_json(compare_report(summarize(n), summarize(s)));
            break;
        }
        case Mode::Table1: {
            const Sweep sw = sweep_for(cfg);
            const auto rows = run_sweep(cfg, sw);
            std::vector<double> jn;
            std::vector<double> js;
            json table = json::array();
            for (const auto& r : rows) {
                jn.push_back(r.nash.j_nash_inf);
                js.push_back(r.social.j_soc_inf);
                const auto c = compare_report(summarize(r.nash), summarize(r.social));
                table.push_back({{sw.parameter, closed_form(r.value)}, {"comparison", comparison_json(c)}});
            }
            std::vector<std::string> header{sw.parameter};
            for (const auto& r : rows) header.push_back(fmt(r.value));
            Csv csv(header);
            csv.labeled_row("J_nash", jn);
            csv.labeled_row("J_soc", js);
            out["table1.csv"] = csv.str();
            out["sweep.csv"] = sweep_csv(sw.parameter, rows);
            summary["table"] = table;
            break;
        }
        case Mode::Example1: {
            const Mixture dist = cfg.population.limit();
            if (dist.size() != 1) config_error("example1 needs a point-mass population");
            const NashLimit n = solve_uniform(cfg.params, dist.front().theta, cfg.init);
            nash_artifacts(cfg, n, "", out, summary);
            json modes = json::array();
            const auto idx = n.spectral->stable_indices();
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const cplx lam = n.spectral->eigenvalues[idx[k]];
                const auto& vec = n.spectral->eigenvectors[idx[k]];
                json v = json::array();
                for (Eigen::Index i = 0; i < vec.size(); ++i) {
                    v.push_back({{"re", closed_form(vec[i].real())}, {"im", closed_form(vec[i].imag())}});
                }
                modes.push_back({{"eigenvalue", {{"re", closed_form(lam.real())}, {"im", closed_form(lam.imag())}}},
                                 {"eigenvector", v},
                                 {"coefficient",
                                  {{"re", closed_form(n.a_coeffs[k].real())}, {"im", closed_form(n.a_coeffs[k].imag())}}}});
            }
            summary["example1"] = {{"stable_modes", modes}, {"contraction_bound", closed_form(n.contraction_bound)}};
            break;
        }
    }
    if (cfg.sweep && cfg.mode != Mode::Table1) {
        out["sweep.csv"] = sweep_csv(cfg.sweep->parameter, run_sweep(cfg, sweep_for(cfg)));
    }
    out["summary.json"] = dump(summary);
    out["config.json"] = dump(config_to_json(cfg));
    return out;
}

void write_artifacts(const Artifacts& artifacts, const std::string& directory) {
    namespace fs = std::filesystem;
    for (const auto& [name, text] : artifacts) {
        const fs::path path = fs::path(directory) / name;
        fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error(ErrorCode::InternalError, "cannot write " + path.string());
        f << text;
    }
}

}  // namespace sticky
