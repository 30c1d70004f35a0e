#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

#include "ergolab/cli.hpp"
#include "ergolab/convex_domain.hpp"

namespace ergolab::cli {

namespace {

/// Reads one table and remembers which keys were consumed so leftovers can be rejected.
class Section {
  public:
    Section(const toml::table* tbl, std::string name) : tbl_(tbl), name_(std::move(name)) {}

    const toml::node* find(const std::string& key) {
        if (!tbl_) return nullptr;
        used_.insert(key);
        return tbl_->get(key);
    }

    std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    void get(const std::string& key, double& out) {
        if (const auto* n = find(key)) out = as_double(*n, where(key));
    }

    void get(const std::string& key, std::size_t& out) {
        if (const auto* n = find(key)) {
            const auto v = n->value_exact<std::int64_t>();
            if (!v || *v < 0) throw ConfigError(where(key) + " must be a non-negative integer");
            out = static_cast<std::size_t>(*v);
        }
    }

    void get(const std::string& key, std::uint64_t& out, bool) {
        if (const auto* n = find(key)) {
            const auto v = n->value_exact<std::int64_t>();
            if (!v || *v < 0) throw ConfigError(where(key) + " must be a non-negative integer");
            out = static_cast<std::uint64_t>(*v);
        }
    }

    void get(const std::string& key, int& out) {
        if (const auto* n = find(key)) {
            const auto v = n->value_exact<std::int64_t>();
            if (!v) throw ConfigError(where(key) + " must be an integer");
            out = static_cast<int>(*v);
        }
    }

    void get(const std::string& key, bool& out) {
        if (const auto* n = find(key)) {
            const auto v = n->value_exact<bool>();
            if (!v) throw ConfigError(where(key) + " must be a boolean");
            out = *v;
        }
    }

    void get(const std::string& key, std::string& out) {
        if (const auto* n = find(key)) {
            const auto v = n->value_exact<std::string>();
            if (!v) throw ConfigError(where(key) + " must be a string");
            out = *v;
        }
    }

    void get(const std::string& key, std::vector<double>& out) {
        if (const auto* n = find(key)) out = as_vector(*n, where(key));
    }

    void get(const std::string& key, std::vector<Point>& out) {
        if (const auto* n = find(key)) {
            const auto* arr = n->as_array();
            if (!arr) throw ConfigError(where(key) + " must be an array of arrays");
            out.clear();
            for (const auto& el : *arr) out.push_back(as_vector(el, where(key)));
        }
    }

    /// Every remaining numeric key becomes a preset parameter.
    ParamMap rest_as_params() {
        ParamMap p;
        if (!tbl_) return p;
        for (const auto& [k, v] : *tbl_) {
            const std::string key(k.str());
            if (used_.count(key)) continue;
            used_.insert(key);
            p[key] = as_double(v, where(key));
        }
        return p;
    }

    void reject_leftovers() const {
        if (!tbl_) return;
        for (const auto& [k, v] : *tbl_)
            if (!used_.count(std::string(k.str()))) throw ConfigError("unknown configuration key '" + where(std::string(k.str())) + "'");
    }

  private:
    static double as_double(const toml::node& n, const std::string& where) {
        if (const auto i = n.value_exact<std::int64_t>()) return static_cast<double>(*i);
        if (const auto d = n.value_exact<double>()) return *d;
        throw ConfigError(where + " must be a number");
    }

    static std::vector<double> as_vector(const toml::node& n, const std::string& where) {
        const auto* arr = n.as_array();
        if (!arr) throw ConfigError(where + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& el : *arr) out.push_back(as_double(el, where));
        return out;
    }

    const toml::table* tbl_;
    std::string name_;
    std::set<std::string> used_;
};

const toml::table* subtable(const toml::table& root, const std::string& key, std::set<std::string>& seen) {
    seen.insert(key);
    const auto* n = root.get(key);
    if (!n) return nullptr;
    if (!n->is_table()) throw ConfigError("'" + key + "' must be a table");
    return n->as_table();
}

void apply_override(toml::table& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string path = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) {
        if (part.empty()) throw ConfigError("override key '" + path + "' has an empty component");
        keys.push_back(part);
    }
    toml::table* tbl = &root;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        auto* n = tbl->get(keys[i]);
        if (!n) {
            tbl->insert_or_assign(keys[i], toml::table{});
            n = tbl->get(keys[i]);
        }
        if (!n->is_table()) throw ConfigError("override key '" + path + "' descends into a non-table");
        tbl = n->as_table();
    }
    // Values are TOML literals; anything that does not parse is taken as a bare string.
    toml::table parsed;
    try {
        parsed = toml::parse("v = " + value);
    } catch (const toml::parse_error&) {
        parsed = toml::table{};
        parsed.insert_or_assign("v", value);
    }
    tbl->insert_or_assign(keys.back(), std::move(*parsed.get("v")));
}

bool strictly_decreasing_positive(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0) || !std::isfinite(v[i])) return false;
        if (i && !(v[i] < v[i - 1])) return false;
    }
    return true;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void check_grid(double dt, double T, std::size_t n_paths, const std::string& where) {
    require(dt > 0.0 && std::isfinite(dt), where + ".dt must be > 0");
    require(T > dt && std::isfinite(T), where + ".T must exceed dt");
    require(n_paths >= 2, where + ".n_paths must be >= 2");
}

}  // namespace

void ExperimentConfig::validate() const {
    const ModelSpec m = make_model_preset(model, model_params);
    const ConvexDomain dom = make_domain_preset(domain, m.dim, domain_params);
    const std::string drv = driver.empty() ? (control.empty() ? "cosine" : "hamiltonian") : driver;
    if (drv == "hamiltonian") {
        require(!control.empty(), "driver 'hamiltonian' needs a [control] section");
        require(driver_params.empty(), "driver 'hamiltonian' takes no parameters");
    } else {
        require(control.empty(), "a [control] section requires driver 'hamiltonian'");
        make_driver_preset(drv, driver_params);
    }
    if (!control.empty()) make_control_preset(control, m.dim, control_params);
    require(threads <= 1024, "threads must be <= 1024");
    require(check_pairs >= 1, "check.n_pairs must be >= 1");

    auto in_domain = [&](const Point& p, const std::string& where) {
        require(p.size() == m.dim, where + " must have " + std::to_string(m.dim) + " components");
        require(dom.contains(p, 1e-12), where + " must lie in the closed domain");
    };

    check_grid(sim.dt, sim.T, sim.n_paths, "sim");
    require(sim.scheme == "auto" || sim.scheme == "unreflected" || sim.scheme == "penalized" || sim.scheme == "projected",
            "sim.scheme must be auto, unreflected, penalized or projected");
    if (sim.scheme == "penalized" || sim.scheme == "projected")
        require(!dom.is_whole_space(), "sim.scheme '" + sim.scheme + "' needs a domain");
    require(sim.n_penal > 0.0, "sim.n_penal must be > 0");
    require(sim.record_stride >= 1, "sim.record_stride must be >= 1");
    require(!sim.powers.empty(), "sim.powers must not be empty");
    for (double p : sim.powers) require(p > 0.0, "sim.powers must be > 0");
    if (!sim.x0.empty()) require(sim.x0.size() == m.dim, "sim.x0 must have " + std::to_string(m.dim) + " components");

    check_grid(mixing.dt, mixing.T, mixing.n_paths, "mixing");
    require(mixing.n_paths >= 40, "mixing.n_paths must be >= 40");
    require(mixing.record_stride >= 1, "mixing.record_stride must be >= 1");
    require(mixing.snr > 0.0, "mixing.snr must be > 0");
    if (!mixing.x.empty()) in_domain(mixing.x, "mixing.x");
    if (!mixing.y.empty()) in_domain(mixing.y, "mixing.y");

    require(bsde.dt > 0.0, "bsde.dt must be > 0");
    require(bsde.cloud_size >= 10, "bsde.cloud_size must be >= 10");
    require(bsde.burn_in >= 0.0, "bsde.burn_in must be >= 0");
    require(bsde.basis == "auto" || bsde.basis == "legendre" || bsde.basis == "cosine",
            "bsde.basis must be auto, legendre or cosine");
    require(bsde.degree >= 0 && bsde.degree <= 30, "bsde.degree must lie in [0, 30]");
    require(bsde.trunc_tol_rel > 0.0 && bsde.trunc_tol_rel < 1.0, "bsde.trunc_tol_rel must lie in (0, 1)");
    require(bsde.alpha > 0.0 && std::isfinite(bsde.alpha), "bsde.alpha must be > 0");
    require(!bsde.alphas.empty() && strictly_decreasing_positive(bsde.alphas),
            "bsde.alphas must be positive and strictly decreasing");

    check_grid(long_run.dt, long_run.T, long_run.n_paths, "long_run");
    for (const Point& s : long_run.starts) in_domain(s, "long_run.starts");

    require(pde.grid >= 16, "pde.grid must be >= 16");
    require(pde.mode == "ergodic" || pde.mode == "discounted", "pde.mode must be ergodic or discounted");
    require(pde.alpha > 0.0, "pde.alpha must be > 0");
    if (pde.has_interval) require(pde.a < pde.b, "pde.a must be < pde.b");

    check_grid(control_eval.dt, control_eval.T, control_eval.n_paths, "control_eval");
    require(control_eval.burn_in_fraction >= 0.0 && control_eval.burn_in_fraction < 1.0,
            "control_eval.burn_in_fraction must lie in [0, 1)");
    const std::string& pol = control_eval.policy;
    require(pol == "optimal" || pol.rfind("const:", 0) == 0 || pol.rfind("file:", 0) == 0,
            "control_eval.policy must be optimal, const:<u> or file:<path>");
    if (!control_eval.x0.empty()) in_domain(control_eval.x0, "control_eval.x0");

    require(tolerances.lambda_pde > 0.0 && tolerances.lambda_long_run > 0.0 && tolerances.control > 0.0,
            "tolerances must be > 0");
}

ExperimentConfig parse_config(const std::string& toml_text, const std::vector<std::string>& overrides) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error: " << e.description() << " at " << e.source().begin;
        throw ConfigError(msg.str());
    }
    for (const auto& o : overrides) apply_override(root, o);

    ExperimentConfig c;
    std::set<std::string> seen;
    Section top(&root, "");
    top.get("seed", c.seed, true);
    top.get("output_dir", c.output_dir);
    top.get("threads", c.threads);

    auto preset_section = [&](const std::string& key, std::string& preset, ParamMap& params) {
        Section s(subtable(root, key, seen), key);
        s.get("preset", preset);
        params = s.rest_as_params();
    };
    preset_section("model", c.model, c.model_params);
    preset_section("domain", c.domain, c.domain_params);
    preset_section("driver", c.driver, c.driver_params);
    preset_section("control", c.control, c.control_params);

    {
        Section s(subtable(root, "check", seen), "check");
        s.get("n_pairs", c.check_pairs);
        s.reject_leftovers();
    }
    {
        Section s(subtable(root, "sim", seen), "sim");
        s.get("dt", c.sim.dt);
        s.get("T", c.sim.T);
        s.get("n_paths", c.sim.n_paths);
        s.get("scheme", c.sim.scheme);
        s.get("n_penal", c.sim.n_penal);
        s.get("x0", c.sim.x0);
        s.get("record_stride", c.sim.record_stride);
        s.get("powers", c.sim.powers);
        s.reject_leftovers();
    }
    {
        Section s(subtable(root, "mixing", seen), "mixing");
        s.get("dt", c.mixing.dt);
        s.get("T", c.mixing.T);
        s.get("n_paths", c.mixing.n_paths);
        s.get("x", c.mixing.x);
        s.get("y", c.mixing.y);
        s.get("record_stride", c.mixing.record_stride);
        s.get("snr", c.mixing.snr);
        s.reject_leftovers();
    }
    {
        Section s(subtable(root, "bsde", seen), "bsde");
        s.get("dt", c.bsde.dt);
        s.get("cloud_size", c.bsde.cloud_size);
        s.get("burn_in", c.bsde.burn_in);
        s.get("basis", c.bsde.basis);
        s.get("degree", c.bsde.degree);
        s.get("trunc_tol_rel", c.bsde.trunc_tol_rel);
        s.get("alpha", c.bsde.alpha);
        s.get("alphas", c.bsde.alphas);
        s.reject_leftovers();
    }
    {
        Section s(subtable(root, "long_run", seen), "long_run");
        s.get("dt", c.long_run.dt);
        s.get("T", c.long_run.T);
        s.get("n_paths", c.long_run.n_paths);
        s.get("starts", c.long_run.starts);
        s.reject_leftovers();
    }
    {
        Section s(subtable(root, "pde", seen), "pde");
        s.get("grid", c.pde.grid);
        s.get("mode", c.pde.mode);
        s.get("alpha", c.pde.alpha);
        const bool has_a = s.find("a") != nullptr, has_b = s.find("b") != nullptr;
        if (has_a != has_b) throw ConfigError("pde.a and pde.b must be given together");
        c.pde.has_interval = has_a;
        s.get("a", c.pde.a);
        s.get("b", c.pde.b);
        s.reject_leftovers();
    }
    {
        Section s(subtable(root, "control_eval", seen), "control_eval");
        s.get("dt", c.control_eval.dt);
        s.get("T", c.control_eval.T);
        s.get("n_paths", c.control_eval.n_paths);
        s.get("burn_in_fraction", c.control_eval.burn_in_fraction);
        s.get("policy", c.control_eval.policy);
        s.get("x0", c.control_eval.x0);
        s.get("compare_constants", c.control_eval.compare_constants);
        s.reject_leftovers();
    }
    {
        Section s(subtable(root, "tolerances", seen), "tolerances");
        s.get("lambda_pde", c.tolerances.lambda_pde);
        s.get("lambda_long_run", c.tolerances.lambda_long_run);
        s.get("control", c.tolerances.control);
        s.reject_leftovers();
    }
    for (const auto& key : seen) top.find(key);
    top.reject_leftovers();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << f.rdbuf();
    return parse_config(text.str(), overrides);
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["model"] = {{"preset", c.model}, {"params", c.model_params}};
    j["domain"] = {{"preset", c.domain}, {"params", c.domain_params}};
    j["driver"] = {{"preset", c.driver}, {"params", c.driver_params}};
    j["control"] = {{"preset", c.control}, {"params", c.control_params}};
    j["check"] = {{"n_pairs", c.check_pairs}};
    j["sim"] = {{"dt", c.sim.dt},         {"T", c.sim.T},   {"n_paths", c.sim.n_paths},
                {"scheme", c.sim.scheme}, {"n_penal", c.sim.n_penal}, {"x0", c.sim.x0},
                {"record_stride", c.sim.record_stride}, {"powers", c.sim.powers}};
    j["mixing"] = {{"dt", c.mixing.dt}, {"T", c.mixing.T}, {"n_paths", c.mixing.n_paths}, {"x", c.mixing.x},
                   {"y", c.mixing.y},   {"record_stride", c.mixing.record_stride}, {"snr", c.mixing.snr}};
    j["bsde"] = {{"dt", c.bsde.dt},       {"cloud_size", c.bsde.cloud_size}, {"burn_in", c.bsde.burn_in},
                 {"basis", c.bsde.basis}, {"degree", c.bsde.degree},         {"trunc_tol_rel", c.bsde.trunc_tol_rel},
                 {"alpha", c.bsde.alpha}, {"alphas", c.bsde.alphas}};
    j["long_run"] = {{"dt", c.long_run.dt}, {"T", c.long_run.T}, {"n_paths", c.long_run.n_paths},
                     {"starts", c.long_run.starts}};
    j["pde"] = {{"grid", c.pde.grid}, {"mode", c.pde.mode}, {"alpha", c.pde.alpha}};
    if (c.pde.has_interval) {
        j["pde"]["a"] = c.pde.a;
        j["pde"]["b"] = c.pde.b;
    }
    j["control_eval"] = {{"dt", c.control_eval.dt},
                         {"T", c.control_eval.T},
                         {"n_paths", c.control_eval.n_paths},
                         {"burn_in_fraction", c.control_eval.burn_in_fraction},
                         {"policy", c.control_eval.policy},
                         {"x0", c.control_eval.x0},
                         {"compare_constants", c.control_eval.compare_constants}};
    j["tolerances"] = {{"lambda_pde", c.tolerances.lambda_pde},
                       {"lambda_long_run", c.tolerances.lambda_long_run},
                       {"control", c.tolerances.control}};
    return j;
}

}  // namespace ergolab::cli
