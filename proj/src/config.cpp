#include "maflow/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "maflow/errors.hpp"

namespace maflow {

std::string to_string(TerminalOutflowMode m) {
    return m == TerminalOutflowMode::boundary ? "boundary" : "literal";
}

TerminalOutflowMode terminal_outflow_mode_from_string(const std::string& s) {
    if (s == "boundary") return TerminalOutflowMode::boundary;
    if (s == "literal") return TerminalOutflowMode::literal;
    throw ConfigError("unknown terminal_outflow_mode: " + s);
}

namespace {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    if (v == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': not a number: " + v);
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    int64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError("config field '" + key + "': not an integer: " + v);
    }
    return out;
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
    uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError("config field '" + key + "': not an unsigned integer: " + v);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config field '" + key + "': not a boolean: " + v);
}

std::string trim(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// One row per key: serialize and assign share the same table.
struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"scenario", [](const RunConfig& c) { return c.scenario; },
         [](RunConfig& c, const std::string& v) { c.scenario = v; }},
        {"n_agents", [](const RunConfig& c) { return std::to_string(c.n_agents); },
         [](RunConfig& c, const std::string& v) { c.n_agents = static_cast<int>(parse_int("n_agents", v)); }},
        {"horizon", [](const RunConfig& c) { return std::to_string(c.horizon); },
         [](RunConfig& c, const std::string& v) { c.horizon = static_cast<int>(parse_int("horizon", v)); }},
        {"arena_half_width", [](const RunConfig& c) { return format_double(c.arena_half_width); },
         [](RunConfig& c, const std::string& v) { c.arena_half_width = parse_double("arena_half_width", v); }},
        {"action_bound", [](const RunConfig& c) { return format_double(c.action_bound); },
         [](RunConfig& c, const std::string& v) { c.action_bound = parse_double("action_bound", v); }},
        {"obs_radius", [](const RunConfig& c) { return format_double(c.obs_radius); },
         [](RunConfig& c, const std::string& v) { c.obs_radius = parse_double("obs_radius", v); }},
        {"reward_floor", [](const RunConfig& c) { return format_double(c.reward_floor); },
         [](RunConfig& c, const std::string& v) { c.reward_floor = parse_double("reward_floor", v); }},
        {"total_env_steps", [](const RunConfig& c) { return std::to_string(c.total_env_steps); },
         [](RunConfig& c, const std::string& v) { c.total_env_steps = parse_int("total_env_steps", v); }},
        {"k_hat", [](const RunConfig& c) { return std::to_string(c.k_hat); },
         [](RunConfig& c, const std::string& v) { c.k_hat = static_cast<int>(parse_int("k_hat", v)); }},
        {"epsilon", [](const RunConfig& c) { return format_double(c.epsilon); },
         [](RunConfig& c, const std::string& v) { c.epsilon = parse_double("epsilon", v); }},
        {"temperature", [](const RunConfig& c) { return format_double(c.temperature); },
         [](RunConfig& c, const std::string& v) { c.temperature = parse_double("temperature", v); }},
        {"learning_rate", [](const RunConfig& c) { return format_double(c.learning_rate); },
         [](RunConfig& c, const std::string& v) { c.learning_rate = parse_double("learning_rate", v); }},
        {"batch_size", [](const RunConfig& c) { return std::to_string(c.batch_size); },
         [](RunConfig& c, const std::string& v) { c.batch_size = static_cast<int>(parse_int("batch_size", v)); }},
        {"buffer_capacity", [](const RunConfig& c) { return std::to_string(c.buffer_capacity); },
         [](RunConfig& c, const std::string& v) { c.buffer_capacity = static_cast<int>(parse_int("buffer_capacity", v)); }},
        {"inverse_batch", [](const RunConfig& c) { return std::to_string(c.inverse_batch); },
         [](RunConfig& c, const std::string& v) { c.inverse_batch = static_cast<int>(parse_int("inverse_batch", v)); }},
        {"inverse_mode", [](const RunConfig& c) { return c.inverse_mode; },
         [](RunConfig& c, const std::string& v) { c.inverse_mode = v; }},
        {"terminal_outflow_mode", [](const RunConfig& c) { return c.terminal_outflow_mode; },
         [](RunConfig& c, const std::string& v) { c.terminal_outflow_mode = v; }},
        {"hidden_dims", [](const RunConfig& c) { return c.hidden_dims; },
         [](RunConfig& c, const std::string& v) { c.hidden_dims = v; }},
        {"activation", [](const RunConfig& c) { return c.activation; },
         [](RunConfig& c, const std::string& v) { c.activation = v; }},
        {"shared_flow_params", [](const RunConfig& c) { return std::string(c.shared_flow_params ? "true" : "false"); },
         [](RunConfig& c, const std::string& v) { c.shared_flow_params = parse_bool("shared_flow_params", v); }},
        {"eval_every", [](const RunConfig& c) { return std::to_string(c.eval_every); },
         [](RunConfig& c, const std::string& v) { c.eval_every = parse_int("eval_every", v); }},
        {"eval_episodes", [](const RunConfig& c) { return std::to_string(c.eval_episodes); },
         [](RunConfig& c, const std::string& v) { c.eval_episodes = static_cast<int>(parse_int("eval_episodes", v)); }},
        {"diversity_threshold", [](const RunConfig& c) { return format_double(c.diversity_threshold); },
         [](RunConfig& c, const std::string& v) { c.diversity_threshold = parse_double("diversity_threshold", v); }},
        {"validity_floor", [](const RunConfig& c) { return format_double(c.validity_floor); },
         [](RunConfig& c, const std::string& v) { c.validity_floor = parse_double("validity_floor", v); }},
        {"histogram_bins", [](const RunConfig& c) { return std::to_string(c.histogram_bins); },
         [](RunConfig& c, const std::string& v) { c.histogram_bins = static_cast<int>(parse_int("histogram_bins", v)); }},
        {"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
         [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); }},
        {"output_dir", [](const RunConfig& c) { return c.output_dir; },
         [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
    };
    return table;
}

void assign(RunConfig& config, const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(config, value);
            return;
        }
    }
    throw ConfigError("unknown config field: '" + key + "'");
}

}  // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        assign(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return config;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must look like key=value: " + kv);
        }
        assign(*this, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(*this);
        out += '\n';
    }
    return out;
}

void RunConfig::validate() const {
    env_spec();  // validates all environment fields
    if (total_env_steps < 0) throw ConfigError("total_env_steps must be >= 0");
    if (k_hat < 2) throw ConfigError("k_hat must be >= 2");
    if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
    if (inverse_batch < 1) throw ConfigError("inverse_batch must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (histogram_bins < 2) throw ConfigError("histogram_bins must be >= 2");
    if (hidden_dim_list().empty()) throw ConfigError("hidden_dims must name at least one layer");
    inv_mode();
    terminal_mode();
    activation_from_string(activation);
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

EnvSpec RunConfig::env_spec() const {
    EnvSpec spec = EnvSpec::make(scenario_from_string(scenario), n_agents);
    if (horizon > 0) spec.horizon = horizon;
    spec.arena_half_width = arena_half_width;
    spec.action_bound =
        action_bound > 0.0 ? action_bound : 3.0 * spec.arena_half_width / spec.horizon;
    spec.obs_radius = obs_radius;
    spec.reward_floor = reward_floor;
    spec.validate();
    return spec;
}

std::vector<int> RunConfig::hidden_dim_list() const {
    std::vector<int> dims;
    std::string token;
    std::istringstream in(hidden_dims);
    while (std::getline(in, token, ',')) {
        token = trim(token);
        if (token.empty()) continue;
        dims.push_back(static_cast<int>(parse_int("hidden_dims", token)));
        if (dims.back() <= 0) throw ConfigError("hidden_dims entries must be positive");
    }
    return dims;
}

double RunConfig::resolved_diversity_threshold() const {
    return diversity_threshold > 0.0 ? diversity_threshold : 0.1 * arena_half_width;
}

double RunConfig::resolved_validity_floor() const {
    return validity_floor >= 0.0 ? validity_floor : reward_floor + 0.05;
}

TerminalOutflowMode RunConfig::terminal_mode() const {
    return terminal_outflow_mode_from_string(terminal_outflow_mode);
}

InverseModel::Mode RunConfig::inv_mode() const {
    return inverse_mode_from_string(inverse_mode);
}

}  // namespace maflow
