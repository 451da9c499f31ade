#include "divrank/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "divrank/error.hpp"

namespace divrank {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    T v{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("config: bad value '" + text + "' for " + key);
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    throw ConfigError("config: bad boolean '" + text + "' for " + key);
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}
std::string fmt(long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string join(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

struct Field {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field number_field(const std::string& key, T ExperimentConfig::*member) {
    return {[key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
            [member](const ExperimentConfig& c) { return fmt(c.*member); }};
}

Field bool_field(const std::string& key, bool ExperimentConfig::*member) {
    return {[key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
            [member](const ExperimentConfig& c) { return fmt(c.*member); }};
}

template <typename T, typename S>
Field nested_field(const std::string& key, S ExperimentConfig::*outer, T S::*member) {
    return {[key, outer, member](ExperimentConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool(key, v);
                else (c.*outer).*member = parse_number<T>(key, v);
            },
            [outer, member](const ExperimentConfig& c) { return fmt((c.*outer).*member); }};
}

const std::map<std::string, Field>& fields() {
    using C = ExperimentConfig;
    static const std::map<std::string, Field> table = {
        {"seed", number_field("seed", &C::seed)},
        {"gen.queries", nested_field("gen.queries", &C::generator, &GeneratorConfig::queries)},
        {"gen.test_queries", nested_field("gen.test_queries", &C::generator, &GeneratorConfig::test_queries)},
        {"gen.dim", nested_field("gen.dim", &C::generator, &GeneratorConfig::dim)},
        {"gen.mean_categories", nested_field("gen.mean_categories", &C::generator, &GeneratorConfig::mean_categories)},
        {"gen.zipf_s", nested_field("gen.zipf_s", &C::generator, &GeneratorConfig::zipf_s)},
        {"gen.sigma", nested_field("gen.sigma", &C::generator, &GeneratorConfig::sigma)},
        {"gen.relevant_per_query",
         nested_field("gen.relevant_per_query", &C::generator, &GeneratorConfig::relevant_per_query)},
        {"gen.irrelevant_per_query",
         nested_field("gen.irrelevant_per_query", &C::generator, &GeneratorConfig::irrelevant_per_query)},
        {"gen.category_spread", nested_field("gen.category_spread", &C::generator, &GeneratorConfig::category_spread)},
        {"gen.irrelevant_affinity",
         nested_field("gen.irrelevant_affinity", &C::generator, &GeneratorConfig::irrelevant_affinity)},
        {"gen.category_reuse", nested_field("gen.category_reuse", &C::generator, &GeneratorConfig::category_reuse)},
        {"gen.global_categories",
         nested_field("gen.global_categories", &C::generator, &GeneratorConfig::global_categories)},
        {"tau", number_field("tau", &C::tau)},
        {"alpha", number_field("alpha", &C::alpha)},
        {"beta", number_field("beta", &C::beta)},
        {"epsilon", number_field("epsilon", &C::epsilon)},
        {"lr_g", number_field("lr_g", &C::lr_g)},
        {"scl_epochs", number_field("scl_epochs", &C::scl_epochs)},
        {"scl_max_steps", number_field("scl_max_steps", &C::scl_max_steps)},
        {"irrelevant_cap", number_field("irrelevant_cap", &C::irrelevant_cap)},
        {"pair_prototype_relevant", bool_field("pair_prototype_relevant", &C::pair_prototype_relevant)},
        {"pair_prototype_irrelevant", bool_field("pair_prototype_irrelevant", &C::pair_prototype_irrelevant)},
        {"ema_swap_convention", bool_field("ema_swap_convention", &C::ema_swap_convention)},
        {"L", number_field("L", &C::layers)},
        {"heads", number_field("heads", &C::heads)},
        {"ffn_dim", number_field("ffn_dim", &C::ffn_dim)},
        {"N", number_field("N", &C::budget)},
        {"lr_phi", number_field("lr_phi", &C::lr_phi)},
        {"ttc_epochs", number_field("ttc_epochs", &C::ttc_epochs)},
        {"ttc_max_steps", number_field("ttc_max_steps", &C::ttc_max_steps)},
        {"p_q", nested_field("p_q", &C::augmentation, &AugmentationConfig::p_q)},
        {"p_v", nested_field("p_v", &C::augmentation, &AugmentationConfig::p_v)},
        {"p_d", nested_field("p_d", &C::augmentation, &AugmentationConfig::p_d)},
        {"p_c", nested_field("p_c", &C::augmentation, &AugmentationConfig::p_c)},
        {"da", nested_field("da", &C::augmentation, &AugmentationConfig::enabled)},
        {"batch", number_field("batch", &C::batch)},
        {"X", number_field("X", &C::X)},
        {"k", {[](C& c, const std::string& v) { c.ks = parse_int_list(v); }, [](const C& c) { return join(c.ks); }}},
        {"mmr_lambda", number_field("mmr_lambda", &C::mmr_lambda)},
        {"dbscan_eps", number_field("dbscan_eps", &C::dbscan_eps)},
        {"dbscan_min_pts", number_field("dbscan_min_pts", &C::dbscan_min_pts)},
        {"dbscan_sim_threshold", number_field("dbscan_sim_threshold", &C::dbscan_sim_threshold)},
        {"skip_scl", bool_field("skip_scl", &C::skip_scl)},
        {"skip_ttc", bool_field("skip_ttc", &C::skip_ttc)},
        {"threads", number_field("threads", &C::threads)},
    };
    return table;
}

}  // namespace

void ExperimentConfig::validate() const {
    generator.validate();
    augmentation.validate();
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (!(lr_g > 0.0) || !(lr_phi > 0.0)) throw ConfigError("learning rates must be > 0");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (scl_epochs < 0 || ttc_epochs < 0) throw ConfigError("epochs must be >= 0");
    if (scl_max_steps < 0 || ttc_max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (irrelevant_cap < 0) throw ConfigError("irrelevant_cap must be >= 0");
    if (layers < 1) throw ConfigError("L must be >= 1");
    if (heads < 1) throw ConfigError("heads must be >= 1");
    if (ffn_dim < 0) throw ConfigError("ffn_dim must be >= 0");
    if (budget < 1) throw ConfigError("N must be >= 1");
    if (ks.empty()) throw ConfigError("k list is empty");
    for (int k : ks) post_process_config(k).validate();
    if (!(mmr_lambda >= 0.0 && mmr_lambda <= 1.0)) throw ConfigError("mmr_lambda must lie in [0, 1]");
    cluster_config().validate();
    if (threads < 0) throw ConfigError("threads must be >= 0");
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const auto& table = fields();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(*this, value);
}

void ExperimentConfig::apply(const ConfigMap& values) {
    for (const auto& [k, v] : values) set(k, v);
}

ConfigMap ExperimentConfig::to_map() const {
    ConfigMap out;
    for (const auto& [k, f] : fields()) out[k] = f.get(*this);
    return out;
}

std::vector<std::string> ExperimentConfig::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
}

SclTrainConfig ExperimentConfig::scl_config() const {
    SclTrainConfig c;
    c.tau = tau;
    c.alpha = alpha;
    c.lr = lr_g;
    c.batch = batch;
    c.epochs = scl_epochs;
    c.max_steps = scl_max_steps;
    c.irrelevant_cap = irrelevant_cap;
    c.pairs.prototype_relevant = pair_prototype_relevant;
    c.pairs.prototype_irrelevant = pair_prototype_irrelevant;
    c.ema_swap_convention = ema_swap_convention;
    c.epsilon = epsilon;
    c.seed = seed;
    return c;
}

TtcTrainConfig ExperimentConfig::ttc_config() const {
    TtcTrainConfig c;
    c.lr = lr_phi;
    c.batch = batch;
    c.epochs = ttc_epochs;
    c.max_steps = ttc_max_steps;
    c.seed = seed;
    return c;
}

TransformerConfig ExperimentConfig::transformer_config(int dim) const {
    TransformerConfig c;
    c.dim = dim;
    c.layers = layers;
    c.heads = heads;
    c.ffn_dim = ffn_dim > 0 ? ffn_dim : 2 * dim;
    return c;
}

PostProcessConfig ExperimentConfig::post_process_config(int k) const {
    PostProcessConfig c;
    c.X = X;
    c.k = k;
    return c;
}

ClusterConfig ExperimentConfig::cluster_config() const {
    ClusterConfig c;
    c.eps = dbscan_eps;
    c.min_pts = dbscan_min_pts;
    c.sim_threshold = dbscan_sim_threshold;
    return c;
}

int ExperimentConfig::max_k() const { return *std::max_element(ks.begin(), ks.end()); }

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = trim(t.substr(eq + 1));
    }
    return out;
}

ConfigMap read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string format_config(const ConfigMap& values) {
    std::string out;
    for (const auto& [k, v] : values) out += k + " = " + v + "\n";
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<int>("list", item));
    if (out.empty()) throw ConfigError("empty list '" + text + "'");
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<double>("list", item));
    if (out.empty()) throw ConfigError("empty list '" + text + "'");
    return out;
}

}  // namespace divrank
