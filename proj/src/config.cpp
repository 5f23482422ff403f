#include "bpl/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bpl/types.hpp"

namespace bpl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("malformed config line " + std::to_string(lineno) +
                                     ": expected key=value");
        }
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    if (key.empty()) throw std::runtime_error("empty config key");
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw std::runtime_error("missing config key: " + key);
    }
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + " is not a number: " + v);
    }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + " is not an integer: " + v);
    }
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    std::int64_t v = get_int(key);
    if (v < 0) throw std::runtime_error("config key " + key + " must be non-negative");
    return static_cast<std::uint64_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config key " + key + " is not a boolean: " + v);
}

std::string KeyValueConfig::echo() const {
    std::ostringstream out;
    for (const std::string& k : order_) {
        out << k << "=" << values_.at(k) << "\n";
    }
    return out.str();
}

void KeyValueConfig::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config file: " + path.string());
    out << echo();
}

std::string to_string(CombinationMode mode) {
    return mode == CombinationMode::soft ? "soft" : "hard";
}

std::string to_string(FilterMode mode) {
    return mode == FilterMode::temporal_consistency ? "temporal_consistency"
                                                    : "max_probability";
}

CombinationMode parse_combination_mode(const std::string& text) {
    if (text == "soft") return CombinationMode::soft;
    if (text == "hard") return CombinationMode::hard;
    throw std::runtime_error("unknown combination_mode: " + text);
}

FilterMode parse_filter_mode(const std::string& text) {
    if (text == "temporal_consistency") return FilterMode::temporal_consistency;
    if (text == "max_probability") return FilterMode::max_probability;
    throw std::runtime_error("unknown filter_mode: " + text);
}

TrainingConfig TrainingConfig::from_config(const KeyValueConfig& cfg) {
    TrainingConfig c;
    c.alpha = cfg.get_double("alpha", c.alpha);
    c.beta = cfg.get_double("beta", c.beta);
    c.lambda = cfg.get_double("lambda", c.lambda);
    c.tau = cfg.get_double("tau", c.tau);
    c.x_percent = cfg.get_double("x_percent", c.x_percent);
    c.m_threshold = cfg.get_double("m_threshold", c.m_threshold);
    c.combination_mode =
        parse_combination_mode(cfg.get_string("combination_mode", to_string(c.combination_mode)));
    c.filter_mode = parse_filter_mode(cfg.get_string("filter_mode", to_string(c.filter_mode)));
    c.embedding_dim = static_cast<int>(cfg.get_int("embedding_dim", c.embedding_dim));
    c.learning_rate = cfg.get_double("learning_rate", c.learning_rate);
    c.weight_decay = cfg.get_double("weight_decay", c.weight_decay);
    c.teacher_weight_decay = cfg.get_double("teacher_weight_decay", c.teacher_weight_decay);
    c.disc_learning_rate = cfg.get_double("disc_learning_rate", c.learning_rate);
    c.disc_layers = static_cast<int>(cfg.get_int("disc_layers", c.disc_layers));
    c.batch_size = static_cast<int>(cfg.get_int("batch_size", c.batch_size));
    c.epochs = static_cast<int>(cfg.get_int("epochs", c.epochs));
    c.patience = static_cast<int>(cfg.get_int("patience", c.patience));
    c.warmup_epochs = static_cast<int>(cfg.get_int("warmup_epochs", c.warmup_epochs));
    c.seed = cfg.get_uint("seed", c.seed);
    c.enumeration_cap = cfg.get_uint("enumeration_cap", c.enumeration_cap);
    c.s0_multiple = cfg.get_double("s0_multiple", c.s0_multiple);
    c.val_fraction = cfg.get_double("val_fraction", c.val_fraction);
    c.test_fraction = cfg.get_double("test_fraction", c.test_fraction);
    c.propensity_floor = cfg.get_double("propensity_floor", c.propensity_floor);

    c.affinity.embedding_dim =
        static_cast<int>(cfg.get_int("affinity_embedding_dim", c.affinity.embedding_dim));
    c.affinity.layers = static_cast<int>(cfg.get_int("affinity_layers", c.affinity.layers));
    c.affinity.hidden_dim =
        static_cast<int>(cfg.get_int("affinity_hidden_dim", c.affinity.embedding_dim));
    c.affinity.learning_rate = cfg.get_double("affinity_learning_rate", c.affinity.learning_rate);
    c.affinity.weight_decay = cfg.get_double("affinity_weight_decay", c.affinity.weight_decay);
    c.affinity.epochs = static_cast<int>(cfg.get_int("affinity_epochs", c.affinity.epochs));
    c.affinity.batch_size =
        static_cast<int>(cfg.get_int("affinity_batch_size", c.affinity.batch_size));
    c.affinity.negative_ratio = cfg.get_double("affinity_negative_ratio", c.affinity.negative_ratio);
    c.affinity.holdout_fraction =
        cfg.get_double("affinity_holdout_fraction", c.affinity.holdout_fraction);
    c.affinity.patience = static_cast<int>(cfg.get_int("affinity_patience", c.affinity.patience));
    c.affinity.init_scale = cfg.get_double("affinity_init_scale", c.affinity.init_scale);
    c.affinity.seed = cfg.get_uint("affinity_seed", mix_seed(c.seed, stream::affinity));

    c.validate();
    return c;
}

KeyValueConfig TrainingConfig::to_config() const {
    KeyValueConfig cfg;
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    cfg.set("alpha", num(alpha));
    cfg.set("beta", num(beta));
    cfg.set("lambda", num(lambda));
    cfg.set("tau", num(tau));
    cfg.set("x_percent", num(x_percent));
    cfg.set("m_threshold", num(m_threshold));
    cfg.set("combination_mode", to_string(combination_mode));
    cfg.set("filter_mode", to_string(filter_mode));
    cfg.set("embedding_dim", std::to_string(embedding_dim));
    cfg.set("learning_rate", num(learning_rate));
    cfg.set("weight_decay", num(weight_decay));
    cfg.set("teacher_weight_decay", num(teacher_weight_decay));
    cfg.set("disc_learning_rate", num(disc_learning_rate));
    cfg.set("disc_layers", std::to_string(disc_layers));
    cfg.set("batch_size", std::to_string(batch_size));
    cfg.set("epochs", std::to_string(epochs));
    cfg.set("patience", std::to_string(patience));
    cfg.set("warmup_epochs", std::to_string(warmup_epochs));
    cfg.set("seed", std::to_string(seed));
    cfg.set("enumeration_cap", std::to_string(enumeration_cap));
    cfg.set("s0_multiple", num(s0_multiple));
    cfg.set("val_fraction", num(val_fraction));
    cfg.set("test_fraction", num(test_fraction));
    cfg.set("propensity_floor", num(propensity_floor));
    cfg.set("affinity_embedding_dim", std::to_string(affinity.embedding_dim));
    cfg.set("affinity_layers", std::to_string(affinity.layers));
    cfg.set("affinity_hidden_dim", std::to_string(affinity.hidden_dim));
    cfg.set("affinity_learning_rate", num(affinity.learning_rate));
    cfg.set("affinity_weight_decay", num(affinity.weight_decay));
    cfg.set("affinity_epochs", std::to_string(affinity.epochs));
    cfg.set("affinity_batch_size", std::to_string(affinity.batch_size));
    cfg.set("affinity_negative_ratio", num(affinity.negative_ratio));
    cfg.set("affinity_holdout_fraction", num(affinity.holdout_fraction));
    cfg.set("affinity_patience", std::to_string(affinity.patience));
    cfg.set("affinity_init_scale", num(affinity.init_scale));
    cfg.set("affinity_seed", std::to_string(affinity.seed));
    return cfg;
}

void TrainingConfig::validate() const {
    if (alpha < 0 || beta < 0 || lambda < 0) {
        throw std::runtime_error("alpha, beta and lambda must be non-negative");
    }
    if (tau < 0.0 || tau > 1.0) throw std::runtime_error("tau must lie in [0,1]");
    if (x_percent <= 0.0 || x_percent >= 100.0) {
        throw std::runtime_error("x_percent must lie in (0,100)");
    }
    if (m_threshold <= 0.0 || m_threshold >= 1.0) {
        throw std::runtime_error("m_threshold must lie in (0,1)");
    }
    if (embedding_dim <= 0) throw std::runtime_error("embedding_dim must be positive");
    if (batch_size <= 0) throw std::runtime_error("batch_size must be positive");
    if (epochs <= 0) throw std::runtime_error("epochs must be positive");
    if (warmup_epochs < 0) throw std::runtime_error("warmup_epochs must be non-negative");
    if (s0_multiple <= 0) throw std::runtime_error("s0_multiple must be positive");
    if (propensity_floor <= 0 || propensity_floor > 1) {
        throw std::runtime_error("propensity_floor must lie in (0,1]");
    }
}

}  // namespace bpl
