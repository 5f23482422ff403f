#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace bpl {

// Flat key=value configuration: one "key=value" per line, '#' comments,
// blank lines ignored. Keys keep first-seen order so an echo diff is stable.
class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::filesystem::path& path);
    static KeyValueConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    // Getters without a default throw "missing config key: <key>".
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    std::string echo() const;
    void write(const std::filesystem::path& path) const;

    const std::vector<std::string>& keys() const { return order_; }

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::string> values_;
};

enum class CombinationMode { soft, hard };
enum class FilterMode { temporal_consistency, max_probability };

std::string to_string(CombinationMode mode);
std::string to_string(FilterMode mode);
CombinationMode parse_combination_mode(const std::string& text);
FilterMode parse_filter_mode(const std::string& text);

// Hyperparameters of the affinity estimator.
struct AffinityConfig {
    int embedding_dim = 16;
    int layers = 1;       // 1 = affine head; >1 adds tanh hidden layers
    int hidden_dim = 16;  // width of hidden layers when layers > 1
    double learning_rate = 0.01;
    double weight_decay = 1e-6;
    int epochs = 40;
    int batch_size = 256;
    double negative_ratio = 1.0;    // negatives per positive within a batch
    double holdout_fraction = 0.1;  // of positives, for early stopping
    int patience = 5;
    double init_scale = 0.01;
    std::uint64_t seed = 1;
};

// Everything the training pipelines consume. Parsed from a KeyValueConfig
// with defaults applied; echo() writes back every effective value.
struct TrainingConfig {
    // loss weights
    double alpha = 0.05;  // weight of the alignment loss
    double beta = 0.5;    // weight of the distillation loss
    double lambda = 1.0;  // teacher-MSE weight inside the distillation term
    double tau = 0.999;   // temporal-ensemble discount
    double x_percent = 5.0;
    double m_threshold = 0.3;  // max-probability filter threshold
    CombinationMode combination_mode = CombinationMode::hard;
    FilterMode filter_mode = FilterMode::temporal_consistency;

    // model / optimization
    int embedding_dim = 16;
    double learning_rate = 0.01;
    double weight_decay = 1e-6;
    double teacher_weight_decay = 1e-6;  // the frozen teacher trains with its own decay
    double disc_learning_rate = 0.01;
    int disc_layers = 1;
    int batch_size = 256;
    int epochs = 120;
    int patience = 10;
    int warmup_epochs = 5;
    std::uint64_t seed = 1;

    // space handling
    std::uint64_t enumeration_cap = 10'000'000;
    double s0_multiple = 1.0;

    // data splitting (used when a validation split must be carved out)
    double val_fraction = 0.1;
    double test_fraction = 0.1;

    // affinity-as-propensity ablation
    double propensity_floor = 0.1;

    AffinityConfig affinity;

    static TrainingConfig from_config(const KeyValueConfig& cfg);
    KeyValueConfig to_config() const;
    void validate() const;
};

}  // namespace bpl
