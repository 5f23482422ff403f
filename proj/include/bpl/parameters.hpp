#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bpl {

// Named dense parameter tensor with a gradient buffer of the same shape.
// Loss functions accumulate into gradient; the optimizer consumes and clears
// it. Row-major layout throughout.
struct ParameterBlock {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> gradient;

    ParameterBlock() = default;
    ParameterBlock(std::string block_name, std::vector<std::size_t> dims);

    std::size_t size() const { return values.size(); }
    void zero_gradient();
};

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

// Per-block Adam state with bias correction and decoupled weight decay.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t size, AdamConfig config);

    // One update from block.gradient; clears the gradient. Throws on a
    // non-finite gradient entry, naming the block.
    void step(ParameterBlock& block);

    std::int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<double> first_moment_;
    std::vector<double> second_moment_;
    std::int64_t step_count_ = 0;
};

// Convenience bundle: one AdamState per block, stepped together.
class Adam {
public:
    Adam() = default;
    Adam(const std::vector<ParameterBlock*>& blocks, AdamConfig config);

    void step();
    std::int64_t step_count() const;

private:
    std::vector<ParameterBlock*> blocks_;
    std::vector<AdamState> states_;
};

}  // namespace bpl
