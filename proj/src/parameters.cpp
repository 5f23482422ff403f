#include "bpl/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpl {

ParameterBlock::ParameterBlock(std::string block_name, std::vector<std::size_t> dims)
    : name(std::move(block_name)), shape(std::move(dims)) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    values.assign(n, 0.0);
    gradient.assign(n, 0.0);
}

void ParameterBlock::zero_gradient() { std::fill(gradient.begin(), gradient.end(), 0.0); }

AdamState::AdamState(std::size_t size, AdamConfig config)
    : config_(config), first_moment_(size, 0.0), second_moment_(size, 0.0) {}

void AdamState::step(ParameterBlock& block) {
    if (block.size() != first_moment_.size()) {
        throw std::runtime_error("optimizer state size mismatch for block " + block.name);
    }
    ++step_count_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < block.size(); ++i) {
        const double g = block.gradient[i];
        if (!std::isfinite(g)) {
            throw std::runtime_error("non-finite gradient in block " + block.name);
        }
        first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * g;
        second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * g * g;
        const double m_hat = first_moment_[i] / bc1;
        const double v_hat = second_moment_[i] / bc2;
        block.values[i] -= config_.learning_rate *
                           (m_hat / (std::sqrt(v_hat) + config_.epsilon) +
                            config_.weight_decay * block.values[i]);
    }
    block.zero_gradient();
}

Adam::Adam(const std::vector<ParameterBlock*>& blocks, AdamConfig config) : blocks_(blocks) {
    states_.reserve(blocks_.size());
    for (ParameterBlock* b : blocks_) states_.emplace_back(b->size(), config);
}

void Adam::step() {
    for (std::size_t k = 0; k < blocks_.size(); ++k) states_[k].step(*blocks_[k]);
}

std::int64_t Adam::step_count() const { return states_.empty() ? 0 : states_[0].step_count(); }

}  // namespace bpl
