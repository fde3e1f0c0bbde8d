#pragma once

#include <vector>

#include "hdt/nn.hpp"

namespace hdt {

// Adam with bias correction. First- and second-moment state lives here per
// parameter (same order as the group) and round-trips through checkpoints.
class Adam {
public:
    explicit Adam(ParamGroup& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    // Applies one update from the accumulated grads, then leaves grads as-is
    // (call zero_grad to clear). Throws TrainingError on a non-finite
    // gradient, naming the parameter.
    void step();
    void zero_grad();

    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) { t_ = t; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    std::size_t slot_count() const { return m_.size(); }
    std::vector<double>& moment1(std::size_t i) { return m_[i]; }
    std::vector<double>& moment2(std::size_t i) { return v_[i]; }
    const std::vector<double>& moment1(std::size_t i) const { return m_[i]; }
    const std::vector<double>& moment2(std::size_t i) const { return v_[i]; }
    const std::string& slot_name(std::size_t i) const;

private:
    ParamGroup* params_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace hdt
