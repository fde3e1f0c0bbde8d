#include "hdt/optim.hpp"

#include <cmath>

namespace hdt {

Adam::Adam(ParamGroup& params, double lr, double beta1, double beta2, double eps)
    : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(lr > 0.0)) throw ParameterError("adam: learning rate must be positive");
    m_.reserve(params.all().size());
    v_.reserve(params.all().size());
    for (const auto& p : params.all()) {
        m_.emplace_back(p.value.data().size(), 0.0);
        v_.emplace_back(p.value.data().size(), 0.0);
    }
}

const std::string& Adam::slot_name(std::size_t i) const { return params_->all()[i].name; }

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_->all().size(); ++i) {
        auto& p = params_->all()[i];
        if (!p.value.has_grad()) continue;  // unused this step; moments stay put
        auto g = p.value.grad();
        auto x = p.value.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (!std::isfinite(g[j])) {
                throw TrainingError("non-finite gradient in parameter '" + p.name + "'");
            }
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            x[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_->all()) p.value.zero_grad();
}

}  // namespace hdt
