#include "vstain/nn/adam.hpp"

#include <cmath>

namespace vstain::nn {

void Adam::step(const std::vector<Param*>& params) {
    if (m_.size() != params.size()) {
        m_.assign(params.size(), {});
        v_.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->size(), 0.0f);
            v_[i].assign(params[i]->size(), 0.0f);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const auto step = static_cast<float>(lr_ / bc1);
    const auto inv_bc2 = static_cast<float>(1.0 / bc2);
    const auto eps = static_cast<float>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const float g = p.grad[j];
            m[j] = b1 * m[j] + (1.0f - b1) * g;
            v[j] = b2 * v[j] + (1.0f - b2) * g * g;
            p.value[j] -= step * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
        }
    }
}

} // namespace vstain::nn
