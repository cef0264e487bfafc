#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tdd/tensor.hpp"

namespace tdd {

template <class S>
struct NamedParam {
    std::string name;
    Tensor<S> tensor;
};

// Adaptive-moment first-order optimizer state (one slot pair per parameter).
template <class S>
struct OptimState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<S>> m;
    std::vector<std::vector<S>> v;

    template <class Params>
    void init(const Params& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.tensor.values().size(), S(0));
            v.emplace_back(p.tensor.values().size(), S(0));
        }
        step = 0;
    }
};

// One update: m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2; bias-corrected;
// p <- p - lr * m_hat / (sqrt(v_hat) + eps). Reads gradients from the
// parameter tensors themselves.
template <class S>
void optim_step(std::vector<NamedParam<S>>& params, OptimState<S>& state) {
    if (state.m.size() != params.size())
        throw ArgumentError("argument error: optimizer state holds " + std::to_string(state.m.size()) +
                            " slots for " + std::to_string(params.size()) + " parameters");
    if (state.lr <= 0.0) throw ArgumentError("argument error: learning rate must be > 0");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& t = params[pi].tensor;
        const auto& g = t.grad();
        if (g.size() != t.values().size())
            throw ArgumentError("argument error: missing gradient for parameter " + params[pi].name);
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(static_cast<double>(g[i])))
                throw NumericError("numeric error: non-finite gradient in parameter " + params[pi].name);
            m[i] = static_cast<S>(state.beta1) * m[i] + static_cast<S>(1.0 - state.beta1) * g[i];
            v[i] = static_cast<S>(state.beta2) * v[i] + static_cast<S>(1.0 - state.beta2) * g[i] * g[i];
            const double mhat = static_cast<double>(m[i]) / bc1;
            const double vhat = static_cast<double>(v[i]) / bc2;
            t.values()[i] -= static_cast<S>(state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

} // namespace tdd
