#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "attnshort/transformer.hpp"

namespace attnshort {

/// AdamW with decoupled weight decay. Decay is multiplied by the current
/// learning rate, so lr == 0 leaves parameters bit-identical.
struct AdamW {
    double beta1, beta2, eps, weight_decay;
    int64_t t = 0;
    std::vector<Mat<float>> m, v;

    AdamW(const Transformer<float>& model, double b1, double b2, double e, double wd)
        : beta1(b1), beta2(b2), eps(e), weight_decay(wd) {
        m = model.make_grads();
        v = model.make_grads();
    }

    void step(Transformer<float>& model, const std::vector<Mat<float>>& grads, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        auto& params = model.named_params();
        for (size_t i = 0; i < params.size(); ++i) {
            float* p = params[i].value.a.data();
            const float* g = grads[i].a.data();
            float* mi = m[i].a.data();
            float* vi = v[i].a.data();
            const size_t count = params[i].value.count();
            for (size_t j = 0; j < count; ++j) {
                const double gj = g[j];
                const double mj = beta1 * mi[j] + (1.0 - beta1) * gj;
                const double vj = beta2 * vi[j] + (1.0 - beta2) * gj * gj;
                mi[j] = static_cast<float>(mj);
                vi[j] = static_cast<float>(vj);
                const double mhat = mj / bc1;
                const double vhat = vj / bc2;
                p[j] -= static_cast<float>(lr * (mhat / (std::sqrt(vhat) + eps) +
                                                 weight_decay * p[j]));
            }
        }
    }
};

}  // namespace attnshort
