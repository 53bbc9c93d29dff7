#pragma once

#include <cstdint>
#include <vector>

#include "attnshort/dataset.hpp"
#include "attnshort/text.hpp"
#include "attnshort/transformer.hpp"
#include "attnshort/vocab.hpp"

namespace attnshort {

template <typename T>
struct AttentionResult {
    Mat<T> output;   // n x d
    Mat<T> weights;  // n x n post-softmax
};

/// Scaled dot-product attention with an explicit n x n allowed-position mask.
/// Row i is a softmax over the allowed columns; fully masked rows come back
/// as all-zero rows in both outputs.
template <typename T>
AttentionResult<T> attention(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                             const Mat<uint8_t>& allowed) {
    const int n = q.rows, d = q.cols;
    if (k.rows != n || v.rows != n || k.cols != d || v.cols != d)
        throw std::invalid_argument("attention: q, k, v must share shape");
    if (n == 0 || d == 0) throw std::invalid_argument("attention: empty input");
    if (allowed.rows != n || allowed.cols != n)
        throw std::invalid_argument("attention: mask must be n x n");
    if (!q.finite() || !k.finite() || !v.finite())
        throw std::invalid_argument("attention: non-finite input");

    AttentionResult<T> r{Mat<T>(n, d), Mat<T>(n, n)};
    const T inv_sqrt_d = T(1) / std::sqrt(T(d));
    std::vector<T> scores(n);
    for (int i = 0; i < n; ++i) {
        const T* qi = q.row(i);
        T mx = -std::numeric_limits<T>::infinity();
        int n_allowed = 0;
        for (int j = 0; j < n; ++j) {
            if (!allowed(i, j)) continue;
            const T* kj = k.row(j);
            T s = 0;
            for (int c = 0; c < d; ++c) s += qi[c] * kj[c];
            s *= inv_sqrt_d;
            scores[j] = s;
            mx = std::max(mx, s);
            ++n_allowed;
        }
        if (n_allowed == 0) continue;

        T denom = 0;
        T* ar = r.weights.row(i);
        for (int j = 0; j < n; ++j) {
            if (!allowed(i, j)) continue;
            const T e = std::exp(scores[j] - mx);
            ar[j] = e;
            denom += e;
        }
        const T inv = T(1) / denom;
        T* oi = r.output.row(i);
        for (int j = 0; j < n; ++j) {
            if (ar[j] == T(0)) continue;
            ar[j] *= inv;
            const T w = ar[j];
            const T* vj = v.row(j);
            for (int c = 0; c < d; ++c) oi[c] += w * vj[c];
        }
    }
    return r;
}

/// Valid-position form: valid[j] == 0 marks a PAD slot, which is excluded as
/// a key everywhere and whose own row is zeroed. Throws if nothing is valid.
template <typename T>
AttentionResult<T> attention(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                             const std::vector<uint8_t>& valid) {
    const int n = q.rows;
    if (static_cast<int>(valid.size()) != n)
        throw std::invalid_argument("attention: mask must have one entry per position");
    bool any = false;
    for (uint8_t m : valid) any = any || (m != 0);
    if (!any) throw std::invalid_argument("attention: all positions masked");
    Mat<uint8_t> allowed(n, n);
    for (int i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        for (int j = 0; j < n; ++j) allowed(i, j) = valid[j];
    }
    return attention(q, k, v, allowed);
}

struct BatchLogits {
    Mat<float> logits;                // batch x num_classes
    std::vector<AttentionTensor> attn;  // one per item
};

/// Run the classifier over a batch of tokenized sequences.
BatchLogits encoder_forward(const Transformer<float>& model,
                            const std::vector<TokenizedSequence>& batch);

/// Attention weights for a single sequence.
AttentionTensor encoder_attention(const Transformer<float>& model, const std::vector<int>& ids);

/// Final-layer hidden state for every position (post final layer norm), n x d.
Mat<float> token_vectors(const Transformer<float>& model, const std::vector<int>& ids);

int predict_label(const Transformer<float>& model, const TokenizedSequence& seq);

struct TrainConfig {
    int epochs = 5;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int warmup_steps = 0;  // linear ramp from 0 over this many optimizer steps
    uint64_t seed = 1;
    bool verbose = false;  // per-epoch line on stderr
};

struct EpochStats {
    double mean_loss = 0.0;
    double accuracy = 0.0;  // classifier: example accuracy; LM: next-token accuracy
};
using TrainHistory = std::vector<EpochStats>;

/// AdamW train loop over labeled records (pairs are joined with the field
/// separator before tokenizing). Shuffles per epoch with its own seeded rng.
/// Throws on non-finite loss.
TrainHistory train_classifier(Transformer<float>& model, const LabeledDataset& data,
                              const Vocab& vocab, const TrainConfig& tc);

double evaluate_classifier(const Transformer<float>& model, const LabeledDataset& data,
                           const Vocab& vocab);

struct GradCheckReport {
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
    int n_checked = 0;
};

/// Central-difference check of the analytic gradient on randomly sampled
/// parameters. Runs entirely in double. For kEncoder the objective is the
/// classifier cross-entropy on (ids, label); for kCausalLm it is the summed
/// next-token cross-entropy on ids (label ignored).
GradCheckReport grad_check(const Transformer<double>& model, const std::vector<int>& ids,
                           int label, double epsilon = 1e-5, int n_samples = 200,
                           uint64_t seed = 7);

}  // namespace attnshort
