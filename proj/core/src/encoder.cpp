#include "attnshort/encoder.hpp"

#include <cstdio>
#include <numeric>

#include "attnshort/optim.hpp"

namespace attnshort {

BatchLogits encoder_forward(const Transformer<float>& model,
                            const std::vector<TokenizedSequence>& batch) {
    BatchLogits out;
    out.logits = Mat<float>(static_cast<int>(batch.size()), model.config().num_classes);
    out.attn.reserve(batch.size());
    Transformer<float>::Cache c;
    for (size_t b = 0; b < batch.size(); ++b) {
        model.forward(batch[b].ids, c);
        const std::vector<float> lg = model.class_logits(c);
        std::copy(lg.begin(), lg.end(), out.logits.row(static_cast<int>(b)));
        out.attn.push_back(model.attention_tensor(c));
    }
    return out;
}

AttentionTensor encoder_attention(const Transformer<float>& model, const std::vector<int>& ids) {
    Transformer<float>::Cache c;
    model.forward(ids, c);
    return model.attention_tensor(c);
}

Mat<float> token_vectors(const Transformer<float>& model, const std::vector<int>& ids) {
    Transformer<float>::Cache c;
    model.forward(ids, c);
    return c.xf;
}

int predict_label(const Transformer<float>& model, const TokenizedSequence& seq) {
    Transformer<float>::Cache c;
    model.forward(seq.ids, c);
    const std::vector<float> lg = model.class_logits(c);
    return static_cast<int>(std::max_element(lg.begin(), lg.end()) - lg.begin());
}

static double lr_at(const TrainConfig& tc, int64_t step) {  // step is 1-based
    if (tc.warmup_steps > 0 && step <= tc.warmup_steps)
        return tc.learning_rate * static_cast<double>(step) / tc.warmup_steps;
    return tc.learning_rate;
}

TrainHistory train_classifier(Transformer<float>& model, const LabeledDataset& data,
                              const Vocab& vocab, const TrainConfig& tc) {
    if (data.records.empty()) throw std::invalid_argument("train_classifier: empty dataset");
    if (tc.epochs < 1 || tc.batch_size < 1)
        throw std::invalid_argument("train_classifier: epochs and batch_size must be >= 1");

    const size_t n = data.records.size();
    std::vector<std::vector<int>> ids(n);
    std::vector<int> labels(n);
    for (size_t i = 0; i < n; ++i) {
        const Record& rec = data.records[i];
        if (rec.label >= model.config().num_classes)
            throw std::invalid_argument("train_classifier: label exceeds model classes");
        ids[i] = tokenize(record_model_text(rec), vocab, model.config().max_len,
                          TokenizeMode::kClassifier)
                     .ids;
        labels[i] = rec.label;
    }

    AdamW opt(model, tc.beta1, tc.beta2, tc.adam_eps, tc.weight_decay);
    Rng shuffle_rng(tc.seed);
    Rng drop_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    Rng* drop = model.config().dropout > 0.0 ? &drop_rng : nullptr;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    TrainHistory hist;
    std::vector<Mat<float>> grads = model.make_grads();
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t correct = 0;
        for (size_t start = 0; start < n; start += tc.batch_size) {
            const size_t bn = std::min(static_cast<size_t>(tc.batch_size), n - start);
            for (auto& g : grads) g.zero();
            const float scale = 1.0f / static_cast<float>(bn);
            for (size_t b = 0; b < bn; ++b) {
                const size_t idx = order[start + b];
                int pred = -1;
                const float loss =
                    model.classifier_loss_grad(ids[idx], labels[idx], grads, scale, drop, &pred);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_classifier: non-finite loss (epoch " +
                                             std::to_string(epoch) + ", example " +
                                             std::to_string(idx) + ", loss " +
                                             std::to_string(loss) + ")");
                loss_sum += loss;
                if (pred == labels[idx]) ++correct;
            }
            opt.step(model, grads, lr_at(tc, opt.t + 1));
        }
        hist.push_back({loss_sum / static_cast<double>(n),
                        static_cast<double>(correct) / static_cast<double>(n)});
        if (tc.verbose)
            std::fprintf(stderr, "epoch %d/%d  loss %.4f  acc %.4f\n", epoch + 1, tc.epochs,
                         hist.back().mean_loss, hist.back().accuracy);
    }
    return hist;
}

double evaluate_classifier(const Transformer<float>& model, const LabeledDataset& data,
                           const Vocab& vocab) {
    if (data.records.empty()) throw std::invalid_argument("evaluate_classifier: empty dataset");
    size_t correct = 0;
    for (const Record& rec : data.records) {
        const TokenizedSequence seq = tokenize(record_model_text(rec), vocab,
                                               model.config().max_len, TokenizeMode::kClassifier);
        if (predict_label(model, seq) == rec.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.records.size());
}

GradCheckReport grad_check(const Transformer<double>& model_in, const std::vector<int>& ids,
                           int label, double epsilon, int n_samples, uint64_t seed) {
    Transformer<double> model = model_in;
    std::vector<Mat<double>> grads = model.make_grads();
    if (model.kind() == ModelKind::kEncoder)
        model.classifier_loss_grad(ids, label, grads, 1.0);
    else
        model.lm_loss_grad(ids, grads, 1.0);

    auto loss_at = [&]() -> double {
        return model.kind() == ModelKind::kEncoder ? model.classifier_loss(ids, label)
                                                   : model.lm_loss(ids);
    };

    const size_t total = model.param_count();
    Rng rng(seed);
    GradCheckReport rep;
    double rel_sum = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        size_t flat = rng.below(total);
        size_t ti = 0;
        while (flat >= model.named_params()[ti].value.count()) {
            flat -= model.named_params()[ti].value.count();
            ++ti;
        }
        double& theta = model.named_params()[ti].value.a[flat];
        const double orig = theta;
        theta = orig + epsilon;
        const double fp = loss_at();
        theta = orig - epsilon;
        const double fm = loss_at();
        theta = orig;

        const double fd = (fp - fm) / (2.0 * epsilon);
        const double g = grads[ti].a[flat];
        const double rel =
            std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-4});
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        rel_sum += rel;
        ++rep.n_checked;
    }
    rep.mean_rel_err = rep.n_checked > 0 ? rel_sum / rep.n_checked : 0.0;
    return rep;
}

}  // namespace attnshort
