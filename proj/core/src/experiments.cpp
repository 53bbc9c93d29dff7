#include "attnshort/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "attnshort/csv.hpp"
#include "attnshort/sent_filter.hpp"

namespace attnshort {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void emit_curves(const std::vector<CurvePoint>& points, const std::string& path) {
    if (points.empty()) throw std::invalid_argument("emit_curves: no points");
    std::vector<CurvePoint> sorted = points;
    std::stable_sort(sorted.begin(), sorted.end(), [](const CurvePoint& a, const CurvePoint& b) {
        if (a.x != b.x) return a.x < b.x;
        return a.seed < b.seed;
    });
    std::ofstream f(path);
    if (!f) throw std::runtime_error("emit_curves: cannot open " + path);
    f << "x,accuracy,n_eval,seed\n";
    for (const CurvePoint& p : sorted)
        f << format_double(p.x) << ',' << format_double(p.accuracy) << ',' << p.n_eval << ','
          << p.seed << "\n";
    if (!f) throw std::runtime_error("emit_curves: write failed for " + path);
}

Vocab dataset_vocab(const LabeledDataset& data, int max_size,
                    const std::vector<std::string>& extra_specials) {
    std::vector<std::string> corpus;
    corpus.reserve(data.records.size());
    for (const Record& r : data.records) corpus.push_back(record_model_text(r));
    return build_vocab(corpus, max_size, extra_specials);
}

namespace {

LabeledDataset source_data(const ExperimentConfig& cfg, uint64_t seed) {
    if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
    SyntheticSpec sp = cfg.synth;
    sp.seed = seed;
    return make_synthetic(sp).data;
}

// fresh classifier with per-seed init/shuffle seeds; identical recipe for
// the full-length and filtered training jobs so runs differ only in data
Transformer<float> train_fresh(const ExperimentConfig& cfg, const LabeledDataset& train_data,
                               const Vocab& vocab, uint64_t seed) {
    EncoderConfig ec = cfg.encoder;
    ec.vocab_size = vocab.size();
    ec.num_classes = train_data.num_classes;
    ec.seed = seed + 1;
    Transformer<float> model(ec, ModelKind::kEncoder);
    TrainConfig tc = cfg.train;
    tc.seed = seed + 2;
    train_classifier(model, train_data, vocab, tc);
    return model;
}

}  // namespace

std::vector<CurvePoint> run_layer_sweep(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("run_layer_sweep: no seeds");
    std::vector<CurvePoint> points;
    for (uint64_t seed : cfg.seeds) {
        const LabeledDataset all = source_data(cfg, seed);
        auto [train_data, eval_data] = split_dataset(all, cfg.eval_fraction);
        const Vocab vocab = dataset_vocab(all, cfg.max_vocab);
        const Transformer<float> model = train_fresh(cfg, train_data, vocab, seed);
        for (int layer = 0; layer < cfg.encoder.num_layers; ++layer) {
            FilterSpec fs = cfg.filter;
            fs.layer = layer;
            const FilteredDataset fd = filter_dataset(model, eval_data, vocab, fs);
            const double acc = evaluate_classifier(model, fd.plain(), vocab);
            points.push_back({static_cast<double>(layer), acc,
                              static_cast<int>(eval_data.size()), seed});
        }
    }
    return points;
}

std::vector<TopBottomResult> run_top_bottom(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("run_top_bottom: no seeds");
    std::vector<TopBottomResult> results;
    for (uint64_t seed : cfg.seeds) {
        const LabeledDataset all = source_data(cfg, seed);
        auto [train_data, eval_data] = split_dataset(all, cfg.eval_fraction);
        const Vocab vocab = dataset_vocab(all, cfg.max_vocab);

        const Transformer<float> full = train_fresh(cfg, train_data, vocab, seed);
        const LabeledDataset top_data =
            filter_dataset(full, train_data, vocab, cfg.filter, FilterDirection::kTop).plain();
        const LabeledDataset bottom_data =
            filter_dataset(full, train_data, vocab, cfg.filter, FilterDirection::kBottom).plain();
        const Transformer<float> top = train_fresh(cfg, top_data, vocab, seed);
        const Transformer<float> bottom = train_fresh(cfg, bottom_data, vocab, seed);

        TopBottomResult r;
        r.seed = seed;
        r.n_eval = static_cast<int>(eval_data.size());
        r.full = evaluate_classifier(full, eval_data, vocab);
        r.top = evaluate_classifier(top, eval_data, vocab);
        r.bottom = evaluate_classifier(bottom, eval_data, vocab);
        results.push_back(r);
    }
    return results;
}

ReductionCurves run_reduction_curve(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("run_reduction_curve: no seeds");
    if (cfg.fractions.empty()) throw std::invalid_argument("run_reduction_curve: no fractions");
    ReductionCurves curves;
    for (uint64_t seed : cfg.seeds) {
        const LabeledDataset all = source_data(cfg, seed);
        auto [train_data, eval_data] = split_dataset(all, cfg.eval_fraction);
        const Vocab vocab = dataset_vocab(all, cfg.max_vocab);
        const Transformer<float> full = train_fresh(cfg, train_data, vocab, seed);
        const int n_eval = static_cast<int>(eval_data.size());

        for (double p : cfg.fractions) {
            FilterSpec fs = cfg.filter;
            fs.keep_fraction = p;
            const LabeledDataset attn_train =
                filter_dataset(full, train_data, vocab, fs).plain();
            const Transformer<float> attn_model = train_fresh(cfg, attn_train, vocab, seed);
            curves.attention.push_back(
                {p, evaluate_classifier(attn_model, eval_data, vocab), n_eval, seed});

            const double target = 1.0 - p;
            LabeledDataset sim_train =
                target > 0.0
                    ? similarity_filter_dataset(full, train_data, vocab, target).plain()
                    : train_data;
            const Transformer<float> sim_model = train_fresh(cfg, sim_train, vocab, seed);
            curves.similarity.push_back(
                {p, evaluate_classifier(sim_model, eval_data, vocab), n_eval, seed});
        }
    }
    return curves;
}

}  // namespace attnshort
