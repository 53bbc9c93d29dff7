#include "attnshort/attn_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace attnshort {

Mat<float> aggregate_layer(const AttentionTensor& attn, int layer) {
    if (layer < 0 || layer >= attn.layers)
        throw std::out_of_range("aggregate_layer: layer out of range");
    Mat<float> agg(attn.n, attn.n);
    for (int h = 0; h < attn.heads; ++h)
        for (int i = 0; i < attn.n; ++i) {
            float* out = agg.row(i);
            for (int j = 0; j < attn.n; ++j) out[j] += attn.at(layer, h, i, j);
        }
    return agg;
}

TokenScores token_scores(const Mat<float>& agg, const TokenizedSequence& seq) {
    const int n = seq.length();
    if (agg.rows != n || agg.cols != n)
        throw std::invalid_argument("token_scores: matrix does not match sequence length");

    std::vector<float> col(n, 0.0f);
    for (int i = 0; i < n; ++i) {
        const float* r = agg.row(i);
        for (int j = 0; j < n; ++j) col[j] += r[j];
    }

    TokenScores ts;
    ts.values.reserve(seq.content_length());
    for (int pos = seq.content_begin; pos < seq.content_end; ++pos)
        ts.values.push_back(col[pos]);
    return ts;
}

static void check_spec(const FilterSpec& spec) {
    if (!(spec.keep_fraction > 0.0 && spec.keep_fraction <= 1.0))
        throw std::invalid_argument("filter_sequence: keep_fraction must be in (0, 1]");
    if (spec.min_keep < 1)
        throw std::invalid_argument("filter_sequence: min_keep must be >= 1");
}

static TokenizedSequence select_and_rewrap(const TokenizedSequence& seq,
                                           const TokenScores& scores, const FilterSpec& spec,
                                           bool keep_top, bool* empty_content) {
    check_spec(spec);
    const int m = seq.content_length();
    if (static_cast<int>(scores.values.size()) != m)
        throw std::invalid_argument("filter_sequence: scores do not align with content");
    if (empty_content) *empty_content = (m == 0);
    if (m == 0) return seq;  // nothing to select; [CLS, SEP] passes through

    int k = static_cast<int>(std::llround(spec.keep_fraction * m));
    k = std::max(k, spec.min_keep);
    k = std::min(k, m);

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores.values[a] != scores.values[b])
            return keep_top ? scores.values[a] > scores.values[b]
                            : scores.values[a] < scores.values[b];
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());

    TokenizedSequence out;
    out.ids.reserve(k + 2);
    out.source_offsets.reserve(k + 2);
    out.ids.push_back(seq.ids.front());  // CLS
    out.source_offsets.push_back(seq.source_offsets.front());
    for (int ci : order) {
        const int pos = seq.content_begin + ci;
        out.ids.push_back(seq.ids[pos]);
        out.source_offsets.push_back(seq.source_offsets[pos]);
    }
    out.ids.push_back(seq.ids[seq.content_end]);  // SEP
    out.source_offsets.push_back(seq.source_offsets[seq.content_end]);
    out.content_begin = 1;
    out.content_end = k + 1;
    return out;
}

TokenizedSequence filter_sequence(const TokenizedSequence& seq, const TokenScores& scores,
                                  const FilterSpec& spec, bool* empty_content) {
    return select_and_rewrap(seq, scores, spec, true, empty_content);
}

TokenizedSequence bottom_filter_sequence(const TokenizedSequence& seq, const TokenScores& scores,
                                         const FilterSpec& spec, bool* empty_content) {
    return select_and_rewrap(seq, scores, spec, false, empty_content);
}

LabeledDataset FilteredDataset::plain() const {
    LabeledDataset out;
    out.num_classes = num_classes;
    out.records.reserve(records.size());
    for (const FilteredRecord& fr : records) out.records.push_back(fr.rec);
    return out;
}

FilteredDataset filter_dataset(const Transformer<float>& model, const LabeledDataset& data,
                               const Vocab& vocab, const FilterSpec& spec, FilterDirection dir) {
    check_spec(spec);
    if (spec.layer < 0 || spec.layer >= model.config().num_layers)
        throw std::out_of_range("filter_dataset: layer out of range");

    FilteredDataset out;
    out.num_classes = data.num_classes;
    out.spec = spec;
    out.records.reserve(data.records.size());
    for (const Record& rec : data.records) {
        const TokenizedSequence seq = tokenize(record_model_text(rec), vocab,
                                               model.config().max_len, TokenizeMode::kClassifier);
        const AttentionTensor attn = encoder_attention(model, seq.ids);
        const Mat<float> agg = aggregate_layer(attn, spec.layer);
        const TokenScores scores = token_scores(agg, seq);
        const TokenizedSequence kept = dir == FilterDirection::kTop
                                           ? filter_sequence(seq, scores, spec)
                                           : bottom_filter_sequence(seq, scores, spec);
        FilteredRecord fr;
        fr.rec.text = detokenize(kept, vocab);
        fr.rec.label = rec.label;
        fr.orig_tokens = seq.content_length();
        fr.kept_tokens = kept.content_length();
        out.records.push_back(std::move(fr));
    }
    return out;
}

void save_filtered(const FilteredDataset& fd, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_filtered: cannot open " + path);
    for (const FilteredRecord& fr : fd.records) {
        nlohmann::json j;
        j["text"] = fr.rec.text;
        j["label"] = fr.rec.label;
        j["kept_tokens"] = fr.kept_tokens;
        j["orig_tokens"] = fr.orig_tokens;
        j["layer"] = fd.spec.layer;
        j["keep_fraction"] = fd.spec.keep_fraction;
        f << j.dump() << "\n";
    }
    if (!f) throw std::runtime_error("save_filtered: write failed for " + path);
}

}  // namespace attnshort
