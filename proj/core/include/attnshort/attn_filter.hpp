#pragma once

#include <string>
#include <vector>

#include "attnshort/dataset.hpp"
#include "attnshort/encoder.hpp"

namespace attnshort {

struct FilterSpec {
    int layer = 0;
    double keep_fraction = 1.0;  // in (0, 1]
    int min_keep = 1;
};

struct TokenScores {
    std::vector<float> values;  // one per content token, input order
};

enum class FilterDirection { kTop, kBottom };

/// Sum attention weights across heads at one layer.
Mat<float> aggregate_layer(const AttentionTensor& attn, int layer);

/// Column sums of the aggregated matrix (attention received per position,
/// counting every attender row), with CLS/SEP/PAD columns dropped so the
/// result aligns with the content tokens.
TokenScores token_scores(const Mat<float>& agg, const TokenizedSequence& seq);

/// Keep the k = max(min_keep, round(p*m)) highest-scoring content tokens in
/// their original order and re-wrap with CLS/SEP. Empty content passes
/// through and sets *empty_content when provided.
TokenizedSequence filter_sequence(const TokenizedSequence& seq, const TokenScores& scores,
                                  const FilterSpec& spec, bool* empty_content = nullptr);

/// Same selection rule but keeps the k lowest-scoring tokens.
TokenizedSequence bottom_filter_sequence(const TokenizedSequence& seq, const TokenScores& scores,
                                         const FilterSpec& spec, bool* empty_content = nullptr);

struct FilteredRecord {
    Record rec;  // shortened single-text record, label preserved
    int orig_tokens = 0;
    int kept_tokens = 0;
};

struct FilteredDataset {
    std::vector<FilteredRecord> records;
    int num_classes = 2;
    FilterSpec spec;

    LabeledDataset plain() const;
};

/// Shorten every record: forward -> aggregate layer -> column scores ->
/// top (or bottom) selection -> detokenize. Whether the model is trained or
/// freshly initialized is the caller's choice.
FilteredDataset filter_dataset(const Transformer<float>& model, const LabeledDataset& data,
                               const Vocab& vocab, const FilterSpec& spec,
                               FilterDirection dir = FilterDirection::kTop);

/// JSON-lines with the dataset fields plus kept_tokens, orig_tokens, layer,
/// keep_fraction per record.
void save_filtered(const FilteredDataset& fd, const std::string& path);

}  // namespace attnshort
