#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attnshort/attn_filter.hpp"
#include "attnshort/dataset.hpp"
#include "attnshort/encoder.hpp"

namespace attnshort {

/// One conditioning record: optional class label, the shuffled top-attention
/// tokens, and the target text. Serialized for the LM as
///   BOS [label] FSEP tokens... FSEP target... EOS
/// with the label slot empty when absent.
struct GenRecord {
    std::optional<int> label;
    std::vector<std::string> top_tokens;  // stored in their shuffled order
    std::string target;
};

struct SamplerConfig {
    double temperature = 0.9;
    int top_k = 30;
    double top_p = 0.7;
    double repetition_penalty = 3.0;
    int min_len = 100;   // EOS is blocked until this many tokens are generated
    int max_len = 520;   // hard cap on generated tokens
    uint64_t seed = 1;
    bool early_stop = true;  // stop at EOS once min_len is reached

    void validate() const;
};

/// Dedicated vocabulary entry for class k ("<label0>", "<label1>", ...).
std::string label_token(int k);

/// Record -> token ids (uses id_or_unk for words).
std::vector<int> serialize_gen_record(const GenRecord& rec, const Vocab& vocab);

/// Inverse of serialize_gen_record; throws on a malformed layout.
GenRecord parse_gen_record(const std::vector<int>& ids, const Vocab& vocab);

/// Select the top keep_fraction content tokens by score (same rules as
/// filter_sequence), strip specials, shuffle with the given seed.
GenRecord build_gen_record(std::optional<int> label, const TokenizedSequence& seq,
                           const TokenScores& scores, double keep_fraction,
                           const std::string& target_text, uint64_t seed, const Vocab& vocab);

/// Attention-score every record with the encoder and build one GenRecord per
/// record (layer for aggregation, per-record shuffle seed derived from seed).
std::vector<GenRecord> build_gen_corpus(const Transformer<float>& encoder,
                                        const LabeledDataset& data, const Vocab& vocab, int layer,
                                        double keep_fraction, uint64_t seed, bool with_label);

/// AdamW next-token training of a causal LM over serialized records.
/// History entries carry per-token mean loss and next-token accuracy.
TrainHistory train_lm(Transformer<float>& model, const std::vector<GenRecord>& corpus,
                      const Vocab& vocab, const TrainConfig& tc);

/// Applies, in order: repetition penalty (divide positive logits of history
/// tokens, multiply negative), temperature, softmax, top-k, top-p nucleus
/// (smallest prefix with cumulative mass >= p), renormalize. Returns a full
/// vocab-sized distribution summing to 1.
std::vector<double> constrain_logits(std::vector<double> logits, const std::vector<int>& history,
                                     const SamplerConfig& cfg);

struct SampleStep {
    std::vector<int> support;  // ids with nonzero probability this step
    int chosen = -1;
};
struct SampleTrace {
    std::vector<SampleStep> steps;
};

/// Autoregressive draw from `BOS [label] FSEP tokens FSEP`; returns the
/// generated target-slot text (specials dropped). Deterministic per
/// (prompt, seed). Trace is filled when given.
std::string sample(const Transformer<float>& model, const Vocab& vocab, const GenRecord& prompt,
                   const SamplerConfig& cfg, SampleTrace* trace = nullptr);

struct GeneratedText {
    std::optional<int> intended_label;
    std::string text;
    uint64_t seed = 0;
};

/// Fraction of generated texts the classifier assigns to their intended
/// label. Every record must carry an intended label.
double generation_fidelity_eval(const Transformer<float>& classifier, const Vocab& vocab,
                                const std::vector<GeneratedText>& generated);

// JSON-lines {"label": int|null, "top_tokens": [str], "target": str}
void save_gen_corpus(const std::vector<GenRecord>& corpus, const std::string& path);
std::vector<GenRecord> load_gen_corpus(const std::string& path);

// JSON-lines {"intended_label": int|null, "text": str, "seed": int}
void save_generated(const std::vector<GeneratedText>& gen, const std::string& path);
std::vector<GeneratedText> load_generated(const std::string& path);

}  // namespace attnshort
