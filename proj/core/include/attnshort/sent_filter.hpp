#pragma once

#include <string>
#include <vector>

#include "attnshort/dataset.hpp"
#include "attnshort/encoder.hpp"

namespace attnshort {

struct SentenceEmbedding {
    std::vector<float> v;  // unit L2 norm, model_dim entries
    int token_count = 0;   // word-level tokens in the source sentence
    int index = -1;        // position in the original sentence list
};

struct Elimination {
    int i = -1, j = -1;      // the most-similar surviving pair (i < j)
    float similarity = 0.0f;
    int eliminated = -1;     // the longer member (ties: higher index)
};

struct SimilarityPlan {
    std::vector<Elimination> steps;
    double achieved_reduction = 0.0;  // eliminated tokens / total tokens
};

/// Mean of the final-layer vectors over content positions (CLS/SEP excluded),
/// L2-normalized. Throws if the sentence has no content tokens.
SentenceEmbedding sentence_embedding(const Transformer<float>& model, const Vocab& vocab,
                                     const std::string& sentence);

/// sentence_embedding over a list, filling index and token_count.
std::vector<SentenceEmbedding> embed_sentences(const Transformer<float>& model,
                                               const Vocab& vocab,
                                               const std::vector<std::string>& sentences);

/// Cosine similarities (plain dot products of the unit vectors). Requires at
/// least two embeddings.
Mat<float> similarity_matrix(const std::vector<SentenceEmbedding>& embs);

/// Greedy elimination: repeatedly take the highest-similarity surviving pair
/// (ties: lexicographically smallest index pair) and drop its longer member
/// (ties: higher index) until the eliminated-token fraction reaches
/// target_reduction or one sentence survives.
SimilarityPlan eliminate_similar(const std::vector<std::string>& sentences,
                                 const std::vector<SentenceEmbedding>& embs,
                                 double target_reduction);

struct SimFilteredRecord {
    Record rec;
    int orig_sentences = 0;
    int kept_sentences = 0;
    double achieved_reduction = 0.0;
};

struct SimFilteredDataset {
    std::vector<SimFilteredRecord> records;
    int num_classes = 2;
    double target_reduction = 0.0;
    double mean_achieved_reduction = 0.0;

    LabeledDataset plain() const;
};

/// Per record: split into sentences, embed, run the greedy elimination, and
/// rejoin the survivors with single spaces. Pair records are filtered field
/// by field. Labels pass through.
SimFilteredDataset similarity_filter_dataset(const Transformer<float>& model,
                                             const LabeledDataset& data, const Vocab& vocab,
                                             double target_reduction);

/// JSON-lines with the dataset fields plus kept_sentences, orig_sentences,
/// achieved_reduction per record.
void save_sim_filtered(const SimFilteredDataset& fd, const std::string& path);

}  // namespace attnshort
