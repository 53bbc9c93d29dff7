#pragma once

#include <string>
#include <vector>

#include "attnshort/encoder.hpp"

namespace attnshort {

struct ScoreTriple {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy-matching core over already-embedded tokens (rows are vectors):
///   recall    = mean over reference rows of the best dot against candidate
///   precision = mean over candidate rows of the best dot against reference
///   f1        = harmonic mean (0 when precision + recall == 0).
/// Rows are used as given; normalize beforehand for cosine behaviour.
ScoreTriple score_from_embeddings(const Mat<float>& reference, const Mat<float>& candidate);

/// Embed both texts (final-layer vectors over content tokens, unit-normalized
/// per token) and run the greedy matching.
ScoreTriple pair_score(const Transformer<float>& model, const Vocab& vocab,
                       const std::string& reference, const std::string& candidate);

struct CorpusScore {
    ScoreTriple mean;
    std::vector<ScoreTriple> per_pair;
};

CorpusScore corpus_score(const Transformer<float>& model, const Vocab& vocab,
                         const std::vector<std::pair<std::string, std::string>>& pairs);

/// CSV rows `id,precision,recall,f1` for each pair plus a final `mean` row.
void write_score_csv(const CorpusScore& scores, const std::string& path);

}  // namespace attnshort
