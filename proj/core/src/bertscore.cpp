#include "attnshort/bertscore.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "attnshort/csv.hpp"

namespace attnshort {

ScoreTriple score_from_embeddings(const Mat<float>& reference, const Mat<float>& candidate) {
    if (reference.rows == 0 || candidate.rows == 0)
        throw std::invalid_argument("score_from_embeddings: empty text");
    if (reference.cols != candidate.cols)
        throw std::invalid_argument("score_from_embeddings: dimension mismatch");

    const int d = reference.cols;
    auto best_against = [d](const float* row, const Mat<float>& other) {
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < other.rows; ++j) {
            const float* o = other.row(j);
            double dot = 0.0;
            for (int c = 0; c < d; ++c) dot += static_cast<double>(row[c]) * o[c];
            best = std::max(best, dot);
        }
        return best;
    };

    ScoreTriple t;
    for (int i = 0; i < reference.rows; ++i) t.recall += best_against(reference.row(i), candidate);
    t.recall /= reference.rows;
    for (int j = 0; j < candidate.rows; ++j)
        t.precision += best_against(candidate.row(j), reference);
    t.precision /= candidate.rows;
    const double pr = t.precision + t.recall;
    t.f1 = pr > 0.0 ? 2.0 * t.precision * t.recall / pr : 0.0;
    return t;
}

static Mat<float> content_unit_vectors(const Transformer<float>& model, const Vocab& vocab,
                                       const std::string& text) {
    const TokenizedSequence seq =
        tokenize(text, vocab, model.config().max_len, TokenizeMode::kClassifier);
    const int m = seq.content_length();
    if (m == 0) throw std::invalid_argument("pair_score: empty text");

    const Mat<float> hidden = token_vectors(model, seq.ids);
    Mat<float> out(m, hidden.cols);
    for (int i = 0; i < m; ++i) {
        const float* src = hidden.row(seq.content_begin + i);
        double norm = 0.0;
        for (int c = 0; c < hidden.cols; ++c) norm += static_cast<double>(src[c]) * src[c];
        norm = std::sqrt(norm);
        const float inv = norm < 1e-12 ? 0.0f : static_cast<float>(1.0 / norm);
        float* dst = out.row(i);
        for (int c = 0; c < hidden.cols; ++c) dst[c] = src[c] * inv;
    }
    return out;
}

ScoreTriple pair_score(const Transformer<float>& model, const Vocab& vocab,
                       const std::string& reference, const std::string& candidate) {
    const Mat<float> ref = content_unit_vectors(model, vocab, reference);
    const Mat<float> cand = content_unit_vectors(model, vocab, candidate);
    return score_from_embeddings(ref, cand);
}

CorpusScore corpus_score(const Transformer<float>& model, const Vocab& vocab,
                         const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("corpus_score: empty pair list");
    CorpusScore cs;
    cs.per_pair.reserve(pairs.size());
    for (const auto& [ref, cand] : pairs) {
        const ScoreTriple t = pair_score(model, vocab, ref, cand);
        cs.mean.precision += t.precision;
        cs.mean.recall += t.recall;
        cs.mean.f1 += t.f1;
        cs.per_pair.push_back(t);
    }
    const double n = static_cast<double>(pairs.size());
    cs.mean.precision /= n;
    cs.mean.recall /= n;
    cs.mean.f1 /= n;
    return cs;
}

void write_score_csv(const CorpusScore& scores, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_score_csv: cannot open " + path);
    f << "id,precision,recall,f1\n";
    for (size_t i = 0; i < scores.per_pair.size(); ++i) {
        const ScoreTriple& t = scores.per_pair[i];
        f << i << ',' << format_double(t.precision) << ',' << format_double(t.recall) << ','
          << format_double(t.f1) << "\n";
    }
    f << "mean," << format_double(scores.mean.precision) << ','
      << format_double(scores.mean.recall) << ',' << format_double(scores.mean.f1) << "\n";
    if (!f) throw std::runtime_error("write_score_csv: write failed for " + path);
}

}  // namespace attnshort
