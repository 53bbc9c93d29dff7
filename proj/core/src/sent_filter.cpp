#include "attnshort/sent_filter.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace attnshort {

SentenceEmbedding sentence_embedding(const Transformer<float>& model, const Vocab& vocab,
                                     const std::string& sentence) {
    const TokenizedSequence seq =
        tokenize(sentence, vocab, model.config().max_len, TokenizeMode::kClassifier);
    const int m = seq.content_length();
    if (m == 0) throw std::invalid_argument("sentence_embedding: empty after tokenization");

    const Mat<float> hidden = token_vectors(model, seq.ids);
    const int d = hidden.cols;
    SentenceEmbedding emb;
    emb.v.assign(d, 0.0f);
    for (int pos = seq.content_begin; pos < seq.content_end; ++pos) {
        const float* r = hidden.row(pos);
        for (int j = 0; j < d; ++j) emb.v[j] += r[j];
    }
    double norm = 0.0;
    for (int j = 0; j < d; ++j) {
        emb.v[j] /= static_cast<float>(m);
        norm += static_cast<double>(emb.v[j]) * emb.v[j];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw std::runtime_error("sentence_embedding: degenerate zero vector");
    const float inv = static_cast<float>(1.0 / norm);
    for (float& x : emb.v) x *= inv;
    emb.token_count = count_words(sentence);
    return emb;
}

std::vector<SentenceEmbedding> embed_sentences(const Transformer<float>& model,
                                               const Vocab& vocab,
                                               const std::vector<std::string>& sentences) {
    std::vector<SentenceEmbedding> out;
    out.reserve(sentences.size());
    for (size_t i = 0; i < sentences.size(); ++i) {
        SentenceEmbedding e = sentence_embedding(model, vocab, sentences[i]);
        e.index = static_cast<int>(i);
        out.push_back(std::move(e));
    }
    return out;
}

Mat<float> similarity_matrix(const std::vector<SentenceEmbedding>& embs) {
    const int s = static_cast<int>(embs.size());
    if (s < 2) throw std::invalid_argument("similarity_matrix: nothing to compare");
    const size_t d = embs[0].v.size();
    for (const auto& e : embs)
        if (e.v.size() != d)
            throw std::invalid_argument("similarity_matrix: mixed embedding dimensions");

    Mat<float> sim(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = i; j < s; ++j) {
            float dot = 0.0f;
            for (size_t c = 0; c < d; ++c) dot += embs[i].v[c] * embs[j].v[c];
            sim(i, j) = dot;
            sim(j, i) = dot;
        }
    return sim;
}

SimilarityPlan eliminate_similar(const std::vector<std::string>& sentences,
                                 const std::vector<SentenceEmbedding>& embs,
                                 double target_reduction) {
    if (!(target_reduction > 0.0 && target_reduction < 1.0))
        throw std::invalid_argument("eliminate_similar: target_reduction must be in (0, 1)");
    if (sentences.size() != embs.size())
        throw std::invalid_argument("eliminate_similar: sentences and embeddings misaligned");

    SimilarityPlan plan;
    const int s = static_cast<int>(sentences.size());
    if (s < 2) return plan;  // single sentence: empty plan, rate 0

    const Mat<float> sim = similarity_matrix(embs);
    long long total_tokens = 0;
    for (const auto& e : embs) total_tokens += e.token_count;
    if (total_tokens <= 0) return plan;

    std::vector<char> alive(s, 1);
    int alive_count = s;
    long long eliminated_tokens = 0;
    while (alive_count > 1) {
        int best_i = -1, best_j = -1;
        float best = 0.0f;
        for (int i = 0; i < s; ++i) {
            if (!alive[i]) continue;
            for (int j = i + 1; j < s; ++j) {
                if (!alive[j]) continue;
                if (best_i < 0 || sim(i, j) > best) {  // strict >: first pair wins ties
                    best = sim(i, j);
                    best_i = i;
                    best_j = j;
                }
            }
        }
        const int ci = embs[best_i].token_count, cj = embs[best_j].token_count;
        const int victim = ci > cj ? best_i : best_j;  // tie falls to the higher index
        alive[victim] = 0;
        --alive_count;
        eliminated_tokens += embs[victim].token_count;
        plan.steps.push_back({best_i, best_j, best, victim});
        plan.achieved_reduction =
            static_cast<double>(eliminated_tokens) / static_cast<double>(total_tokens);
        if (plan.achieved_reduction >= target_reduction) break;
    }
    return plan;
}

LabeledDataset SimFilteredDataset::plain() const {
    LabeledDataset out;
    out.num_classes = num_classes;
    out.records.reserve(records.size());
    for (const SimFilteredRecord& fr : records) out.records.push_back(fr.rec);
    return out;
}

namespace {

struct FieldResult {
    std::string text;
    int orig_sentences = 0;
    int kept_sentences = 0;
    long long eliminated_tokens = 0;
    long long total_tokens = 0;
};

FieldResult filter_field(const Transformer<float>& model, const Vocab& vocab,
                         const std::string& text, double target) {
    FieldResult r;
    const std::vector<std::string> sentences = split_sentences(text);
    r.orig_sentences = static_cast<int>(sentences.size());
    for (const std::string& sent : sentences) r.total_tokens += count_words(sent);
    if (sentences.size() < 2) {
        r.kept_sentences = r.orig_sentences;
        r.text = sentences.empty() ? std::string() : sentences[0];
        return r;
    }
    const std::vector<SentenceEmbedding> embs = embed_sentences(model, vocab, sentences);
    const SimilarityPlan plan = eliminate_similar(sentences, embs, target);

    std::vector<char> alive(sentences.size(), 1);
    for (const Elimination& e : plan.steps) {
        alive[e.eliminated] = 0;
        r.eliminated_tokens += embs[e.eliminated].token_count;
    }
    std::string joined;
    for (size_t i = 0; i < sentences.size(); ++i) {
        if (!alive[i]) continue;
        if (!joined.empty()) joined += ' ';
        joined += sentences[i];
        ++r.kept_sentences;
    }
    r.text = std::move(joined);
    return r;
}

}  // namespace

SimFilteredDataset similarity_filter_dataset(const Transformer<float>& model,
                                             const LabeledDataset& data, const Vocab& vocab,
                                             double target_reduction) {
    if (!(target_reduction > 0.0 && target_reduction < 1.0))
        throw std::invalid_argument(
            "similarity_filter_dataset: target_reduction must be in (0, 1)");

    SimFilteredDataset out;
    out.num_classes = data.num_classes;
    out.target_reduction = target_reduction;
    out.records.reserve(data.records.size());
    double rate_sum = 0.0;
    for (const Record& rec : data.records) {
        FieldResult a = filter_field(model, vocab, rec.text, target_reduction);
        SimFilteredRecord fr;
        fr.rec.text = a.text;
        fr.rec.label = rec.label;
        fr.orig_sentences = a.orig_sentences;
        fr.kept_sentences = a.kept_sentences;
        long long elim = a.eliminated_tokens, total = a.total_tokens;
        if (rec.text2) {
            FieldResult b = filter_field(model, vocab, *rec.text2, target_reduction);
            fr.rec.text2 = b.text;
            fr.orig_sentences += b.orig_sentences;
            fr.kept_sentences += b.kept_sentences;
            elim += b.eliminated_tokens;
            total += b.total_tokens;
        }
        fr.achieved_reduction =
            total > 0 ? static_cast<double>(elim) / static_cast<double>(total) : 0.0;
        rate_sum += fr.achieved_reduction;
        out.records.push_back(std::move(fr));
    }
    out.mean_achieved_reduction =
        out.records.empty() ? 0.0 : rate_sum / static_cast<double>(out.records.size());
    return out;
}

void save_sim_filtered(const SimFilteredDataset& fd, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_sim_filtered: cannot open " + path);
    for (const SimFilteredRecord& fr : fd.records) {
        nlohmann::json j;
        j["text"] = fr.rec.text;
        if (fr.rec.text2) j["text2"] = *fr.rec.text2;
        j["label"] = fr.rec.label;
        j["kept_sentences"] = fr.kept_sentences;
        j["orig_sentences"] = fr.orig_sentences;
        j["achieved_reduction"] = fr.achieved_reduction;
        f << j.dump() << "\n";
    }
    if (!f) throw std::runtime_error("save_sim_filtered: write failed for " + path);
}

}  // namespace attnshort
