#include "attnshort/gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "attnshort/optim.hpp"

namespace attnshort {

void SamplerConfig::validate() const {
    if (!(temperature > 0.0)) throw std::invalid_argument("sampler: temperature must be > 0");
    if (top_k < 1) throw std::invalid_argument("sampler: top_k must be >= 1");
    if (!(top_p > 0.0 && top_p <= 1.0))
        throw std::invalid_argument("sampler: top_p must be in (0, 1]");
    if (repetition_penalty < 1.0)
        throw std::invalid_argument("sampler: repetition_penalty must be >= 1");
    if (min_len < 0 || max_len < 1 || min_len > max_len)
        throw std::invalid_argument("sampler: need 0 <= min_len <= max_len, max_len >= 1");
}

std::string label_token(int k) { return "<label" + std::to_string(k) + ">"; }

std::vector<int> serialize_gen_record(const GenRecord& rec, const Vocab& vocab) {
    std::vector<int> ids;
    ids.push_back(Vocab::kBos);
    if (rec.label) ids.push_back(vocab.id_or_unk(label_token(*rec.label)));
    ids.push_back(Vocab::kFieldSep);
    for (const std::string& tok : rec.top_tokens) ids.push_back(vocab.id_or_unk(tok));
    ids.push_back(Vocab::kFieldSep);
    for (const Word& w : split_words(rec.target)) ids.push_back(vocab.id_or_unk(w.text));
    ids.push_back(Vocab::kEos);
    return ids;
}

GenRecord parse_gen_record(const std::vector<int>& ids, const Vocab& vocab) {
    auto fail = []() -> GenRecord {
        throw std::runtime_error("parse_gen_record: malformed generation record");
    };
    if (ids.size() < 4 || ids.front() != Vocab::kBos || ids.back() != Vocab::kEos) return fail();

    std::vector<size_t> seps;
    for (size_t i = 1; i + 1 < ids.size(); ++i)
        if (ids[i] == Vocab::kFieldSep) seps.push_back(i);
    if (seps.size() != 2) return fail();

    GenRecord rec;
    if (seps[0] == 2) {
        const std::string tok = vocab.token(ids[1]);
        if (tok.rfind("<label", 0) != 0) return fail();
        rec.label = std::stoi(tok.substr(6, tok.size() - 7));
    } else if (seps[0] != 1) {
        return fail();
    }
    for (size_t i = seps[0] + 1; i < seps[1]; ++i) rec.top_tokens.push_back(vocab.token(ids[i]));
    std::string target;
    for (size_t i = seps[1] + 1; i + 1 < ids.size(); ++i) {
        if (!target.empty()) target += ' ';
        target += vocab.token(ids[i]);
    }
    rec.target = std::move(target);
    return rec;
}

GenRecord build_gen_record(std::optional<int> label, const TokenizedSequence& seq,
                           const TokenScores& scores, double keep_fraction,
                           const std::string& target_text, uint64_t seed, const Vocab& vocab) {
    FilterSpec spec;
    spec.keep_fraction = keep_fraction;
    const TokenizedSequence kept = filter_sequence(seq, scores, spec);

    GenRecord rec;
    rec.label = label;
    rec.top_tokens.reserve(kept.content_length());
    for (int pos = kept.content_begin; pos < kept.content_end; ++pos)
        rec.top_tokens.push_back(vocab.token(kept.ids[pos]));
    Rng rng(seed);
    rng.shuffle(rec.top_tokens);
    rec.target = whitespace_normalize(target_text);
    return rec;
}

std::vector<GenRecord> build_gen_corpus(const Transformer<float>& encoder,
                                        const LabeledDataset& data, const Vocab& vocab, int layer,
                                        double keep_fraction, uint64_t seed, bool with_label) {
    std::vector<GenRecord> corpus;
    corpus.reserve(data.records.size());
    for (size_t i = 0; i < data.records.size(); ++i) {
        const Record& r = data.records[i];
        const std::string text = record_model_text(r);
        const TokenizedSequence seq =
            tokenize(text, vocab, encoder.config().max_len, TokenizeMode::kClassifier);
        const AttentionTensor attn = encoder_attention(encoder, seq.ids);
        const TokenScores scores = token_scores(aggregate_layer(attn, layer), seq);
        std::optional<int> label;
        if (with_label) label = r.label;
        corpus.push_back(
            build_gen_record(label, seq, scores, keep_fraction, text, seed + i, vocab));
    }
    return corpus;
}

TrainHistory train_lm(Transformer<float>& model, const std::vector<GenRecord>& corpus,
                      const Vocab& vocab, const TrainConfig& tc) {
    if (corpus.empty()) throw std::invalid_argument("train_lm: empty corpus");
    if (tc.epochs < 1 || tc.batch_size < 1)
        throw std::invalid_argument("train_lm: epochs and batch_size must be >= 1");

    const size_t n = corpus.size();
    std::vector<std::vector<int>> ids(n);
    for (size_t i = 0; i < n; ++i) {
        ids[i] = serialize_gen_record(corpus[i], vocab);
        if (static_cast<int>(ids[i].size()) > model.config().max_len)
            throw std::invalid_argument("train_lm: record " + std::to_string(i) +
                                        " exceeds model max_len");
    }

    AdamW opt(model, tc.beta1, tc.beta2, tc.adam_eps, tc.weight_decay);
    Rng shuffle_rng(tc.seed);
    Rng drop_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    Rng* drop = model.config().dropout > 0.0 ? &drop_rng : nullptr;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    auto lr_at = [&tc](int64_t step) {
        if (tc.warmup_steps > 0 && step <= tc.warmup_steps)
            return tc.learning_rate * static_cast<double>(step) / tc.warmup_steps;
        return tc.learning_rate;
    };

    TrainHistory hist;
    std::vector<Mat<float>> grads = model.make_grads();
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        long long positions = 0, correct = 0;
        for (size_t start = 0; start < n; start += tc.batch_size) {
            const size_t bn = std::min(static_cast<size_t>(tc.batch_size), n - start);
            long long batch_positions = 0;
            for (size_t b = 0; b < bn; ++b)
                batch_positions +=
                    std::max(0, Transformer<float>::valid_length(ids[order[start + b]]) - 1);
            if (batch_positions == 0) continue;

            for (auto& g : grads) g.zero();
            const float scale = 1.0f / static_cast<float>(batch_positions);
            for (size_t b = 0; b < bn; ++b) {
                const size_t idx = order[start + b];
                int npos = 0, ncorr = 0;
                const float loss = model.lm_loss_grad(ids[idx], grads, scale, &npos, drop, &ncorr);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_lm: non-finite loss (epoch " +
                                             std::to_string(epoch) + ", record " +
                                             std::to_string(idx) + ")");
                loss_sum += loss;
                positions += npos;
                correct += ncorr;
            }
            opt.step(model, grads, lr_at(opt.t + 1));
        }
        hist.push_back({positions > 0 ? loss_sum / static_cast<double>(positions) : 0.0,
                        positions > 0 ? static_cast<double>(correct) / positions : 0.0});
        if (tc.verbose)
            std::fprintf(stderr, "epoch %d/%d  loss/token %.4f  next-token acc %.4f\n", epoch + 1,
                         tc.epochs, hist.back().mean_loss, hist.back().accuracy);
    }
    return hist;
}

std::vector<double> constrain_logits(std::vector<double> logits, const std::vector<int>& history,
                                     const SamplerConfig& cfg) {
    cfg.validate();
    const int v = static_cast<int>(logits.size());
    if (v == 0) throw std::invalid_argument("constrain_logits: empty logits");
    for (double x : logits)
        if (!std::isfinite(x)) throw std::invalid_argument("constrain_logits: non-finite logits");

    // repetition penalty, once per distinct history token
    if (cfg.repetition_penalty != 1.0 && !history.empty()) {
        std::set<int> seen(history.begin(), history.end());
        for (int t : seen) {
            if (t < 0 || t >= v) continue;
            if (logits[t] > 0.0)
                logits[t] /= cfg.repetition_penalty;
            else if (logits[t] < 0.0)
                logits[t] *= cfg.repetition_penalty;
        }
    }

    for (double& x : logits) x /= cfg.temperature;

    // softmax
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double denom = 0.0;
    std::vector<double> probs(v);
    for (int i = 0; i < v; ++i) {
        probs[i] = std::exp(logits[i] - mx);
        denom += probs[i];
    }
    for (double& p : probs) p /= denom;

    // descending probability, ties by lower index
    std::vector<int> order(v);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    });

    const int k = std::min(cfg.top_k, v);
    // nucleus: smallest prefix of the top-k survivors with mass >= top_p
    int kept = k;
    double cum = 0.0;
    for (int r = 0; r < k; ++r) {
        cum += probs[order[r]];
        if (cum >= cfg.top_p) {
            kept = r + 1;
            break;
        }
    }

    std::vector<double> out(v, 0.0);
    double mass = 0.0;
    for (int r = 0; r < kept; ++r) mass += probs[order[r]];
    if (!(mass > 0.0)) throw std::logic_error("constrain_logits: all mass eliminated");
    for (int r = 0; r < kept; ++r) out[order[r]] = probs[order[r]] / mass;
    return out;
}

std::string sample(const Transformer<float>& model, const Vocab& vocab, const GenRecord& prompt,
                   const SamplerConfig& cfg, SampleTrace* trace) {
    cfg.validate();
    GenRecord p = prompt;
    p.target.clear();
    std::vector<int> ids = serialize_gen_record(p, vocab);
    ids.pop_back();  // drop EOS: context is `BOS [label] FSEP tokens FSEP`
    const int prompt_len = static_cast<int>(ids.size());
    if (prompt_len + 1 > model.config().max_len)
        throw std::invalid_argument("sample: prompt too long");

    const int room = model.config().max_len - prompt_len;
    const int max_gen = std::min(cfg.max_len, room);

    Rng rng(cfg.seed);
    std::vector<int> generated;
    Transformer<float>::Cache cache;
    while (static_cast<int>(generated.size()) < max_gen) {
        model.forward(ids, cache);
        const Mat<float> logits = model.lm_logits(cache);
        const float* last = logits.row(cache.valid - 1);
        std::vector<double> row(last, last + model.config().vocab_size);
        // finite bans: exp underflows to probability 0. PAD is structural and
        // never trainable as a real continuation; EOS waits for min_len.
        row[Vocab::kPad] = -1e30;
        if (static_cast<int>(generated.size()) < cfg.min_len) row[Vocab::kEos] = -1e30;

        const std::vector<double> dist = constrain_logits(row, generated, cfg);

        const double r = rng.uniform();
        double cum = 0.0;
        int chosen = -1;
        for (int i = 0; i < static_cast<int>(dist.size()); ++i) {
            if (dist[i] <= 0.0) continue;
            cum += dist[i];
            chosen = i;
            if (r < cum) break;
        }

        if (trace) {
            SampleStep step;
            for (int i = 0; i < static_cast<int>(dist.size()); ++i)
                if (dist[i] > 0.0) step.support.push_back(i);
            step.chosen = chosen;
            trace->steps.push_back(std::move(step));
        }

        if (chosen == Vocab::kEos && cfg.early_stop) break;
        generated.push_back(chosen);
        ids.push_back(chosen);
    }
    return detokenize(generated, vocab);
}

double generation_fidelity_eval(const Transformer<float>& classifier, const Vocab& vocab,
                                const std::vector<GeneratedText>& generated) {
    if (generated.empty()) throw std::invalid_argument("generation_fidelity_eval: empty input");
    size_t correct = 0;
    for (const GeneratedText& g : generated) {
        if (!g.intended_label)
            throw std::invalid_argument("generation_fidelity_eval: record without intended label");
        const TokenizedSequence seq =
            tokenize(g.text, vocab, classifier.config().max_len, TokenizeMode::kClassifier);
        if (predict_label(classifier, seq) == *g.intended_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(generated.size());
}

void save_gen_corpus(const std::vector<GenRecord>& corpus, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_gen_corpus: cannot open " + path);
    for (const GenRecord& rec : corpus) {
        nlohmann::json j;
        if (rec.label)
            j["label"] = *rec.label;
        else
            j["label"] = nullptr;
        j["top_tokens"] = rec.top_tokens;
        j["target"] = rec.target;
        f << j.dump() << "\n";
    }
    if (!f) throw std::runtime_error("save_gen_corpus: write failed for " + path);
}

std::vector<GenRecord> load_gen_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_gen_corpus: cannot open " + path);
    std::vector<GenRecord> corpus;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("top_tokens") ||
            !j.contains("target") || !j["top_tokens"].is_array() || !j["target"].is_string())
            throw std::runtime_error("load_gen_corpus: malformed record at " + path + ":" +
                                     std::to_string(lineno));
        GenRecord rec;
        if (j.contains("label") && !j["label"].is_null()) {
            if (!j["label"].is_number_integer())
                throw std::runtime_error("load_gen_corpus: bad label at " + path + ":" +
                                         std::to_string(lineno));
            rec.label = j["label"].get<int>();
        }
        for (const auto& t : j["top_tokens"]) {
            if (!t.is_string())
                throw std::runtime_error("load_gen_corpus: bad token at " + path + ":" +
                                         std::to_string(lineno));
            rec.top_tokens.push_back(t.get<std::string>());
        }
        rec.target = j["target"].get<std::string>();
        corpus.push_back(std::move(rec));
    }
    return corpus;
}

void save_generated(const std::vector<GeneratedText>& gen, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_generated: cannot open " + path);
    for (const GeneratedText& g : gen) {
        nlohmann::json j;
        if (g.intended_label)
            j["intended_label"] = *g.intended_label;
        else
            j["intended_label"] = nullptr;
        j["text"] = g.text;
        j["seed"] = g.seed;
        f << j.dump() << "\n";
    }
    if (!f) throw std::runtime_error("save_generated: write failed for " + path);
}

std::vector<GeneratedText> load_generated(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_generated: cannot open " + path);
    std::vector<GeneratedText> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string())
            throw std::runtime_error("load_generated: malformed record at " + path + ":" +
                                     std::to_string(lineno));
        GeneratedText g;
        if (j.contains("intended_label") && !j["intended_label"].is_null())
            g.intended_label = j["intended_label"].get<int>();
        g.text = j["text"].get<std::string>();
        if (j.contains("seed")) g.seed = j["seed"].get<uint64_t>();
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace attnshort
