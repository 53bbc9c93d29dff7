#include "attnshort/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "attnshort/rng.hpp"
#include "attnshort/text.hpp"

namespace attnshort {

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.num_records < 1 || spec.vocab_size < 1 || spec.num_classes < 1 ||
        spec.keywords_per_class < 1 || spec.noise_len < 1 || spec.sentences_per_record < 1)
        throw std::invalid_argument("make_synthetic: all parameters must be >= 1");
    const int n_keywords = spec.num_classes * spec.keywords_per_class;
    const int n_noise_types = spec.vocab_size - n_keywords;
    if (n_noise_types < 1)
        throw std::invalid_argument("make_synthetic: vocab too small for keywords");

    SyntheticData out;
    out.keywords.reserve(n_keywords);
    for (int c = 0; c < spec.num_classes; ++c)
        for (int j = 0; j < spec.keywords_per_class; ++j)
            out.keywords.push_back("kw" + std::to_string(c) + "_" + std::to_string(j));

    Rng rng(spec.seed);
    out.data.num_classes = spec.num_classes;
    out.data.records.reserve(spec.num_records);
    out.planted.reserve(spec.num_records);
    for (int i = 0; i < spec.num_records; ++i) {
        const int label = i % spec.num_classes;
        std::vector<std::string> words;
        words.reserve(spec.noise_len + spec.keywords_per_class);
        for (int w = 0; w < spec.noise_len; ++w)
            words.push_back("w" + std::to_string(rng.below(n_noise_types)));
        std::vector<std::string> planted;
        planted.reserve(spec.keywords_per_class);
        for (int j = 0; j < spec.keywords_per_class; ++j) {
            const std::string& kw = out.keywords[label * spec.keywords_per_class + j];
            const size_t pos = rng.below(words.size() + 1);
            words.insert(words.begin() + static_cast<long>(pos), kw);
            planted.push_back(kw);
        }
        const int n_sent = std::min(spec.sentences_per_record, static_cast<int>(words.size()));
        std::string text;
        for (size_t w = 0; w < words.size(); ++w) {
            if (!text.empty()) text += ' ';
            text += words[w];
            if (n_sent > 1) {
                // sentence break after every ceil(len / n_sent) words
                const size_t per = (words.size() + n_sent - 1) / n_sent;
                if ((w + 1) % per == 0 || w + 1 == words.size()) text += " .";
            }
        }
        out.data.records.push_back({std::move(text), std::nullopt, label});
        out.planted.push_back(std::move(planted));
    }
    return out;
}

double keyword_recall(const std::vector<Record>& records,
                      const std::vector<std::vector<std::string>>& planted) {
    if (records.size() != planted.size())
        throw std::invalid_argument("keyword_recall: records and planted lists misaligned");
    if (records.empty()) throw std::invalid_argument("keyword_recall: empty input");

    double sum = 0.0;
    for (size_t i = 0; i < records.size(); ++i) {
        std::set<std::string> present;
        for (const Word& w : split_words(records[i].text)) present.insert(w.text);
        int hit = 0;
        for (const std::string& kw : planted[i]) hit += present.count(kw) ? 1 : 0;
        sum += planted[i].empty() ? 1.0
                                  : static_cast<double>(hit) / static_cast<double>(planted[i].size());
    }
    return sum / static_cast<double>(records.size());
}

double random_selection_recall(const SyntheticData& sd, double keep_fraction, uint64_t seed) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw std::invalid_argument("random_selection_recall: keep_fraction must be in (0, 1]");
    Rng rng(seed);
    double sum = 0.0;
    for (size_t i = 0; i < sd.data.records.size(); ++i) {
        const std::vector<Word> words = split_words(sd.data.records[i].text);
        const int m = static_cast<int>(words.size());
        int k = static_cast<int>(std::llround(keep_fraction * m));
        k = std::min(std::max(k, 1), m);

        std::vector<int> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        std::set<std::string> kept;
        for (int r = 0; r < k; ++r) kept.insert(words[idx[r]].text);

        int hit = 0;
        for (const std::string& kw : sd.planted[i]) hit += kept.count(kw) ? 1 : 0;
        sum += sd.planted[i].empty()
                   ? 1.0
                   : static_cast<double>(hit) / static_cast<double>(sd.planted[i].size());
    }
    return sum / static_cast<double>(sd.data.records.size());
}

}  // namespace attnshort
