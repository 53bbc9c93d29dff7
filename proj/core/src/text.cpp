#include "attnshort/text.hpp"

#include <stdexcept>

namespace attnshort {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_splitting_punct(char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

bool is_sentence_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::string whitespace_normalize(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::vector<Word> split_words(const std::string& text) {
    std::vector<Word> words;
    const int n = static_cast<int>(text.size());
    int i = 0;
    while (i < n) {
        if (is_space(text[i])) {
            ++i;
            continue;
        }
        if (is_splitting_punct(text[i])) {
            words.push_back({std::string(1, text[i]), {i, i + 1}});
            ++i;
            continue;
        }
        int start = i;
        while (i < n && !is_space(text[i]) && !is_splitting_punct(text[i])) ++i;
        words.push_back({text.substr(start, i - start), {start, i}});
    }
    return words;
}

int count_words(const std::string& text) {
    return static_cast<int>(split_words(text).size());
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    const int n = static_cast<int>(text.size());
    int start = 0;
    for (int i = 0; i < n; ++i) {
        if (is_sentence_terminator(text[i]) && (i + 1 == n || is_space(text[i + 1]))) {
            std::string s = whitespace_normalize(text.substr(start, i + 1 - start));
            if (!s.empty()) sentences.push_back(std::move(s));
            start = i + 1;
        }
    }
    if (start < n) {
        std::string s = whitespace_normalize(text.substr(start));
        if (!s.empty()) sentences.push_back(std::move(s));
    }
    return sentences;
}

TokenizedSequence tokenize(const std::string& text, const Vocab& vocab, int max_len,
                           TokenizeMode mode) {
    if (mode == TokenizeMode::kClassifier && max_len < 3)
        throw std::invalid_argument("tokenize: classifier mode needs max_len >= 3");
    if (max_len < 1) throw std::invalid_argument("tokenize: max_len must be positive");

    const std::vector<Word> words = split_words(text);
    const int budget =
        mode == TokenizeMode::kClassifier ? max_len - 2 : max_len;  // room for CLS/SEP
    const int kept = std::min<int>(budget, static_cast<int>(words.size()));

    TokenizedSequence seq;
    if (mode == TokenizeMode::kClassifier) {
        seq.ids.push_back(Vocab::kCls);
        seq.source_offsets.push_back({});
    }
    seq.content_begin = static_cast<int>(seq.ids.size());
    for (int i = 0; i < kept; ++i) {
        seq.ids.push_back(vocab.id_or_unk(words[i].text));
        seq.source_offsets.push_back(words[i].span);
    }
    seq.content_end = static_cast<int>(seq.ids.size());
    if (mode == TokenizeMode::kClassifier) {
        seq.ids.push_back(Vocab::kSep);
        seq.source_offsets.push_back({});
    }
    return seq;
}

std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
    std::string out;
    for (int id : ids) {
        if (id < 0 || id >= vocab.size()) throw std::out_of_range("detokenize: unknown token id");
        if (vocab.is_special(id)) continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab.token(id);
    }
    return out;
}

std::string detokenize(const TokenizedSequence& seq, const Vocab& vocab) {
    return detokenize(seq.ids, vocab);
}

}  // namespace attnshort
