#pragma once

#include <string>
#include <vector>

#include "attnshort/vocab.hpp"

namespace attnshort {

/// Character span [begin, end) into the source text. begin == end == -1 for
/// tokens without provenance (specials).
struct CharSpan {
    int begin = -1;
    int end = -1;
    bool valid() const { return begin >= 0; }
};

struct Word {
    std::string text;
    CharSpan span;
};

enum class TokenizeMode { kClassifier, kLm };

struct TokenizedSequence {
    std::vector<int> ids;
    int content_begin = 0;  // [content_begin, content_end) indexes non-special tokens
    int content_end = 0;
    std::vector<CharSpan> source_offsets;  // aligned with ids

    int length() const { return static_cast<int>(ids.size()); }
    int content_length() const { return content_end - content_begin; }
};

/// Collapses whitespace runs to single spaces and trims the ends.
std::string whitespace_normalize(const std::string& text);

/// Word-level split: whitespace separates words and the punctuation
/// characters . , ! ? ; : are emitted as their own single-character tokens.
std::vector<Word> split_words(const std::string& text);

/// Number of word-level tokens in text.
int count_words(const std::string& text);

/// Splits after . ! ? when followed by whitespace or end of input.
/// Terminators stay with their sentence; each sentence is
/// whitespace-normalized; no empty sentences are produced.
std::vector<std::string> split_sentences(const std::string& text);

/// Classifier mode wraps content in CLS ... SEP and truncates content from
/// the tail to fit max_len; LM mode emits raw ids with no specials. Unknown
/// words map to UNK.
TokenizedSequence tokenize(const std::string& text, const Vocab& vocab, int max_len,
                           TokenizeMode mode);

/// Drops special tokens and joins the rest with single spaces. Throws on ids
/// outside the vocabulary.
std::string detokenize(const std::vector<int>& ids, const Vocab& vocab);
std::string detokenize(const TokenizedSequence& seq, const Vocab& vocab);

}  // namespace attnshort
