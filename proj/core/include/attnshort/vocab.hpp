#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace attnshort {

/// Token vocabulary with a fixed reserved-id block. Reserved ids are never
/// reassigned; construction order is deterministic (descending corpus
/// frequency, ties broken lexicographically).
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kBos = 4;
    static constexpr int kEos = 5;
    static constexpr int kFieldSep = 6;
    static constexpr int kNumReserved = 7;

    static const std::vector<std::string>& reserved_tokens();

    Vocab();

    /// Appends a token with the next free id. Throws if already present.
    int add(const std::string& token);

    int size() const { return static_cast<int>(id_to_token_.size()); }

    /// id for token, or kUnk when absent.
    int id_or_unk(const std::string& token) const;

    /// id for token, or -1 when absent.
    int find(const std::string& token) const;

    bool contains(const std::string& token) const { return find(token) >= 0; }

    /// Token string for id. Throws on out-of-range id.
    const std::string& token(int id) const;

    /// Reserved ids plus any extra specials registered at build time.
    bool is_special(int id) const { return id >= 0 && id < num_special_; }
    int num_special() const { return num_special_; }

private:
    friend Vocab build_vocab(const std::vector<std::string>&, size_t,
                             const std::vector<std::string>&);
    friend Vocab load_vocab(const std::string&, int);

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    int num_special_ = kNumReserved;
};

/// Builds a vocabulary from a text corpus: reserved tokens, then
/// extra_specials, then corpus tokens by descending frequency
/// (lexicographic tie-break) up to max_size total entries.
/// Throws "empty corpus" for an empty corpus and rejects max_size that
/// cannot hold the reserved block.
Vocab build_vocab(const std::vector<std::string>& corpus, size_t max_size,
                  const std::vector<std::string>& extra_specials = {});

/// One token per line; line number - 1 == id.
void save_vocab(const Vocab& vocab, const std::string& path);
/// num_extra_special: count of non-reserved specials (label tokens) placed
/// right after the reserved block; -1 autodetects them by their <label..>
/// spelling.
Vocab load_vocab(const std::string& path, int num_extra_special = -1);

}  // namespace attnshort
