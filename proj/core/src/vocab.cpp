#include "attnshort/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "attnshort/text.hpp"

namespace attnshort {

const std::vector<std::string>& Vocab::reserved_tokens() {
    static const std::vector<std::string> kReserved = {"<pad>", "<unk>", "<cls>", "<sep>",
                                                       "<bos>", "<eos>", "<fsep>"};
    return kReserved;
}

Vocab::Vocab() {
    for (const auto& t : reserved_tokens()) add(t);
}

int Vocab::add(const std::string& token) {
    if (token_to_id_.count(token)) throw std::invalid_argument("vocab: duplicate token " + token);
    int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
}

int Vocab::id_or_unk(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

int Vocab::find(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocab: id out of range");
    return id_to_token_[id];
}

Vocab build_vocab(const std::vector<std::string>& corpus, size_t max_size,
                  const std::vector<std::string>& extra_specials) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    if (max_size < Vocab::kNumReserved + extra_specials.size())
        throw std::invalid_argument("build_vocab: max_size too small for reserved tokens");

    Vocab vocab;
    for (const auto& t : extra_specials) vocab.add(t);
    vocab.num_special_ = vocab.size();

    // std::map keeps counting deterministic and already lexicographically sorted
    std::map<std::string, long> freq;
    for (const auto& text : corpus)
        for (const auto& w : split_words(text)) ++freq[w.text];

    std::vector<std::pair<std::string, long>> entries(freq.begin(), freq.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    for (const auto& [token, count] : entries) {
        (void)count;
        if (static_cast<size_t>(vocab.size()) >= max_size) break;
        if (vocab.contains(token)) continue;  // corpus text spelling a special
        vocab.add(token);
    }
    return vocab;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_vocab: cannot open " + path);
    for (int id = 0; id < vocab.size(); ++id) out << vocab.token(id) << '\n';
}

Vocab load_vocab(const std::string& path, int num_extra_special) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_vocab: cannot open " + path);

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (lines.size() < Vocab::kNumReserved) throw std::runtime_error("load_vocab: truncated file");
    for (int i = 0; i < Vocab::kNumReserved; ++i)
        if (lines[i] != Vocab::reserved_tokens()[i])
            throw std::runtime_error("load_vocab: reserved token mismatch at id " +
                                     std::to_string(i));

    Vocab vocab;
    for (size_t i = Vocab::kNumReserved; i < lines.size(); ++i) {
        if (lines[i].empty()) throw std::runtime_error("load_vocab: empty token at line " +
                                                       std::to_string(i + 1));
        vocab.add(lines[i]);
    }
    if (num_extra_special < 0) {
        // autodetect: extras are the run of <label...> tokens right after the
        // reserved block, where build_vocab placed them
        num_extra_special = 0;
        for (size_t i = Vocab::kNumReserved; i < lines.size(); ++i) {
            if (lines[i].rfind("<label", 0) == 0 && lines[i].back() == '>')
                ++num_extra_special;
            else
                break;
        }
    }
    vocab.num_special_ = Vocab::kNumReserved + num_extra_special;
    if (vocab.num_special_ > vocab.size())
        throw std::runtime_error("load_vocab: fewer tokens than declared specials");
    return vocab;
}

}  // namespace attnshort
