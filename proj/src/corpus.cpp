#include "reat/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "reat/rng.hpp"

namespace reat {

namespace {
const std::vector<std::string> kReservedSurfaces = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

Vocabulary::Vocabulary() {
    for (const auto& s : kReservedSurfaces) {
        word_to_id_.emplace(s, static_cast<int>(id_to_word_.size()));
        id_to_word_.push_back(s);
    }
}

void Vocabulary::add(const std::string& word) {
    if (word_to_id_.count(word)) throw ConfigError("duplicate vocabulary entry: " + word);
    word_to_id_.emplace(word, static_cast<int>(id_to_word_.size()));
    id_to_word_.push_back(word);
}

int Vocabulary::id_of(const std::string& word) const {
    auto it = word_to_id_.find(word);
    return it == word_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::word_of(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= id_to_word_.size()) {
        throw NumericError("vocabulary id out of range: " + std::to_string(id));
    }
    return id_to_word_[static_cast<size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw MissingInputError("cannot open vocabulary for writing: " + path);
    for (size_t i = kReservedTokens; i < id_to_word_.size(); ++i) {
        os << id_to_word_[i] << "\n";
    }
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open vocabulary: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        v.add(line);
    }
    return v;
}

std::vector<std::string> tokenize(const std::string& text, bool lowercase) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(lowercase ? static_cast<char>(std::tolower(static_cast<unsigned char>(ch))) : ch);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

Vocabulary build_vocab(const std::vector<TokenizedPair>& pairs, size_t max_size) {
    if (pairs.empty()) throw ConfigError("empty corpus");
    if (max_size <= kReservedTokens) {
        // Capacity for reserved tokens only: everything maps to UNK.
        if (max_size < kReservedTokens) throw ConfigError("vocabulary size below reserved minimum");
        return Vocabulary();
    }
    std::unordered_map<std::string, size_t> freq;
    for (const TokenizedPair& p : pairs) {
        for (const auto& w : p.message) ++freq[w];
        for (const auto& w : p.response) ++freq[w];
    }
    std::vector<std::pair<std::string, size_t>> by_freq(freq.begin(), freq.end());
    std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    const size_t cap = max_size - kReservedTokens;
    for (size_t i = 0; i < by_freq.size() && i < cap; ++i) {
        v.add(by_freq[i].first);
    }
    return v;
}

std::vector<TokenizedPair> filter_short(const std::vector<TokenizedPair>& pairs, size_t min_len) {
    std::vector<TokenizedPair> out;
    out.reserve(pairs.size());
    for (const TokenizedPair& p : pairs) {
        if (p.response.size() >= min_len) out.push_back(p);
    }
    return out;
}

Utterance encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                 size_t max_len, size_t* truncated) {
    Utterance u;
    size_t n = tokens.size();
    if (n > max_len) {
        n = max_len;
        if (truncated) ++*truncated;
    }
    u.ids.reserve(n);
    for (size_t i = 0; i < n; ++i) u.ids.push_back(vocab.id_of(tokens[i]));
    return u;
}

std::vector<std::string> decode(const Utterance& u, const Vocabulary& vocab) {
    std::vector<std::string> words;
    words.reserve(u.ids.size());
    for (int id : u.ids) words.push_back(vocab.word_of(id));
    return words;
}

std::string decode_text(const Utterance& u, const Vocabulary& vocab) {
    std::string out;
    for (size_t i = 0; i < u.ids.size(); ++i) {
        if (i) out += ' ';
        out += vocab.word_of(u.ids[i]);
    }
    return out;
}

SplitResult split(const std::vector<TokenizedPair>& pairs, uint64_t seed,
                  size_t n_valid, size_t n_test) {
    // Distinct groups in first-appearance order.
    std::vector<size_t> groups;
    std::unordered_map<size_t, size_t> seen;
    for (const TokenizedPair& p : pairs) {
        if (seen.emplace(p.group, groups.size()).second) groups.push_back(p.group);
    }
    if (n_valid + n_test >= groups.size()) {
        throw ConfigError("split: need more than " + std::to_string(n_valid + n_test) +
                          " distinct messages, have " + std::to_string(groups.size()));
    }
    Rng rng(seed);
    std::vector<size_t> order = rng.permutation(groups.size());

    enum class Part : uint8_t { Train, Valid, Test };
    std::unordered_map<size_t, Part> assign;
    for (size_t i = 0; i < order.size(); ++i) {
        Part part = i < n_valid                ? Part::Valid
                    : i < n_valid + n_test     ? Part::Test
                                               : Part::Train;
        assign.emplace(groups[order[i]], part);
    }

    SplitResult out;
    for (const TokenizedPair& p : pairs) {
        switch (assign.at(p.group)) {
            case Part::Train: out.train.push_back(p); break;
            case Part::Valid: out.valid.push_back(p); break;
            case Part::Test: out.test.push_back(p); break;
        }
    }
    return out;
}

std::vector<TokenizedPair> load_corpus_jsonl(const std::string& path, bool lowercase) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open corpus: " + path);
    std::vector<TokenizedPair> pairs;
    std::string line;
    size_t line_no = 0;
    size_t group = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.contains("message") || !obj.contains("responses") || !obj["responses"].is_array()) {
            throw ConfigError("corpus line " + std::to_string(line_no) +
                              ": expected {\"message\": ..., \"responses\": [...]}");
        }
        std::vector<std::string> msg = tokenize(obj["message"].get<std::string>(), lowercase);
        for (const auto& r : obj["responses"]) {
            TokenizedPair p;
            p.message = msg;
            p.response = tokenize(r.get<std::string>(), lowercase);
            p.group = group;
            pairs.push_back(std::move(p));
        }
        ++group;
    }
    return pairs;
}

} // namespace reat
