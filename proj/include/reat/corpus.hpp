#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "reat/errors.hpp"

namespace reat {

// Reserved vocabulary slots, in this fixed order.
constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kBosId = 2;
constexpr int kEosId = 3;
constexpr size_t kReservedTokens = 4;

// A vocabulary-encoded utterance. BOS/EOS are never stored; the decoder adds
// them at run time.
struct Utterance {
    std::vector<int> ids;

    size_t length() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
    bool operator==(const Utterance& o) const { return ids == o.ids; }
};

// One message-response pair at the token-surface stage (pre-encoding).
// `group` identifies the source message so splits keep all responses of a
// message together.
struct TokenizedPair {
    std::vector<std::string> message;
    std::vector<std::string> response;
    size_t group = 0;
};

// Encoded pair, same grouping.
struct Pair {
    Utterance message;
    Utterance response;
    size_t group = 0;
};

// One unit of generator/discriminator training: a pair with its retrieved
// candidate set attached.
struct TrainingExample {
    Utterance message;
    Utterance response;
    std::vector<Utterance> candidates;
};

class Vocabulary {
public:
    Vocabulary();

    // Word must be absent; appended with the next id.
    void add(const std::string& word);

    int id_of(const std::string& word) const;  // UNK id when unknown
    const std::string& word_of(int id) const;
    size_t size() const { return id_to_word_.size(); }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::unordered_map<std::string, int> word_to_id_;
    std::vector<std::string> id_to_word_;
};

// Whitespace tokenizer with optional lowercasing. Total: any input yields a
// (possibly empty) token list.
std::vector<std::string> tokenize(const std::string& text, bool lowercase);

// Most frequent surfaces across messages and responses, capped at
// max_size - 4 non-reserved entries. Ties break lexicographically.
Vocabulary build_vocab(const std::vector<TokenizedPair>& pairs, size_t max_size);

// Keeps pairs whose response has at least min_len tokens; order preserved.
std::vector<TokenizedPair> filter_short(const std::vector<TokenizedPair>& pairs, size_t min_len = 5);

// OOV surfaces map to UNK; sequences longer than max_len are truncated and
// counted in *truncated when given.
Utterance encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                 size_t max_len, size_t* truncated = nullptr);

std::vector<std::string> decode(const Utterance& u, const Vocabulary& vocab);
std::string decode_text(const Utterance& u, const Vocabulary& vocab);

struct SplitResult {
    std::vector<TokenizedPair> train;
    std::vector<TokenizedPair> valid;
    std::vector<TokenizedPair> test;
};

// Message-level split: every pair of a group lands in exactly one part.
// Deterministic for a given seed.
SplitResult split(const std::vector<TokenizedPair>& pairs, uint64_t seed,
                  size_t n_valid, size_t n_test);

// Corpus file: JSONL, one {"message": ..., "responses": [...]} object per
// line. Returns pairs in file order with group = line index.
std::vector<TokenizedPair> load_corpus_jsonl(const std::string& path, bool lowercase);

} // namespace reat
