#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "reat/corpus.hpp"

namespace reat {

// One retrieval unit: a message with every response observed for it.
struct Document {
    int doc_id = 0;
    Utterance message;
    std::vector<Utterance> responses;
};

struct Posting {
    int doc_id;
    uint32_t tf;
};

struct SearchHit {
    int doc_id;
    double score;
};

// Inverted index over document *messages*. Immutable once built; reads are
// safe concurrently.
class InvertedIndex {
public:
    static InvertedIndex build(std::vector<Document> docs);

    size_t doc_count() const { return docs_.size(); }
    const Document& doc(int id) const { return docs_.at(static_cast<size_t>(id)); }
    const std::vector<Document>& docs() const { return docs_; }

    // Document frequency of a term (0 when unindexed).
    size_t df(int term) const;
    const std::vector<Posting>* postings(int term) const;

    // ln((doc_count + 1) / (df + 1)) + 1; strictly positive.
    double idf(int term) const;

    // Count of non-reserved message tokens per document.
    size_t message_length(int doc_id) const { return msg_lengths_.at(static_cast<size_t>(doc_id)); }

    // Top-K documents by TF-IDF cosine between query message and document
    // message. Sorted by descending score, ties by ascending doc_id. Queries
    // with no usable terms return nothing.
    std::vector<SearchHit> search(const Utterance& query, size_t k) const;

    // Binary persistence, magic "REATIDX1". vocab_size is recorded so loads
    // can be validated against the vocabulary in use.
    void save(const std::string& path, size_t vocab_size) const;
    static InvertedIndex load(const std::string& path, size_t* vocab_size = nullptr);

private:
    std::vector<Document> docs_;
    std::unordered_map<int, std::vector<Posting>> postings_;
    std::vector<size_t> msg_lengths_;
};

// Merges all pairs with an identical (encoded) message into one Document.
// Responses are deduplicated, first-seen order kept.
std::vector<Document> merge_documents(const std::vector<Pair>& pairs);

struct ScoredResponse {
    int doc_id;
    size_t position;  // index within the document's response list
    double score;
    const Utterance* response;
};

// Lexical stand-in for a learned response ranker:
//   score = lambda * cos(query, response) + (1 - lambda) * cos(query, source message)
// with plain term-count vectors. Sorted descending, ties by (doc_id, position).
std::vector<ScoredResponse> rank_responses(const Utterance& query,
                                           const std::vector<const Document*>& docs,
                                           double lambda);

struct CandidateSet {
    Utterance message;
    std::vector<Utterance> candidates;  // exactly N, scores non-increasing
    std::vector<double> scores;
    bool fallback = false;  // true when nothing was retrievable
};

// Ground truth to keep out of a training example's candidates.
struct ExcludedTruth {
    Utterance message;
    Utterance response;
};

// search(K) -> drop the query's own document (and any response equal to the
// ground truth) when exclusion is given -> rank -> take N. Underfull sets are
// filled by duplicating the best candidate; empty ones fall back to N copies
// of a single-UNK utterance with the fallback flag set.
CandidateSet top_n_candidates(const InvertedIndex& index, const Utterance& message,
                              size_t n, size_t k, double lambda,
                              const std::optional<ExcludedTruth>& exclude);

// Candidate dump records: {"message", "candidates", "scores", "fallback"}.
void save_candidates_jsonl(const std::string& path, const std::vector<CandidateSet>& sets,
                           const Vocabulary& vocab);
std::vector<CandidateSet> load_candidates_jsonl(const std::string& path, const Vocabulary& vocab,
                                                size_t max_len);

} // namespace reat
