#include "reat/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace reat {

namespace {

bool is_reserved(int id) { return id >= 0 && id < static_cast<int>(kReservedTokens); }

// Term-frequency map over non-reserved tokens.
std::map<int, uint32_t> term_counts(const Utterance& u) {
    std::map<int, uint32_t> tf;
    for (int id : u.ids) {
        if (!is_reserved(id)) ++tf[id];
    }
    return tf;
}

double count_cosine(const std::map<int, uint32_t>& a, const std::map<int, uint32_t>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [term, tf] : a) {
        na += static_cast<double>(tf) * tf;
        auto it = b.find(term);
        if (it != b.end()) dot += static_cast<double>(tf) * it->second;
    }
    for (const auto& [term, tf] : b) nb += static_cast<double>(tf) * tf;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

std::vector<Document> merge_documents(const std::vector<Pair>& pairs) {
    std::vector<Document> docs;
    std::map<std::vector<int>, size_t> by_message;
    for (const Pair& p : pairs) {
        auto [it, inserted] = by_message.emplace(p.message.ids, docs.size());
        if (inserted) {
            Document d;
            d.doc_id = static_cast<int>(docs.size());
            d.message = p.message;
            docs.push_back(std::move(d));
        }
        Document& d = docs[it->second];
        bool dup = false;
        for (const Utterance& r : d.responses) {
            if (r == p.response) {
                dup = true;
                break;
            }
        }
        if (!dup) d.responses.push_back(p.response);
    }
    return docs;
}

InvertedIndex InvertedIndex::build(std::vector<Document> docs) {
    if (docs.empty()) throw ConfigError("cannot build index over empty document set");
    InvertedIndex idx;
    idx.docs_ = std::move(docs);
    idx.msg_lengths_.resize(idx.docs_.size(), 0);
    for (const Document& d : idx.docs_) {
        size_t len = 0;
        for (const auto& [term, tf] : term_counts(d.message)) {
            idx.postings_[term].push_back({d.doc_id, tf});
            len += tf;
        }
        idx.msg_lengths_[static_cast<size_t>(d.doc_id)] = len;
    }
    // doc_ids were appended in ascending order, so postings are sorted already;
    // keep the sort as the format invariant regardless of build order.
    for (auto& [term, plist] : idx.postings_) {
        std::sort(plist.begin(), plist.end(),
                  [](const Posting& a, const Posting& b) { return a.doc_id < b.doc_id; });
    }
    return idx;
}

size_t InvertedIndex::df(int term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

const std::vector<Posting>* InvertedIndex::postings(int term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

double InvertedIndex::idf(int term) const {
    return std::log(static_cast<double>(doc_count() + 1) / static_cast<double>(df(term) + 1)) + 1.0;
}

std::vector<SearchHit> InvertedIndex::search(const Utterance& query, size_t k) const {
    const std::map<int, uint32_t> qtf = term_counts(query);
    if (qtf.empty()) return {};

    double qnorm_sq = 0.0;
    for (const auto& [term, tf] : qtf) {
        double w = static_cast<double>(tf) * idf(term);
        qnorm_sq += w * w;
    }

    // Accumulate dot products document by document via the postings lists.
    std::unordered_map<int, double> dots;
    for (const auto& [term, tf] : qtf) {
        const auto* plist = postings(term);
        if (!plist) continue;
        const double w_query = static_cast<double>(tf) * idf(term);
        for (const Posting& p : *plist) {
            double w_doc = static_cast<double>(p.tf) * idf(term);
            dots[p.doc_id] += w_query * w_doc;
        }
    }
    if (dots.empty()) return {};

    std::vector<SearchHit> hits;
    hits.reserve(dots.size());
    for (const auto& [doc_id, dot] : dots) {
        double dnorm_sq = 0.0;
        for (const auto& [term, tf] : term_counts(docs_[static_cast<size_t>(doc_id)].message)) {
            double w = static_cast<double>(tf) * idf(term);
            dnorm_sq += w * w;
        }
        hits.push_back({doc_id, dot / (std::sqrt(qnorm_sq) * std::sqrt(dnorm_sq))});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::vector<ScoredResponse> rank_responses(const Utterance& query,
                                           const std::vector<const Document*>& docs,
                                           double lambda) {
    const auto qtf = term_counts(query);
    std::vector<ScoredResponse> out;
    for (const Document* d : docs) {
        const auto mtf = term_counts(d->message);
        const double msg_sim = count_cosine(qtf, mtf);
        for (size_t i = 0; i < d->responses.size(); ++i) {
            double resp_sim = count_cosine(qtf, term_counts(d->responses[i]));
            out.push_back({d->doc_id, i, lambda * resp_sim + (1.0 - lambda) * msg_sim,
                           &d->responses[i]});
        }
    }
    std::sort(out.begin(), out.end(), [](const ScoredResponse& a, const ScoredResponse& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
        return a.position < b.position;
    });
    return out;
}

CandidateSet top_n_candidates(const InvertedIndex& index, const Utterance& message,
                              size_t n, size_t k, double lambda,
                              const std::optional<ExcludedTruth>& exclude) {
    CandidateSet set;
    set.message = message;

    std::vector<SearchHit> hits = index.search(message, k);
    std::vector<const Document*> docs;
    for (const SearchHit& h : hits) {
        const Document& d = index.doc(h.doc_id);
        if (exclude && d.message == exclude->message) continue;
        docs.push_back(&d);
    }

    std::vector<ScoredResponse> ranked = rank_responses(message, docs, lambda);
    for (const ScoredResponse& r : ranked) {
        if (set.candidates.size() == n) break;
        if (exclude && *r.response == exclude->response) continue;
        set.candidates.push_back(*r.response);
        set.scores.push_back(r.score);
    }

    if (set.candidates.empty()) {
        set.fallback = true;
        Utterance unk;
        unk.ids = {kUnkId};
        for (size_t i = 0; i < n; ++i) {
            set.candidates.push_back(unk);
            set.scores.push_back(0.0);
        }
        return set;
    }
    // Duplicates of the top candidate sit right behind it so the score list
    // stays non-increasing.
    while (set.candidates.size() < n) {
        set.candidates.insert(set.candidates.begin() + 1, set.candidates.front());
        set.scores.insert(set.scores.begin() + 1, set.scores.front());
    }
    return set;
}

namespace {

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_utterance(std::ostream& os, const Utterance& u) {
    write_u32(os, static_cast<uint32_t>(u.ids.size()));
    for (int id : u.ids) write_u32(os, static_cast<uint32_t>(id));
}

Utterance read_utterance(std::istream& is) {
    Utterance u;
    uint32_t n = read_u32(is);
    u.ids.reserve(n);
    for (uint32_t i = 0; i < n; ++i) u.ids.push_back(static_cast<int>(read_u32(is)));
    return u;
}

} // namespace

void InvertedIndex::save(const std::string& path, size_t vocab_size) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw MissingInputError("cannot open index for writing: " + path);
    os.write("REATIDX1", 8);
    write_u32(os, static_cast<uint32_t>(vocab_size));
    write_u32(os, static_cast<uint32_t>(docs_.size()));
    for (const Document& d : docs_) {
        write_utterance(os, d.message);
        write_u32(os, static_cast<uint32_t>(d.responses.size()));
        for (const Utterance& r : d.responses) write_utterance(os, r);
    }
    // Postings written in ascending term order for byte-stable output.
    std::map<int, const std::vector<Posting>*> ordered;
    for (const auto& [term, plist] : postings_) ordered.emplace(term, &plist);
    write_u32(os, static_cast<uint32_t>(ordered.size()));
    for (const auto& [term, plist] : ordered) {
        write_u32(os, static_cast<uint32_t>(term));
        write_u32(os, static_cast<uint32_t>(plist->size()));
        for (const Posting& p : *plist) {
            write_u32(os, static_cast<uint32_t>(p.doc_id));
            write_u32(os, p.tf);
        }
    }
    if (!os) throw MissingInputError("failed writing index: " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path, size_t* vocab_size) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open index: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "REATIDX1", 8) != 0) throw ConfigError("bad index magic in " + path);
    uint32_t vs = read_u32(is);
    if (vocab_size) *vocab_size = vs;
    uint32_t n_docs = read_u32(is);
    InvertedIndex idx;
    idx.docs_.reserve(n_docs);
    idx.msg_lengths_.resize(n_docs, 0);
    for (uint32_t i = 0; i < n_docs; ++i) {
        Document d;
        d.doc_id = static_cast<int>(i);
        d.message = read_utterance(is);
        uint32_t n_resp = read_u32(is);
        for (uint32_t r = 0; r < n_resp; ++r) d.responses.push_back(read_utterance(is));
        size_t len = 0;
        for (const auto& [term, tf] : term_counts(d.message)) len += tf;
        idx.msg_lengths_[i] = len;
        idx.docs_.push_back(std::move(d));
    }
    uint32_t n_terms = read_u32(is);
    for (uint32_t t = 0; t < n_terms; ++t) {
        int term = static_cast<int>(read_u32(is));
        uint32_t df = read_u32(is);
        std::vector<Posting> plist;
        plist.reserve(df);
        for (uint32_t i = 0; i < df; ++i) {
            Posting p;
            p.doc_id = static_cast<int>(read_u32(is));
            p.tf = read_u32(is);
            plist.push_back(p);
        }
        idx.postings_.emplace(term, std::move(plist));
    }
    if (!is) throw ConfigError("truncated index: " + path);
    return idx;
}

void save_candidates_jsonl(const std::string& path, const std::vector<CandidateSet>& sets,
                           const Vocabulary& vocab) {
    std::ofstream os(path);
    if (!os) throw MissingInputError("cannot open candidate file for writing: " + path);
    for (const CandidateSet& s : sets) {
        nlohmann::ordered_json obj;
        obj["message"] = decode_text(s.message, vocab);
        nlohmann::ordered_json cands = nlohmann::ordered_json::array();
        for (const Utterance& c : s.candidates) cands.push_back(decode_text(c, vocab));
        obj["candidates"] = std::move(cands);
        obj["scores"] = s.scores;
        obj["fallback"] = s.fallback;
        os << obj.dump() << "\n";
    }
}

std::vector<CandidateSet> load_candidates_jsonl(const std::string& path, const Vocabulary& vocab,
                                                size_t max_len) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open candidate file: " + path);
    std::vector<CandidateSet> sets;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("candidate file line " + std::to_string(line_no) + ": " + e.what());
        }
        CandidateSet s;
        s.message = encode(tokenize(obj.at("message").get<std::string>(), false), vocab, max_len);
        for (const auto& c : obj.at("candidates")) {
            s.candidates.push_back(encode(tokenize(c.get<std::string>(), false), vocab, max_len));
        }
        s.scores = obj.at("scores").get<std::vector<double>>();
        s.fallback = obj.at("fallback").get<bool>();
        sets.push_back(std::move(s));
    }
    return sets;
}

} // namespace reat
