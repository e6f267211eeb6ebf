#include "reat/evaluation.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace reat {

DistResult dist_k(const std::vector<Utterance>& responses, size_t k) {
    if (k != 1 && k != 2) throw ConfigError("dist_k supports k in {1, 2}");
    if (responses.empty()) throw ConfigError("dist_k over an empty response set");
    // Token ids fit in 32 bits, so a k-gram packs exactly into one uint64.
    std::unordered_set<uint64_t> grams;
    size_t total_words = 0;
    for (const Utterance& r : responses) {
        total_words += r.length();
        if (r.length() < k) continue;
        for (size_t i = 0; i + k <= r.length(); ++i) {
            uint64_t key = static_cast<uint32_t>(r.ids[i]);
            if (k == 2) key = (key << 32) | static_cast<uint32_t>(r.ids[i + 1]);
            grams.insert(key);
        }
    }
    DistResult out;
    out.distinct = grams.size();
    out.total_words = total_words;
    out.ratio = total_words == 0 ? 0.0
                                 : static_cast<double>(out.distinct) / static_cast<double>(total_words);
    return out;
}

double originality(const std::vector<Utterance>& responses,
                   const std::vector<Utterance>& training_responses) {
    if (responses.empty()) return 1.0;
    std::set<std::vector<int>> seen;
    for (const Utterance& r : training_responses) seen.insert(r.ids);
    size_t novel = 0;
    for (const Utterance& r : responses) {
        if (!seen.count(r.ids)) ++novel;
    }
    return static_cast<double>(novel) / static_cast<double>(responses.size());
}

MetricsReport compute_metrics(const std::vector<Utterance>& responses,
                              const std::vector<Utterance>& training_responses) {
    MetricsReport rep;
    DistResult d1 = dist_k(responses, 1);
    DistResult d2 = dist_k(responses, 2);
    rep.distinct_unigrams = d1.distinct;
    rep.distinct_bigrams = d2.distinct;
    rep.total_words = d1.total_words;
    rep.dist1 = d1.ratio;
    rep.dist2 = d2.ratio;
    rep.originality = originality(responses, training_responses);
    return rep;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json obj;
    obj["distinct_unigrams"] = distinct_unigrams;
    obj["dist1"] = dist1;
    obj["distinct_bigrams"] = distinct_bigrams;
    obj["dist2"] = dist2;
    obj["total_words"] = total_words;
    obj["originality"] = originality;
    if (accuracy) obj["accuracy"] = *accuracy;
    return obj.dump(2);
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(10) << "# of UNI" << std::setw(9) << "Dist-1" << std::setw(10)
       << "# of BI" << std::setw(9) << "Dist-2" << std::setw(8) << "Origin" << "\n";
    os << std::left << std::setw(10) << distinct_unigrams << std::setw(9) << std::fixed
       << std::setprecision(3) << dist1 << std::setw(10) << distinct_bigrams << std::setw(9)
       << dist2 << std::setw(8) << originality << "\n";
    return os.str();
}

std::vector<ProbeExample> build_probe_sampled(Generator& gen,
                                              const std::vector<TrainingExample>& examples,
                                              uint64_t seed) {
    Rng rng(seed);
    std::vector<ProbeExample> probe;
    probe.reserve(examples.size() * 2);
    for (const TrainingExample& ex : examples) {
        probe.push_back({ex.message, ex.response, ex.candidates, true});
        nn::Tape t;
        SampleResult s = gen.sample(t, ex.message, ex.candidates, rng);
        if (s.response.empty()) {
            nn::Tape t2;
            s = gen.sample(t2, ex.message, ex.candidates, rng);
        }
        if (s.response.empty()) s.response.ids = {kUnkId};
        probe.push_back({ex.message, std::move(s.response), ex.candidates, false});
    }
    return probe;
}

std::vector<ProbeExample> build_probe_corrupted(const std::vector<TrainingExample>& examples,
                                                double fraction) {
    if (fraction < 0.0 || fraction > 1.0) throw ConfigError("corruption fraction must be in [0, 1]");
    std::vector<ProbeExample> probe;
    probe.reserve(examples.size() * 2);
    for (const TrainingExample& ex : examples) {
        probe.push_back({ex.message, ex.response, ex.candidates, true});

        Utterance corrupted = ex.response;
        const Utterance& source = ex.candidates.at(0);
        const size_t len = corrupted.length();
        size_t n_replace = static_cast<size_t>(std::ceil(fraction * static_cast<double>(len)));
        // Even positions first, then odd, so partial corruption interleaves
        // candidate tokens with the original response.
        size_t replaced = 0;
        for (size_t pass = 0; pass < 2 && replaced < n_replace; ++pass) {
            for (size_t j = pass; j < len && replaced < n_replace; j += 2) {
                corrupted.ids[j] = source.ids[replaced % source.length()];
                ++replaced;
            }
        }
        probe.push_back({ex.message, std::move(corrupted), ex.candidates, false});
    }
    return probe;
}

double disc_accuracy(Discriminator& disc, const std::vector<ProbeExample>& probe) {
    if (probe.empty()) throw ConfigError("empty probe dataset");
    size_t correct = 0;
    for (const ProbeExample& ex : probe) {
        double p = disc.classify(ex.response, ex.message, ex.candidates);
        bool predicted_human = p > 0.5;
        if (predicted_human == ex.positive) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probe.size());
}

void save_probe_jsonl(const std::string& path, const std::vector<ProbeExample>& probe,
                      const Vocabulary& vocab) {
    std::ofstream os(path);
    if (!os) throw MissingInputError("cannot open probe file for writing: " + path);
    for (const ProbeExample& ex : probe) {
        nlohmann::ordered_json obj;
        obj["message"] = decode_text(ex.message, vocab);
        obj["response"] = decode_text(ex.response, vocab);
        nlohmann::ordered_json cands = nlohmann::ordered_json::array();
        for (const Utterance& c : ex.candidates) cands.push_back(decode_text(c, vocab));
        obj["candidates"] = std::move(cands);
        obj["label"] = ex.positive ? 1 : 0;
        os << obj.dump() << "\n";
    }
}

std::vector<ProbeExample> load_probe_jsonl(const std::string& path, const Vocabulary& vocab,
                                           size_t max_len) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open probe file: " + path);
    std::vector<ProbeExample> probe;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("probe file line " + std::to_string(line_no) + ": " + e.what());
        }
        ProbeExample ex;
        ex.message = encode(tokenize(obj.at("message").get<std::string>(), false), vocab, max_len);
        ex.response = encode(tokenize(obj.at("response").get<std::string>(), false), vocab, max_len);
        for (const auto& c : obj.at("candidates")) {
            ex.candidates.push_back(encode(tokenize(c.get<std::string>(), false), vocab, max_len));
        }
        ex.positive = obj.at("label").get<int>() == 1;
        probe.push_back(std::move(ex));
    }
    return probe;
}

} // namespace reat
