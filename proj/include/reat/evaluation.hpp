#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reat/corpus.hpp"
#include "reat/discriminator.hpp"
#include "reat/generator.hpp"

namespace reat {

struct DistResult {
    size_t distinct = 0;
    size_t total_words = 0;
    double ratio = 0.0;
};

// Distinct k-grams pooled over all responses, normalized by the total word
// count (the same denominator for every k). k must be 1 or 2.
DistResult dist_k(const std::vector<Utterance>& responses, size_t k);

// Fraction of responses whose exact token-id sequence never occurs as a
// training response.
double originality(const std::vector<Utterance>& responses,
                   const std::vector<Utterance>& training_responses);

struct MetricsReport {
    size_t distinct_unigrams = 0;
    size_t distinct_bigrams = 0;
    size_t total_words = 0;
    double dist1 = 0.0;
    double dist2 = 0.0;
    double originality = 0.0;
    std::optional<double> accuracy;

    std::string to_json() const;
    // Aligned table with columns: # of UNI, Dist-1, # of BI, Dist-2, Origin.
    std::string to_table() const;
};

MetricsReport compute_metrics(const std::vector<Utterance>& responses,
                              const std::vector<Utterance>& training_responses);

// One frozen probe item for discriminator accuracy measurements.
struct ProbeExample {
    Utterance message;
    Utterance response;
    std::vector<Utterance> candidates;
    bool positive = false;  // true: human-written
};

// Negatives sampled from a generator, one per example (the standard probe).
std::vector<ProbeExample> build_probe_sampled(Generator& gen,
                                              const std::vector<TrainingExample>& examples,
                                              uint64_t seed);

// Negatives made by splicing candidate tokens into the human response:
// ceil(fraction * len) positions (even indices first) are overwritten with
// the top candidate's tokens, cycled. Deterministic.
std::vector<ProbeExample> build_probe_corrupted(const std::vector<TrainingExample>& examples,
                                                double fraction);

// Fraction of probe items classified correctly with the p > 0.5 rule; ties
// count as machine-generated.
double disc_accuracy(Discriminator& disc, const std::vector<ProbeExample>& probe);

void save_probe_jsonl(const std::string& path, const std::vector<ProbeExample>& probe,
                      const Vocabulary& vocab);
std::vector<ProbeExample> load_probe_jsonl(const std::string& path, const Vocabulary& vocab,
                                           size_t max_len);

} // namespace reat
