#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "reat/corpus.hpp"
#include "reat/discriminator.hpp"
#include "reat/evaluation.hpp"
#include "reat/generator.hpp"

namespace reat {

struct TrainConfig {
    size_t batch_size = 64;
    double lr = 1e-4;
    size_t g_steps = 10;         // generator batches per alternation block
    size_t d_steps = 20;         // discriminator batches per alternation block
    size_t epochs = 5;           // adversarial epochs
    size_t pretrain_epochs = 50; // MLE pretraining cap; early stopping below
    size_t d_pretrain_epochs = 3;
    size_t patience = 3;
    uint64_t seed = 7;
    double clip_norm = 5.0;
    // Optional extension, off by default: subtract a moving-average reward
    // baseline from the raw reward before the policy-gradient update.
    bool reward_baseline = false;
    double baseline_momentum = 0.9;
};

// Reward for one sampled response; the adversarial loop plugs in the
// discriminator probability, tests may plug in anything else.
using RewardFn = std::function<double(const TrainingExample&, const Utterance& sampled)>;

// One sampled rollout with its reward and sequence log-probability.
struct RewardSample {
    Utterance response;
    double reward = 0.0;
    double log_prob = 0.0;
};

// A response from the generator that is safe to feed back into models:
// resamples once on an empty draw, then falls back to a single UNK token.
Utterance sample_nonempty(Generator& gen, const Utterance& message,
                          const std::vector<Utterance>& candidates, Rng& rng);

// One pass of teacher-forced MLE over shuffled batches. Returns mean loss.
double mle_epoch(Generator& gen, const std::vector<TrainingExample>& examples,
                 const TrainConfig& cfg, Rng& rng);

// Mean MLE loss without gradient updates.
double mle_eval(Generator& gen, const std::vector<TrainingExample>& examples);

struct PretrainResult {
    double best_valid_loss = 0.0;
    size_t epochs_run = 0;
};

// Adam on the MLE loss with early stopping: training stops after `patience`
// epochs without validation improvement and the best parameters are restored.
PretrainResult pretrain_generator(Generator& gen, const std::vector<TrainingExample>& train,
                                  const std::vector<TrainingExample>& valid, const TrainConfig& cfg,
                                  std::ostream* log = nullptr);

// Balanced batches: ground-truth responses as positives, fresh generator
// samples as negatives, one per positive.
void pretrain_discriminator(Discriminator& disc, Generator& gen,
                            const std::vector<TrainingExample>& train, const TrainConfig& cfg,
                            std::ostream* log = nullptr);

struct RlStats {
    double mean_reward = 0.0;
    double surrogate_loss = 0.0;  // -(mean of reward * log_prob) over the batch
    size_t sampled = 0;
    size_t skipped = 0;
};

// Policy-gradient step: sample y ~ G per example, weight the sequence
// log-likelihood gradient by the (detached) reward, one Adam step per batch.
RlStats generator_rl_step(Generator& gen, const std::vector<const TrainingExample*>& batch,
                          const RewardFn& reward, const TrainConfig& cfg, Rng& rng,
                          double* baseline_state = nullptr);

// Discriminator update against freshly sampled negatives from the current G.
// negatives_generated (when given) counts every negative drawn, so callers
// can verify nothing is cached between steps; negatives_mean_prob receives
// the mean probability the discriminator assigns those fresh samples (the
// reward the generator would currently observe).
double discriminator_step(Discriminator& disc, Generator& gen,
                          const std::vector<const TrainingExample*>& batch, const TrainConfig& cfg,
                          Rng& rng, size_t* negatives_generated = nullptr,
                          double* negatives_mean_prob = nullptr);

struct AdvResult {
    size_t epochs_completed = 0;
    size_t gen_batches = 0;
    size_t disc_batches = 0;
    size_t negatives_generated = 0;
    bool aborted = false;  // non-finite loss; last good checkpoint retained
    std::vector<double> probe_accuracy;  // one entry per completed epoch
};

// Alternating adversarial training. Per epoch, blocks of g_steps generator
// batches then d_steps discriminator batches sweep the shuffled training
// set; each epoch ends with a probe accuracy measurement and a checkpoint
// ckpt-epoch<k>.bin holding both parameter sets. checkpoint_dir may be empty
// to skip checkpointing (tests).
AdvResult adversarial_train(Generator& gen, Discriminator& disc,
                            const std::vector<TrainingExample>& train,
                            const std::vector<ProbeExample>& probe, const TrainConfig& cfg,
                            const std::string& checkpoint_dir, std::ostream* log = nullptr);

} // namespace reat
