#include "reat/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace reat {

namespace {

// Cycles over the example set in shuffled order, reshuffling at each
// wrap-around. Batches never mix two passes.
class BatchStream {
public:
    BatchStream(const std::vector<TrainingExample>& examples, size_t batch_size, Rng& rng)
        : examples_(examples), batch_(std::min(batch_size, examples.size())), rng_(rng) {
        reshuffle();
    }

    std::vector<const TrainingExample*> next() {
        std::vector<const TrainingExample*> out;
        out.reserve(batch_);
        for (size_t i = 0; i < batch_; ++i) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back(&examples_[order_[pos_++]]);
        }
        return out;
    }

private:
    void reshuffle() {
        order_ = rng_.permutation(examples_.size());
        pos_ = 0;
    }

    const std::vector<TrainingExample>& examples_;
    size_t batch_;
    Rng& rng_;
    std::vector<size_t> order_;
    size_t pos_ = 0;
};

nn::AdamConfig adam_of(const TrainConfig& cfg) {
    nn::AdamConfig a;
    a.lr = cfg.lr;
    return a;
}

void log_line(std::ostream* log, const nlohmann::ordered_json& obj) {
    if (log) *log << obj.dump() << "\n";
}

} // namespace

Utterance sample_nonempty(Generator& gen, const Utterance& message,
                          const std::vector<Utterance>& candidates, Rng& rng) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        nn::Tape t;
        SampleResult s = gen.sample(t, message, candidates, rng);
        if (!s.response.empty()) return std::move(s.response);
    }
    Utterance unk;
    unk.ids = {kUnkId};
    return unk;
}

double mle_epoch(Generator& gen, const std::vector<TrainingExample>& examples,
                 const TrainConfig& cfg, Rng& rng) {
    if (examples.empty()) throw ConfigError("empty training set");
    std::vector<size_t> order = rng.permutation(examples.size());
    double total = 0.0;
    size_t done = 0;
    while (done < order.size()) {
        size_t batch_n = std::min(cfg.batch_size, order.size() - done);
        for (size_t b = 0; b < batch_n; ++b) {
            const TrainingExample& ex = examples[order[done + b]];
            nn::Tape t;
            nn::Var loss = gen.mle_loss(t, ex.message, ex.candidates, ex.response);
            total += t.scalar(loss);
            // Mean over the batch: scale each example's contribution.
            t.backward(nn::scale(loss, 1.0 / static_cast<double>(batch_n)));
        }
        gen.params().clip_grad_norm(cfg.clip_norm);
        gen.params().adam_step(adam_of(cfg));
        done += batch_n;
    }
    return total / static_cast<double>(order.size());
}

double mle_eval(Generator& gen, const std::vector<TrainingExample>& examples) {
    if (examples.empty()) throw ConfigError("empty evaluation set");
    double total = 0.0;
    for (const TrainingExample& ex : examples) {
        nn::Tape t;
        total += t.scalar(gen.mle_loss(t, ex.message, ex.candidates, ex.response));
    }
    return total / static_cast<double>(examples.size());
}

PretrainResult pretrain_generator(Generator& gen, const std::vector<TrainingExample>& train,
                                  const std::vector<TrainingExample>& valid, const TrainConfig& cfg,
                                  std::ostream* log) {
    if (train.empty()) throw ConfigError("empty training set");
    const std::vector<TrainingExample>& eval_set = valid.empty() ? train : valid;
    Rng rng(cfg.seed);

    nn::ParameterSet best = gen.params();
    double best_valid = std::numeric_limits<double>::infinity();
    size_t since_best = 0;
    PretrainResult out;

    for (size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        double train_loss = mle_epoch(gen, train, cfg, rng);
        double valid_loss = mle_eval(gen, eval_set);
        ++out.epochs_run;
        log_line(log, {{"phase", "pretrain_g"},
                       {"epoch", epoch},
                       {"train_loss", train_loss},
                       {"valid_loss", valid_loss}});
        if (valid_loss < best_valid) {
            best_valid = valid_loss;
            best = gen.params();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    gen.params().copy_from(best);
    out.best_valid_loss = best_valid;
    return out;
}

void pretrain_discriminator(Discriminator& disc, Generator& gen,
                            const std::vector<TrainingExample>& train, const TrainConfig& cfg,
                            std::ostream* log) {
    if (train.empty()) throw ConfigError("empty training set");
    Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL);
    for (size_t epoch = 0; epoch < cfg.d_pretrain_epochs; ++epoch) {
        std::vector<size_t> order = rng.permutation(train.size());
        double epoch_loss = 0.0;
        size_t batches = 0;
        size_t done = 0;
        while (done < order.size()) {
            size_t batch_n = std::min(cfg.batch_size, order.size() - done);
            std::vector<Utterance> negatives;
            negatives.reserve(batch_n);
            std::vector<DiscExample> pos, neg;
            for (size_t b = 0; b < batch_n; ++b) {
                const TrainingExample& ex = train[order[done + b]];
                negatives.push_back(sample_nonempty(gen, ex.message, ex.candidates, rng));
                pos.push_back({&ex.message, &ex.response, &ex.candidates});
            }
            for (size_t b = 0; b < batch_n; ++b) {
                const TrainingExample& ex = train[order[done + b]];
                neg.push_back({&ex.message, &negatives[b], &ex.candidates});
            }
            nn::Tape t;
            nn::Var loss = disc.loss(t, pos, neg);
            epoch_loss += t.scalar(loss);
            ++batches;
            t.backward(loss);
            disc.params().clip_grad_norm(cfg.clip_norm);
            disc.params().adam_step(adam_of(cfg));
            done += batch_n;
        }
        log_line(log, {{"phase", "pretrain_d"},
                       {"epoch", epoch},
                       {"loss", epoch_loss / static_cast<double>(batches)}});
    }
}

RlStats generator_rl_step(Generator& gen, const std::vector<const TrainingExample*>& batch,
                          const RewardFn& reward, const TrainConfig& cfg, Rng& rng,
                          double* baseline_state) {
    if (batch.empty()) throw ConfigError("empty RL batch");
    RlStats stats;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double reward_sum = 0.0;

    for (const TrainingExample* ex : batch) {
        // Sample once; one retry on an empty draw, then skip with a warning
        // counted in the stats.
        nn::Tape t;
        SampleResult s = gen.sample(t, ex->message, ex->candidates, rng);
        if (s.response.empty()) {
            nn::Tape t2;
            SampleResult retry = gen.sample(t2, ex->message, ex->candidates, rng);
            if (retry.response.empty()) {
                ++stats.skipped;
                continue;
            }
            // The retry's tape must be the one we differentiate.
            double r = reward(*ex, retry.response);
            reward_sum += r;
            double advantage = baseline_state && cfg.reward_baseline ? r - *baseline_state : r;
            nn::Var loss = nn::scale(retry.log_prob, -advantage * inv_n);
            stats.surrogate_loss += t2.scalar(loss);
            t2.backward(loss);
            ++stats.sampled;
            continue;
        }
        // Reward is a plain number: no gradient path into the discriminator.
        double r = reward(*ex, s.response);
        reward_sum += r;
        double advantage = baseline_state && cfg.reward_baseline ? r - *baseline_state : r;
        nn::Var loss = nn::scale(s.log_prob, -advantage * inv_n);
        stats.surrogate_loss += t.scalar(loss);
        t.backward(loss);
        ++stats.sampled;
    }

    gen.params().clip_grad_norm(cfg.clip_norm);
    gen.params().adam_step(adam_of(cfg));

    if (stats.sampled > 0) stats.mean_reward = reward_sum / static_cast<double>(stats.sampled);
    if (baseline_state && cfg.reward_baseline && stats.sampled > 0) {
        *baseline_state = cfg.baseline_momentum * *baseline_state +
                          (1.0 - cfg.baseline_momentum) * stats.mean_reward;
    }
    return stats;
}

double discriminator_step(Discriminator& disc, Generator& gen,
                          const std::vector<const TrainingExample*>& batch, const TrainConfig& cfg,
                          Rng& rng, size_t* negatives_generated, double* negatives_mean_prob) {
    if (batch.empty()) throw ConfigError("empty discriminator batch");
    std::vector<Utterance> negatives;
    negatives.reserve(batch.size());
    for (const TrainingExample* ex : batch) {
        negatives.push_back(sample_nonempty(gen, ex->message, ex->candidates, rng));
        if (negatives_generated) ++*negatives_generated;
    }
    std::vector<DiscExample> pos, neg;
    pos.reserve(batch.size());
    neg.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        pos.push_back({&batch[i]->message, &batch[i]->response, &batch[i]->candidates});
        neg.push_back({&batch[i]->message, &negatives[i], &batch[i]->candidates});
    }
    nn::Tape t;
    std::vector<double> neg_probs;
    nn::Var loss = disc.loss(t, pos, neg, &neg_probs);
    double value = t.scalar(loss);
    t.backward(loss);
    disc.params().clip_grad_norm(cfg.clip_norm);
    disc.params().adam_step(adam_of(cfg));
    if (negatives_mean_prob) {
        double total = 0.0;
        for (double p : neg_probs) total += p;
        *negatives_mean_prob = total / static_cast<double>(neg_probs.size());
    }
    return value;
}

AdvResult adversarial_train(Generator& gen, Discriminator& disc,
                            const std::vector<TrainingExample>& train,
                            const std::vector<ProbeExample>& probe, const TrainConfig& cfg,
                            const std::string& checkpoint_dir, std::ostream* log) {
    if (train.empty()) throw ConfigError("empty training set");
    Rng rng(cfg.seed + 0x2545f4914f6cdd1dULL);
    BatchStream g_stream(train, cfg.batch_size, rng);
    BatchStream d_stream(train, cfg.batch_size, rng);

    RewardFn reward = [&disc](const TrainingExample& ex, const Utterance& sampled) {
        return disc.classify(sampled, ex.message, ex.candidates);
    };

    const size_t effective_batch = std::min(cfg.batch_size, train.size());
    const size_t per_epoch = effective_batch * cfg.g_steps;
    const size_t blocks_per_epoch = std::max<size_t>(1, (train.size() + per_epoch - 1) / per_epoch);

    AdvResult out;
    double baseline = 0.0;
    size_t g_step_no = 0, d_step_no = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        try {
            for (size_t block = 0; block < blocks_per_epoch; ++block) {
                for (size_t gstep = 0; gstep < cfg.g_steps; ++gstep) {
                    RlStats stats = generator_rl_step(gen, g_stream.next(), reward, cfg, rng,
                                                      cfg.reward_baseline ? &baseline : nullptr);
                    ++out.gen_batches;
                    log_line(log, {{"phase", "g"},
                                   {"step", g_step_no++},
                                   {"loss", stats.surrogate_loss},
                                   {"reward_mean", stats.mean_reward}});
                }
                for (size_t dstep = 0; dstep < cfg.d_steps; ++dstep) {
                    double neg_mean = 0.0;
                    double loss = discriminator_step(disc, gen, d_stream.next(), cfg, rng,
                                                     &out.negatives_generated, &neg_mean);
                    ++out.disc_batches;
                    log_line(log, {{"phase", "d"},
                                   {"step", d_step_no++},
                                   {"loss", loss},
                                   {"reward_mean", neg_mean}});
                }
            }
        } catch (const NumericError&) {
            out.aborted = true;
            log_line(log, {{"phase", "abort"}, {"epoch", epoch}});
            break;
        }

        ++out.epochs_completed;
        double acc = probe.empty() ? 0.0 : disc_accuracy(disc, probe);
        out.probe_accuracy.push_back(acc);
        log_line(log, {{"phase", "epoch"}, {"epoch", epoch}, {"disc_probe_accuracy", acc}});

        if (!checkpoint_dir.empty()) {
            nn::Checkpoint ck;
            ck.add("generator", gen.params());
            ck.add("discriminator", disc.params());
            ck.save(checkpoint_dir + "/ckpt-epoch" + std::to_string(epoch) + ".bin");
        }
    }
    return out;
}

} // namespace reat
