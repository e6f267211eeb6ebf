// Command-line front end for the retrieval-enhanced adversarial dialogue
// trainer. Subcommands mirror the pipeline order: prepare, build-index,
// candidates, pretrain-gen, pretrain-disc, adv-train, generate, evaluate,
// disc-accuracy, chat.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reat/corpus.hpp"
#include "reat/evaluation.hpp"
#include "reat/retrieval.hpp"
#include "reat/run_config.hpp"
#include "reat/training.hpp"

namespace fs = std::filesystem;
using namespace reat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadConfig = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
    std::string out_dir;
    std::string config_file;
    std::vector<std::string> overrides;
};

RunConfig resolve_config(const CommonOpts& opts) {
    return opts.config_file.empty() ? RunConfig::from_overrides(opts.overrides)
                                    : RunConfig::from_file(opts.config_file, opts.overrides);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--out", opts.out_dir, "Artifact directory")->required();
    cmd->add_option("--config", opts.config_file, "Key-value config file");
    cmd->add_option("--set", opts.overrides, "Config override key=value (repeatable)");
}

std::string split_path(const std::string& out, const std::string& split) {
    return out + "/" + split + ".jsonl";
}

std::string candidates_path(const std::string& out, const std::string& split) {
    return out + "/candidates-" + split + ".jsonl";
}

void save_split_jsonl(const std::string& path, const std::vector<TokenizedPair>& pairs) {
    std::ofstream os(path);
    if (!os) throw MissingInputError("cannot open split file for writing: " + path);
    // Pairs of one message are contiguous; regroup into corpus format.
    size_t i = 0;
    while (i < pairs.size()) {
        nlohmann::ordered_json obj;
        std::string msg;
        for (size_t k = 0; k < pairs[i].message.size(); ++k) {
            if (k) msg += ' ';
            msg += pairs[i].message[k];
        }
        obj["message"] = msg;
        nlohmann::ordered_json responses = nlohmann::ordered_json::array();
        size_t group = pairs[i].group;
        for (; i < pairs.size() && pairs[i].group == group; ++i) {
            std::string resp;
            for (size_t k = 0; k < pairs[i].response.size(); ++k) {
                if (k) resp += ' ';
                resp += pairs[i].response[k];
            }
            responses.push_back(resp);
        }
        obj["responses"] = std::move(responses);
        os << obj.dump() << "\n";
    }
}

std::vector<TokenizedPair> load_split(const std::string& out, const std::string& split) {
    // Split files hold already-normalized tokens; re-tokenize verbatim.
    return load_corpus_jsonl(split_path(out, split), /*lowercase=*/false);
}

std::vector<Pair> encode_pairs(const std::vector<TokenizedPair>& pairs, const Vocabulary& vocab,
                               size_t max_len) {
    size_t truncated = 0;
    std::vector<Pair> out;
    out.reserve(pairs.size());
    for (const TokenizedPair& p : pairs) {
        Pair e;
        e.message = encode(p.message, vocab, max_len, &truncated);
        e.response = encode(p.response, vocab, max_len, &truncated);
        e.group = p.group;
        out.push_back(std::move(e));
    }
    if (truncated > 0) {
        std::cerr << "warning: truncated " << truncated << " utterances to max_len\n";
    }
    return out;
}

Vocabulary load_vocab(const std::string& out) {
    return Vocabulary::load(out + "/vocab.txt");
}

std::vector<TrainingExample> load_examples(const std::string& out, const std::string& split,
                                           const Vocabulary& vocab, const RunConfig& cfg) {
    std::vector<Pair> pairs = encode_pairs(load_split(out, split), vocab, cfg.max_len);
    std::vector<CandidateSet> cands = load_candidates_jsonl(candidates_path(out, split), vocab, cfg.max_len);
    if (pairs.size() != cands.size()) {
        throw ConfigError("candidate file out of sync with split '" + split + "': " +
                          std::to_string(cands.size()) + " candidate sets for " +
                          std::to_string(pairs.size()) + " pairs; re-run the candidates command");
    }
    std::vector<TrainingExample> out_examples;
    out_examples.reserve(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        out_examples.push_back({pairs[i].message, pairs[i].response, cands[i].candidates});
    }
    return out_examples;
}

Generator load_generator(const std::string& ckpt_path, const RunConfig& cfg) {
    Generator gen(cfg.generator_config(), cfg.seed);
    nn::Checkpoint::load(ckpt_path).load_into("generator", gen.params());
    return gen;
}

// Discriminator checkpoints are tagged by architecture: "discriminator" for
// the candidate-conditioned model, "discriminator-nocand" for the
// candidate-free variant.
Discriminator load_discriminator(const std::string& ckpt_path, const RunConfig& cfg) {
    nn::Checkpoint ck = nn::Checkpoint::load(ckpt_path);
    if (ck.has("discriminator")) {
        Discriminator disc(cfg.discriminator_config(true), cfg.seed);
        ck.load_into("discriminator", disc.params());
        return disc;
    }
    if (ck.has("discriminator-nocand")) {
        Discriminator disc(cfg.discriminator_config(false), cfg.seed);
        ck.load_into("discriminator-nocand", disc.params());
        return disc;
    }
    throw ConfigError("no discriminator parameter set in " + ckpt_path);
}

void save_single(const std::string& path, const std::string& tag, const nn::ParameterSet& ps) {
    nn::Checkpoint ck;
    ck.add(tag, ps);
    ck.save(path);
}

int cmd_prepare(const CommonOpts& opts, const std::string& corpus_path) {
    RunConfig cfg = resolve_config(opts);
    fs::create_directories(opts.out_dir);

    auto pairs = load_corpus_jsonl(corpus_path, cfg.lowercase);
    auto kept = filter_short(pairs, cfg.min_response_len);
    SplitResult parts = split(kept, cfg.seed, cfg.n_valid, cfg.n_test);
    Vocabulary vocab = build_vocab(parts.train, cfg.vocab_size);

    vocab.save(opts.out_dir + "/vocab.txt");
    save_split_jsonl(split_path(opts.out_dir, "train"), parts.train);
    save_split_jsonl(split_path(opts.out_dir, "valid"), parts.valid);
    save_split_jsonl(split_path(opts.out_dir, "test"), parts.test);
    {
        std::ofstream os(opts.out_dir + "/run-config.txt");
        os << cfg.to_string();
    }
    std::cout << "pairs: " << pairs.size() << " loaded, " << kept.size() << " after length filter\n"
              << "split: " << parts.train.size() << " train / " << parts.valid.size() << " valid / "
              << parts.test.size() << " test pairs\n"
              << "vocab: " << vocab.size() << " entries\n";
    return kExitOk;
}

int cmd_build_index(const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    std::vector<Pair> train = encode_pairs(load_split(opts.out_dir, "train"), vocab, cfg.max_len);
    std::vector<Document> docs = merge_documents(train);
    InvertedIndex index = InvertedIndex::build(std::move(docs));
    index.save(opts.out_dir + "/index.bin", vocab.size());
    std::cout << "index: " << index.doc_count() << " documents\n";
    return kExitOk;
}

int cmd_candidates(const CommonOpts& opts, const std::string& which) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    size_t index_vocab = 0;
    InvertedIndex index = InvertedIndex::load(opts.out_dir + "/index.bin", &index_vocab);
    if (index_vocab != vocab.size()) {
        throw ConfigError("index was built with a different vocabulary (" +
                          std::to_string(index_vocab) + " vs " + std::to_string(vocab.size()) + ")");
    }

    std::vector<std::string> splits;
    if (which == "all") splits = {"train", "valid", "test"};
    else splits = {which};

    for (const std::string& split_name : splits) {
        std::vector<Pair> pairs = encode_pairs(load_split(opts.out_dir, split_name), vocab, cfg.max_len);
        const bool exclude_self = split_name == "train";
        std::vector<CandidateSet> sets;
        sets.reserve(pairs.size());
        size_t fallbacks = 0;
        for (const Pair& p : pairs) {
            std::optional<ExcludedTruth> exclusion;
            if (exclude_self) exclusion = ExcludedTruth{p.message, p.response};
            CandidateSet set = top_n_candidates(index, p.message, cfg.n_candidates, cfg.retrieval_k,
                                                cfg.lambda, exclusion);
            if (set.fallback) ++fallbacks;
            sets.push_back(std::move(set));
        }
        save_candidates_jsonl(candidates_path(opts.out_dir, split_name), sets, vocab);
        std::cout << "candidates[" << split_name << "]: " << sets.size() << " sets, " << fallbacks
                  << " fallbacks\n";
    }
    return kExitOk;
}

int cmd_pretrain_gen(const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    auto train = load_examples(opts.out_dir, "train", vocab, cfg);
    auto valid = load_examples(opts.out_dir, "valid", vocab, cfg);

    Generator gen(cfg.generator_config(), cfg.seed);
    std::ofstream log(opts.out_dir + "/pretrain-gen.log.jsonl");
    PretrainResult res = pretrain_generator(gen, train, valid, cfg.train_config(), &log);
    save_single(opts.out_dir + "/gen-pretrain.bin", "generator", gen.params());
    std::cout << "pretrain-gen: " << res.epochs_run << " epochs, best valid loss "
              << res.best_valid_loss << "\n";
    return kExitOk;
}

int cmd_pretrain_disc(const CommonOpts& opts, const std::string& gen_ckpt) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    auto train = load_examples(opts.out_dir, "train", vocab, cfg);

    std::string gen_path = gen_ckpt.empty() ? opts.out_dir + "/gen-pretrain.bin" : gen_ckpt;
    Generator gen = load_generator(gen_path, cfg);
    Discriminator disc(cfg.discriminator_config(true), cfg.seed);

    std::ofstream log(opts.out_dir + "/pretrain-disc.log.jsonl");
    pretrain_discriminator(disc, gen, train, cfg.train_config(), &log);
    save_single(opts.out_dir + "/disc-pretrain.bin", "discriminator", disc.params());
    std::cout << "pretrain-disc: done\n";
    return kExitOk;
}

int cmd_adv_train(const CommonOpts& opts, const std::string& gen_ckpt, const std::string& disc_ckpt) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    auto train = load_examples(opts.out_dir, "train", vocab, cfg);
    auto valid = load_examples(opts.out_dir, "valid", vocab, cfg);

    std::string gen_path = gen_ckpt.empty() ? opts.out_dir + "/gen-pretrain.bin" : gen_ckpt;
    std::string disc_path = disc_ckpt.empty() ? opts.out_dir + "/disc-pretrain.bin" : disc_ckpt;
    Generator gen = load_generator(gen_path, cfg);
    Discriminator disc = load_discriminator(disc_path, cfg);

    // Held-out probe, frozen before adversarial updates begin.
    auto probe = build_probe_sampled(gen, valid, cfg.seed + 11);

    std::ofstream log(opts.out_dir + "/adv-train.log.jsonl");
    AdvResult res = adversarial_train(gen, disc, train, probe, cfg.train_config(), opts.out_dir, &log);
    std::cout << "adv-train: " << res.epochs_completed << " epochs, " << res.gen_batches
              << " generator batches, " << res.disc_batches << " discriminator batches\n";
    if (res.aborted) {
        std::cerr << "adv-train: aborted on non-finite loss; last checkpoint retained\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int cmd_generate(const CommonOpts& opts, const std::string& ckpt, const std::string& split_name) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    std::vector<Pair> pairs = encode_pairs(load_split(opts.out_dir, split_name), vocab, cfg.max_len);
    auto cands = load_candidates_jsonl(candidates_path(opts.out_dir, split_name), vocab, cfg.max_len);
    if (pairs.size() != cands.size()) {
        throw ConfigError("candidate file out of sync with split '" + split_name + "'");
    }
    Generator gen = load_generator(ckpt, cfg);

    std::string out_path = opts.out_dir + "/generated-" + split_name + ".jsonl";
    std::ofstream os(out_path);
    if (!os) throw MissingInputError("cannot open output: " + out_path);

    // One response per distinct message.
    size_t generated = 0;
    std::optional<size_t> last_group;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (last_group && pairs[i].group == *last_group) continue;
        last_group = pairs[i].group;
        BeamResult res = gen.beam_search(pairs[i].message, cands[i].candidates, cfg.beam);
        nlohmann::ordered_json obj;
        obj["message"] = decode_text(pairs[i].message, vocab);
        nlohmann::ordered_json cj = nlohmann::ordered_json::array();
        for (const Utterance& c : cands[i].candidates) cj.push_back(decode_text(c, vocab));
        obj["candidates"] = std::move(cj);
        obj["response"] = decode_text(res.response, vocab);
        obj["logprob"] = res.log_prob;
        os << obj.dump() << "\n";
        ++generated;
    }
    std::cout << "generate[" << split_name << "]: " << generated << " responses -> " << out_path << "\n";
    return kExitOk;
}

std::vector<Utterance> read_generated_responses(const std::string& path, const Vocabulary& vocab,
                                                size_t max_len) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open generated file: " + path);
    std::vector<Utterance> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj = nlohmann::json::parse(line);
        out.push_back(encode(tokenize(obj.at("response").get<std::string>(), false), vocab, max_len));
    }
    return out;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& generated) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    std::vector<Utterance> responses = read_generated_responses(generated, vocab, cfg.max_len);
    std::vector<Pair> train = encode_pairs(load_split(opts.out_dir, "train"), vocab, cfg.max_len);
    std::vector<Utterance> train_responses;
    train_responses.reserve(train.size());
    for (const Pair& p : train) train_responses.push_back(p.response);

    MetricsReport rep = compute_metrics(responses, train_responses);
    {
        std::ofstream os(opts.out_dir + "/metrics.json");
        os << rep.to_json() << "\n";
    }
    {
        std::ofstream os(opts.out_dir + "/metrics.txt");
        os << rep.to_table();
    }
    std::cout << rep.to_table();
    return kExitOk;
}

int cmd_disc_accuracy(const CommonOpts& opts, const std::string& disc_a, const std::string& disc_b,
                      const std::string& gen_ckpt, std::string probe_path) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    if (probe_path.empty()) probe_path = opts.out_dir + "/probe.jsonl";

    std::vector<ProbeExample> probe;
    if (fs::exists(probe_path)) {
        probe = load_probe_jsonl(probe_path, vocab, cfg.max_len);
        std::cout << "probe: reusing " << probe_path << " (" << probe.size() << " items)\n";
    } else {
        // The probe is created once from a fixed generator and persisted, so
        // every discriminator variant is scored on identical samples.
        if (gen_ckpt.empty()) {
            throw ConfigError("no probe file at " + probe_path + "; pass --gen-ckpt to build one");
        }
        Generator gen = load_generator(gen_ckpt, cfg);
        auto test_examples = load_examples(opts.out_dir, "test", vocab, cfg);
        probe = build_probe_sampled(gen, test_examples, cfg.seed + 23);
        save_probe_jsonl(probe_path, probe, vocab);
        std::cout << "probe: built " << probe_path << " (" << probe.size() << " items)\n";
    }

    Discriminator a = load_discriminator(disc_a, cfg);
    Discriminator b = load_discriminator(disc_b, cfg);
    double acc_a = disc_accuracy(a, probe);
    double acc_b = disc_accuracy(b, probe);
    std::cout << "accuracy\n"
              << "  " << disc_a << ": " << acc_a << "\n"
              << "  " << disc_b << ": " << acc_b << "\n";
    return kExitOk;
}

int cmd_chat(const CommonOpts& opts, const std::string& ckpt) {
    RunConfig cfg = resolve_config(opts);
    Vocabulary vocab = load_vocab(opts.out_dir);
    size_t index_vocab = 0;
    InvertedIndex index = InvertedIndex::load(opts.out_dir + "/index.bin", &index_vocab);
    Generator gen = load_generator(ckpt, cfg);

    std::string line;
    std::cout << "type a message (empty line quits)\n> " << std::flush;
    while (std::getline(std::cin, line)) {
        if (line.empty()) break;
        Utterance msg = encode(tokenize(line, cfg.lowercase), vocab, cfg.max_len);
        if (msg.empty()) {
            std::cout << "(no tokens)\n> " << std::flush;
            continue;
        }
        CandidateSet set = top_n_candidates(index, msg, cfg.n_candidates, cfg.retrieval_k,
                                            cfg.lambda, std::nullopt);
        BeamResult res = gen.beam_search(msg, set.candidates, cfg.beam);
        for (size_t k = 0; k < set.candidates.size(); ++k) {
            std::cout << "  candidate " << k + 1 << ": " << decode_text(set.candidates[k], vocab)
                      << (set.fallback ? " (fallback)" : "") << "\n";
        }
        std::cout << "  response: " << decode_text(res.response, vocab) << "\n> " << std::flush;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-enhanced adversarial training for dialogue response generation"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string corpus_path, which_split = "all", gen_ckpt, disc_ckpt, ckpt;
    std::string split_name = "test", generated, disc_a, disc_b, probe_path;

    CLI::App* prepare = app.add_subcommand("prepare", "Tokenize, filter, split, build vocabulary");
    add_common(prepare, opts);
    prepare->add_option("--corpus", corpus_path, "Corpus JSONL file")->required();

    CLI::App* build_index = app.add_subcommand("build-index", "Build the message index from the train split");
    add_common(build_index, opts);

    CLI::App* candidates = app.add_subcommand("candidates", "Retrieve N-best candidates per pair");
    add_common(candidates, opts);
    candidates->add_option("--split", which_split, "train | valid | test | all");

    CLI::App* pretrain_gen = app.add_subcommand("pretrain-gen", "MLE-pretrain the generator");
    add_common(pretrain_gen, opts);

    CLI::App* pretrain_disc = app.add_subcommand("pretrain-disc", "Pretrain the discriminator");
    add_common(pretrain_disc, opts);
    pretrain_disc->add_option("--gen-ckpt", gen_ckpt, "Generator checkpoint (default: out/gen-pretrain.bin)");

    CLI::App* adv = app.add_subcommand("adv-train", "Alternating adversarial training");
    add_common(adv, opts);
    adv->add_option("--gen-ckpt", gen_ckpt, "Generator checkpoint");
    adv->add_option("--disc-ckpt", disc_ckpt, "Discriminator checkpoint");

    CLI::App* generate = app.add_subcommand("generate", "Beam-decode responses for a split");
    add_common(generate, opts);
    generate->add_option("--ckpt", ckpt, "Checkpoint with a generator set")->required();
    generate->add_option("--split", split_name, "train | valid | test");

    CLI::App* evaluate = app.add_subcommand("evaluate", "Diversity and originality metrics");
    add_common(evaluate, opts);
    evaluate->add_option("--generated", generated, "generated-*.jsonl file")->required();

    CLI::App* disc_acc = app.add_subcommand("disc-accuracy", "Score two discriminators on one frozen probe");
    add_common(disc_acc, opts);
    disc_acc->add_option("--disc-a", disc_a, "First discriminator checkpoint")->required();
    disc_acc->add_option("--disc-b", disc_b, "Second discriminator checkpoint")->required();
    disc_acc->add_option("--gen-ckpt", gen_ckpt, "Generator used to build the probe if absent");
    disc_acc->add_option("--probe", probe_path, "Probe file (default: out/probe.jsonl)");

    CLI::App* chat = app.add_subcommand("chat", "Interactive retrieve-and-generate loop");
    add_common(chat, opts);
    chat->add_option("--ckpt", ckpt, "Checkpoint with a generator set")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadConfig;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(opts, corpus_path);
        if (build_index->parsed()) return cmd_build_index(opts);
        if (candidates->parsed()) return cmd_candidates(opts, which_split);
        if (pretrain_gen->parsed()) return cmd_pretrain_gen(opts);
        if (pretrain_disc->parsed()) return cmd_pretrain_disc(opts, gen_ckpt);
        if (adv->parsed()) return cmd_adv_train(opts, gen_ckpt, disc_ckpt);
        if (generate->parsed()) return cmd_generate(opts, ckpt, split_name);
        if (evaluate->parsed()) return cmd_evaluate(opts, generated);
        if (disc_acc->parsed()) return cmd_disc_accuracy(opts, disc_a, disc_b, gen_ckpt, probe_path);
        if (chat->parsed()) return cmd_chat(opts, ckpt);
    } catch (const ConfigError& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const MissingInputError& e) {
        std::cerr << "error (missing input): " << e.what() << "\n";
        return kExitMissingInput;
    } catch (const NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
