// Drives the installed CLI binary end to end on the bundled toy corpus:
// every subcommand, the documented exit codes, and the chat loop.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    if (!ok) ++failures;
}

int run(const std::string& cmd) {
    int rc = std::system((cmd + " > /tmp/reat_cli_e2e.out 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string last_output() {
    std::ifstream is("/tmp/reat_cli_e2e.out");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

int main() {
    const std::string cli = REAT_CLI_PATH;
    const std::string corpus = std::string(REAT_SOURCE_DIR) + "/data/toy.jsonl";
    const fs::path out_dir = fs::temp_directory_path() / "reat_cli_e2e";
    fs::remove_all(out_dir);
    fs::create_directories(out_dir);
    const std::string out = out_dir.string();

    const std::string settings =
        " --set vocab_size=300 --set emb_dim=16 --set hidden=24 --set att_hidden=16"
        " --set mlp_hidden=24 --set batch_size=16 --set lr=0.01 --set pretrain_epochs=4"
        " --set d_pretrain_epochs=1 --set epochs=1 --set n_valid=8 --set n_test=8"
        " --set max_decode_len=12 --set seed=3";

    // Exit codes: bad config = 2, missing input = 3.
    expect(run(cli + " prepare --corpus " + corpus + " --out " + out + " --set nonsense=1") == 2,
           "unknown config key exits 2");
    expect(run(cli + " prepare --corpus " + corpus + " --out " + out + " --set profile=huge") == 2,
           "invalid profile exits 2");
    expect(run(cli + " prepare --corpus /nonexistent.jsonl --out " + out) == 3,
           "missing corpus exits 3");
    expect(run(cli + " build-index --out " + out) == 3, "build-index before prepare exits 3");
    expect(run(cli + " --help") == 0, "--help exits 0");

    // Pipeline in order.
    // A config file plus one --set override steers prepare.
    const fs::path cfg_file = out_dir / "run.cfg";
    {
        std::ofstream os(cfg_file);
        os << "# e2e config\nvocab_size = 300\nemb_dim = 16\nhidden = 24\natt_hidden = 16\n"
           << "mlp_hidden = 24\nbatch_size = 16\nlr = 0.01\npretrain_epochs = 4\n"
           << "d_pretrain_epochs = 1\nepochs = 1\nn_valid = 8\nn_test = 8\n"
           << "max_decode_len = 12\nseed = 99\n";
    }
    expect(run(cli + " prepare --corpus " + corpus + " --out " + out + " --config " +
               cfg_file.string() + " --set seed=3") == 0,
           "prepare accepts a config file with a --set override");
    expect(fs::exists(out_dir / "vocab.txt") && fs::exists(out_dir / "train.jsonl"),
           "prepare wrote vocabulary and splits");
    {
        std::ifstream is(out_dir / "run-config.txt");
        std::stringstream ss;
        ss << is.rdbuf();
        expect(ss.str().find("seed = 3") != std::string::npos, "--set overrides the config file");
    }
    expect(run(cli + " build-index --out " + out + settings) == 0, "build-index");
    expect(run(cli + " candidates --out " + out + settings) == 0, "candidates");

    // Self-exclusion at the artifact level: no train candidate may equal the
    // pair's own ground-truth response.
    {
        std::ifstream train_is(out_dir / "train.jsonl");
        std::vector<std::string> responses;  // one entry per pair, file order
        std::vector<std::string> messages;
        std::string line;
        while (std::getline(train_is, line)) {
            if (line.empty()) continue;
            auto obj = nlohmann::json::parse(line);
            for (const auto& r : obj.at("responses")) {
                messages.push_back(obj.at("message").get<std::string>());
                responses.push_back(r.get<std::string>());
            }
        }
        std::ifstream cand_is(out_dir / "candidates-train.jsonl");
        size_t idx = 0, leaks = 0, scanned = 0;
        while (std::getline(cand_is, line)) {
            if (line.empty()) continue;
            auto obj = nlohmann::json::parse(line);
            for (const auto& c : obj.at("candidates")) {
                ++scanned;
                if (idx < responses.size() && c.get<std::string>() == responses[idx]) ++leaks;
            }
            ++idx;
        }
        expect(idx == responses.size(), "one candidate set per training pair");
        expect(scanned > 0 && leaks == 0, "no ground-truth response among train candidates");
    }
    expect(run(cli + " pretrain-gen --out " + out + settings) == 0, "pretrain-gen");
    expect(run(cli + " pretrain-disc --out " + out + settings) == 0, "pretrain-disc");
    expect(run(cli + " adv-train --out " + out + settings) == 0, "adv-train");
    expect(fs::exists(out_dir / "ckpt-epoch0.bin"), "adversarial checkpoint written");
    expect(run(cli + " generate --ckpt " + out + "/gen-pretrain.bin --out " + out + settings) == 0,
           "generate");
    expect(run(cli + " evaluate --generated " + out + "/generated-test.jsonl --out " + out +
               settings) == 0,
           "evaluate");
    expect(last_output().find("# of UNI") != std::string::npos, "evaluate prints the metrics table");

    // Checkpoint/config shape mismatch is a config error (exit 2).
    expect(run(cli + " generate --ckpt " + out + "/gen-pretrain.bin --out " + out + settings +
               " --set hidden=32") == 2,
           "checkpoint shape mismatch exits 2");

    // Candidate-free discriminator checkpoint for the accuracy comparison:
    // train one by reusing pretrain-disc on a config flag-free path is not
    // exposed, so compare the pretrained and adversarial discriminators.
    expect(run(cli + " disc-accuracy --disc-a " + out + "/disc-pretrain.bin --disc-b " + out +
               "/ckpt-epoch0.bin --gen-ckpt " + out + "/gen-pretrain.bin --out " + out + settings) == 0,
           "disc-accuracy builds a probe and scores two checkpoints");
    expect(fs::exists(out_dir / "probe.jsonl"), "probe persisted");
    expect(run(cli + " disc-accuracy --disc-a " + out + "/disc-pretrain.bin --disc-b " + out +
               "/ckpt-epoch0.bin --out " + out + settings) == 0,
           "disc-accuracy reuses the frozen probe without a generator");

    // Chat loop: one message in, response plus candidates out.
    {
        std::string cmd = "printf 'tell me about green tea\\n\\n' | " + cli + " chat --ckpt " + out +
                          "/gen-pretrain.bin --out " + out + settings +
                          " > /tmp/reat_cli_e2e.out 2>&1";
        int rc = std::system(cmd.c_str());
        expect(WIFEXITED(rc) && WEXITSTATUS(rc) == 0, "chat exits 0");
        std::string chat_out = last_output();
        expect(chat_out.find("candidate 1:") != std::string::npos &&
               chat_out.find("response:") != std::string::npos,
               "chat prints candidates and a response");
    }

    // A message far outside the corpus still gets the fallback path.
    {
        std::string cmd = "printf 'zzz qqq xyzzy\\n\\n' | " + cli + " chat --ckpt " + out +
                          "/gen-pretrain.bin --out " + out + settings +
                          " > /tmp/reat_cli_e2e.out 2>&1";
        int rc = std::system(cmd.c_str());
        expect(WIFEXITED(rc) && WEXITSTATUS(rc) == 0, "chat with unseen words exits 0");
        expect(last_output().find("response:") != std::string::npos,
               "fallback candidates still produce a response");
    }

    fs::remove_all(out_dir);
    if (failures > 0) {
        std::printf("%d CLI check(s) failed\n", failures);
        return 1;
    }
    std::printf("all CLI checks passed\n");
    return 0;
}
