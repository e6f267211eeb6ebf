#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "reat/run_config.hpp"

using namespace reat;

TEST_CASE("paper profile pins the full-scale settings") {
    RunConfig cfg;
    cfg.apply_profile("paper");
    CHECK(cfg.vocab_size == 30000);
    CHECK(cfg.emb_dim == 300);
    CHECK(cfg.hidden == 500);
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.lr == doctest::Approx(1e-4));
    CHECK(cfg.beam == 5);
    CHECK(cfg.retrieval_k == 10);
    CHECK(cfg.n_candidates == 2);

    // Desk shrinks dimensions only; schedule knobs stay identical.
    RunConfig desk;
    desk.apply_profile("desk");
    CHECK(desk.batch_size == cfg.batch_size);
    CHECK(desk.lr == doctest::Approx(cfg.lr));
    CHECK(desk.beam == cfg.beam);
    CHECK(desk.retrieval_k == cfg.retrieval_k);
    CHECK(desk.n_candidates == cfg.n_candidates);
    CHECK(desk.hidden < cfg.hidden);
    CHECK(desk.vocab_size < cfg.vocab_size);

    CHECK_THROWS_AS(cfg.apply_profile("gigantic"), ConfigError);
}

TEST_CASE("config file parsing with comments, profile ordering, and overrides") {
    auto path = std::filesystem::temp_directory_path() / "reat_config_test.txt";
    {
        std::ofstream os(path);
        os << "# experiment settings\n"
           << "hidden = 96\n"
           << "profile = paper\n"        // applied first even when listed later
           << "seed = 123  # inline comment\n"
           << "\n"
           << "lambda = 0.25\n";
    }
    RunConfig cfg = RunConfig::from_file(path.string(), {"beam=7"});
    // Explicit file keys override the profile despite appearing before it.
    CHECK(cfg.hidden == 96);
    CHECK(cfg.vocab_size == 30000);  // from the paper profile
    CHECK(cfg.seed == 123);
    CHECK(cfg.lambda == doctest::Approx(0.25));
    CHECK(cfg.beam == 7);  // --set wins last
    std::filesystem::remove(path);

    CHECK_THROWS_AS(RunConfig::from_file("/nonexistent.cfg"), MissingInputError);
    CHECK_THROWS_AS(RunConfig::from_overrides({"no_such_key=1"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_overrides({"lr=abc"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_overrides({"garbage"}), ConfigError);
}

TEST_CASE("derived model configs stay consistent") {
    RunConfig cfg;
    cfg.apply_profile("desk");
    GeneratorConfig g = cfg.generator_config();
    DiscriminatorConfig d = cfg.discriminator_config();
    TrainConfig t = cfg.train_config();
    CHECK(g.n_candidates == d.n_candidates);
    CHECK(g.vocab_size == d.vocab_size);
    CHECK(t.g_steps == 10);
    CHECK(t.d_steps == 20);
    CHECK(cfg.to_string().find("profile = desk") != std::string::npos);
}
