#include <doctest.h>

#include <cmath>

#include "reat/discriminator.hpp"
#include "testutil.hpp"

using namespace reat;
using reat::testutil::utt;

namespace {

DiscriminatorConfig tiny_config(size_t vocab = 12, size_t n = 2, bool use_cands = true) {
    DiscriminatorConfig cfg;
    cfg.vocab_size = vocab;
    cfg.emb_dim = 3;
    cfg.hidden = 3;
    cfg.mlp_hidden = 4;
    cfg.n_candidates = n;
    cfg.use_candidates = use_cands;
    return cfg;
}

} // namespace

TEST_CASE("candidate-aware representation averages and is symmetric") {
    Discriminator disc(tiny_config(), 1);
    Utterance y = utt({4, 5});
    Utterance c1 = utt({6, 7});
    Utterance c2 = utt({8});

    // Identical candidates: the mean equals each local representation.
    nn::Tape t;
    nn::Var zc_same = disc.candidate_aware(t, y, {c1, c1});
    nn::Var zc_single_path = disc.candidate_aware(t, y, {c1, c1});
    for (size_t i = 0; i < t.val(zc_same).size(); ++i) {
        CHECK(t.val(zc_same)[i] == t.val(zc_single_path)[i]);
    }

    // Swapping candidates leaves z^c unchanged (mean symmetry; exact to
    // double rounding).
    nn::Var a = disc.candidate_aware(t, y, {c1, c2});
    nn::Var b = disc.candidate_aware(t, y, {c2, c1});
    for (size_t i = 0; i < t.val(a).size(); ++i) {
        CHECK(t.val(a)[i] == doctest::Approx(t.val(b)[i]).epsilon(1e-12));
    }

    CHECK_THROWS_AS(disc.candidate_aware(t, y, {utt({}), c2}), NumericError);
}

TEST_CASE("candidate-aware representation matches a hand-unrolled recurrence") {
    // d = 2, T = 2, fixed small weights: unroll candidate LSTM then response
    // LSTM by hand with the same gate equations.
    DiscriminatorConfig cfg = tiny_config(10, 1);
    cfg.emb_dim = 2;
    cfg.hidden = 2;
    Discriminator disc(cfg, 2);

    Utterance y = utt({4, 5});
    Utterance cand = utt({6, 7});
    nn::Tape t;
    nn::Var zc = disc.candidate_aware(t, y, {cand});

    auto& ps = disc.params();
    auto embed = [&](int id) {
        std::vector<double> e(2);
        for (size_t j = 0; j < 2; ++j) e[j] = ps.at("emb").value.at(static_cast<size_t>(id), j);
        return e;
    };
    auto lstm = [&](const std::string& prefix, const std::vector<double>& x,
                    std::vector<double>& h, std::vector<double>& c) {
        const auto& w = ps.at(prefix + ".w").value;
        const auto& b = ps.at(prefix + ".b").value;
        std::vector<double> z = {x[0], x[1], h[0], h[1]};
        std::vector<double> gates(8);
        for (size_t i = 0; i < 8; ++i) {
            double acc = b[i];
            for (size_t j = 0; j < 4; ++j) acc += w.at(i, j) * z[j];
            gates[i] = acc;
        }
        auto sg = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        for (size_t j = 0; j < 2; ++j) {
            double ig = sg(gates[j]), fg = sg(gates[2 + j]), og = sg(gates[4 + j]);
            double gg = std::tanh(gates[6 + j]);
            c[j] = fg * c[j] + ig * gg;
            h[j] = og * std::tanh(c[j]);
        }
    };

    std::vector<double> uh = {0, 0}, uc = {0, 0};
    for (int id : cand.ids) lstm("cand_lstm", embed(id), uh, uc);
    std::vector<double> vh = uh, vc = {0, 0};  // hidden seeded, cell zero
    for (int id : y.ids) lstm("resp_lstm", embed(id), vh, vc);

    for (size_t j = 0; j < 2; ++j) CHECK(t.val(zc)[j] == doctest::Approx(vh[j]).epsilon(1e-12));
}

TEST_CASE("message-aware path: zero weights give zero, repeat runs agree") {
    DiscriminatorConfig cfg = tiny_config();
    Discriminator disc(cfg, 3);
    for (auto& [name, p] : disc.params()) p.value.fill(0.0);
    nn::Tape t;
    nn::Var zx = disc.message_aware(t, utt({4, 5}), utt({6, 7, 8}));
    for (double v : t.val(zx).data) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));

    Discriminator disc2(cfg, 4);
    nn::Tape t2;
    nn::Var a = disc2.message_aware(t2, utt({4, 5}), utt({6, 7}));
    nn::Var b = disc2.message_aware(t2, utt({4, 5}), utt({6, 7}));
    for (size_t i = 0; i < t2.val(a).size(); ++i) CHECK(t2.val(a)[i] == t2.val(b)[i]);

    CHECK_THROWS_AS(disc2.message_aware(t2, utt({4}), utt({})), NumericError);
}

TEST_CASE("classification probability") {
    // Zero MLP output weights: sigmoid(0) = 0.5 exactly.
    Discriminator disc(tiny_config(), 5);
    disc.params().at("mlp.w2").value.fill(0.0);
    disc.params().at("mlp.b2").value.fill(0.0);
    CHECK(disc.classify(utt({4}), utt({5}), {utt({6}), utt({7})}) == doctest::Approx(0.5).epsilon(1e-15));

    // Random inputs stay strictly inside (0, 1).
    Rng rng(6);
    Discriminator disc2(tiny_config(20), 7);
    for (int trial = 0; trial < 20; ++trial) {
        auto ex = testutil::random_example(rng, 20, 2);
        double p = disc2.classify(ex.response, ex.message, ex.candidates);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("d = 1 toy weights match a hand computation") {
    DiscriminatorConfig cfg;
    cfg.vocab_size = 6;
    cfg.emb_dim = 1;
    cfg.hidden = 1;
    cfg.mlp_hidden = 1;
    cfg.n_candidates = 1;
    Discriminator disc(cfg, 8);
    auto& ps = disc.params();

    auto sg = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    auto lstm1 = [&](const std::string& prefix, double x, double h, double c) {
        const auto& w = ps.at(prefix + ".w").value;
        const auto& b = ps.at(prefix + ".b").value;
        double ig = sg(w.at(0, 0) * x + w.at(0, 1) * h + b[0]);
        double fg = sg(w.at(1, 0) * x + w.at(1, 1) * h + b[1]);
        double og = sg(w.at(2, 0) * x + w.at(2, 1) * h + b[2]);
        double gg = std::tanh(w.at(3, 0) * x + w.at(3, 1) * h + b[3]);
        double c2 = fg * c + ig * gg;
        return std::pair<double, double>{og * std::tanh(c2), c2};
    };
    auto emb = [&](int id) { return ps.at("emb").value[static_cast<size_t>(id)]; };

    Utterance y = utt({4});
    Utterance x = utt({5});
    Utterance c = utt({4, 5});

    auto [uh, uc] = lstm1("cand_lstm", emb(4), 0.0, 0.0);
    auto [uh2, uc2] = lstm1("cand_lstm", emb(5), uh, uc);
    auto [zc, zc_c] = lstm1("resp_lstm", emb(4), uh2, 0.0);
    auto [mh, mc] = lstm1("msg_lstm", emb(5), 0.0, 0.0);
    auto [zx, zx_c] = lstm1("resp_lstm", emb(4), mh, 0.0);

    double hidden = std::tanh(ps.at("mlp.w1").value.at(0, 0) * zx +
                              ps.at("mlp.w1").value.at(0, 1) * zc + ps.at("mlp.b1").value[0]);
    double expect = sg(ps.at("mlp.w2").value[0] * hidden + ps.at("mlp.b2").value[0]);

    CHECK(disc.classify(y, x, {c}) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("loss hand values") {
    Discriminator disc(tiny_config(), 9);
    // Force p = 0.5 everywhere.
    disc.params().at("mlp.w2").value.fill(0.0);
    disc.params().at("mlp.b2").value.fill(0.0);

    Utterance m = utt({4}), y = utt({5}), n = utt({6});
    std::vector<Utterance> cands = {utt({7}), utt({8})};
    std::vector<DiscExample> pos = {{&m, &y, &cands}};
    std::vector<DiscExample> neg = {{&m, &n, &cands}};
    nn::Tape t;
    CHECK(t.scalar(disc.loss(t, pos, neg)) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    nn::Tape t2;
    CHECK_THROWS_AS(disc.loss(t2, {}, neg), NumericError);
}

TEST_CASE("loss matches a hand sum on mixed batches and stays non-negative") {
    Rng rng(10);
    Discriminator disc(tiny_config(16), 11);
    std::vector<TrainingExample> exs;
    for (int i = 0; i < 4; ++i) exs.push_back(testutil::random_example(rng, 16, 2));

    std::vector<DiscExample> pos = {{&exs[0].message, &exs[0].response, &exs[0].candidates},
                                    {&exs[1].message, &exs[1].response, &exs[1].candidates}};
    std::vector<DiscExample> neg = {{&exs[2].message, &exs[2].response, &exs[2].candidates},
                                    {&exs[3].message, &exs[3].response, &exs[3].candidates}};
    double expect = 0.0;
    for (const auto& ex : pos) expect -= std::log(disc.classify(*ex.response, *ex.message, *ex.candidates)) / 2.0;
    for (const auto& ex : neg) expect -= std::log(1.0 - disc.classify(*ex.response, *ex.message, *ex.candidates)) / 2.0;

    nn::Tape t;
    double got = t.scalar(disc.loss(t, pos, neg));
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    CHECK(got >= 0.0);
}

TEST_CASE("loss gradient passes finite differences") {
    DiscriminatorConfig cfg;
    cfg.vocab_size = 8;
    cfg.emb_dim = 2;
    cfg.hidden = 2;
    cfg.mlp_hidden = 3;
    cfg.n_candidates = 2;
    Discriminator disc(cfg, 12);

    Utterance m = utt({4, 5}), y = utt({6, 7}), n = utt({7, 7, 4});
    std::vector<Utterance> cands = {utt({5, 6}), utt({7})};
    std::vector<DiscExample> pos = {{&m, &y, &cands}};
    std::vector<DiscExample> neg = {{&m, &n, &cands}};
    auto rep = testutil::finite_difference_check(disc.params(), [&](nn::Tape& t) {
        return disc.loss(t, pos, neg);
    });
    INFO("worst: ", rep.worst_param);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("message-aware gradient passes finite differences through both LSTMs") {
    DiscriminatorConfig cfg = tiny_config(8);
    cfg.emb_dim = 2;
    cfg.hidden = 2;
    Discriminator disc(cfg, 13);
    Utterance y = utt({4, 5}), x = utt({6, 7});
    auto rep = testutil::finite_difference_check(disc.params(), [&](nn::Tape& t) {
        return nn::sum(disc.message_aware(t, y, x));
    });
    INFO("worst: ", rep.worst_param);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("candidate-free variant classifies without candidate parameters") {
    Discriminator disc(tiny_config(12, 2, false), 14);
    CHECK_FALSE(disc.params().contains("cand_lstm.w"));
    double p = disc.classify(utt({4}), utt({5}), {});
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    nn::Tape t;
    CHECK_THROWS_AS(disc.candidate_aware(t, utt({4}), {utt({5}), utt({6})}), ConfigError);
}
