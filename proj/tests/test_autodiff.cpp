#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "reat/nn/tape.hpp"
#include "testutil.hpp"

using namespace reat;
using namespace reat::nn;
using reat::testutil::finite_difference_check;

namespace {

ParameterSet random_params(const std::vector<std::pair<std::string, Shape>>& spec, uint64_t seed) {
    Rng rng(seed);
    ParameterSet ps;
    for (const auto& [name, shape] : spec) ps.create(name, shape, rng, 0.5);
    return ps;
}

} // namespace

TEST_CASE("finite differences validate every primitive op") {
    auto check = [](ParameterSet& ps, const std::function<Var(Tape&)>& build) {
        auto rep = finite_difference_check(ps, build);
        INFO("worst: ", rep.worst_param);
        CHECK(rep.max_rel_err < 1e-4);
    };

    SUBCASE("add, mul, scale, rsub_const") {
        auto ps = random_params({{"a", {5}}, {"b", {5}}}, 1);
        check(ps, [&](Tape& t) {
            Var a = t.param(ps, "a"), b = t.param(ps, "b");
            return sum(mul(add(a, b), rsub_const(2.0, scale(b, 0.7))));
        });
    }
    SUBCASE("add_n") {
        auto ps = random_params({{"a", {4}}, {"b", {4}}, {"c", {4}}}, 2);
        check(ps, [&](Tape& t) {
            return sum(add_n({t.param(ps, "a"), t.param(ps, "b"), t.param(ps, "c"),
                              t.param(ps, "a")}));
        });
    }
    SUBCASE("matvec") {
        auto ps = random_params({{"w", {3, 5}}, {"x", {5}}}, 3);
        check(ps, [&](Tape& t) { return sum(matvec(t.param(ps, "w"), t.param(ps, "x"))); });
    }
    SUBCASE("concat and slice") {
        auto ps = random_params({{"a", {3}}, {"b", {4}}}, 4);
        check(ps, [&](Tape& t) {
            Var c = concat({t.param(ps, "a"), t.param(ps, "b")});
            return sum(mul(slice(c, 1, 4), slice(c, 2, 4)));
        });
    }
    SUBCASE("sigmoid, tanh, log") {
        auto ps = random_params({{"a", {6}}}, 5);
        check(ps, [&](Tape& t) {
            Var a = t.param(ps, "a");
            // log's argument kept strictly positive through sigmoid.
            return sum(add(tanh_op(a), log_op(sigmoid(a))));
        });
    }
    SUBCASE("softmax and masked_softmax") {
        auto ps = random_params({{"a", {6}}}, 6);
        check(ps, [&](Tape& t) {
            Var s = softmax(t.param(ps, "a"));
            Var m = masked_softmax(t.param(ps, "a"), {1, 0, 1, 1, 0, 1});
            return add(pick_log(s, 2), sum(mul(m, m)));
        });
    }
    SUBCASE("pick_log") {
        auto ps = random_params({{"a", {5}}}, 7);
        check(ps, [&](Tape& t) { return pick_log(softmax(t.param(ps, "a")), 3); });
    }
    SUBCASE("weighted_sum") {
        auto ps = random_params({{"k0", {4}}, {"k1", {4}}, {"k2", {4}}, {"s", {3}}}, 8);
        check(ps, [&](Tape& t) {
            Var w = softmax(t.param(ps, "s"));
            Var ctx = weighted_sum({t.param(ps, "k0"), t.param(ps, "k1"), t.param(ps, "k2")}, w);
            return sum(mul(ctx, ctx));
        });
    }
    SUBCASE("stack_rows and cross_entropy") {
        auto ps = random_params({{"r0", {5}}, {"r1", {5}}, {"r2", {5}}}, 9);
        check(ps, [&](Tape& t) {
            std::vector<Var> rows = {softmax(t.param(ps, "r0")), softmax(t.param(ps, "r1")),
                                     softmax(t.param(ps, "r2"))};
            return cross_entropy(stack_rows(rows), {1, 4, 0}, -1);
        });
    }
    SUBCASE("mean") {
        auto ps = random_params({{"a", {7}}}, 10);
        check(ps, [&](Tape& t) { return mean(mul(t.param(ps, "a"), t.param(ps, "a"))); });
    }
}

TEST_CASE("softmax values and invariances") {
    Tape t;
    // Scores [ln 1, ln 3] normalize to [0.25, 0.75].
    Var s = softmax(t.leaf(Array::from({std::log(1.0), std::log(3.0)})));
    CHECK(t.val(s)[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.val(s)[1] == doctest::Approx(0.75).epsilon(1e-12));

    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores(1 + rng.index(8));
        for (double& v : scores) v = rng.uniform(-30.0, 30.0);
        Tape t2;
        Var y = softmax(t2.leaf(Array::from(scores)));
        double total = 0.0;
        for (double v : t2.val(y).data) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

        // Additive shift invariance.
        double shift = rng.uniform(-50.0, 50.0);
        std::vector<double> shifted = scores;
        for (double& v : shifted) v += shift;
        Var y2 = softmax(t2.leaf(Array::from(shifted)));
        for (size_t i = 0; i < scores.size(); ++i) {
            CHECK(t2.val(y2)[i] == doctest::Approx(t2.val(y)[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("masked positions get weight exactly zero") {
    Tape t;
    Var w = masked_softmax(t.leaf(Array::from({5.0, 1.0, 3.0})), {1, 0, 1});
    CHECK(t.val(w)[1] == 0.0);
    CHECK(t.val(w)[0] + t.val(w)[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(masked_softmax(t.leaf(Array::from({1.0, 2.0})), {0, 0}), NumericError);
}

TEST_CASE("cross_entropy hand values") {
    Tape t;
    // Probability 1 on every target: loss 0.
    Var perfect = stack_rows({t.leaf(Array::from({0.0, 1.0, 0.0})), t.leaf(Array::from({1.0, 0.0, 0.0}))});
    CHECK(t.scalar(cross_entropy(perfect, {1, 0}, kPadId)) == doctest::Approx(0.0).epsilon(1e-12));

    // Uniform over V=4: ln 4.
    Tape t2;
    Var uniform = stack_rows({t2.leaf(Array({4}, 0.25)), t2.leaf(Array({4}, 0.25))});
    CHECK(t2.scalar(cross_entropy(uniform, {2, 3}, kPadId)) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // Mixed case against a hand sum; PAD target positions are excluded.
    Tape t3;
    Var mixed = stack_rows({t3.leaf(Array::from({0.2, 0.5, 0.3})), t3.leaf(Array::from({0.6, 0.1, 0.3})),
                            t3.leaf(Array::from({0.1, 0.1, 0.8}))});
    // Row 1's PAD target drops out; rows 0 and 2 contribute p = 0.5 and 0.8.
    double expect = -(std::log(0.5) + std::log(0.8)) / 2.0;
    CHECK(t3.scalar(cross_entropy(mixed, {1, kPadId, 2}, kPadId)) ==
          doctest::Approx(expect).epsilon(1e-12));

    // Target out of range.
    Tape t4;
    Var p = stack_rows({t4.leaf(Array::from({0.5, 0.5}))});
    CHECK_THROWS_AS(cross_entropy(p, {2}, kPadId), NumericError);
}

TEST_CASE("backward is deterministic bit for bit") {
    auto ps1 = random_params({{"w", {4, 6}}, {"x", {6}}}, 12);
    auto ps2 = random_params({{"w", {4, 6}}, {"x", {6}}}, 12);
    auto run = [](ParameterSet& ps) {
        Tape t;
        Var loss = sum(tanh_op(matvec(t.param(ps, "w"), sigmoid(t.param(ps, "x")))));
        t.backward(loss);
    };
    run(ps1);
    run(ps2);
    for (auto it1 = ps1.begin(), it2 = ps2.begin(); it1 != ps1.end(); ++it1, ++it2) {
        REQUIRE(it1->second.grad.size() == it2->second.grad.size());
        for (size_t i = 0; i < it1->second.grad.size(); ++i) {
            CHECK(it1->second.grad[i] == it2->second.grad[i]);  // exact
        }
    }
}

TEST_CASE("backward may run once per tape and roots must be scalar") {
    auto ps = random_params({{"a", {3}}}, 13);
    Tape t;
    Var a = t.param(ps, "a");
    CHECK_THROWS_AS(t.backward(a), NumericError);  // non-scalar root
    Tape t2;
    Var loss = sum(t2.param(ps, "a"));
    t2.backward(loss);
    CHECK_THROWS_AS(t2.backward(loss), NumericError);
}

TEST_CASE("non-finite values are rejected at op boundaries") {
    Tape t;
    CHECK_THROWS_AS(t.leaf(Array::from({1.0, std::numeric_limits<double>::infinity()})), NumericError);
    CHECK_THROWS_AS(log_op(t.leaf(Array::from({0.0}))), NumericError);
}

TEST_CASE("adam first step moves by about lr") {
    ParameterSet ps;
    Param& p = ps.create_zeros("w", {1});
    p.value[0] = 1.0;
    p.grad[0] = 1.0;
    AdamConfig cfg;
    cfg.lr = 1e-4;
    ps.adam_step(cfg);
    // Bias-corrected m_hat = v_hat = 1 after one step with g = 1.
    CHECK(p.value[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-6));
    CHECK(p.grad[0] == 0.0);  // gradients zeroed afterward

    // Zero gradient with zero moments: parameter unchanged.
    ParameterSet ps2;
    Param& q = ps2.create_zeros("w", {1});
    q.value[0] = 3.0;
    ps2.adam_step(cfg);
    CHECK(q.value[0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("adam descends a 1-d quadratic") {
    // Scripted oracle: loss = (w - 2)^2 shrinks monotonically over repeated
    // identical steps from w = 0.
    ParameterSet ps;
    Param& p = ps.create_zeros("w", {1});
    AdamConfig cfg;
    cfg.lr = 0.05;
    double prev_loss = (p.value[0] - 2.0) * (p.value[0] - 2.0);
    for (int step = 0; step < 40; ++step) {
        p.grad[0] = 2.0 * (p.value[0] - 2.0);
        ps.adam_step(cfg);
        double loss = (p.value[0] - 2.0) * (p.value[0] - 2.0);
        CHECK(loss <= prev_loss + 1e-12);
        prev_loss = loss;
    }
    CHECK(prev_loss < 1.0);
}

TEST_CASE("adam rejects non-finite gradients by name") {
    ParameterSet ps;
    Param& p = ps.create_zeros("emb", {2});
    p.grad[0] = std::nan("");
    CHECK_THROWS_WITH_AS(ps.adam_step(), "non-finite gradient in emb", NumericError);
}

TEST_CASE("gradient clipping caps the global norm") {
    ParameterSet ps;
    Param& a = ps.create_zeros("a", {3});
    Param& b = ps.create_zeros("b", {1});
    a.grad = Array::from({3.0, 0.0, 4.0});
    b.grad = Array::from({0.0});
    ps.clip_grad_norm(5.0);  // norm exactly 5: untouched
    CHECK(a.grad[0] == 3.0);
    a.grad = Array::from({6.0, 0.0, 8.0});
    ps.clip_grad_norm(5.0);  // norm 10 -> scaled by 0.5
    CHECK(a.grad[0] == doctest::Approx(3.0));
    CHECK(a.grad[2] == doctest::Approx(4.0));
    CHECK(ps.grad_norm() == doctest::Approx(5.0));
}

TEST_CASE("checkpoint round trip preserves values, moments, and step count") {
    Rng rng(14);
    ParameterSet ps;
    ps.create("layer.w", {3, 4}, rng);
    ps.create("layer.b", {4}, rng);
    for (auto& [name, p] : ps) {
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] = rng.uniform(-1, 1);
    }
    ps.adam_step();

    auto path = std::filesystem::temp_directory_path() / "reat_ckpt_test.bin";
    Checkpoint ck;
    ck.add("generator", ps);
    ck.save(path.string());

    ParameterSet fresh;
    Rng rng2(999);
    fresh.create("layer.w", {3, 4}, rng2);
    fresh.create("layer.b", {4}, rng2);
    Checkpoint loaded = Checkpoint::load(path.string());
    loaded.load_into("generator", fresh);
    CHECK(fresh.adam_t() == ps.adam_t());
    for (auto it1 = ps.begin(), it2 = fresh.begin(); it1 != ps.end(); ++it1, ++it2) {
        for (size_t i = 0; i < it1->second.value.size(); ++i) {
            CHECK(it1->second.value[i] == it2->second.value[i]);
            CHECK(it1->second.adam_m[i] == it2->second.adam_m[i]);
            CHECK(it1->second.adam_v[i] == it2->second.adam_v[i]);
        }
    }

    // Wrong tag and mismatched shapes are config errors.
    CHECK_THROWS_AS(loaded.load_into("discriminator", fresh), ConfigError);
    ParameterSet other;
    other.create("layer.w", {2, 2}, rng2);
    CHECK_THROWS_AS(loaded.load_into("generator", other), ConfigError);
    std::filesystem::remove(path);
}
