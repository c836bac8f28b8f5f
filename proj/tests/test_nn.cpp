#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>

#include "skyroute/nn/layers.hpp"
#include "skyroute/nn/loss.hpp"
#include "skyroute/nn/ops.hpp"
#include "skyroute/nn/optim.hpp"
#include "gradcheck.hpp"

using namespace skyroute;
using namespace skyroute::nn;
using namespace skyroute::testing;


TEST_CASE("gradients: elementwise and matrix ops") {
    Rng rng(1);
    Tensor a = random_tensor({4, 5}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    Tensor w = random_tensor({5, 3}, rng);
    Tensor bias = random_tensor({3}, rng);

    CHECK(grad_check([&] { return probe_sum(matmul(a, w), 11); }, {a, w}, 100, 2) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(linear(a, w, bias), 12); }, {a, w, bias}, 100, 3) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(add(a, b), 13); }, {a, b}, 100, 4) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(mul(a, b), 14); }, {a, b}, 100, 5) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(scale(a, -2.5), 15); }, {a}, 100, 6) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(tanh(a), 16); }, {a}, 100, 7) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(relu(a), 17); }, {a}, 100, 8) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(reshape(a, {2, 10}), 18); }, {a}, 100, 9) < 1e-4);
    CHECK(grad_check([&] { return probe_sum(slice_cols(a, 1, 3), 19); }, {a}, 100, 10) < 1e-4);

    const std::vector<int> ids{2, 0, 2, 4};
    Tensor table = random_tensor({5, 3}, rng);
    CHECK(grad_check([&] { return probe_sum(embedding(table, ids), 20); }, {table}, 100, 11) < 1e-4);
}

TEST_CASE("gradients: layer_norm") {
    Rng rng(2);
    Tensor x = random_tensor({6, 8}, rng);
    Tensor gamma = random_tensor({8}, rng);
    Tensor beta = random_tensor({8}, rng);
    CHECK(grad_check([&] { return probe_sum(layer_norm(x, gamma, beta), 21); }, {x, gamma, beta}, 100, 12) < 1e-4);
}

TEST_CASE("gradients: attention with mask and fixed dropout") {
    Rng rng(3);
    const int batch = 2, lq = 3, lk = 4, d = 8;
    Tensor q = random_tensor({batch * lq, d}, rng);
    Tensor k = random_tensor({batch * lk, d}, rng);
    Tensor v = random_tensor({batch * lk, d}, rng);
    const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1, 1, 0};

    SUBCASE("masked, no dropout") {
        auto f = [&] {
            AttentionOptions opt{batch, lq, lk, 2, mask};
            return probe_sum(attention(q, k, v, opt), 22);
        };
        CHECK(grad_check(f, {q, k, v}, 100, 13) < 1e-4);
    }
    SUBCASE("dropout mask held fixed by reseeding") {
        auto f = [&] {
            Rng drop(99);
            AttentionOptions opt{batch, lq, lk, 4, {}, 0.3, true, &drop};
            return probe_sum(attention(q, k, v, opt), 23);
        };
        CHECK(grad_check(f, {q, k, v}, 100, 14) < 1e-4);
    }
}

TEST_CASE("gradients: loss with and without the weather penalty") {
    Rng rng(4);
    const int batch = 5, classes = 4;
    Tensor logits = random_tensor({batch, classes}, rng);
    const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1};
    const std::vector<int> targets{2, 1, 3, 0, 2};
    std::vector<double> severity(batch * classes * 4);
    for (auto& s : severity) s = rng.uniform();

    for (double lambda : {0.0, 0.7}) {
        LossConfig cfg;
        cfg.lambda = lambda;
        cfg.weather_weights = {1.0, 0.5, 0.25, 2.0};
        LossInputs in{batch, classes, mask, targets, severity};
        CHECK(grad_check([&] { return weather_penalized_cross_entropy(logits, in, cfg); }, {logits}, 100, 15) <
              1e-4);
    }
}

TEST_CASE("gradients: composite model with two attention blocks") {
    Rng rng(5);
    AttentionConfig acfg{8, 2, 0.1};
    MultiHeadAttention mha1(acfg, rng), mha2(acfg, rng);
    LayerNorm ln1(8), ln2(8);
    Linear inp(3, 8, rng), head(8, 1, rng);
    Embedding emb(6, 8, rng);

    const int batch = 2, lq = 3, lk = 5;
    Tensor xq = random_tensor({batch * lq, 3}, rng, false);
    Tensor mem = random_tensor({batch * lk, 8}, rng, false);
    const std::vector<int> ids{0, 1, 2, 3, 4, 5};
    const std::vector<std::uint8_t> kmask{1, 1, 1, 0, 1, 1, 1, 1, 1, 1};
    const std::vector<int> targets{1, 2};

    auto f = [&] {
        Rng drop(7);
        Tensor h = add(inp(xq), emb(ids));
        MultiHeadAttention::Call call{batch, lq, lk, kmask, true, &drop};
        h = ln1(add(h, mha1(h, mem, call)));
        h = ln2(add(h, relu(mha2(h, mem, call))));
        Tensor logits = reshape(head(h), {batch, lq});
        LossInputs in{batch, lq, {}, targets};
        return weather_penalized_cross_entropy(logits, in, {});
    };
    std::vector<NamedTensor> named;
    mha1.collect("a", named);
    mha2.collect("b", named);
    ln1.collect("l1", named);
    ln2.collect("l2", named);
    inp.collect("i", named);
    head.collect("h", named);
    emb.collect("e", named);
    std::vector<Tensor> params;
    for (auto& n : named) params.push_back(n.tensor);
    CHECK(grad_check(f, params, 100, 16) < 1e-4);
}

TEST_CASE("attention: closed-form examples") {
    const int d = 4;
    SUBCASE("equal scores average the values") {
        Tensor q({1, d}, {1, 0, 0, 0});
        Tensor k({2, d}, {1, 1, 0, 0, 1, -1, 0, 0});
        Tensor v({2, d}, {2, 4, 6, 8, 0, 0, 2, -2});
        const auto out = attention(q, k, v, {1, 1, 2, 1});
        const std::vector<double> expect{1, 2, 4, 3};
        for (int i = 0; i < d; ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
    SUBCASE("a single key returns its value") {
        Tensor q({1, d}, {0.3, -2, 5, 1});
        Tensor k({1, d}, {1, 2, 3, 4});
        Tensor v({1, d}, {7, -1, 0.5, 3});
        const auto out = attention(q, k, v, {1, 1, 1, 2});
        for (int i = 0; i < d; ++i) CHECK(out[i] == doctest::Approx(v[i]).epsilon(1e-12));
    }
    SUBCASE("a 10 sqrt(d_head) margin selects the first value") {
        const double margin = 10 * std::sqrt(double(d));
        Tensor q({1, d}, {1, 0, 0, 0});
        Tensor k({2, d}, {margin, 0, 0, 0, 0, 0, 0, 0});
        // Residual weight on v2 is e^-10 / (1 + e^-10) ~ 4.5e-5 per unit of |v1 - v2|.
        Tensor v({2, d}, {1, 2, 3, 4, 0, 3, 2, 5.5});
        const auto out = attention(q, k, v, {1, 1, 2, 1});
        for (int i = 0; i < d; ++i) CHECK(std::abs(out[i] - v[i]) < 1e-4);
    }
}

TEST_CASE("attention: weights are distributions and (K,V) permutation invariant") {
    Rng rng(6);
    const int batch = 3, lq = 4, lk = 6, d = 8, heads = 4;
    Tensor q = random_tensor({batch * lq, d}, rng, false, 2.0);
    Tensor k = random_tensor({batch * lk, d}, rng, false, 2.0);
    Tensor v = random_tensor({batch * lk, d}, rng, false);
    std::vector<std::uint8_t> mask(batch * lk, 1);
    mask[2] = 0;
    mask[lk + 5] = 0;

    std::vector<double> weights;
    AttentionOptions opt{batch, lq, lk, heads, mask};
    opt.weights_out = &weights;
    const auto out = attention(q, k, v, opt);
    REQUIRE(weights.size() == static_cast<std::size_t>(batch * heads * lq * lk));
    for (std::size_t r = 0; r < weights.size() / lk; ++r) {
        double s = 0.0;
        for (int j = 0; j < lk; ++j) {
            CHECK(weights[r * lk + j] >= 0.0);
            s += weights[r * lk + j];
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
    CHECK(weights[2] == 0.0);

    // Reverse the keys (and their values and mask) within every sequence.
    Tensor kp = Tensor::zeros({batch * lk, d}), vp = Tensor::zeros({batch * lk, d});
    std::vector<std::uint8_t> mp(mask.size());
    for (int b = 0; b < batch; ++b) {
        for (int j = 0; j < lk; ++j) {
            const int src = b * lk + j, dst = b * lk + (lk - 1 - j);
            for (int c = 0; c < d; ++c) {
                kp[dst * d + c] = k[src * d + c];
                vp[dst * d + c] = v[src * d + c];
            }
            mp[dst] = mask[src];
        }
    }
    const auto outp = attention(q, kp, vp, {batch, lq, lk, heads, mp});
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(std::abs(out[i] - outp[i]) < 1e-9);
}

TEST_CASE("attention: shape errors") {
    Tensor q = Tensor::zeros({2, 8}), k = Tensor::zeros({3, 8}), v = Tensor::zeros({3, 6});
    CHECK_THROWS_AS(attention(q, k, v, {1, 2, 3, 2}), ShapeMismatch);
    CHECK_THROWS_AS(attention(q, k, Tensor::zeros({3, 8}), {1, 2, 3, 3}), ShapeMismatch);
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeMismatch);
    CHECK_THROWS_AS((AttentionConfig{128, 3, 0.1}.validate()), std::invalid_argument);
}

TEST_CASE("lr_factor: closed form at every step") {
    const ScheduleConfig s{100, 1000};
    CHECK(lr_factor(0, s) == 0.0);
    CHECK(std::abs(lr_factor(50, s) - 0.5) < 1e-12);
    CHECK(std::abs(lr_factor(100, s) - 1.0) < 1e-12);
    CHECK(std::abs(lr_factor(550, s) - 0.5) < 1e-12);
    CHECK(std::abs(lr_factor(1000, s)) < 1e-12);
    for (int step = 0; step <= s.total_steps; ++step) {
        const double expect = step < 100 ? step / 100.0
                                         : 0.5 * (1.0 + std::cos(std::numbers::pi * (step - 100) / 900.0));
        CHECK(std::abs(lr_factor(step, s) - expect) < 1e-12);
    }
    CHECK_THROWS_AS(lr_factor(-1, s), std::invalid_argument);
    CHECK_THROWS_AS(lr_factor(1001, s), std::invalid_argument);
    CHECK_THROWS_AS((ScheduleConfig{100, 100}.validate()), std::invalid_argument);
}

TEST_CASE("adamw: decay-only, first step, symmetry, non-finite") {
    OptimConfig cfg;
    SUBCASE("zero gradient only decays") {
        std::vector<double> w{1.0};
        const std::vector<double> g{0.0};
        AdamWState st;
        adamw_step(w, g, st, 1, cfg.lr, cfg);
        CHECK(w[0] == 1.0 * (1.0 - 0.0005 * 0.01));
        CHECK(std::abs(w[0] - 0.999995) < 1e-15);
    }
    SUBCASE("first Adam step moves by lr") {
        cfg.weight_decay = 0.0;
        std::vector<double> w{0.0};
        const std::vector<double> g{1.0};
        AdamWState st;
        adamw_step(w, g, st, 1, cfg.lr, cfg);
        CHECK(std::abs(w[0] + 0.0005) < 1e-8);
    }
    SUBCASE("identical inputs give identical updates") {
        std::vector<double> w{0.3, 0.3};
        const std::vector<double> g{-0.7, -0.7};
        AdamWState st;
        for (long t = 1; t <= 5; ++t) adamw_step(w, g, st, t, cfg.lr, cfg);
        CHECK(w[0] == w[1]);
    }
    SUBCASE("non-finite gradients abort before any change") {
        std::vector<double> w{1.0, 2.0};
        const std::vector<double> g{0.1, std::nan("")};
        AdamWState st;
        CHECK_THROWS_AS(adamw_step(w, g, st, 1, cfg.lr, cfg), NonFiniteGradient);
        CHECK(w == std::vector<double>{1.0, 2.0});
    }
}

TEST_CASE("clip_grad_norm") {
    std::vector<double> g{3.0, 4.0};
    std::vector<std::span<double>> spans{g};
    CHECK(clip_grad_norm(spans, 1.0) == doctest::Approx(0.2));
    CHECK(g[0] == doctest::Approx(0.6));
    CHECK(g[1] == doctest::Approx(0.8));

    std::vector<double> small{0.1, 0.2};
    std::vector<std::span<double>> s2{small};
    CHECK(clip_grad_norm(s2, 1.0) == 1.0);
    CHECK(small == std::vector<double>{0.1, 0.2});

    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> blocks(3);
        std::vector<std::span<double>> sp;
        for (auto& b : blocks) {
            b.resize(1 + rng.below(20));
            for (auto& x : b) x = 5.0 * rng.normal();
            sp.emplace_back(b);
        }
        const double max_norm = rng.uniform(0.1, 3.0);
        clip_grad_norm(sp, max_norm);
        double sq = 0.0;
        for (auto& b : blocks)
            for (double x : b) sq += x * x;
        CHECK(std::sqrt(sq) <= max_norm + 1e-9);
    }
}

TEST_CASE("loss: closed-form examples") {
    SUBCASE("uniform logits give ln C") {
        Tensor logits = Tensor::zeros({1, 5});
        const std::vector<int> t{3};
        CHECK(weather_penalized_cross_entropy(logits, {1, 5, {}, t}, {}).item() ==
              doctest::Approx(std::log(5.0)).epsilon(1e-14));
    }
    SUBCASE("a growing correct margin drives the loss to zero") {
        const std::vector<int> t{0};
        double prev = 1e9;
        for (double m : {1.0, 5.0, 20.0, 50.0}) {
            Tensor logits({1, 3}, {m, 0, 0});
            const double l = weather_penalized_cross_entropy(logits, {1, 3, {}, t}, {}).item();
            CHECK(l < prev);
            prev = l;
        }
        CHECK(prev < 1e-20);
    }
    SUBCASE("equal severities add a constant penalty") {
        Rng rng(9);
        const int b = 3, c = 4;
        Tensor logits = random_tensor({b, c}, rng, false);
        const std::vector<int> t{0, 3, 1};
        const std::vector<double> s_row{0.2, 0.6, 0.1, 0.9};
        std::vector<double> sev;
        for (int i = 0; i < b * c; ++i) sev.insert(sev.end(), s_row.begin(), s_row.end());
        LossConfig plain;
        LossConfig pen;
        pen.lambda = 1.0;
        pen.weather_weights = {1.0, 0.5, 2.0, 0.0};
        const double ce = weather_penalized_cross_entropy(logits, {b, c, {}, t, sev}, plain).item();
        const double total = weather_penalized_cross_entropy(logits, {b, c, {}, t, sev}, pen).item();
        CHECK(total == doctest::Approx(ce + (0.2 + 0.3 + 0.2)).epsilon(1e-12));
    }
    SUBCASE("masked classes are excluded") {
        Tensor logits({1, 3}, {0, 0, 100});
        const std::vector<std::uint8_t> mask{1, 1, 0};
        const std::vector<int> t{0};
        CHECK(weather_penalized_cross_entropy(logits, {1, 3, mask, t}, {}).item() ==
              doctest::Approx(std::log(2.0)));
    }
    SUBCASE("shape errors") {
        Tensor logits = Tensor::zeros({2, 3});
        const std::vector<int> t{0};
        CHECK_THROWS_AS(weather_penalized_cross_entropy(logits, {2, 3, {}, t}, {}), ShapeMismatch);
        LossConfig cfg;
        cfg.lambda = 1.0;
        const std::vector<int> t2{0, 1};
        CHECK_THROWS_AS(weather_penalized_cross_entropy(logits, {2, 3, {}, t2}, cfg), ShapeMismatch);
    }
}

TEST_CASE("dropout: off is deterministic, p = 0 is identity, training rescales") {
    Rng rng(10);
    Tensor x = random_tensor({10, 10}, rng, false);
    Rng a(1), b(2);
    const auto off1 = dropout(x, 0.5, false, a);
    const auto off2 = dropout(x, 0.5, false, b);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        CHECK(off1[i] == x[i]);
        CHECK(off2[i] == x[i]);
    }
    const auto zero = dropout(x, 0.0, true, a);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(zero[i] == x[i]);

    const auto on = dropout(x, 0.5, true, a);
    int dropped = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (on[i] == 0.0) {
            ++dropped;
        } else {
            CHECK(on[i] == doctest::Approx(2.0 * x[i]));
        }
    }
    CHECK(dropped > 25);
    CHECK(dropped < 75);
}

TEST_CASE("tensor tape: no_grad records nothing, gradients accumulate") {
    Tensor w({2}, {1.0, 2.0}, true);
    {
        NoGradGuard ng;
        Tensor y = sum(mul(w, w));
        CHECK_FALSE(y.requires_grad());
    }
    Tensor y = sum(mul(w, w));
    y.backward();
    CHECK(w.grad()[0] == 2.0);
    CHECK(w.grad()[1] == 4.0);
    Tensor y2 = sum(mul(w, w));
    y2.backward();
    CHECK(w.grad()[1] == 8.0);
    w.zero_grad();
    CHECK(w.grad()[1] == 0.0);
}

TEST_CASE("xavier_uniform stays within its bound") {
    Rng rng(11);
    const auto t = xavier_uniform(64, 32, rng);
    const double bound = std::sqrt(6.0 / 96.0);
    double mx = 0.0;
    for (double v : t.data()) mx = std::max(mx, std::abs(v));
    CHECK(mx <= bound);
    CHECK(mx > 0.9 * bound);
}
