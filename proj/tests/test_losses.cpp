#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "cigan/core/rng.hpp"
#include "cigan/gan/extractor.hpp"
#include "cigan/gan/losses.hpp"

using namespace cigan;

namespace {

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double central_diff(const std::function<double()>& f, double& x, double h = 1e-6) {
    const double x0 = x;
    x = x0 + h;
    const double fp = f();
    x = x0 - h;
    const double fm = f();
    x = x0;
    return (fp - fm) / (2.0 * h);
}

// Independent forward pass for the oracle: direct nested-loop convolution,
// no im2col, written against the same conventions (3x3, zero padding,
// ReLU, 2x2 max pool).
Tensor<double> naive_conv3(const Tensor<double>& x, const Tensor<double>& w,
                           const Tensor<double>& b) {
    const int ci = x.dim(0), h = x.dim(1), q = x.dim(2);
    const int co = w.dim(0);
    Tensor<double> y({co, h, q});
    for (int o = 0; o < co; ++o) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < q; ++c) {
                double acc = b[static_cast<std::size_t>(o)];
                for (int i = 0; i < ci; ++i)
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int rr = r + dr, cc = c + dc;
                            if (rr < 0 || rr >= h || cc < 0 || cc >= q) continue;
                            acc += x.at(i, rr, cc) * w.at(o, i, dr + 1, dc + 1);
                        }
                y.at(o, r, c) = acc;
            }
        }
    }
    return y;
}

Tensor<double> naive_relu(Tensor<double> x) {
    for (auto& v : x) v = std::max(v, 0.0);
    return x;
}

Tensor<double> naive_pool2(const Tensor<double>& x) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<double> y({c, h / 2, w / 2});
    for (int ch = 0; ch < c; ++ch)
        for (int r = 0; r < h / 2; ++r)
            for (int q = 0; q < w / 2; ++q)
                y.at(ch, r, q) = std::max({x.at(ch, 2 * r, 2 * q), x.at(ch, 2 * r, 2 * q + 1),
                                           x.at(ch, 2 * r + 1, 2 * q), x.at(ch, 2 * r + 1, 2 * q + 1)});
    return y;
}

double naive_feature_loss(PerceptualExtractor<double>& extractor, const Tensor<double>& real,
                          const Tensor<double>& gen) {
    auto params = extractor.params();
    auto stage = [&](const Tensor<double>& in, int idx) {
        const Tensor<double>& w = *params[static_cast<std::size_t>(2 * idx)].value;
        const Tensor<double>& b = *params[static_cast<std::size_t>(2 * idx + 1)].value;
        return naive_pool2(naive_relu(naive_conv3(in, w, b)));
    };
    auto replicate = [](const Tensor<double>& img) {
        Tensor<double> x({3, img.dim(0), img.dim(1)});
        for (int r = 0; r < img.dim(0); ++r)
            for (int c = 0; c < img.dim(1); ++c)
                for (int ch = 0; ch < 3; ++ch)
                    x.at(ch, r, c) = img.at(r, c);
        return x;
    };
    Tensor<double> a = replicate(real), b = replicate(gen);
    double total = 0.0;
    for (int l = 0; l < 3; ++l) {
        a = stage(a, l);
        b = stage(b, l);
        double layer = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) layer += std::abs(a[i] - b[i]);
        total += layer / static_cast<double>(a.size());
    }
    return total;
}

} // namespace

TEST_CASE("adversarial losses reproduce the hand-computed values") {
    const std::vector<double> half{0.5};
    const auto mid = adversarial_losses(half, half);
    CHECK(mid.d_loss == Catch::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(mid.g_loss == Catch::Approx(std::log(2.0)).epsilon(1e-12));

    // Generator winning: d_fake -> 1 clamps, g_loss -> ~0.
    const std::vector<double> one{1.0};
    const auto gwin = adversarial_losses(half, one);
    CHECK(gwin.g_loss == Catch::Approx(0.0).margin(1e-6));

    // Discriminator winning: d_real ~ 1, d_fake ~ 0 -> d_loss ~ 0.
    const std::vector<double> eps_lo{1e-7};
    const std::vector<double> eps_hi{1.0 - 1e-7};
    const auto dwin = adversarial_losses(eps_hi, eps_lo);
    CHECK(dwin.d_loss == Catch::Approx(0.0).margin(1e-6));

    CHECK_THROWS_AS(adversarial_losses({}, one), InvalidInputError);
    CHECK_THROWS_AS(adversarial_losses(one, {}), InvalidInputError);

    // Batch means.
    const std::vector<double> reals{0.9, 0.8};
    const std::vector<double> fakes{0.3, 0.1};
    const auto batch = adversarial_losses(reals, fakes);
    const double expect_d = -0.5 * (std::log(0.9) + std::log(0.8)) -
                            0.5 * (std::log(0.7) + std::log(0.9));
    const double expect_g = -0.5 * (std::log(0.3) + std::log(0.1));
    CHECK(batch.d_loss == Catch::Approx(expect_d).epsilon(1e-12));
    CHECK(batch.g_loss == Catch::Approx(expect_g).epsilon(1e-12));
}

TEST_CASE("boundary weight follows the mask boundary") {
    Mask zero({64, 64});
    const auto wz = boundary_weight<double>(zero);
    for (double v : wz) CHECK(v == 0.0);

    // All-one mask: the morphological boundary sits on the frame edge, so
    // the blurred weight is maximal there and decays inward.
    Mask ones({64, 64});
    ones.fill(1);
    const auto wo = boundary_weight<double>(ones, 4.0);
    CHECK(wo.at(0, 32) > wo.at(10, 32));
    CHECK(wo.at(10, 32) > wo.at(31, 32));
    for (double v : wo) CHECK(v >= 0.0);

    // Centered square: weight peaks near the square's edge and decays in
    // both directions along the outward normal.
    Mask square({256, 256});
    for (int r = 96; r < 160; ++r)
        for (int c = 96; c < 160; ++c)
            square.at(r, c) = 1;
    const auto ws = boundary_weight<double>(square, 10.0);
    const int mid = 128;
    CHECK(ws.at(mid, 160) > ws.at(mid, 170));
    CHECK(ws.at(mid, 170) > ws.at(mid, 180));
    CHECK(ws.at(mid, 180) > ws.at(mid, 188));
    CHECK(ws.at(mid, 159) > ws.at(mid, 128)); // decays toward the interior too
    CHECK(ws.at(mid, 220) == 0.0);            // beyond the 3-sigma truncation radius
    double near = 0.0, far = 0.0;
    for (int c = 150; c < 170; ++c) near += ws.at(mid, c);
    for (int c = 20; c < 40; ++c) far += ws.at(mid, c);
    CHECK(near > 10.0 * far);
}

TEST_CASE("boundary weight is translation equivariant away from the frame") {
    Mask mask({64, 64});
    for (int r = 24; r < 32; ++r)
        for (int c = 20; c < 30; ++c)
            mask.at(r, c) = 1;
    Mask shifted({64, 64});
    const int dr = 3, dc = 5;
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c)
            if (mask.at(r, c)) shifted.at(r + dr, c + dc) = 1;

    const auto w0 = boundary_weight<double>(mask, 2.0);
    const auto w1 = boundary_weight<double>(shifted, 2.0);
    // Compare on the interior where both blur supports stay clear of the
    // frame (reflective padding only matters near the edges).
    for (int r = 10; r < 50; ++r)
        for (int c = 10; c < 45; ++c)
            CHECK(std::abs(w1.at(r + dr, c + dc) - w0.at(r, c)) < 1e-12);
}

TEST_CASE("boundary loss arithmetic") {
    Tensor<double> a({8, 8}, 0.25), b({8, 8}, 0.25), w({8, 8}, 1.0);
    CHECK(boundary_loss(a, b, w) == 0.0);

    Tensor<double> w0({8, 8}, 0.0);
    Tensor<double> c({8, 8}, 0.9);
    CHECK(boundary_loss(a, c, w0) == 0.0);

    Tensor<double> w1({8, 8}, 0.0);
    w1.at(3, 4) = 1.0;
    Tensor<double> d = a;
    d.at(3, 4) = 0.75; // diff 0.5 at the single weighted pixel
    CHECK(boundary_loss(a, d, w1) == Catch::Approx(0.5).epsilon(1e-12));

    Tensor<double> bad({4, 4});
    CHECK_THROWS_AS(boundary_loss(a, bad, w), InvalidInputError);
}

TEST_CASE("total generator loss is the weighted sum") {
    LossWeights w;
    CHECK(total_generator_loss(0.0, 0.0, 0.0, w) == 0.0);
    CHECK(total_generator_loss(0.6931, 0.1, 0.0001, w) ==
          Catch::Approx(0.6931 + 1.0 + 1.0).epsilon(1e-12));
    LossWeights zero{0.0, 0.0, 0.0};
    CHECK(total_generator_loss(3.0, 4.0, 5.0, zero) == 0.0);
    CHECK_THROWS_AS(total_generator_loss(std::nan(""), 0.0, 0.0, w), NumericError);

    // Linearity in each term.
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        const double adv = rng.uniform(), feat = rng.uniform(), bound = rng.uniform();
        const double k = rng.uniform(0.5, 2.0);
        CHECK(total_generator_loss(k * adv, feat, bound, w) -
                  total_generator_loss(0.0, feat, bound, w) ==
              Catch::Approx(k * adv * w.adversarial).epsilon(1e-9));
        CHECK(total_generator_loss(adv, k * feat, bound, w) -
                  total_generator_loss(adv, 0.0, bound, w) ==
              Catch::Approx(k * feat * w.feature).epsilon(1e-9));
    }
}

TEST_CASE("feature loss matches an independent forward-pass oracle") {
    ExtractorConfig cfg;
    cfg.init_seed = 0;
    PerceptualExtractor<double> extractor(cfg);

    Tensor<double> zeros({64, 64}, 0.0);
    Tensor<double> ones({64, 64}, 1.0);
    const double via_library = feature_loss(extractor, zeros, ones);
    const double via_oracle = naive_feature_loss(extractor, zeros, ones);
    CHECK(via_library > 0.0);
    CHECK(rel_err(via_library, via_oracle) < 1e-6);

    CHECK(feature_loss(extractor, ones, ones) == 0.0);

    Rng rng(4);
    Tensor<double> ra({32, 32}), rb({32, 32});
    for (auto& v : ra) v = rng.uniform();
    for (auto& v : rb) v = rng.uniform();
    const double lib = feature_loss(extractor, ra, rb);
    CHECK(lib >= 0.0);
    CHECK(rel_err(lib, naive_feature_loss(extractor, ra, rb)) < 1e-6);
}

TEST_CASE("feature loss gradient matches central differences on 8x8 doubles") {
    ExtractorConfig cfg;
    cfg.init_seed = 0;
    PerceptualExtractor<double> extractor(cfg);
    Rng rng(12);
    Tensor<double> real({8, 8}), gen({8, 8});
    for (auto& v : real) v = rng.uniform();
    for (auto& v : gen) v = rng.uniform();

    Tensor<double> dgen;
    (void)feature_loss(extractor, real, gen, &dgen);
    auto eval = [&]() { return static_cast<double>(feature_loss(extractor, real, gen)); };
    for (std::size_t i = 0; i < gen.size(); ++i) {
        const double fd = central_diff(eval, gen[i]);
        CHECK(rel_err(dgen[i], fd) < 1e-4);
    }
}

TEST_CASE("boundary loss gradient matches central differences on 8x8 doubles") {
    Rng rng(13);
    Mask mask({8, 8});
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(0.4) ? 1 : 0;
    const Tensor<double> w = boundary_weight<double>(mask, 1.5);
    Tensor<double> real({8, 8}), gen({8, 8});
    for (auto& v : real) v = rng.uniform();
    for (auto& v : gen) v = rng.uniform();

    Tensor<double> dgen;
    (void)boundary_loss(real, gen, w, &dgen);
    auto eval = [&]() { return boundary_loss(real, gen, w); };
    for (std::size_t i = 0; i < gen.size(); ++i) {
        const double fd = central_diff(eval, gen[i]);
        CHECK(rel_err(dgen[i], fd) < 1e-4);
    }
}
