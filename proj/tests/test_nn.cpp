#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <functional>

#include "cigan/core/io.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/gan/discriminator.hpp"
#include "cigan/gan/generator.hpp"
#include "cigan/nn/adam.hpp"
#include "cigan/nn/checkpoint.hpp"
#include "cigan/nn/layers.hpp"
#include "cigan/nn/params.hpp"

using namespace cigan;
namespace fs = std::filesystem;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t) v = rng.uniform(lo, hi);
    return t;
}

// Random projection loss L(y) = sum(y .* r); dL/dy = r.
struct ProjectionLoss {
    Tensor<double> r;
    explicit ProjectionLoss(const std::vector<int>& shape, Rng& rng) : r(shape) {
        for (auto& v : r) v = rng.uniform(-1.0, 1.0);
    }
    double value(const Tensor<double>& y) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
        return acc;
    }
};

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double central_diff(const std::function<double()>& f, double& x, double h = 1e-5) {
    const double x0 = x;
    x = x0 + h;
    const double fp = f();
    x = x0 - h;
    const double fm = f();
    x = x0;
    return (fp - fm) / (2.0 * h);
}

} // namespace

TEST_CASE("conv2d gradients match central differences") {
    Rng rng(11);
    nn::Conv2d<double> conv(2, 3, 3);
    conv.init_he_uniform(rng);
    Tensor<double> x = random_tensor({2, 6, 6}, rng);
    ProjectionLoss loss({3, 6, 6}, rng);

    conv.zero_grads();
    const Tensor<double> y = conv.forward(x);
    const Tensor<double> dx = conv.backward(x, loss.r, true);

    auto eval = [&]() { return loss.value(conv.forward(x)); };

    Rng pick(12);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t wi = pick.uniform_int(conv.w.size());
        const double fd = central_diff(eval, conv.w[wi]);
        CHECK(rel_err(conv.gw[wi], fd) < 1e-6);
    }
    for (std::size_t bi = 0; bi < conv.b.size(); ++bi) {
        const double fd = central_diff(eval, conv.b[bi]);
        CHECK(rel_err(conv.gb[bi], fd) < 1e-6);
    }
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t xi = pick.uniform_int(x.size());
        const double fd = central_diff(eval, x[xi]);
        CHECK(rel_err(dx[xi], fd) < 1e-6);
    }
}

TEST_CASE("dense gradients match central differences") {
    Rng rng(21);
    nn::Dense<double> fc(10, 4);
    fc.init_he_uniform(rng);
    Tensor<double> x = random_tensor({10}, rng, -1.0, 1.0);
    ProjectionLoss loss({4}, rng);

    fc.zero_grads();
    const Tensor<double> dx = fc.backward(x, loss.r, true);
    auto eval = [&]() { return loss.value(fc.forward(x)); };

    for (std::size_t i = 0; i < fc.w.size(); ++i)
        CHECK(rel_err(fc.gw[i], central_diff(eval, fc.w[i])) < 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(rel_err(dx[i], central_diff(eval, x[i])) < 1e-6);
}

TEST_CASE("pool, upsample and activation gradients match central differences") {
    Rng rng(31);
    Tensor<double> x = random_tensor({2, 8, 8}, rng, -1.0, 1.0);
    ProjectionLoss pool_loss({2, 4, 4}, rng);

    SECTION("max pool") {
        Tensor<int> argmax;
        (void)nn::maxpool2_forward(x, argmax);
        const Tensor<double> dx = nn::maxpool2_backward(argmax, pool_loss.r, 8, 8);
        auto eval = [&]() {
            Tensor<int> am;
            return pool_loss.value(nn::maxpool2_forward(x, am));
        };
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(rel_err(dx[i], central_diff(eval, x[i], 1e-7)) < 1e-5);
    }

    SECTION("nearest upsample") {
        ProjectionLoss up_loss({2, 16, 16}, rng);
        const Tensor<double> dx = nn::upsample_nearest2_backward(up_loss.r);
        auto eval = [&]() { return up_loss.value(nn::upsample_nearest2_forward(x)); };
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(rel_err(dx[i], central_diff(eval, x[i])) < 1e-7);
    }

    SECTION("relu / leaky relu / sigmoid / global pool") {
        ProjectionLoss same_loss({2, 8, 8}, rng);
        {
            const Tensor<double> y = nn::relu_forward(x);
            const Tensor<double> dx = nn::relu_backward(y, same_loss.r);
            auto eval = [&]() { return same_loss.value(nn::relu_forward(x)); };
            for (std::size_t i = 0; i < x.size(); ++i)
                CHECK(rel_err(dx[i], central_diff(eval, x[i], 1e-7)) < 1e-5);
        }
        {
            const Tensor<double> y = nn::leaky_relu_forward(x, 0.2);
            const Tensor<double> dx = nn::leaky_relu_backward(y, same_loss.r, 0.2);
            auto eval = [&]() { return same_loss.value(nn::leaky_relu_forward(x, 0.2)); };
            for (std::size_t i = 0; i < x.size(); ++i)
                CHECK(rel_err(dx[i], central_diff(eval, x[i], 1e-7)) < 1e-5);
        }
        {
            const Tensor<double> y = nn::sigmoid_forward(x);
            const Tensor<double> dx = nn::sigmoid_backward(y, same_loss.r);
            auto eval = [&]() { return same_loss.value(nn::sigmoid_forward(x)); };
            for (std::size_t i = 0; i < x.size(); ++i)
                CHECK(rel_err(dx[i], central_diff(eval, x[i])) < 1e-6);
        }
        {
            ProjectionLoss ch_loss({2}, rng);
            const Tensor<double> dx = nn::global_avg_pool_backward(ch_loss.r, 8, 8);
            auto eval = [&]() { return ch_loss.value(nn::global_avg_pool_forward(x)); };
            for (std::size_t i = 0; i < x.size(); ++i)
                CHECK(rel_err(dx[i], central_diff(eval, x[i])) < 1e-7);
        }
    }
}

TEST_CASE("adam matches a hand-computed trace on one parameter") {
    Tensor<double> theta({1}, 1.0);
    Tensor<double> grad({1});
    std::vector<nn::NamedParam<double>> params{{"theta", &theta, &grad}};
    nn::Adam<double> adam(nn::AdamConfig{0.1, 0.9, 0.999, 1e-8}, params);

    const double g[3] = {0.5, -0.3, 0.2};
    const double expected[3] = {0.900000002, 0.8808501989417752, 0.846107430790882};
    for (int t = 0; t < 3; ++t) {
        grad[0] = g[t];
        adam.step(params);
        CHECK(theta[0] == Catch::Approx(expected[t]).epsilon(1e-12));
    }
}

TEST_CASE("generator cascade has the configured shape") {
    GeneratorConfig cfg; // defaults: 4 -> 256, kernels 128,128,64,64,32,32,32
    CHECK(cfg.num_blocks() == 7);
    Generator<float> gen(cfg);
    CHECK(gen.block_output_channels() == std::vector<int>{128, 128, 64, 64, 32, 32, 32});
    CHECK(gen.head_output_channels() == 1);
    CHECK(gen.parameter_count() == 709729);

    GeneratorConfig toy;
    toy.base_resolution = 4;
    toy.final_resolution = 16;
    toy.block_kernel_counts = {8, 8, 4};
    Generator<double> tiny(toy);
    // Hand arithmetic: two 3x3 convs per block plus the 1-channel head.
    auto conv_params = [](int in, int out) { return in * out * 9 + out; };
    const std::size_t expected =
        static_cast<std::size_t>(conv_params(4, 8) + conv_params(8, 8) + conv_params(12, 8) +
                                 conv_params(8, 8) + conv_params(12, 4) + conv_params(4, 4) +
                                 conv_params(4, 1));
    CHECK(expected == 2957);
    CHECK(tiny.parameter_count() == expected);

    GeneratorConfig bad = cfg;
    bad.base_resolution = 5;
    CHECK_THROWS_AS(Generator<float>(bad), ConfigError);
    bad = cfg;
    bad.block_kernel_counts = {1, 2, 3};
    CHECK_THROWS_AS(Generator<float>(bad), ConfigError);
}

TEST_CASE("generator output shape, range and determinism") {
    GeneratorConfig cfg;
    cfg.final_resolution = 32;
    cfg.block_kernel_counts = {16, 16, 8, 8};
    Generator<float> gen(cfg);
    gen.init(3);
    Rng rng(7);
    Tensor<float> stack({4, 32, 32});
    for (auto& v : stack) v = static_cast<float>(rng.uniform());
    const Tensor<float> a = gen.forward(stack);
    const Tensor<float> b = gen.forward(stack);
    REQUIRE(a.dim(0) == 32);
    REQUIRE(a.dim(1) == 32);
    CHECK(all_in_unit_range(a));
    CHECK(max_abs_diff(a, b) == 0.0f);
}

TEST_CASE("generator parameter gradients match central differences") {
    GeneratorConfig cfg;
    cfg.base_resolution = 4;
    cfg.final_resolution = 16;
    cfg.block_kernel_counts = {8, 8, 4};
    Generator<double> gen(cfg);
    gen.init(5);
    Rng rng(6);
    Tensor<double> stack = random_tensor({4, 16, 16}, rng);
    ProjectionLoss loss({16, 16}, rng);

    gen.zero_grads();
    typename Generator<double>::Trace trace;
    (void)gen.forward(stack, &trace);
    gen.backward(trace, loss.r);

    auto params = gen.params();
    auto eval = [&]() { return loss.value(gen.forward(stack)); };
    Rng pick(8);
    int checked = 0;
    for (const auto& p : params) {
        for (int trial = 0; trial < 4; ++trial) {
            const std::size_t i = pick.uniform_int(p.value->size());
            const double fd = central_diff(eval, (*p.value)[i]);
            CHECK(rel_err((*p.grad)[i], fd) < 1e-4);
            ++checked;
        }
    }
    CHECK(checked >= 40);
}

TEST_CASE("discriminator shape audit and gradients") {
    DiscriminatorConfig cfg; // 256 input
    cfg.validate();
    CHECK(cfg.kernel_counts() == std::vector<int>{32, 64, 128, 256, 512});
    CHECK(cfg.pooled_resolution() == 8); // 256 / 2^5
    Discriminator<float> full(cfg);
    CHECK(full.layer_kernel_counts() == std::vector<int>{32, 64, 128, 256, 512});

    DiscriminatorConfig toy = cfg;
    toy.input_resolution = 32;
    CHECK(toy.pooled_resolution() == 1);

    DiscriminatorConfig bad = cfg;
    bad.input_resolution = 100; // not divisible by 32
    CHECK_THROWS_AS(Discriminator<float>(bad), ConfigError);

    Discriminator<double> disc(toy);
    disc.init(9);
    Rng rng(10);
    Tensor<double> image = random_tensor({32, 32}, rng);
    typename Discriminator<double>::Trace trace;
    const double p = disc.forward(image, LesionClass::malignant, &trace);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(disc.forward(image, LesionClass::malignant) == p);

    disc.zero_grads();
    const Tensor<double> dimage = disc.backward(trace, 1.0, true, true);
    auto eval = [&]() {
        return static_cast<double>(disc.forward(image, LesionClass::malignant));
    };
    Rng pick(11);
    auto params = disc.params();
    for (const auto& prm : params) {
        for (int trial = 0; trial < 3; ++trial) {
            const std::size_t i = pick.uniform_int(prm.value->size());
            const double fd = central_diff(eval, (*prm.value)[i]);
            CHECK(rel_err((*prm.grad)[i], fd) < 1e-4);
        }
    }
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t i = pick.uniform_int(image.size());
        const double fd = central_diff(eval, image[i]);
        CHECK(rel_err(dimage[i], fd) < 1e-4);
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
    const fs::path dir = fs::temp_directory_path() / "cigan_test_nn";
    fs::create_directories(dir);
    GeneratorConfig cfg;
    cfg.final_resolution = 16;
    cfg.block_kernel_counts = {8, 8, 4};
    Generator<float> gen(cfg);
    gen.init(17);
    NetworkParams params = gen.to_params(1234);
    const std::string path = (dir / "gen.ckpt").string();
    save_checkpoint(path, params);

    const NetworkParams back = load_checkpoint(path, cfg.fingerprint());
    CHECK(back.iteration == 1234);
    REQUIRE(back.tensors.size() == params.tensors.size());
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        CHECK(back.tensors[i].first == params.tensors[i].first);
        REQUIRE(back.tensors[i].second.size() == params.tensors[i].second.size());
        for (std::size_t j = 0; j < params.tensors[i].second.size(); ++j)
            REQUIRE(back.tensors[i].second[j] == params.tensors[i].second[j]);
    }

    Generator<float> gen2(cfg);
    gen2.load(back);
    Rng rng(3);
    Tensor<float> stack({4, 16, 16});
    for (auto& v : stack) v = static_cast<float>(rng.uniform());
    CHECK(max_abs_diff(gen.forward(stack), gen2.forward(stack)) == 0.0f);
}

TEST_CASE("checkpoint rejects wrong fingerprint, version and truncation") {
    const fs::path dir = fs::temp_directory_path() / "cigan_test_nn";
    fs::create_directories(dir);
    GeneratorConfig cfg;
    cfg.final_resolution = 16;
    cfg.block_kernel_counts = {8, 8, 4};
    Generator<float> gen(cfg);
    gen.init(1);
    const std::string path = (dir / "fp.ckpt").string();
    save_checkpoint(path, gen.to_params());

    GeneratorConfig other = cfg;
    other.block_kernel_counts = {8, 4, 4};
    CHECK_THROWS_AS(load_checkpoint(path, other.fingerprint()), DataError);

    // Truncate the payload.
    const std::string full = read_text_file(path);
    const std::string cut = (dir / "cut.ckpt").string();
    write_text_file(cut, full.substr(0, full.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(cut), DataError);

    // Corrupt the magic.
    std::string bad = full;
    bad[0] = 'X';
    const std::string badpath = (dir / "bad.ckpt").string();
    write_text_file(badpath, bad);
    CHECK_THROWS_AS(load_checkpoint(badpath), DataError);
}
