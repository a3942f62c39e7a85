#include <doctest.h>

#include <cmath>
#include <random>

#include "dcvsr/degrade.hpp"
#include "dcvsr/guidance.hpp"
#include "dcvsr/sampler.hpp"
#include "test_util.hpp"

using namespace dcvsr;
using testutil::max_abs_diff;
using testutil::random_video;

namespace {

VideoTensor filled(const Shape4& s, float v) {
    VideoTensor t(s);
    std::ranges::fill(t.values(), v);
    return t;
}

// Deterministic stand-in: eps depends nonlinearly on x; the attention map is
// the per-token mean of |x| over channels on a 2x2 token grid.
NoisePrediction fake_noise(const VideoTensor& x, bool want_attention) {
    NoisePrediction out{VideoTensor(x.shape()), std::nullopt};
    for (size_t i = 0; i < x.size(); ++i) out.eps.values()[i] = std::tanh(x.values()[i]) * 0.5f + 0.1f;
    if (want_attention) {
        VideoTensor map({x.frames(), 1, x.height() / 2, x.width() / 2});
        for (int n = 0; n < x.frames(); ++n)
            for (int c = 0; c < x.channels(); ++c)
                for (int y = 0; y < x.height(); ++y)
                    for (int xx = 0; xx < x.width(); ++xx) map.at(n, 0, y / 2, xx / 2) += std::fabs(x.at(n, c, y, xx));
        out.attention_map = map;
    }
    return out;
}

}  // namespace

TEST_CASE("guidance modes and feed-forward costs") {
    CHECK(feed_forwards_per_iteration(GuidanceMode::none) == 1);
    CHECK(feed_forwards_per_iteration(GuidanceMode::cfg) == 2);
    CHECK(feed_forwards_per_iteration(GuidanceMode::dssag) == 2);
    CHECK(feed_forwards_per_iteration(GuidanceMode::cfg_dssag) == 2);
    CHECK(feed_forwards_per_iteration(GuidanceMode::sag) == 3);
    CHECK(feed_forwards_per_iteration(GuidanceMode::pag) == 3);
    for (auto m : {GuidanceMode::none, GuidanceMode::cfg, GuidanceMode::sag, GuidanceMode::pag, GuidanceMode::dssag,
                   GuidanceMode::cfg_dssag})
        CHECK(parse_guidance_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_guidance_mode("cfg+dssag"), ConfigError);
}

TEST_CASE("GuidanceConfig validation") {
    GuidanceConfig c;
    CHECK_NOTHROW(validate(c));
    c.rho = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c                   = {};
    c.sag_mask_quantile = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.sag_mask_quantile = 1.0;
    CHECK_NOTHROW(validate(c));
    c.sag_mask_quantile = 1.5;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("combinators: limiting identities and arithmetic") {
    std::mt19937_64 rng(1);
    const Shape4 s{2, 3, 4, 5};
    const VideoTensor a = random_video(s, rng), b = random_video(s, rng);
    for (auto combine : {&cfg, &pag_combine, &dssag_combine}) {
        CHECK(combine(a, b, -1.0) == a);
        CHECK(combine(a, b, 0.0) == b);
        for (double sc : {-3.0, 0.3, 1.0, 7.5}) CHECK(combine(a, a, sc) == a);
    }
    CHECK(cfg(filled({1, 1, 1, 1}, 0), filled({1, 1, 1, 1}, 1), 1.0).at(0, 0, 0, 0) == 2.0f);
    CHECK(dssag_combine(filled({1, 1, 1, 1}, 1), filled({1, 1, 1, 1}, 3), 0.5).at(0, 0, 0, 0) == 4.0f);
    CHECK_THROWS_AS(cfg(a, random_video({2, 3, 4, 4}, rng), 1.0), DimensionError);
}

TEST_CASE("combinators are affine") {
    std::mt19937_64 rng(2);
    const Shape4 s{1, 2, 3, 3};
    const VideoTensor a = random_video(s, rng), b = random_video(s, rng);
    const double sc     = 0.7;
    const VideoTensor g = guide(a, b, sc);
    for (size_t i = 0; i < g.size(); ++i) {
        const double want = a.values()[i] * (-sc) + b.values()[i] * (1 + sc);
        CHECK(g.values()[i] == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("CFG&DSSAG with a null condition equals plain DSSAG") {
    // With eps_cond == eps_uncond the target branch is the same tensor.
    std::mt19937_64 rng(3);
    const VideoTensor suppressed = random_video({2, 1, 3, 3}, rng), uncond = random_video({2, 1, 3, 3}, rng);
    const VideoTensor cond       = uncond;
    CHECK(dssag_combine(suppressed, cond, 1.3) == dssag_combine(suppressed, uncond, 1.3));
}

TEST_CASE("gamma_schedule") {
    const double hi = 700, lo = 0.002;
    CHECK(gamma_schedule(hi, hi, lo, 0.5) == 1.0);
    CHECK(gamma_schedule(lo, hi, lo, 0.5) == 0.0);
    CHECK(std::fabs(gamma_schedule(std::sqrt(hi * lo), hi, lo, 0.5) - std::sqrt(0.5)) <= 1e-12);
    CHECK(gamma_schedule(std::sqrt(hi * lo), hi, lo, 1.0) == doctest::Approx(0.5).epsilon(1e-12));

    const SigmaSchedule sched = build_sigma_schedule(25);
    double prev               = 2.0;
    for (double sg : sched.sigmas) {
        const double g = gamma_schedule(sg, sched.sigmas.front(), sched.sigmas.back(), 0.5);
        CHECK(g >= 0.0);
        CHECK(g <= 1.0);
        CHECK(g <= prev);
        prev = g;
    }
    CHECK_THROWS_AS(gamma_schedule(800, hi, lo, 0.5), DimensionError);
    CHECK_THROWS_AS(gamma_schedule(1, lo, hi, 0.5), DimensionError);
    CHECK_THROWS_AS(gamma_schedule(1, hi, 0, 0.5), DimensionError);
}

TEST_CASE("sag_mask thresholds at the quantile and upsamples") {
    VideoTensor map({1, 1, 2, 2});
    map.values()[0] = 0.1f;
    map.values()[1] = 0.4f;
    map.values()[2] = 0.2f;
    map.values()[3] = 0.3f;
    const VideoTensor m = sag_mask(map, 0.5, 4, 4);
    // Sorted {0.1, 0.2, 0.3, 0.4}; floor(0.5 * 3) = 1 -> threshold 0.2.
    CHECK(m.at(0, 0, 0, 0) == 0.0f);
    CHECK(m.at(0, 0, 0, 3) == 1.0f);
    CHECK(m.at(0, 0, 3, 0) == 0.0f);
    CHECK(m.at(0, 0, 3, 3) == 1.0f);
    CHECK(m.at(0, 0, 1, 2) == 1.0f);
    const VideoTensor none = sag_mask(map, 1.0, 4, 4);
    CHECK(std::ranges::all_of(none.values(), [](float v) { return v == 0.0f; }));
    CHECK_THROWS_AS(sag_mask(map, 0.5, 5, 4), DimensionError);
}

TEST_CASE("sag reductions") {
    std::mt19937_64 rng(4);
    const VideoTensor x = random_video({2, 2, 8, 8}, rng);
    const VideoTensor eps = fake_noise(x, false).eps;
    GuidanceConfig cfg;
    cfg.mode  = GuidanceMode::sag;
    cfg.scale = 2.0;

    SUBCASE("zero blur leaves x unchanged") {
        cfg.sag_blur_sigma = 0.0;
        const SagResult r  = sag_detailed(fake_noise, x, 0.8, cfg);
        CHECK(r.perturbed == x);
        CHECK(r.guided == eps);
    }
    SUBCASE("empty mask") {
        cfg.sag_mask_quantile = 1.0;
        const SagResult r     = sag_detailed(fake_noise, x, 0.8, cfg);
        CHECK(r.perturbed == x);
        CHECK(r.guided == eps);
    }
    SUBCASE("constant predicted clean signal") {
        // Constant x gives constant eps, so x - sigma * eps is constant too.
        const VideoTensor c = filled({1, 1, 8, 8}, 0.3f);
        const SagResult r   = sag_detailed(fake_noise, c, 0.5, cfg);
        CHECK(max_abs_diff(r.perturbed, c) <= 1e-6);
        CHECK(max_abs_diff(r.guided, fake_noise(c, false).eps) <= 1e-6);
    }
    SUBCASE("perturbation only inside the mask and matches the blurred x0") {
        const double sigma    = 0.7;
        const SagResult r     = sag_detailed(fake_noise, x, sigma, cfg);
        const VideoTensor msk = sag_mask(*fake_noise(x, true).attention_map, cfg.sag_mask_quantile, 8, 8);
        VideoTensor x0(x.shape());
        for (size_t i = 0; i < x.size(); ++i) x0.values()[i] = static_cast<float>(x.values()[i] - sigma * eps.values()[i]);
        const VideoTensor blurred = gaussian_blur(x0, cfg.sag_blur_sigma);
        int changed = 0;
        for (int n = 0; n < 2; ++n)
            for (int c = 0; c < 2; ++c)
                for (int y = 0; y < 8; ++y)
                    for (int xx = 0; xx < 8; ++xx) {
                        if (msk.at(n, 0, y, xx) == 0.0f) {
                            REQUIRE(r.perturbed.at(n, c, y, xx) == x.at(n, c, y, xx));
                        } else {
                            const double want = blurred.at(n, c, y, xx) + sigma * eps.at(n, c, y, xx);
                            REQUIRE(r.perturbed.at(n, c, y, xx) == doctest::Approx(want).epsilon(1e-5));
                            ++changed;
                        }
                    }
        CHECK(changed > 0);
        CHECK(r.eps_blurred == fake_noise(r.perturbed, false).eps);
        CHECK(r.guided == guide(r.eps_blurred, r.eps_plain, cfg.scale));
    }
    SUBCASE("denoiser without an attention map") {
        const NoiseFn plain = [](const VideoTensor& v, bool) { return NoisePrediction{v, std::nullopt}; };
        CHECK_THROWS_AS(sag(plain, x, 0.5, cfg), ConfigError);
    }
    SUBCASE("always two evaluations") {
        int calls              = 0;
        const NoiseFn counting = [&](const VideoTensor& v, bool w) {
            ++calls;
            return fake_noise(v, w);
        };
        cfg.sag_mask_quantile = 1.0;
        sag(counting, x, 0.5, cfg);
        CHECK(calls == 2);
    }
}
