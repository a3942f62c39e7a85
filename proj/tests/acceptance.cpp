// Acceptance checks: one [PASS]/[FAIL] line per criterion. Exits 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dcvsr/attention.hpp"
#include "dcvsr/degrade.hpp"
#include "dcvsr/fixtures.hpp"
#include "dcvsr/guidance.hpp"
#include "dcvsr/latent_grid.hpp"
#include "dcvsr/metrics.hpp"
#include "dcvsr/pipeline.hpp"
#include "dcvsr/sampler.hpp"
#include "dcvsr/toy_models.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcvsr;
using testutil::max_abs_diff;
using testutil::random_matrix;
using testutil::random_video;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("violated: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// 1. Partition of unity and split/merge round trip.
Outcome tiling() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> small(1, 9);
    double worst = 0;
    bool offsets_ok = true;
    for (int trial = 0; trial < 200; ++trial) {
        const TileDims td{small(rng), small(rng), small(rng)};
        const Shape4 s{td.frames + small(rng) - 1, small(rng) % 3 + 1, td.height + small(rng) * 2 - 2,
                       td.width + small(rng) * 2 - 2};
        offsets_ok = offsets_ok && plan_offsets(s.height, td.height) == oracle::tile_offsets(s.height, td.height) &&
                     plan_offsets(s.width, td.width) == oracle::tile_offsets(s.width, td.width) &&
                     plan_offsets(s.frames, td.frames) == oracle::tile_offsets(s.frames, td.frames);
        const TileGrid g = plan_tiles(s, td);
        const VideoTensor v = random_video(s, rng);
        worst = std::max(worst, max_abs_diff(merge(split(v, g), g, gaussian_mask(td)), v));
        VideoTensor ones(s);
        std::ranges::fill(ones.values(), 1.0f);
        worst = std::max(worst, max_abs_diff(merge(split(ones, g), g, gaussian_mask(td)), ones));
    }
    const double secs = seconds_since(t0);
    o.require(offsets_ok, "tile offsets match the stride oracle");
    o.require(worst <= 1e-6, "max abs error <= 1e-6");
    o.require(secs < 10.0, "runtime < 10 s");
    o.note("200 geometries, max abs error " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s");
    return o;
}

// 2. Attention reductions.
Outcome attention_reductions() {
    Outcome o;
    std::mt19937_64 rng(1);
    double ext_err = 0, hi_err = 0;
    bool gamma0_exact = true, pag_exact = true;
    for (int t = 0; t < 100; ++t) {
        const AttentionTensors a{random_matrix(9, 8, rng, 1.5f), random_matrix(9, 8, rng, 1.5f),
                                 random_matrix(9, 3, rng)};
        ext_err = std::max(ext_err, max_abs_diff(extended_self_attention(a, {}), oracle::attention(a.q, a.k, a.v, 1)));
        gamma0_exact = gamma0_exact && dssag_attention(a, {0.0}).data == self_attention(a).data;
        pag_exact    = pag_exact && pag_attention(a).data == a.v.data;
        const double g = std::sqrt(1e6 / (oracle::max_abs(a.q) * oracle::max_abs(a.k)));
        const Matrix hi = dssag_attention(a, {g});
        for (int c = 0; c < a.v.cols; ++c) {
            double mean = 0;
            for (int j = 0; j < a.v.rows; ++j) mean += a.v.at(j, c) / a.v.rows;
            for (int i = 0; i < a.q.rows; ++i) hi_err = std::max(hi_err, std::fabs(hi.at(i, c) - mean));
        }
    }
    o.require(ext_err <= 1e-6, "empty injection matches plain attention within 1e-6");
    o.require(gamma0_exact, "gamma=0 bit-exact");
    o.require(hi_err <= 1e-4, "high-gamma limit within 1e-4 of the value mean");
    o.require(pag_exact, "PAG returns V exactly");
    o.note("100 instances, empty-injection error " + fmt("%.3g", ext_err) + ", high-gamma error " + fmt("%.3g", hi_err));
    return o;
}

// 3. Entropy is non-decreasing in gamma once the temperature exceeds one.
Outcome entropy_monotone() {
    Outcome o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0, rows = 0;
    for (int t = 0; t < 1000; ++t) {
        const AttentionTensors a{random_matrix(3, 4, rng, 2), random_matrix(6, 4, rng, 2), random_matrix(6, 2, rng)};
        const double g_min = 1.0 / std::sqrt(oracle::max_abs(a.q) * oracle::max_abs(a.k));
        // g1 sits at or above the threshold where the temperature departs from one.
        const double g1 = g_min * (1 + 3 * u(rng)), g2 = g1 * (1 + 2 * u(rng));
        const auto p1 = attention_probabilities(a, suppression_temperature(a, {g1}));
        const auto p2 = attention_probabilities(a, suppression_temperature(a, {g2}));
        for (int r = 0; r < 3; ++r, ++rows)
            if (oracle::row_entropy(p2, r) < oracle::row_entropy(p1, r) - 1e-12) ++violations;
    }
    o.require(violations == 0, "zero violations");
    o.note("1000 instances, " + std::to_string(rows) + " rows, " + std::to_string(violations) + " violations");
    return o;
}

// 4. Gamma schedule endpoints and log-midpoint.
Outcome gamma_endpoints() {
    Outcome o;
    const double hi = 700, lo = 0.002;
    const double mid = gamma_schedule(std::sqrt(hi * lo), hi, lo, 0.5);
    o.require(gamma_schedule(hi, hi, lo, 0.5) == 1.0, "gamma(sigma_max) == 1");
    o.require(gamma_schedule(lo, hi, lo, 0.5) == 0.0, "gamma(sigma_min) == 0");
    o.require(std::fabs(mid - std::sqrt(0.5)) <= 1e-12, "log-midpoint within 1e-12 of sqrt(0.5)");
    o.note("midpoint error " + fmt("%.3g", std::fabs(mid - std::sqrt(0.5))));
    return o;
}

ToyNetSpec small_spec() {
    ToyNetSpec s;
    s.seed      = 3;
    s.channels  = 3;
    s.patch     = 2;
    s.embed_dim = 16;
    s.cond_dim  = 4;
    return s;
}

// 5. Guidance algebra and feed-forward counts.
Outcome guidance_algebra() {
    Outcome o;
    std::mt19937_64 rng(5);
    const VideoTensor a = random_video({2, 3, 4, 4}, rng), b = random_video({2, 3, 4, 4}, rng);
    bool limits = true;
    for (auto combine : {&cfg, &pag_combine, &dssag_combine})
        limits = limits && combine(a, b, -1.0) == a && combine(a, b, 0.0) == b;
    o.require(limits, "s=-1 and s=0 identities exact");

    const ToyAttentionDenoiser toy(small_spec());
    const VideoTensor x = random_video({4, 3, 4, 4}, rng), l = random_video({4, 3, 4, 4}, rng);
    const std::vector<float> null(4, 0.0f);
    PipelineConfig pc;
    pc.tile       = {4, 4, 4};
    pc.tap_frames = 2;
    PipelineConfig pd = pc;
    pc.guidance.mode = GuidanceMode::cfg_dssag;
    pd.guidance.mode = GuidanceMode::dssag;
    const StepContext ctx{3.0, 0.7, null};
    o.require(DcVsrSampler(toy, pc).evaluate_tile(x, l, ctx, {}, false).eps ==
                  DcVsrSampler(toy, pd).evaluate_tile(x, l, ctx, {}, false).eps,
              "CFG&DSSAG with null condition equals DSSAG");

    const VideoTensor lat = random_video({6, 3, 8, 8}, rng), init = random_video({6, 3, 8, 8}, rng);
    const long tiles      = plan_tiles(lat.shape(), pc.tile).tile_count();
    const std::vector<float> cond{0.3f, -0.2f, 0.5f, 0.1f};
    std::string counts;
    for (const auto& [mode, want] : {std::pair{GuidanceMode::cfg_dssag, 2}, std::pair{GuidanceMode::sag, 3},
                                     std::pair{GuidanceMode::pag, 3}}) {
        CountingDenoiser counter(toy);
        PipelineConfig p = pc;
        p.steps          = 4;
        p.guidance.mode  = mode;
        DcVsrSampler(counter, p).sample_latent(lat, init, cond);
        const double per_iter = static_cast<double>(counter.evaluations()) / (4.0 * tiles);
        o.require(per_iter == want, std::string(to_string(mode)) + " feed-forwards per iteration");
        counts += std::string(counts.empty() ? "" : ", ") + std::string(to_string(mode)) + "=" + fmt("%g", per_iter);
    }
    o.note("feed-forward/iter " + counts);
    return o;
}

// 6. Sampler against the closed-form Gaussian trajectory.
Outcome sampler_oracle() {
    Outcome o;
    const auto t0   = Clock::now();
    const double sd = 0.5, mu = 0.0;
    const AnalyticGaussianDenoiser den({static_cast<float>(mu)}, sd);
    const DenoiseFn fn = [&](const VideoTensor& x, double s) { return den.analytic_denoise(x, s); };
    const SigmaSchedule sched = build_sigma_schedule(200);
    const double s0 = sched.sigmas.front(), s1 = sched.sigmas.back();

    VideoTensor x0({1, 1, 100, 100});
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, s0);
    for (float& v : x0.values()) v = static_cast<float>(n(rng));

    auto worst_rel = [&](const VideoTensor& out) {
        double w = 0;
        for (size_t i = 0; i < out.size(); ++i) {
            const double want = oracle::gaussian_ode(x0.values()[i], mu, sd, s0, s1);
            w = std::max(w, std::fabs(out.values()[i] - want) / std::max(std::fabs(want - mu), 1e-12));
        }
        return w;
    };
    const VideoTensor heun  = sample_ode(x0, fn, sched, OdeSolver::heun);
    const VideoTensor euler = sample_ode(x0, fn, sched, OdeSolver::euler);
    const double rel = worst_rel(heun);

    double mean = 0, sq = 0;
    for (float v : heun.values()) mean += v;
    mean /= static_cast<double>(heun.size());
    for (float v : heun.values()) sq += (v - mean) * (v - mean);
    const double var     = sq / static_cast<double>(heun.size());
    const double var_err = std::fabs(var - sd * sd) / (sd * sd);
    const double secs    = seconds_since(t0);

    o.require(rel <= 1e-3, "per-trajectory relative error <= 1e-3");
    o.require(var_err <= 0.03, "output variance within 3% of sigma_data^2");
    o.require(secs < 60.0, "runtime < 60 s");
    o.note("Heun T=200 relative error " + fmt("%.3g", rel) + " (Euler " + fmt("%.3g", worst_rel(euler)) +
           "), 10k samples variance " + fmt("%.5f", var) + " vs " + fmt("%.5f", sd * sd) + ", " + fmt("%.2f", secs) +
           " s");
    return o;
}

// 7. TAP frame selection and injected-token fraction.
Outcome tap_selection() {
    Outcome o;
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> count(2, 14), pick(0, 100);
    int agree = 0, ties = 0;
    for (int t = 0; t < 100; ++t) {
        const int F = count(rng);
        std::vector<Matrix> frames;
        for (int f = 0; f < F; ++f) {
            if (f > 0 && pick(rng) < 35) {
                frames.push_back(frames[std::uniform_int_distribution<int>(0, f - 1)(rng)]);
                ++ties;
            } else {
                frames.push_back(random_matrix(6, 4, rng, 0.5f + static_cast<float>(pick(rng)) / 100.0f));
            }
        }
        const int L = std::uniform_int_distribution<int>(0, F)(rng);
        agree += select_tap_frames(frames, L) == oracle::tap_frames(frames, L);
    }
    o.require(agree == 100, "selection equals brute-force ranking on all 100 instances");

    const ToyAttentionDenoiser toy(small_spec());
    PipelineConfig p;
    p.tile          = {4, 4, 14};
    p.tap_frames    = 4;
    p.guidance.mode = GuidanceMode::none;
    std::vector<VideoTensor> xs, ls;
    for (int n = 0; n < 2; ++n) {
        xs.push_back(random_video({14, 3, 4, 4}, rng));
        ls.push_back(random_video({14, 3, 4, 4}, rng));
    }
    const std::vector<float> cond(4, 0.0f);
    const PassResult r = DcVsrSampler(toy, p).denoise_pass_tap(xs, ls, {2.0, 0.5, cond}, TapDirection::forward);
    const int tokens   = (4 / 2) * (4 / 2);
    const double frac  = static_cast<double>(r.injected_rows[1]) / (14.0 * tokens);
    o.require(r.injected_rows[0] == 0 && r.injected_rows[1] == 4 * tokens, "4 injected frames of tokens");
    o.require(std::fabs(frac - 4.0 / 14.0) <= 1e-12, "injected fraction 4/14");
    o.note("100 instances (" + std::to_string(ties) + " tied frames), injected " + std::to_string(r.injected_rows[1]) +
           " rows vs " + std::to_string(14 * tokens) + " own = " + fmt("%.4f", frac));
    return o;
}

// 8. Metrics on identical videos, integer translations and hand-built cases.
Outcome metrics_checks() {
    Outcome o;
    const FlowFn flow = block_match_flow_fn(8, 4);
    const VideoTensor v = make_translating_video({5, 3, 32, 32}, 1, -2, 42);
    o.require(psnr(v, v) == 99.0 && ssim(v, v) == 1.0, "psnr/ssim maximal on identical videos");
    o.require(tof(v, v, flow) == 0.0 && tlp(v, v) == 0.0, "tOF/tLP zero on identical videos");
    const double we_gap = std::fabs(warping_error(v, flow) - warping_error(v, flow));
    o.require(we_gap == 0.0, "WE gap zero on identical videos");

    bool exact_flow = true;
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> d(-3, 3);
    for (int t = 0; t < 20; ++t) {
        const int dy = d(rng), dx = d(rng);
        const VideoTensor m = make_translating_video({3, 3, 32, 32}, dy, dx, 500 + t);
        const FlowField f   = block_match_flow(m.frame(0), m.frame(1), 8, 4);
        for (int y = 8; y < 24; ++y)
            for (int x = 8; x < 24; ++x) exact_flow = exact_flow && f.at_dy(y, x) == dy && f.at_dx(y, x) == dx;
        o.require(warping_error(m, flow, 8) == 0.0, "interior WE exactly zero");
    }
    o.require(exact_flow, "interior block-match flow exact on integer translations");

    // Frames of constant value c_i with a flow oracle returning a uniform
    // vertical displacement c_{i+1} - c_i: tOF is the mean |0.5 - 0.2| = 0.3.
    VideoTensor g({3, 1, 4, 4}), r({3, 1, 4, 4});
    for (int n = 0; n < 3; ++n)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                g.at(n, 0, y, x) = 0.2f * n;
                r.at(n, 0, y, x) = 0.5f * n;
            }
    const FlowFn level_flow = [](const VideoTensor& a, const VideoTensor& b) {
        FlowField f{a.height(), a.width(), {}, {}};
        f.dy.assign(static_cast<size_t>(a.height()) * a.width(), b.values()[0] - a.values()[0]);
        f.dx.assign(f.dy.size(), 0.0f);
        return f;
    };
    const double tof_v = tof(g, r, level_flow), tlp_v = tlp(g, r);
    o.require(std::fabs(tof_v - 0.3) <= 1e-6, "tOF hand case 0.3");
    o.require(std::fabs(tlp_v - 0.3) <= 1e-6, "tLP hand case 0.3");
    o.note("tOF " + fmt("%.7f", tof_v) + ", tLP " + fmt("%.7f", tlp_v) + ", 20 translations exact");
    return o;
}

struct SmokeRun {
    SampleResult one, again, threaded;
    double seconds = 0;
};

// Shared by criteria 9 and 10.
const SmokeRun& smoke_run() {
    static const SmokeRun run = [] {
        SmokeRun s;
        ToyNetSpec spec = small_spec();
        spec.cond_dim   = 8;
        const ToyAttentionDenoiser toy(spec);
        const ToyCodec codec(4);
        const VideoTensor hr = make_translating_video({14, 3, 64, 64}, 1, 1, 7);
        DegradationConfig dc;
        const VideoTensor lr = degrade(hr, dc);

        PipelineConfig p;
        p.steps         = 25;
        p.tile          = {8, 8, 8};
        p.sap           = true;
        p.tap           = true;
        p.guidance.mode = GuidanceMode::cfg_dssag;
        p.upscale       = 4;
        p.seed          = 1;
        p.threads       = 1;
        const auto t0   = Clock::now();
        s.one           = dc_vsr_sample(lr, toy, codec, p);
        s.seconds       = seconds_since(t0);
        s.again         = dc_vsr_sample(lr, toy, codec, p);
        p.threads       = 4;
        s.threaded      = dc_vsr_sample(lr, toy, codec, p);
        return s;
    }();
    return run;
}

// 9. End-to-end determinism and smoke.
Outcome end_to_end() {
    Outcome o;
    const SmokeRun& s = smoke_run();
    o.require(s.one.hr.shape() == Shape4{14, 3, 64, 64}, "output 64x64x14");
    o.require(s.one.hr.all_finite(), "finite output");
    o.require(s.one.hr == s.again.hr, "byte-identical across repeated runs");
    o.require(s.one.hr == s.threaded.hr, "byte-identical across 1 and 4 threads");
    o.require(s.seconds < 300.0, "single-core run < 5 minutes");
    o.note("16x16x14 -> " + to_string(s.one.hr.shape()) + ", T=25, SAP+TAP+CFG&DSSAG, single thread " +
           fmt("%.2f", s.seconds) + " s");
    return o;
}

// 10. SAP and TAP alternate every step; TAP direction flips between TAP steps.
Outcome alternation() {
    Outcome o;
    const auto& trace = smoke_run().one.trace;
    o.require(trace.size() == 25, "25 steps traced");
    bool alternates = true, flips = true;
    TapDirection last = TapDirection::none;
    int sap = 0, tap = 0;
    for (size_t i = 0; i < trace.size(); ++i) {
        const Scheme want = i % 2 == 0 ? Scheme::sap : Scheme::tap;
        alternates        = alternates && trace[i].scheme == want;
        if (trace[i].scheme == Scheme::tap) {
            ++tap;
            const TapDirection d = trace[i].direction;
            flips = flips && d != TapDirection::none &&
                    (last == TapDirection::none ? d == TapDirection::forward : d != last);
            last = d;
        } else {
            ++sap;
        }
    }
    o.require(alternates, "SAP/TAP alternate every step");
    o.require(flips, "TAP direction flips");
    o.note(std::to_string(sap) + " SAP steps, " + std::to_string(tap) + " TAP steps");
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 tiling partition of unity and round trip", tiling},
        {"2 attention reductions", attention_reductions},
        {"3 DSSAG entropy monotone in gamma", entropy_monotone},
        {"4 gamma schedule endpoints and log-midpoint", gamma_endpoints},
        {"5 guidance algebra and feed-forward counts", guidance_algebra},
        {"6 sampler against closed-form Gaussian ODE", sampler_oracle},
        {"7 TAP selection and injected fraction", tap_selection},
        {"8 metrics on constructed videos", metrics_checks},
        {"9 end-to-end determinism and smoke", end_to_end},
        {"10 SAP/TAP alternation contract", alternation},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass   = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
