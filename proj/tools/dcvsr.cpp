// dcvsr: command-line front end for the tiled video super-resolution sampler.
//
//   dcvsr upscale  --input LR --output DIR [common flags]
//   dcvsr degrade  --input HR --output DIR
//   dcvsr metrics  --gt DIR --restored DIR [--rows]
//   dcvsr ablate   --input HR --toggles sap,tap,dssag --toggles none ...
//   dcvsr fixture  --pattern translate|texture|constant --output DIR
//
// Exit codes: 0 success, 2 usage/config/I/O, 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcvsr/config.hpp"
#include "dcvsr/degrade.hpp"
#include "dcvsr/fixtures.hpp"
#include "dcvsr/io.hpp"
#include "dcvsr/metrics.hpp"
#include "dcvsr/pipeline.hpp"
#include "dcvsr/toy_models.hpp"

namespace fs = std::filesystem;
using namespace dcvsr;

namespace {

constexpr int kExitUsage   = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
    std::string config;
    std::optional<uint64_t> seed;
    std::optional<int> steps;
    std::optional<std::string> tile;
    std::optional<std::string> guidance;
    std::optional<double> scale;
    std::optional<double> rho;
    std::optional<int> sap_rate;
    std::optional<int> tap_l;
    std::optional<int> threads;
    std::string trace;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "key=value config file");
    app->add_option("--seed", f.seed, "seed for sampling and degradation noise");
    app->add_option("--steps", f.steps, "number of sampling steps T");
    app->add_option("--tile", f.tile, "latent tile size HxWxF");
    app->add_option("--guidance", f.guidance, "none|cfg|sag|pag|dssag|cfg_dssag");
    app->add_option("--scale", f.scale, "guidance scale s");
    app->add_option("--rho", f.rho, "gamma schedule exponent");
    app->add_option("--sap-rate", f.sap_rate, "SAP spatial subsampling stride");
    app->add_option("--tap-l", f.tap_l, "frames injected by TAP");
    app->add_option("--threads", f.threads, "worker threads for tile passes");
    app->add_option("--trace", f.trace, "step trace output path");
}

template <typename T>
std::string text(const T& v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

RunConfig resolve(const CommonFlags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    if (f.seed) {
        apply_setting(cfg, "seed", text(*f.seed));
        apply_setting(cfg, "degrade_seed", text(*f.seed));
    }
    if (f.steps) apply_setting(cfg, "steps", text(*f.steps));
    if (f.tile) apply_setting(cfg, "tile", *f.tile);
    if (f.guidance) apply_setting(cfg, "guidance", *f.guidance);
    if (f.scale) apply_setting(cfg, "scale", text(*f.scale));
    if (f.rho) apply_setting(cfg, "rho", text(*f.rho));
    if (f.sap_rate) apply_setting(cfg, "sap_rate", text(*f.sap_rate));
    if (f.tap_l) apply_setting(cfg, "tap_l", text(*f.tap_l));
    if (f.threads) apply_setting(cfg, "threads", text(*f.threads));
    validate(cfg);
    std::istringstream lines(format_run_config(cfg));
    for (std::string line; std::getline(lines, line);) std::cerr << "config " << line << "\n";
    return cfg;
}

std::unique_ptr<Denoiser> make_denoiser(const RunConfig& cfg, int channels) {
    if (cfg.denoiser == DenoiserKind::analytic) {
        return std::make_unique<AnalyticGaussianDenoiser>(std::vector<float>{static_cast<float>(cfg.analytic_mu)},
                                                          cfg.toy.sigma_data);
    }
    ToyNetSpec spec = cfg.toy;
    spec.channels   = channels;
    return std::make_unique<ToyAttentionDenoiser>(spec);
}

std::string trace_text(const std::vector<StepTrace>& trace) {
    std::string out;
    for (const auto& t : trace) out += format_trace_line(t) + "\n";
    return out;
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

struct MetricRow {
    double psnr = 0, ssim = 0;
    std::optional<double> tof, tlp, we, we_restored, we_gt;
};

MetricRow compute_metrics(const VideoTensor& gt, const VideoTensor& restored, const RunConfig& cfg) {
    require_same_shape(gt, restored, "metrics");
    MetricRow row;
    row.psnr = psnr(gt, restored);
    row.ssim = ssim(gt, restored);
    if (gt.frames() >= 2) {
        const FlowFn flow = block_match_flow_fn(cfg.flow_block, cfg.flow_radius);
        row.tof           = tof(gt, restored, flow);
        row.tlp           = tlp(gt, restored);
        // Raw WE is nonzero for any moving content, so the headline value is
        // the gap to the ground truth's own warping error.
        row.we_restored = warping_error(restored, flow);
        row.we_gt       = warping_error(gt, flow);
        row.we          = std::fabs(*row.we_restored - *row.we_gt);
    }
    return row;
}

std::string opt_text(const std::optional<double>& v) { return v ? fixed(*v) : "n/a"; }

int cmd_upscale(const CommonFlags& common, const std::string& input, const std::string& output,
                const std::string& format) {
    const RunConfig cfg     = resolve(common);
    const VideoTensor lr    = read_video(input);
    const auto denoiser     = make_denoiser(cfg, lr.channels());
    const SampleResult res  = dc_vsr_sample(lr, *denoiser, ToyCodec(cfg.codec_factor), cfg.pipeline);
    if (!res.hr.all_finite()) throw NumericError("upscale: non-finite output");

    const fs::path out(output);
    write_container(out / "hr.dcvt", res.hr);
    if (format != "none") write_frame_dir(out / "frames", res.hr, format);
    write_text_atomic(common.trace.empty() ? out / "trace.txt" : fs::path(common.trace), trace_text(res.trace));
    std::cout << "frames=" << res.hr.frames() << " channels=" << res.hr.channels() << " height=" << res.hr.height()
              << " width=" << res.hr.width() << "\n";
    return 0;
}

int cmd_degrade(const CommonFlags& common, const std::string& input, const std::string& output,
                const std::string& format) {
    const RunConfig cfg  = resolve(common);
    const VideoTensor lr = degrade(read_video(input), cfg.degradation);
    const fs::path out(output);
    write_container(out / "lr.dcvt", lr);
    if (format != "none") write_frame_dir(out / "frames", lr, format);
    std::cout << "frames=" << lr.frames() << " channels=" << lr.channels() << " height=" << lr.height()
              << " width=" << lr.width() << "\n";
    return 0;
}

int cmd_metrics(const CommonFlags& common, const std::string& gt_path, const std::string& restored_path, bool rows) {
    const RunConfig cfg          = resolve(common);
    const VideoTensor gt         = read_video(gt_path);
    const VideoTensor restored   = read_video(restored_path);
    const MetricRow m            = compute_metrics(gt, restored, cfg);
    if (rows) {
        std::cout << "psnr,ssim,tof,tlp,we,we_restored,we_gt\n"
                  << fixed(m.psnr) << "," << fixed(m.ssim) << "," << opt_text(m.tof) << "," << opt_text(m.tlp) << ","
                  << opt_text(m.we) << "," << opt_text(m.we_restored) << "," << opt_text(m.we_gt) << "\n";
    } else {
        std::cout << "psnr=" << fixed(m.psnr) << "\nssim=" << fixed(m.ssim) << "\ntof=" << opt_text(m.tof)
                  << "\ntlp=" << opt_text(m.tlp) << "\nwe=" << opt_text(m.we) << "\nwe_restored="
                  << opt_text(m.we_restored) << "\nwe_gt=" << opt_text(m.we_gt)
                  << "\nnormalization=per_pixel_per_frame_pair\n";
    }
    return 0;
}

struct ToggleSet {
    std::string label;
    bool sap = false, tap = false;
    GuidanceMode guidance = GuidanceMode::cfg;
};

ToggleSet parse_toggles(const std::string& spec) {
    ToggleSet set;
    std::set<std::string> seen;
    int guidance_toggles = 0;
    std::stringstream ss(spec);
    for (std::string tok; std::getline(ss, tok, ',');) {
        if (tok.empty() || tok == "none") continue;
        if (!seen.insert(tok).second) throw ConfigError("ablate: toggle '" + tok + "' repeated");
        if (tok == "sap") set.sap = true;
        else if (tok == "tap") set.tap = true;
        else if (tok == "dssag") set.guidance = GuidanceMode::cfg_dssag, ++guidance_toggles;
        else if (tok == "sag") set.guidance = GuidanceMode::sag, ++guidance_toggles;
        else if (tok == "pag") set.guidance = GuidanceMode::pag, ++guidance_toggles;
        else throw ConfigError("ablate: unknown toggle '" + tok + "' (sap, tap, dssag, sag, pag)");
    }
    if (guidance_toggles > 1) throw ConfigError("ablate: toggles '" + spec + "' select more than one guidance");
    for (const char* name : {"sap", "tap", "dssag", "sag", "pag"}) {
        if (seen.count(name)) set.label += (set.label.empty() ? "" : "+") + std::string(name);
    }
    if (set.label.empty()) set.label = "none";
    return set;
}

int cmd_ablate(const CommonFlags& common, const std::string& input, const std::vector<std::string>& toggle_specs,
               const std::string& output) {
    const RunConfig cfg = resolve(common);
    std::vector<ToggleSet> sets;
    for (const auto& spec : toggle_specs) sets.push_back(parse_toggles(spec));
    if (sets.empty()) sets.push_back(parse_toggles("none"));

    const VideoTensor gt = read_video(input);
    const VideoTensor lr = degrade(gt, cfg.degradation);
    const auto denoiser  = make_denoiser(cfg, gt.channels());
    const ToyCodec codec(cfg.codec_factor);

    std::cout << "set\tpsnr\tssim\ttof\ttlp\twe\tff_per_iter\tgather_per_sap_tile\tsap_steps\ttap_steps\tplain_steps\n";
    for (const auto& set : sets) {
        PipelineConfig p  = cfg.pipeline;
        p.sap             = set.sap;
        p.tap             = set.tap;
        p.guidance.mode   = set.guidance;
        CountingDenoiser counter(*denoiser);
        const SampleResult res = dc_vsr_sample(lr, counter, codec, p);
        if (!res.hr.all_finite()) throw NumericError("ablate: non-finite output for set " + set.label);
        if (!(res.hr.shape() == gt.shape())) {
            throw DimensionError("ablate: output " + to_string(res.hr.shape()) + " does not match input " +
                                 to_string(gt.shape()) + "; upscale must equal down_factor");
        }
        const MetricRow m = compute_metrics(gt, res.hr, cfg);
        const long tiles  = plan_tiles(res.latent.shape(), p.tile).tile_count();
        const double ff   = static_cast<double>(counter.evaluations()) / (static_cast<double>(p.steps) * tiles);
        int counts[3]     = {0, 0, 0};
        for (const auto& t : res.trace) ++counts[static_cast<int>(t.scheme)];
        const int sap_steps = counts[static_cast<int>(Scheme::sap)];
        const double gps    = sap_steps ? static_cast<double>(counter.gathers()) / (sap_steps * tiles) : 0.0;
        std::cout << set.label << "\t" << fixed(m.psnr) << "\t" << fixed(m.ssim) << "\t" << opt_text(m.tof) << "\t"
                  << opt_text(m.tlp) << "\t" << opt_text(m.we) << "\t" << fixed(ff) << "\t" << fixed(gps) << "\t"
                  << counts[static_cast<int>(Scheme::sap)] << "\t" << counts[static_cast<int>(Scheme::tap)] << "\t"
                  << counts[static_cast<int>(Scheme::plain)] << "\n";
        if (!output.empty()) write_text_atomic(fs::path(output) / ("trace_" + set.label + ".txt"), trace_text(res.trace));
    }
    return 0;
}

struct FixtureFlags {
    std::string pattern = "translate";
    int frames = 14, channels = 3, height = 64, width = 64;
    int dy = 1, dx = 2;
    float value = 0.5f;
    std::string output;
};

int cmd_fixture(const CommonFlags& common, const FixtureFlags& f) {
    const RunConfig cfg = resolve(common);
    const Shape4 shape{f.frames, f.channels, f.height, f.width};
    if (f.frames < 1 || (f.channels != 1 && f.channels != 3) || f.height < 1 || f.width < 1) {
        throw ConfigError("fixture: need frames >= 1, channels 1 or 3, positive size");
    }
    VideoTensor hr;
    if (f.pattern == "translate") hr = make_translating_video(shape, f.dy, f.dx, cfg.pipeline.seed);
    else if (f.pattern == "texture") hr = make_textured_video(shape, cfg.pipeline.seed);
    else if (f.pattern == "constant") hr = make_constant_video(shape, f.value);
    else throw ConfigError("fixture: unknown pattern '" + f.pattern + "' (translate, texture, constant)");

    const fs::path out(f.output);
    write_container(out / "hr.dcvt", hr);
    write_frame_dir(out / "hr", hr, "ppm");
    write_container(out / "lr.dcvt", degrade(hr, cfg.degradation));
    write_text_atomic(out / "fixture.cfg", format_run_config(cfg));
    if (f.pattern == "translate") {
        write_text_atomic(out / "flow.txt", "dy=" + std::to_string(f.dy) + "\ndx=" + std::to_string(f.dx) + "\n");
    }
    std::cout << "pattern=" << f.pattern << " shape=" << to_string(shape) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tiled diffusion video super-resolution (desk-scale)"};
    app.require_subcommand(1);

    CommonFlags common;
    std::string input, output, gt, restored, format = "ppm";
    bool rows = false;
    std::vector<std::string> toggles;
    FixtureFlags fixture;

    auto* up = app.add_subcommand("upscale", "upscale an LR video (frame dir or .dcvt)");
    add_common(up, common);
    up->add_option("--input", input, "LR frame directory or .dcvt")->required();
    up->add_option("--output", output, "output directory")->required();
    up->add_option("--format", format, "frame format: ppm|pfm|none")->check(CLI::IsMember({"ppm", "pfm", "none"}));

    auto* dg = app.add_subcommand("degrade", "synthesize an LR video from HR");
    add_common(dg, common);
    dg->add_option("--input", input, "HR frame directory or .dcvt")->required();
    dg->add_option("--output", output, "output directory")->required();
    dg->add_option("--format", format, "frame format: ppm|pfm|none")->check(CLI::IsMember({"ppm", "pfm", "none"}));

    auto* mt = app.add_subcommand("metrics", "compare a restored video against ground truth");
    add_common(mt, common);
    mt->add_option("--gt", gt, "ground-truth frames or .dcvt")->required();
    mt->add_option("--restored", restored, "restored frames or .dcvt")->required();
    mt->add_flag("--rows", rows, "emit a CSV header and row instead of key=value lines");

    auto* ab = app.add_subcommand("ablate", "run toggle sets on one input and compare");
    add_common(ab, common);
    ab->add_option("--input", input, "HR ground-truth frames or .dcvt")->required();
    ab->add_option("--toggles", toggles, "comma-separated subset of sap,tap,dssag,sag,pag or 'none'; repeatable");
    ab->add_option("--output", output, "directory for per-set step traces");

    auto* fx = app.add_subcommand("fixture", "write synthetic HR/LR videos and a fixture config");
    add_common(fx, common);
    fx->add_option("--pattern", fixture.pattern, "translate|texture|constant");
    fx->add_option("--frames", fixture.frames);
    fx->add_option("--channels", fixture.channels);
    fx->add_option("--height", fixture.height);
    fx->add_option("--width", fixture.width);
    fx->add_option("--dy", fixture.dy, "per-frame vertical shift");
    fx->add_option("--dx", fixture.dx, "per-frame horizontal shift");
    fx->add_option("--value", fixture.value, "constant pattern value");
    fx->add_option("--output", fixture.output, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (up->parsed()) return cmd_upscale(common, input, output, format);
        if (dg->parsed()) return cmd_degrade(common, input, output, format);
        if (mt->parsed()) return cmd_metrics(common, gt, restored, rows);
        if (ab->parsed()) return cmd_ablate(common, input, toggles, output);
        if (fx->parsed()) return cmd_fixture(common, fixture);
    } catch (const NumericError& e) {
        std::cerr << "dcvsr: numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "dcvsr: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
