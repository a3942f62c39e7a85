#include "dcvsr/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>

#include "dcvsr/io.hpp"

namespace dcvsr {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("config: bad value '" + std::string(value) + "' for key '" + std::string(key) + "'");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    throw ConfigError("config: bad boolean '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define DCVSR_INT(member)                                                                               \
    Field {                                                                                             \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.member = parse_number<int>(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                                \
    }
#define DCVSR_U64(member)                                                                                    \
    Field {                                                                                                  \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.member = parse_number<uint64_t>(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                                     \
    }
#define DCVSR_REAL(member)                                                                                 \
    Field {                                                                                                \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.member = parse_number<double>(k, v); }, \
            [](const RunConfig& c) { return fmt(c.member); }                                              \
    }
#define DCVSR_BOOL(member)                                                                           \
    Field {                                                                                          \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.member = parse_bool(k, v); }, \
            [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }            \
    }

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"steps", DCVSR_INT(pipeline.steps)},
        {"sigma_min", DCVSR_REAL(pipeline.sigma_min)},
        {"sigma_max", DCVSR_REAL(pipeline.sigma_max)},
        {"schedule_exponent", DCVSR_REAL(pipeline.schedule_exponent)},
        {"tile",
         Field{[](RunConfig& c, std::string_view, std::string_view v) { c.pipeline.tile = parse_tile_dims(v); },
               [](const RunConfig& c) {
                   return std::to_string(c.pipeline.tile.height) + "x" + std::to_string(c.pipeline.tile.width) + "x" +
                          std::to_string(c.pipeline.tile.frames);
               }}},
        {"sap", DCVSR_BOOL(pipeline.sap)},
        {"tap", DCVSR_BOOL(pipeline.tap)},
        {"sap_rate", DCVSR_INT(pipeline.sap_rate)},
        {"tap_l", DCVSR_INT(pipeline.tap_frames)},
        {"tap_range", DCVSR_INT(pipeline.tap_range)},
        {"start_phase",
         Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v == "sap") c.pipeline.start = StartPhase::sap_first;
                   else if (v == "tap") c.pipeline.start = StartPhase::tap_first;
                   else throw ConfigError("config: bad value '" + std::string(v) + "' for key '" + std::string(k) + "'");
               },
               [](const RunConfig& c) { return std::string(c.pipeline.start == StartPhase::sap_first ? "sap" : "tap"); }}},
        {"guidance",
         Field{[](RunConfig& c, std::string_view, std::string_view v) {
                   c.pipeline.guidance.mode = parse_guidance_mode(v);
               },
               [](const RunConfig& c) { return std::string(to_string(c.pipeline.guidance.mode)); }}},
        {"scale", DCVSR_REAL(pipeline.guidance.scale)},
        {"rho", DCVSR_REAL(pipeline.guidance.rho)},
        {"sag_blur_sigma", DCVSR_REAL(pipeline.guidance.sag_blur_sigma)},
        {"sag_mask_quantile", DCVSR_REAL(pipeline.guidance.sag_mask_quantile)},
        {"blend_sigma_fraction", DCVSR_REAL(pipeline.blend_sigma_fraction)},
        {"upscale", DCVSR_INT(pipeline.upscale)},
        {"seed", DCVSR_U64(pipeline.seed)},
        {"threads", DCVSR_INT(pipeline.threads)},
        {"denoiser",
         Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v == "toy") c.denoiser = DenoiserKind::toy;
                   else if (v == "analytic") c.denoiser = DenoiserKind::analytic;
                   else throw ConfigError("config: bad value '" + std::string(v) + "' for key '" + std::string(k) + "'");
               },
               [](const RunConfig& c) { return std::string(c.denoiser == DenoiserKind::toy ? "toy" : "analytic"); }}},
        {"toy_seed", DCVSR_U64(toy.seed)},
        {"toy_patch", DCVSR_INT(toy.patch)},
        {"toy_dim", DCVSR_INT(toy.embed_dim)},
        {"toy_layers", DCVSR_INT(toy.spatial_layers)},
        {"cond_dim", DCVSR_INT(toy.cond_dim)},
        {"sigma_data", DCVSR_REAL(toy.sigma_data)},
        {"analytic_mu", DCVSR_REAL(analytic_mu)},
        {"codec_factor", DCVSR_INT(codec_factor)},
        {"blur_sigma", DCVSR_REAL(degradation.blur_sigma)},
        {"down_factor", DCVSR_INT(degradation.down_factor)},
        {"noise_sigma", DCVSR_REAL(degradation.noise_sigma)},
        {"quant_levels", DCVSR_INT(degradation.quant_levels)},
        {"degrade_seed", DCVSR_U64(degradation.seed)},
        {"flow_block", DCVSR_INT(flow_block)},
        {"flow_radius", DCVSR_INT(flow_radius)},
    };
    return table;
}

#undef DCVSR_INT
#undef DCVSR_U64
#undef DCVSR_REAL
#undef DCVSR_BOOL

}  // namespace

TileDims parse_tile_dims(std::string_view text) {
    std::vector<int> parts;
    size_t start = 0;
    while (true) {
        const size_t sep          = text.find_first_of("xX", start);
        const std::string_view tok = text.substr(start, sep == std::string_view::npos ? sep : sep - start);
        parts.push_back(parse_number<int>("tile", tok));
        if (sep == std::string_view::npos) break;
        start = sep + 1;
    }
    if (parts.size() != 3) throw ConfigError("config: tile must be HxWxF, got '" + std::string(text) + "'");
    return {parts[0], parts[1], parts[2]};
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            field.set(cfg, key, trim(value));
            return;
        }
    }
    throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
    int line_no  = 0;
    size_t start = 0;
    while (start <= text.size()) {
        const size_t end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("config: line " + std::to_string(line_no) + " is not key=value");
            }
            apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::vector<uint8_t> bytes;
    try {
        bytes = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_run_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), std::move(base));
}

std::string format_run_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [name, field] : fields()) out += name + "=" + field.get(cfg) + "\n";
    return out;
}

std::vector<std::string> run_config_keys() {
    std::vector<std::string> keys;
    for (const auto& [name, field] : fields()) keys.push_back(name);
    return keys;
}

void validate(const RunConfig& cfg) {
    validate(cfg.pipeline);
    validate(cfg.degradation);
    validate(cfg.toy);
    if (cfg.codec_factor < 1) throw ConfigError("config: codec_factor must be >= 1");
    if (cfg.flow_block < 1 || cfg.flow_radius < 0) throw ConfigError("config: bad flow_block/flow_radius");
}

}  // namespace dcvsr
