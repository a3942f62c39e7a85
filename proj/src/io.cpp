#include "dcvsr/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dcvsr {

namespace fs = std::filesystem;

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 | static_cast<uint32_t>(p[2]) << 16 |
           static_cast<uint32_t>(p[3]) << 24;
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | p[1] << 8); }

float get_f32(const uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

void require_frame(const VideoTensor& frame) {
    if (frame.frames() != 1) throw DimensionError("image: expected a single frame");
    if (frame.channels() != 1 && frame.channels() != 3) throw DimensionError("image: need 1 or 3 channels");
}

// Reads whitespace-separated header tokens, skipping '#' comments.
struct HeaderReader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    std::string token() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        if (t.empty()) throw IoError("image: truncated header");
        return t;
    }

    int integer() {
        const std::string t = token();
        try {
            return std::stoi(t);
        } catch (const std::exception&) {
            throw IoError("image: bad header field '" + t + "'");
        }
    }

    // Exactly one whitespace byte separates the header from the payload.
    void end_header() {
        if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError("image: malformed header");
        ++pos;
    }
};

}  // namespace

std::vector<uint8_t> encode_container(const RawTensor& t) {
    size_t count = 1;
    for (uint32_t d : t.dims) count *= d;
    if (count != t.values.size()) throw DimensionError("container: payload length does not match dims");
    std::vector<uint8_t> out{'D', 'C', 'V', 'T'};
    put_u16(out, kContainerVersion);
    put_u16(out, static_cast<uint16_t>(t.dims.size()));
    for (uint32_t d : t.dims) put_u32(out, d);
    out.reserve(out.size() + 4 * t.values.size());
    for (float v : t.values) put_f32(out, v);
    return out;
}

RawTensor decode_container(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "DCVT", 4) != 0) throw IoError("container: bad magic");
    const uint16_t version = get_u16(bytes.data() + 4);
    if (version != kContainerVersion) throw IoError("container: unsupported version " + std::to_string(version));
    const uint16_t rank = get_u16(bytes.data() + 6);
    size_t pos          = 8;
    if (bytes.size() < pos + 4u * rank) throw IoError("container: truncated dims");
    RawTensor t;
    size_t count = 1;
    for (int i = 0; i < rank; ++i, pos += 4) {
        t.dims.push_back(get_u32(bytes.data() + pos));
        count *= t.dims.back();
    }
    if (bytes.size() != pos + 4 * count) throw IoError("container: payload length does not match dims");
    t.values.resize(count);
    for (size_t i = 0; i < count; ++i, pos += 4) t.values[i] = get_f32(bytes.data() + pos);
    return t;
}

void write_container(const fs::path& path, const VideoTensor& video) {
    const Shape4& s = video.shape();
    RawTensor t{{static_cast<uint32_t>(s.frames), static_cast<uint32_t>(s.channels), static_cast<uint32_t>(s.height),
                 static_cast<uint32_t>(s.width)},
                video.storage()};
    write_file_atomic(path, encode_container(t));
}

VideoTensor read_container(const fs::path& path) {
    RawTensor t = decode_container(read_file(path));
    if (t.dims.size() != 4) throw IoError("container: expected rank 4, got " + std::to_string(t.dims.size()));
    const Shape4 s{static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
                   static_cast<int>(t.dims[3])};
    return VideoTensor(s, std::move(t.values));
}

std::vector<uint8_t> encode_ppm(const VideoTensor& frame) {
    require_frame(frame);
    const int C = frame.channels(), H = frame.height(), W = frame.width();
    const std::string header = std::string(C == 3 ? "P6" : "P5") + "\n" + std::to_string(W) + " " +
                               std::to_string(H) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const double v = std::clamp(static_cast<double>(frame.at(0, c, y, x)), 0.0, 1.0) * 255.0;
                out.push_back(static_cast<uint8_t>(std::lround(v)));
            }
    return out;
}

std::vector<uint8_t> encode_pfm(const VideoTensor& frame) {
    require_frame(frame);
    const int C = frame.channels(), H = frame.height(), W = frame.width();
    const std::string header = std::string(C == 3 ? "PF" : "Pf") + "\n" + std::to_string(W) + " " +
                               std::to_string(H) + "\n-1.0\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    for (int y = H - 1; y >= 0; --y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) put_f32(out, frame.at(0, c, y, x));
    return out;
}

VideoTensor decode_image(const std::vector<uint8_t>& bytes) {
    HeaderReader r{bytes};
    const std::string magic = r.token();
    if (magic == "P5" || magic == "P6") {
        const int C = magic == "P6" ? 3 : 1;
        const int W = r.integer(), H = r.integer(), maxval = r.integer();
        if (maxval != 255) throw IoError("ppm: only 8-bit maxval 255 is supported");
        r.end_header();
        if (W < 1 || H < 1) throw IoError("ppm: bad size");
        if (bytes.size() - r.pos < static_cast<size_t>(W) * H * C) throw IoError("ppm: truncated payload");
        VideoTensor out({1, C, H, W});
        const uint8_t* p = bytes.data() + r.pos;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < C; ++c) out.at(0, c, y, x) = static_cast<float>(*p++ / 255.0);
        return out;
    }
    if (magic == "PF" || magic == "Pf") {
        const int C = magic == "PF" ? 3 : 1;
        const int W = r.integer(), H = r.integer();
        const std::string scale_tok = r.token();
        r.end_header();
        const double scale = std::stod(scale_tok);
        if (scale >= 0) throw IoError("pfm: big-endian payloads are not supported");
        if (W < 1 || H < 1) throw IoError("pfm: bad size");
        if (bytes.size() - r.pos < static_cast<size_t>(W) * H * C * 4) throw IoError("pfm: truncated payload");
        VideoTensor out({1, C, H, W});
        const uint8_t* p = bytes.data() + r.pos;
        for (int y = H - 1; y >= 0; --y)
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < C; ++c, p += 4) out.at(0, c, y, x) = get_f32(p);
        return out;
    }
    throw IoError("image: unsupported format '" + magic + "'");
}

void write_frame(const fs::path& path, const VideoTensor& frame) {
    const std::string ext = path.extension().string();
    if (ext == ".pfm") {
        write_file_atomic(path, encode_pfm(frame));
    } else if (ext == ".ppm" || ext == ".pgm") {
        write_file_atomic(path, encode_ppm(frame));
    } else {
        throw IoError("unsupported frame extension '" + ext + "'");
    }
}

VideoTensor read_frame(const fs::path& path) { return decode_image(read_file(path)); }

void write_frame_dir(const fs::path& dir, const VideoTensor& video, const std::string& ext) {
    fs::create_directories(dir);
    const std::string e = ext == "ppm" && video.channels() == 1 ? "pgm" : ext;
    for (int n = 0; n < video.frames(); ++n) {
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%04d.%s", n, e.c_str());
        write_frame(dir / name, video.frame(n));
    }
}

VideoTensor read_frame_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm" || ext == ".pfm")) files.push_back(entry.path());
    }
    if (files.empty()) throw IoError("no frames in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<VideoTensor> frames;
    for (const auto& f : files) frames.push_back(read_frame(f));
    Shape4 s  = frames.front().shape();
    s.frames  = static_cast<int>(frames.size());
    VideoTensor video(s);
    for (int n = 0; n < s.frames; ++n) {
        Shape4 fs1 = frames[n].shape();
        if (fs1.channels != s.channels || fs1.height != s.height || fs1.width != s.width) {
            throw IoError("frame " + files[n].string() + " has a different size");
        }
        std::ranges::copy(frames[n].frame_span(0), video.frame_span(n).begin());
    }
    return video;
}

VideoTensor read_video(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("input not found: " + path.string());
    if (fs::is_directory(path)) return read_frame_dir(path);
    if (path.extension() == ".dcvt") return read_container(path);
    return read_frame(path);
}

void write_file_atomic(const fs::path& path, const std::vector<uint8_t>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::vector<uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace dcvsr
