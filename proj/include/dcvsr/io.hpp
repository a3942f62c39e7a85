#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcvsr/tensor.hpp"

namespace dcvsr {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// DCVT container: "DCVT", u16 version, u16 rank, rank x u32 dims, then
// little-endian float32 payload in row-major order.
inline constexpr uint16_t kContainerVersion = 1;

struct RawTensor {
    std::vector<uint32_t> dims;
    std::vector<float> values;
};

std::vector<uint8_t> encode_container(const RawTensor& t);
RawTensor decode_container(const std::vector<uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const VideoTensor& video);
VideoTensor read_container(const std::filesystem::path& path);

// Single-frame images. PPM/PGM are 8-bit (round half away from zero after
// clamping to [0, 1]); PFM stores float32 little-endian, rows bottom to top,
// RGB ("PF") or grey ("Pf"). Frames use 1 or 3 channels.
std::vector<uint8_t> encode_ppm(const VideoTensor& frame);
std::vector<uint8_t> encode_pfm(const VideoTensor& frame);
VideoTensor decode_image(const std::vector<uint8_t>& bytes);

void write_frame(const std::filesystem::path& path, const VideoTensor& frame);
VideoTensor read_frame(const std::filesystem::path& path);

// frame_0000.<ext>, frame_0001.<ext>, ... with ext "ppm" or "pfm".
void write_frame_dir(const std::filesystem::path& dir, const VideoTensor& video, const std::string& ext);
// Reads every .ppm/.pgm/.pfm file in lexicographic order.
VideoTensor read_frame_dir(const std::filesystem::path& dir);

// Directory of frames or a .dcvt container.
VideoTensor read_video(const std::filesystem::path& path);

// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<uint8_t> read_file(const std::filesystem::path& path);

}  // namespace dcvsr
