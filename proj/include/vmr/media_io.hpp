#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vmr {

inline constexpr int kSampleRate = 16000;

// One 8-bit grayscale frame, row-major.
struct GrayFrame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
  bool operator==(const GrayFrame&) const = default;
};

// Raw frame container: "UTVF", u32 frame count, u32 height, u32 width
// (little-endian), then frames row-major. All frames share one geometry.
std::vector<GrayFrame> read_video(const std::filesystem::path& path);
void write_video(const std::filesystem::path& path, const std::vector<GrayFrame>& frames);

// 16-bit PCM mono WAV at 16 kHz. Other formats are rejected.
std::vector<std::int16_t> read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const std::vector<std::int16_t>& samples);

}  // namespace vmr
