#include "vmr/media_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "vmr/error.hpp"

namespace vmr {
namespace {

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t get_u32(const std::vector<char>& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[off + static_cast<std::size_t>(i)]);
  return v;
}

std::uint16_t get_u16(const std::vector<char>& b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[off]) |
                                    (static_cast<std::uint8_t>(b[off + 1]) << 8));
}

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::ostream& os, std::uint16_t v) {
  os.put(static_cast<char>(v & 0xff));
  os.put(static_cast<char>(v >> 8));
}

}  // namespace

std::vector<GrayFrame> read_video(const std::filesystem::path& path) {
  const auto b = slurp(path);
  if (b.size() < 16 || std::memcmp(b.data(), "UTVF", 4) != 0) {
    throw LoadError(path.string(), "not a UTVF video container");
  }
  const std::uint32_t count = get_u32(b, 4);
  const std::uint32_t h = get_u32(b, 8);
  const std::uint32_t w = get_u32(b, 12);
  const std::size_t frame_bytes = static_cast<std::size_t>(h) * w;
  if (b.size() != 16 + frame_bytes * count) throw LoadError(path.string(), "truncated or oversized UTVF payload");
  std::vector<GrayFrame> frames(count);
  for (std::uint32_t f = 0; f < count; ++f) {
    frames[f].height = static_cast<int>(h);
    frames[f].width = static_cast<int>(w);
    const auto* src = reinterpret_cast<const std::uint8_t*>(b.data() + 16 + f * frame_bytes);
    frames[f].pixels.assign(src, src + frame_bytes);
  }
  return frames;
}

void write_video(const std::filesystem::path& path, const std::vector<GrayFrame>& frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError(path.string(), "cannot create file");
  os.write("UTVF", 4);
  put_u32(os, static_cast<std::uint32_t>(frames.size()));
  const int h = frames.empty() ? 0 : frames.front().height;
  const int w = frames.empty() ? 0 : frames.front().width;
  put_u32(os, static_cast<std::uint32_t>(h));
  put_u32(os, static_cast<std::uint32_t>(w));
  for (const auto& f : frames) {
    if (f.height != h || f.width != w) throw ValidationError("all frames must share one geometry");
    os.write(reinterpret_cast<const char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
  }
}

std::vector<std::int16_t> read_wav(const std::filesystem::path& path) {
  const auto b = slurp(path);
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw LoadError(path.string(), "not a RIFF/WAVE file");
  }
  std::size_t off = 12;
  bool have_fmt = false;
  while (off + 8 <= b.size()) {
    const std::string id(b.data() + off, 4);
    const std::uint32_t size = get_u32(b, off + 4);
    const std::size_t body = off + 8;
    if (body + size > b.size()) throw LoadError(path.string(), "truncated WAV chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw LoadError(path.string(), "short fmt chunk");
      const std::uint16_t format = get_u16(b, body);
      const std::uint16_t channels = get_u16(b, body + 2);
      const std::uint32_t rate = get_u32(b, body + 4);
      const std::uint16_t bits = get_u16(b, body + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw LoadError(path.string(), "only 16-bit PCM mono WAV is supported");
      }
      if (rate != kSampleRate) {
        throw LoadError(path.string(), "sample rate " + std::to_string(rate) + " Hz is not 16000 Hz (resampling unsupported)");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw LoadError(path.string(), "data chunk before fmt chunk");
      std::vector<std::int16_t> s(size / 2);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<std::int16_t>(get_u16(b, body + 2 * i));
      return s;
    }
    off = body + size + (size & 1u);
  }
  throw LoadError(path.string(), "WAV has no data chunk");
}

void write_wav(const std::filesystem::path& path, const std::vector<std::int16_t>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError(path.string(), "cannot create file");
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);
  put_u16(os, 1);
  put_u32(os, kSampleRate);
  put_u32(os, kSampleRate * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (auto s : samples) put_u16(os, static_cast<std::uint16_t>(s));
}

}  // namespace vmr
