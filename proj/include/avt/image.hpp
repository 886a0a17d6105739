#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace avt {

/// Dense row-major image with interleaved channels.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    if (height < 0 || width < 0 || channels < 1) {
      throw std::invalid_argument("Image: bad dimensions");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int v, int u, int c = 0) { return data_[index(v, u, c)]; }
  const T& operator()(int v, int u, int c = 0) const { return data_[index(v, u, c)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int v, int u, int c) const {
    return (static_cast<std::size_t>(v) * width_ + u) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// Writes a 3-channel image with values in [0,1] as binary PPM (P6).
template <typename T>
void write_ppm(const std::string& path, const Image<T>& img) {
  if (img.channels() != 3) throw std::invalid_argument("write_ppm: expected 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), [](T v) {
    double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<unsigned char>(c * 255.0 + 0.5);
  });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void append_f32_le(std::vector<unsigned char>& buf, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

inline float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

/// Raw depth dump: little-endian float32, row-major, no header.
template <typename T>
void write_depth_raw(const std::string& path, const Image<T>& depth) {
  if (depth.channels() != 1) throw std::invalid_argument("write_depth_raw: expected 1 channel");
  std::vector<unsigned char> buf;
  buf.reserve(depth.data().size() * 4);
  for (T v : depth.data()) append_f32_le(buf, static_cast<float>(v));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_depth_raw: cannot open " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline Image<float> read_depth_raw(const std::string& path, int height, int width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_depth_raw: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() != static_cast<std::size_t>(height) * width * 4) {
    throw std::runtime_error("read_depth_raw: size mismatch");
  }
  Image<float> img(height, width, 1);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = read_f32_le(&buf[4 * i]);
  return img;
}

}  // namespace avt
