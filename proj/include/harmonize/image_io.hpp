#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <string>

#include "harmonize/serialize.hpp"
#include "harmonize/tensor.hpp"

namespace harmonize {

// PNG interchange: 8-bit, values mapped linearly from [-1,1].
inline std::uint8_t to_u8(double v) {
  double x = (std::clamp(v, -1.0, 1.0) + 1.0) * 127.5;
  return static_cast<std::uint8_t>(std::lround(x));
}

inline double from_u8(std::uint8_t v) { return v / 127.5 - 1.0; }

// Tensor [C,H,W], C in {1,3,4}, channel order RGB(A).
inline void write_png(const std::string& path, const Tensor& img) {
  if (img.ndim() != 3) throw IoError("write_png: need [C,H,W]");
  int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (C != 1 && C != 3 && C != 4) throw IoError("write_png: channels must be 1, 3 or 4");
  int type = C == 1 ? CV_8UC1 : (C == 3 ? CV_8UC3 : CV_8UC4);
  cv::Mat m(H, W, type);
  // OpenCV stores BGR(A)
  static const int swap3[3] = {2, 1, 0};
  static const int swap4[4] = {2, 1, 0, 3};
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      std::uint8_t* p = m.ptr<std::uint8_t>(r) + static_cast<size_t>(c) * C;
      for (int ch = 0; ch < C; ++ch) {
        int src = C == 1 ? 0 : (C == 3 ? swap3[ch] : swap4[ch]);
        p[ch] = to_u8(img.at3(src, r, c));
      }
    }
  if (!cv::imwrite(path, m)) throw IoError("write_png: failed to write " + path);
}

inline Tensor read_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw IoError("read_png: cannot read " + path);
  int C = m.channels();
  if (C != 1 && C != 3 && C != 4) throw IoError("read_png: unsupported channel count");
  Tensor img({C, m.rows, m.cols});
  static const int swap3[3] = {2, 1, 0};
  static const int swap4[4] = {2, 1, 0, 3};
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const std::uint8_t* p = m.ptr<std::uint8_t>(r) + static_cast<size_t>(c) * C;
      for (int ch = 0; ch < C; ++ch) {
        int dst = C == 1 ? 0 : (C == 3 ? swap3[ch] : swap4[ch]);
        img.at3(dst, r, c) = from_u8(p[ch]);
      }
    }
  return img;
}

}  // namespace harmonize
