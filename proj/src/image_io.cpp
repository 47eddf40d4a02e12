#include "chromasem/image_io.hpp"

#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace chromasem {
namespace {

cv::Mat to_mat(const RgbImage& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  return rgb;
}

RgbImage from_mat(const cv::Mat& rgb) {
  RgbImage out(rgb.rows, rgb.cols);
  for (int y = 0; y < rgb.rows; ++y)
    std::copy_n(rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3, out.at(y, 0));
  return out;
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw FormatError("empty image stream");
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw FormatError(std::string("image decode failed: ") + e.what());
  }
  if (bgr.empty()) throw FormatError("undecodable image data");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_mat(rgb);
}

RgbImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  cv::Mat bgr;
  cv::cvtColor(to_mat(img), bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) throw FormatError("png encode failed");
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_file(path, encode_png(img));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

RgbImage resize_bilinear(const RgbImage& img, int height, int width) {
  if (img.height == height && img.width == width) return img;
  cv::Mat out;
  cv::resize(to_mat(img), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return from_mat(out);
}

namespace {

template <typename Fn>
Tensor<double> per_plane(const Tensor<double>& t, int height, int width, Fn&& fn) {
  const Shape s = t.shape();
  if (s.n != 1) throw ShapeError("plane ops expect a single image, got " + s.str());
  Tensor<double> out(Shape{1, s.c, height, width});
  for (int c = 0; c < s.c; ++c) {
    cv::Mat src(s.h, s.w, CV_64F, const_cast<double*>(t.plane(0, c)));
    cv::Mat dst(height, width, CV_64F, out.plane(0, c));
    fn(src, dst);
  }
  return out;
}

}  // namespace

Tensor<double> resize_planes(const Tensor<double>& t, int height, int width) {
  if (t.shape().h == height && t.shape().w == width) return t;
  return per_plane(t, height, width, [&](const cv::Mat& src, cv::Mat& dst) {
    cv::Mat tmp;
    cv::resize(src, tmp, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    tmp.copyTo(dst);
  });
}

Tensor<double> pad_replicate(const Tensor<double>& t, int height, int width) {
  const Shape s = t.shape();
  if (height < s.h || width < s.w) throw ShapeError("pad_replicate: target smaller than input");
  return per_plane(t, height, width, [&](const cv::Mat& src, cv::Mat& dst) {
    cv::Mat tmp;
    cv::copyMakeBorder(src, tmp, 0, height - s.h, 0, width - s.w, cv::BORDER_REPLICATE);
    tmp.copyTo(dst);
  });
}

Tensor<double> crop_planes(const Tensor<double>& t, int height, int width) {
  const Shape s = t.shape();
  if (height > s.h || width > s.w) throw ShapeError("crop_planes: window exceeds input");
  return per_plane(t, height, width, [&](const cv::Mat& src, cv::Mat& dst) {
    src(cv::Rect(0, 0, width, height)).copyTo(dst);
  });
}

}  // namespace chromasem
