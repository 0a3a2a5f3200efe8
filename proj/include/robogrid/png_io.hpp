#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "robogrid/error.hpp"
#include "robogrid/image.hpp"

namespace robogrid {

namespace detail {

inline bool has_png_signature(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) return false;
  unsigned char sig[8] = {};
  const std::size_t n = std::fread(sig, 1, sizeof(sig), f);
  std::fclose(f);
  return n == sizeof(sig) && png_sig_cmp(sig, 0, sizeof(sig)) == 0;
}

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace detail

// Decodes any PNG (gray, palette, 16-bit, alpha) into 8-bit RGB. Non-PNG
// inputs are rejected with an IoError naming the path.
inline Frame read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("cannot read '" + path.string() + "': no such file");
  }
  if (!detail::has_png_signature(path)) {
    throw IoError("cannot read '" + path.string() + "': not a PNG file");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw IoError("cannot decode '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode '" + path.string() + "': " + msg);
  }
  return Frame(static_cast<int>(image.height), static_cast<int>(image.width), std::move(buffer));
}

// Writes a lossless 8-bit RGB PNG. Only the .png extension is accepted so that
// supervision outputs can never silently end up in a lossy container.
inline void write_png(const std::filesystem::path& path, const Frame& frame) {
  if (detail::lower_extension(path) != ".png") {
    throw InvalidInput("refusing to write '" + path.string() + "': only lossless .png output is supported");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width());
  image.height = static_cast<png_uint_32>(frame.height());
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.c_str(), 0, frame.pixels().data(), 0, nullptr) == 0) {
    throw IoError("cannot write '" + path.string() + "': " + image.message);
  }
}

}  // namespace robogrid
