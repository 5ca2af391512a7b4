#include "bacdet/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include <jpeglib.h>

namespace bacdet {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw io_error("cannot open file: " + path.string());
  return f;
}

enum class RasterFormat { png, jpeg, tiff, unknown };

RasterFormat sniff_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path.string());
  unsigned char magic[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(magic), 4);
  if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G')
    return RasterFormat::png;
  if (magic[0] == 0xFF && magic[1] == 0xD8) return RasterFormat::jpeg;
  if ((magic[0] == 'I' && magic[1] == 'I' && magic[2] == 42 && magic[3] == 0) ||
      (magic[0] == 'M' && magic[1] == 'M' && magic[2] == 0 && magic[3] == 42))
    return RasterFormat::tiff;
  return RasterFormat::unknown;
}

// Interleaved RGB rows -> planar Image channels.
Image planes_from_rows(const std::vector<std::vector<unsigned char>>& rows, int h, int w) {
  Image img;
  for (auto& c : img.channels) c.resize(h, w);
  for (int y = 0; y < h; ++y) {
    const unsigned char* row = rows[static_cast<size_t>(y)].data();
    for (int x = 0; x < w; ++x) {
      img.channels[0](y, x) = row[3 * x + 0];
      img.channels[1](y, x) = row[3 * x + 1];
      img.channels[2](y, x) = row[3 * x + 2];
    }
  }
  return img;
}

Image read_png_rgb(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("libpng init failed");
  }
  std::vector<std::vector<unsigned char>> rows;
  int h = 0, w = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("failed to decode PNG: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth > 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("16-bit rasters are not supported: " + path.string());
  }
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  h = static_cast<int>(png_get_image_height(png, info));
  w = static_cast<int>(png_get_image_width(png, info));
  rows.assign(static_cast<size_t>(h), std::vector<unsigned char>(png_get_rowbytes(png, info)));
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) row_ptrs[static_cast<size_t>(y)] = rows[static_cast<size_t>(y)].data();
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return planes_from_rows(rows, h, w);
}

void write_png(const std::filesystem::path& path, int h, int w, int channels,
               const std::vector<unsigned char>& interleaved) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("failed to encode PNG: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    row_ptrs[static_cast<size_t>(y)] =
        const_cast<unsigned char*>(interleaved.data()) + static_cast<size_t>(y) * w * channels;
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Image read_jpeg_rgb(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw io_error("failed to decode JPEG: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int h = static_cast<int>(cinfo.output_height);
  const int w = static_cast<int>(cinfo.output_width);
  std::vector<std::vector<unsigned char>> rows(static_cast<size_t>(h),
                                               std::vector<unsigned char>(static_cast<size_t>(w) * 3));
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* rowp = rows[cinfo.output_scanline].data();
    jpeg_read_scanlines(&cinfo, &rowp, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return planes_from_rows(rows, h, w);
}

// Minimal baseline TIFF reader: uncompressed, 8-bit, chunky, gray or RGB,
// strip-organized, little- or big-endian.
class TiffReader {
 public:
  explicit TiffReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file: " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (bytes_.size() < 8) fail("truncated TIFF");
    little_ = bytes_[0] == 'I';
  }

  Image read() {
    const std::uint32_t ifd_off = u32(4);
    parse_ifd(ifd_off);
    if (bits_per_sample_ != 8) fail("only 8-bit TIFF supported");
    if (compression_ != 1) fail("only uncompressed TIFF supported");
    if (samples_ != 1 && samples_ != 3) fail("only gray/RGB TIFF supported");
    if (strip_offsets_.empty()) fail("missing strip offsets");
    if (rows_per_strip_ == 0) rows_per_strip_ = height_;

    std::vector<std::vector<unsigned char>> rows(
        static_cast<size_t>(height_), std::vector<unsigned char>(static_cast<size_t>(width_) * 3));
    std::uint32_t y = 0;
    for (size_t s = 0; s < strip_offsets_.size() && y < height_; ++s) {
      const std::uint32_t n_rows = std::min(rows_per_strip_, height_ - y);
      std::uint64_t off = strip_offsets_[s];
      const std::uint64_t need = static_cast<std::uint64_t>(n_rows) * width_ * samples_;
      if (off + need > bytes_.size()) fail("strip out of bounds");
      for (std::uint32_t r = 0; r < n_rows; ++r, ++y) {
        unsigned char* dst = rows[y].data();
        for (std::uint32_t x = 0; x < width_; ++x) {
          if (samples_ == 3) {
            dst[3 * x + 0] = bytes_[off++];
            dst[3 * x + 1] = bytes_[off++];
            dst[3 * x + 2] = bytes_[off++];
          } else {
            const unsigned char v = bytes_[off++];
            dst[3 * x + 0] = dst[3 * x + 1] = dst[3 * x + 2] = v;
          }
        }
      }
    }
    return planes_from_rows(rows, static_cast<int>(height_), static_cast<int>(width_));
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw io_error(what + ": " + path_.string());
  }

  std::uint16_t u16(std::uint64_t off) const {
    if (off + 2 > bytes_.size()) throw io_error("truncated TIFF: " + path_.string());
    return little_ ? static_cast<std::uint16_t>(bytes_[off] | (bytes_[off + 1] << 8))
                   : static_cast<std::uint16_t>((bytes_[off] << 8) | bytes_[off + 1]);
  }
  std::uint32_t u32(std::uint64_t off) const {
    if (off + 4 > bytes_.size()) throw io_error("truncated TIFF: " + path_.string());
    if (little_)
      return bytes_[off] | (bytes_[off + 1] << 8) | (bytes_[off + 2] << 16) |
             (static_cast<std::uint32_t>(bytes_[off + 3]) << 24);
    return (static_cast<std::uint32_t>(bytes_[off]) << 24) | (bytes_[off + 1] << 16) |
           (bytes_[off + 2] << 8) | bytes_[off + 3];
  }

  std::uint32_t entry_value(std::uint64_t entry_off, std::uint16_t type, std::uint32_t index) const {
    const std::uint32_t size = type == 3 ? 2 : 4;  // SHORT or LONG
    const std::uint32_t count = u32(entry_off + 4);
    std::uint64_t base = entry_off + 8;
    if (size * count > 4) base = u32(entry_off + 8);
    if (index >= count) throw io_error("TIFF tag index out of range: " + path_.string());
    return type == 3 ? u16(base + 2ull * index) : u32(base + 4ull * index);
  }

  void parse_ifd(std::uint32_t ifd_off) {
    const std::uint16_t n = u16(ifd_off);
    for (std::uint16_t i = 0; i < n; ++i) {
      const std::uint64_t e = ifd_off + 2 + 12ull * i;
      const std::uint16_t tag = u16(e);
      const std::uint16_t type = u16(e + 2);
      const std::uint32_t count = u32(e + 4);
      switch (tag) {
        case 256: width_ = entry_value(e, type, 0); break;
        case 257: height_ = entry_value(e, type, 0); break;
        case 258: bits_per_sample_ = u16_or_long(e, type); break;
        case 259: compression_ = entry_value(e, type, 0); break;
        case 273:
          for (std::uint32_t k = 0; k < count; ++k)
            strip_offsets_.push_back(entry_value(e, type, k));
          break;
        case 277: samples_ = entry_value(e, type, 0); break;
        case 278: rows_per_strip_ = entry_value(e, type, 0); break;
        default: break;
      }
    }
    if (width_ == 0 || height_ == 0) fail("missing TIFF dimensions");
  }

  std::uint16_t u16_or_long(std::uint64_t entry_off, std::uint16_t type) const {
    return static_cast<std::uint16_t>(entry_value(entry_off, type, 0));
  }

  std::filesystem::path path_;
  std::vector<unsigned char> bytes_;
  bool little_ = true;
  std::uint32_t width_ = 0, height_ = 0, rows_per_strip_ = 0;
  std::uint32_t compression_ = 1, samples_ = 1;
  std::uint16_t bits_per_sample_ = 8;
  std::vector<std::uint32_t> strip_offsets_;
};

}  // namespace

Image load_image(const std::filesystem::path& path, std::string id) {
  if (!std::filesystem::exists(path)) throw io_error("no such file: " + path.string());
  Image img;
  switch (sniff_format(path)) {
    case RasterFormat::png: img = read_png_rgb(path); break;
    case RasterFormat::jpeg: img = read_jpeg_rgb(path); break;
    case RasterFormat::tiff: img = TiffReader(path).read(); break;
    default: throw io_error("unrecognized raster format: " + path.string());
  }
  if (img.height() < 1 || img.width() < 1) throw data_error("empty raster: " + path.string());
  img.id = id.empty() ? path.stem().string() : std::move(id);
  img.source_path = path.string();
  return img;
}

BinaryMask load_mask_any_size(const std::filesystem::path& path, std::string image_id) {
  const Image raw = load_image(path);
  BinaryMask mask;
  // First channel, midpoint rule: intensity > 127 -> 1.
  mask.bits = (raw.channels[0] > std::uint8_t{127}).cast<std::uint8_t>();
  mask.image_id = std::move(image_id);
  return mask;
}

BinaryMask load_mask(const std::filesystem::path& path, int expected_h, int expected_w,
                     std::string image_id) {
  BinaryMask mask = load_mask_any_size(path, std::move(image_id));
  if (mask.height() != expected_h || mask.width() != expected_w) {
    throw data_error("mask dimension mismatch for " + path.string() + ": got " +
                     std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                     ", expected " + std::to_string(expected_h) + "x" +
                     std::to_string(expected_w));
  }
  return mask;
}

void save_image_png(const Image& image, const std::filesystem::path& path) {
  const int h = image.height(), w = image.width();
  std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t o = (static_cast<size_t>(y) * w + x) * 3;
      rgb[o + 0] = image.channels[0](y, x);
      rgb[o + 1] = image.channels[1](y, x);
      rgb[o + 2] = image.channels[2](y, x);
    }
  write_png(path, h, w, 3, rgb);
}

void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
  const int h = mask.height(), w = mask.width();
  std::vector<unsigned char> gray(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      gray[static_cast<size_t>(y) * w + x] = mask.bits(y, x) ? 255 : 0;
  write_png(path, h, w, 1, gray);
}

void save_image_jpeg(const Image& image, const std::filesystem::path& path, int quality) {
  FilePtr f = open_file(path, "wb");
  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw io_error("failed to encode JPEG: " + path.string());
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = static_cast<JDIMENSION>(image.width());
  cinfo.image_height = static_cast<JDIMENSION>(image.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<unsigned char> row(static_cast<size_t>(image.width()) * 3);
  while (cinfo.next_scanline < cinfo.image_height) {
    const int y = static_cast<int>(cinfo.next_scanline);
    for (int x = 0; x < image.width(); ++x) {
      row[3 * x + 0] = image.channels[0](y, x);
      row[3 * x + 1] = image.channels[1](y, x);
      row[3 * x + 2] = image.channels[2](y, x);
    }
    unsigned char* rowp = row.data();
    jpeg_write_scanlines(&cinfo, &rowp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

}  // namespace bacdet
