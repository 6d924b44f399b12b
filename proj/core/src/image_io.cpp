#include "can/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <fstream>

#include "can/errors.hpp"

namespace can {

namespace {

void check_image(const Tensor& image) {
    if (image.rows() < 1 || image.cols() < 1) {
        throw ContractViolation("image must have at least one row and column, got " +
                                image.shape_str());
    }
}

void append_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

/// One PNG chunk: payload length, 4-byte type, payload, CRC over type+payload.
void append_chunk(std::string& out, const char type[4], const std::string& payload) {
    append_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.append(type, 4);
    out += payload;
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                static_cast<uInt>(out.size() - crc_start));
    append_be32(out, static_cast<std::uint32_t>(crc));
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractViolation("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContractViolation("write failed for '" + path + "'");
}

}  // namespace

Tensor image_from_batch(const ImageBatch& batch, std::size_t index) {
    const std::size_t pixels = batch.height * batch.width;
    if (batch.images.cols() != pixels) {
        throw SchemaMismatch("batch stores " + std::to_string(batch.images.cols()) +
                             " pixels per row but dimensions give " + std::to_string(pixels));
    }
    if (index >= batch.images.rows()) {
        throw ContractViolation("image index " + std::to_string(index) +
                                " outside batch of " + std::to_string(batch.images.rows()));
    }
    Tensor img = Tensor::zeros(batch.height, batch.width);
    for (std::size_t r = 0; r < batch.height; ++r)
        for (std::size_t c = 0; c < batch.width; ++c)
            img.at(r, c) = batch.images.at(index, r * batch.width + c);
    return img;
}

std::vector<unsigned char> gray_bytes(const Tensor& image) {
    check_image(image);
    std::vector<unsigned char> bytes;
    bytes.reserve(image.rows() * image.cols());
    for (std::size_t r = 0; r < image.rows(); ++r) {
        for (std::size_t c = 0; c < image.cols(); ++c) {
            double v = (image.at(r, c) + 1.0) * 127.5;
            if (v < 0.0) v = 0.0;
            if (v > 255.0) v = 255.0;
            bytes.push_back(static_cast<unsigned char>(std::lround(v)));
        }
    }
    return bytes;
}

std::string pgm_encode(const Tensor& image) {
    const std::vector<unsigned char> bytes = gray_bytes(image);
    std::string out = "P5\n" + std::to_string(image.cols()) + " " +
                      std::to_string(image.rows()) + "\n255\n";
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return out;
}

void write_pgm(const std::string& path, const Tensor& image) {
    write_file(path, pgm_encode(image));
}

std::string png_encode_gray(const Tensor& image) {
    const std::vector<unsigned char> bytes = gray_bytes(image);
    const std::size_t h = image.rows();
    const std::size_t w = image.cols();

    // Raw scanline stream: each row prefixed with filter byte 0 (none).
    std::vector<unsigned char> raw;
    raw.reserve(h * (w + 1));
    for (std::size_t r = 0; r < h; ++r) {
        raw.push_back(0);
        raw.insert(raw.end(), bytes.begin() + static_cast<std::ptrdiff_t>(r * w),
                   bytes.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    const int rc = compress2(comp.data(), &comp_len, raw.data(),
                             static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION);
    if (rc != Z_OK) throw Error("zlib compression failed (code " + std::to_string(rc) + ")");

    std::string ihdr;
    append_be32(ihdr, static_cast<std::uint32_t>(w));
    append_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // color type: grayscale
    ihdr.push_back(0);  // compression method
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // interlace: none

    std::string out("\x89PNG\r\n\x1a\n", 8);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT",
                 std::string(reinterpret_cast<const char*>(comp.data()), comp_len));
    append_chunk(out, "IEND", "");
    return out;
}

void write_png_gray(const std::string& path, const Tensor& image) {
    write_file(path, png_encode_gray(image));
}

}  // namespace can
