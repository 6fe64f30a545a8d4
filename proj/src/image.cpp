#include "arsp/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "arsp/errors.hpp"
#include "arsp/util.hpp"

namespace arsp {

FaceImage make_face_image(Tensor pixels) {
    if (pixels.rank() != 3 || pixels.dim(0) != 3) {
        throw dimension_error("face image must be [3,H,W]");
    }
    for (double v : pixels.data()) {
        if (v < 0.0 || v > 1.0) {
            throw input_error("face image pixel out of [0,1]");
        }
    }
    return FaceImage{std::move(pixels)};
}

namespace {

void put_be32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& payload) {
    put_be32(out, static_cast<uint32_t>(payload.size()));
    const size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + payload.size()));
    put_be32(out, static_cast<uint32_t>(crc));
}

} // namespace

void save_png(const std::string& path, const FaceImage& image) {
    const int h = image.height(), w = image.width();
    const auto px = image.pixels.data();

    // filter 0 scanlines, RGB interleaved
    std::vector<unsigned char> raw(static_cast<size_t>(h) * (1 + 3 * static_cast<size_t>(w)));
    size_t o = 0;
    for (int y = 0; y < h; ++y) {
        raw[o++] = 0;
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = px[(static_cast<size_t>(c) * h + y) * w + x];
                raw[o++] = static_cast<unsigned char>(std::lrint(255.0 * v));
            }
        }
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> deflated(bound);
    if (compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw io_error("png deflate failed");
    }
    deflated.resize(bound);

    std::vector<unsigned char> out;
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), sig, sig + 8);

    std::vector<unsigned char> ihdr;
    put_be32(ihdr, static_cast<uint32_t>(w));
    put_be32(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", deflated);
    put_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw io_error("cannot open for writing: " + path);
    }
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw io_error("write failed: " + path);
    }
}

uint64_t image_hash(const FaceImage& image) {
    return fnv1a64(image.pixels.data().data(), image.pixels.numel() * sizeof(double));
}

} // namespace arsp
