#include "a2i/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace a2i {

namespace {

std::uint32_t crc_table[256];
bool crc_table_ready = false;

void init_crc_table() {
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        crc_table[i] = c;
    }
    crc_table_ready = true;
}

std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
    if (!crc_table_ready) init_crc_table();
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i) c = crc_table[(c ^ p[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

std::uint32_t adler32_of(const unsigned char* p, std::size_t n) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a = (a + p[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

std::uint32_t rd_be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (p[1] << 16) | (p[2] << 8) | p[3];
}

void append_chunk(std::string& out, const char type[4], const std::string& body) {
    be32(out, static_cast<std::uint32_t>(body.size()));
    std::string tb = std::string(type, 4) + body;
    out += tb;
    be32(out, crc32_of(reinterpret_cast<const unsigned char*>(tb.data()), tb.size()));
}

// Raw zlib stream with stored (uncompressed) deflate blocks.
std::string zlib_stored(const std::string& raw) {
    std::string out;
    out.push_back(0x78);
    out.push_back(0x01);
    std::size_t off = 0;
    const std::size_t n = raw.size();
    do {
        const std::size_t len = std::min<std::size_t>(n - off, 65535);
        const bool last = off + len == n;
        out.push_back(last ? 1 : 0);
        out.push_back(static_cast<char>(len & 0xff));
        out.push_back(static_cast<char>((len >> 8) & 0xff));
        out.push_back(static_cast<char>(~len & 0xff));
        out.push_back(static_cast<char>((~len >> 8) & 0xff));
        out.append(raw, off, len);
        off += len;
    } while (off < n);
    std::string check;
    be32(check, adler32_of(reinterpret_cast<const unsigned char*>(raw.data()), raw.size()));
    return out + check;
}

std::string zlib_inflate(const unsigned char* data, std::size_t n, std::size_t expected) {
    std::string out(expected, '\0');
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) fail("png: inflateInit failed");
    zs.next_in   = const_cast<Bytef*>(data);
    zs.avail_in  = static_cast<uInt>(n);
    zs.next_out  = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected)
        fail("png: corrupt or unexpectedly sized image data");
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("cannot open png file: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();

    static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (n < 8 || std::memcmp(p, sig, 8) != 0) fail("not a png file: " + path.string());

    std::uint32_t width = 0, height = 0;
    int bit_depth = 0, color_type = 0, interlace = 0;
    std::string idat;

    std::size_t off = 8;
    while (off + 12 <= n) {
        const std::uint32_t len = rd_be32(p + off);
        const char* type = reinterpret_cast<const char*>(p + off + 4);
        const unsigned char* body = p + off + 8;
        if (off + 12 + len > n) fail("truncated png chunk: " + path.string());
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) fail("bad IHDR: " + path.string());
            width      = rd_be32(body);
            height     = rd_be32(body + 4);
            bit_depth  = body[8];
            color_type = body[9];
            interlace  = body[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.append(reinterpret_cast<const char*>(body), len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        off += 12 + len;
    }
    if (width == 0 || height == 0) fail("png missing IHDR: " + path.string());
    if (bit_depth != 8) fail("unsupported png bit depth (want 8): " + path.string());
    if (color_type != 2 && color_type != 6)
        fail("unsupported png color type (want RGB or RGBA): " + path.string());
    if (interlace != 0) fail("interlaced png not supported: " + path.string());

    const int bpp = color_type == 2 ? 3 : 4;
    const std::size_t stride = static_cast<std::size_t>(width) * bpp;
    const std::size_t expected = (stride + 1) * height;
    std::string raw = zlib_inflate(reinterpret_cast<const unsigned char*>(idat.data()),
                                   idat.size(), expected);

    std::vector<unsigned char> prev(stride, 0), cur(stride, 0);
    Image im;
    im.width  = static_cast<int>(width);
    im.height = static_cast<int>(height);
    im.rgb.resize(static_cast<std::size_t>(width) * height * 3);

    for (std::uint32_t y = 0; y < height; ++y) {
        const auto* row = reinterpret_cast<const unsigned char*>(raw.data()) + y * (stride + 1);
        const int filter = row[0];
        for (std::size_t i = 0; i < stride; ++i) {
            const int x    = row[1 + i];
            const int left = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
            const int up   = prev[i];
            const int ul   = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + left; break;
                case 2: v = x + up; break;
                case 3: v = x + (left + up) / 2; break;
                case 4: v = x + paeth(left, up, ul); break;
                default: fail("png: unknown filter type");
            }
            cur[i] = static_cast<unsigned char>(v & 0xff);
        }
        for (std::uint32_t x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c)
                im.rgb[3 * (static_cast<std::size_t>(y) * width + x) + c] =
                    cur[x * bpp + c] / 255.0;
        std::swap(prev, cur);
    }
    return im;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3)
        fail("write_png: malformed image");

    std::string raw;
    raw.reserve((static_cast<std::size_t>(image.width) * 3 + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
                raw.push_back(static_cast<char>(std::lrint(v * 255.0)));
            }
        }
    }

    std::string out(reinterpret_cast<const char*>("\x89PNG\r\n\x1a\n"), 8);
    std::string ihdr;
    be32(ihdr, static_cast<std::uint32_t>(image.width));
    be32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", zlib_stored(raw));
    append_chunk(out, "IEND", "");

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail("cannot write png file: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) fail("short write on png file: " + path.string());
}

}  // namespace a2i
