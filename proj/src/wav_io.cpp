#include "a2i/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace a2i {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}
void wr_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioWaveform read_wav(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("cannot open wav file: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();

    if (n < 44 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        fail("not a RIFF/WAVE file: " + path.string());

    int channels = 0, bits = 0, rate = 0;
    std::uint16_t format = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= n) {
        const std::uint32_t chunk_len = rd_u32(p + off + 4);
        const unsigned char* body = p + off + 8;
        if (off + 8 + chunk_len > n) fail("truncated wav chunk: " + path.string());
        if (std::memcmp(p + off, "fmt ", 4) == 0) {
            if (chunk_len < 16) fail("bad fmt chunk: " + path.string());
            format   = rd_u16(body);
            channels = rd_u16(body + 2);
            rate     = static_cast<int>(rd_u32(body + 4));
            bits     = rd_u16(body + 14);
        } else if (std::memcmp(p + off, "data", 4) == 0) {
            data     = body;
            data_len = chunk_len;
        }
        off += 8 + chunk_len + (chunk_len & 1);
    }
    if (!data) fail("wav file has no data chunk: " + path.string());
    if (channels != 1) fail("wav file is not mono: " + path.string());
    if (rate <= 0) fail("wav file has invalid sample rate: " + path.string());

    AudioWaveform wave;
    wave.sample_rate = rate;
    if (format == 1 && bits == 16) {
        const std::size_t count = data_len / 2;
        wave.samples.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::int16_t s = static_cast<std::int16_t>(rd_u16(data + 2 * i));
            wave.samples[i] = s / 32768.0;
        }
    } else if (format == 3 && bits == 32) {
        const std::size_t count = data_len / 4;
        wave.samples.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t u = rd_u32(data + 4 * i);
            float v;
            std::memcpy(&v, &u, 4);
            wave.samples[i] = v;
        }
    } else {
        fail("unsupported wav encoding (want PCM16 or float32): " + path.string());
    }
    wave.validate();
    return wave;
}

void write_wav(const std::filesystem::path& path, const AudioWaveform& wave) {
    wave.validate();
    const std::uint32_t count = static_cast<std::uint32_t>(wave.samples.size());
    std::string out;
    out.reserve(44 + 2 * count);
    out += "RIFF";
    wr_u32(out, 36 + 2 * count);
    out += "WAVEfmt ";
    wr_u32(out, 16);
    wr_u16(out, 1);  // PCM
    wr_u16(out, 1);  // mono
    wr_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
    wr_u32(out, static_cast<std::uint32_t>(wave.sample_rate * 2));
    wr_u16(out, 2);
    wr_u16(out, 16);
    out += "data";
    wr_u32(out, 2 * count);
    for (double s : wave.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const int v = static_cast<int>(std::lrint(c * 32767.0));
        wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail("cannot write wav file: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) fail("short write on wav file: " + path.string());
}

AudioWaveform resample(const AudioWaveform& wave, int target_rate) {
    wave.validate();
    if (target_rate <= 0) fail("resample: target rate must be positive");
    if (wave.sample_rate == target_rate) return wave;

    const std::size_t n_in = wave.samples.size();
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_in) * target_rate / wave.sample_rate));
    AudioWaveform out;
    out.sample_rate = target_rate;
    out.samples.resize(std::max<std::size_t>(n_out, 1));
    const double step = static_cast<double>(wave.sample_rate) / target_rate;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double pos = i * step;
        const auto i0 = static_cast<std::size_t>(pos);
        if (i0 + 1 >= n_in) {
            out.samples[i] = wave.samples[n_in - 1];
        } else {
            const double frac = pos - static_cast<double>(i0);
            out.samples[i] = wave.samples[i0] * (1.0 - frac) + wave.samples[i0 + 1] * frac;
        }
    }
    return out;
}

AudioWaveform load_audio(const std::filesystem::path& path, int target_rate) {
    return resample(read_wav(path), target_rate);
}

}  // namespace a2i
