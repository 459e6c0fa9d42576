#include "ajepa/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "ajepa/errors.hpp"

namespace ajepa {

namespace {

uint32_t read_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xfffe;

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open wav file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());

    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw CorruptFileError("not a RIFF/WAVE file: " + path);

    uint16_t format = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits = 0;
    const uint8_t* data = nullptr;
    size_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
        const size_t body = pos + 8;
        if (body + chunk_len > bytes.size())
            throw CorruptFileError("truncated wav chunk in: " + path);

        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw CorruptFileError("bad fmt chunk in: " + path);
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            sample_rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (format == kFormatExtensible && chunk_len >= 40) {
                // Sub-format GUID starts with the effective format code.
                format = read_u16(bytes.data() + body + 24);
            }
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }

    if (data == nullptr || channels == 0 || sample_rate == 0)
        throw CorruptFileError("missing fmt/data chunk in: " + path);

    const size_t bytes_per_sample = bits / 8;
    if (bytes_per_sample == 0) throw CorruptFileError("bad bit depth in: " + path);
    const size_t frame_size = bytes_per_sample * channels;
    const size_t n_frames = data_len / frame_size;
    if (n_frames == 0) throw Error("wav file has no samples: " + path);

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool pcm24 = format == kFormatPcm && bits == 24;
    const bool pcm32 = format == kFormatPcm && bits == 32;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !pcm24 && !pcm32 && !f32)
        throw Error("unsupported wav encoding (format " + std::to_string(format) +
                    ", " + std::to_string(bits) + " bit) in: " + path);

    AudioClip clip;
    clip.sample_rate = static_cast<int>(sample_rate);
    clip.samples.resize(n_frames);

    for (size_t i = 0; i < n_frames; ++i) {
        const uint8_t* p = data + i * frame_size;  // first channel
        float s;
        if (pcm16) {
            const int16_t raw = static_cast<int16_t>(read_u16(p));
            s = static_cast<float>(raw) / 32768.0f;
        } else if (pcm24) {
            int32_t raw = p[0] | p[1] << 8 | p[2] << 16;
            if (raw & 0x800000) raw |= ~0xffffff;  // sign extend
            s = static_cast<float>(raw) / 8388608.0f;
        } else if (pcm32) {
            const int32_t raw = static_cast<int32_t>(read_u32(p));
            s = static_cast<float>(static_cast<double>(raw) / 2147483648.0);
        } else {
            uint32_t raw = read_u32(p);
            std::memcpy(&s, &raw, sizeof(s));
        }
        clip.samples[i] = std::clamp(s, -1.0f, 1.0f);
    }
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
    validate_clip(clip);
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_len = n * 2;

    std::vector<uint8_t> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
    put_u16(out, 2);   // block align
    put_u16(out, 16);  // bits
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_len);
    for (uint32_t i = 0; i < n; ++i) {
        const float clamped = std::clamp(clip.samples[i], -1.0f, 1.0f);
        const int16_t q = static_cast<int16_t>(
            std::lround(static_cast<double>(clamped) * 32767.0));
        put_u16(out, static_cast<uint16_t>(q));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("write failed: " + path);
}

}  // namespace ajepa
