#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vocim/common.hpp"

namespace vocim {

/// Mono audio: samples in [-1, 1] at a fixed sample rate.
struct AudioBuffer {
    std::vector<float> samples;
    double sample_rate = 0.0;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }

    void validate() const {
        if (sample_rate <= 0) throw ValidationError("AudioBuffer: sample_rate must be > 0");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!std::isfinite(samples[i]))
                throw ValidationError("AudioBuffer: non-finite sample at index " +
                                      std::to_string(i));
        }
    }
};

inline double rms(const std::vector<float>& x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

inline double peak(const std::vector<float>& x) {
    double p = 0.0;
    for (float v : x) p = std::max(p, static_cast<double>(std::fabs(v)));
    return p;
}

/// Scale so the peak sits at `dbfs` (e.g. -1.0). Silence passes through unchanged.
inline AudioBuffer peak_normalize(AudioBuffer buf, double dbfs = -1.0) {
    double p = peak(buf.samples);
    if (p <= 0.0) return buf;
    double target = std::pow(10.0, dbfs / 20.0);
    float g = static_cast<float>(target / p);
    for (float& v : buf.samples) v *= g;
    return buf;
}

/// Linear-interpolation resampler. Adequate for the feature pipeline; not a
/// polyphase design.
inline AudioBuffer resample(const AudioBuffer& in, double target_rate) {
    if (target_rate <= 0) throw ValidationError("resample: target rate must be > 0");
    if (in.sample_rate == target_rate || in.samples.empty())
        return AudioBuffer{in.samples, target_rate};
    double ratio = in.sample_rate / target_rate;
    std::size_t out_len =
        static_cast<std::size_t>(std::floor(static_cast<double>(in.samples.size()) / ratio));
    AudioBuffer out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        double pos = static_cast<double>(i) * ratio;
        std::size_t i0 = static_cast<std::size_t>(pos);
        std::size_t i1 = std::min(i0 + 1, in.samples.size() - 1);
        double frac = pos - static_cast<double>(i0);
        out.samples[i] = static_cast<float>((1.0 - frac) * in.samples[i0] +
                                            frac * in.samples[i1]);
    }
    return out;
}

namespace wav {

enum class Encoding { pcm16, float32 };

/// PCM/float mono WAV writer, little-endian. Multi-channel input is not supported;
/// rendering is always mono.
inline void write(const std::string& path, const AudioBuffer& buf,
                  Encoding enc = Encoding::pcm16) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);

    std::uint16_t fmt = (enc == Encoding::pcm16) ? 1 : 3;
    std::uint16_t bits = (enc == Encoding::pcm16) ? 16 : 32;
    std::uint32_t rate = static_cast<std::uint32_t>(std::lround(buf.sample_rate));
    std::uint32_t data_bytes =
        static_cast<std::uint32_t>(buf.samples.size() * (bits / 8));
    std::uint32_t byte_rate = rate * (bits / 8);

    os.write("RIFF", 4);
    le::write<std::uint32_t>(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    le::write<std::uint32_t>(os, 16);
    le::write<std::uint16_t>(os, fmt);
    le::write<std::uint16_t>(os, 1); // mono
    le::write<std::uint32_t>(os, rate);
    le::write<std::uint32_t>(os, byte_rate);
    le::write<std::uint16_t>(os, static_cast<std::uint16_t>(bits / 8));
    le::write<std::uint16_t>(os, bits);
    os.write("data", 4);
    le::write<std::uint32_t>(os, data_bytes);

    if (enc == Encoding::pcm16) {
        for (float v : buf.samples) {
            double c = std::clamp(static_cast<double>(v), -1.0, 1.0);
            // scale matches the reader's /32768 so a round trip only quantizes
            long q = std::lround(c * 32768.0);
            auto s = static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
            le::write<std::int16_t>(os, s);
        }
    } else {
        for (float v : buf.samples) le::write<float>(os, v);
    }
    if (!os) throw IoError("write failed: " + path);
}

/// Reads PCM 16/24/32-bit and 32-bit float WAV. Multi-channel input is downmixed
/// by averaging.
inline AudioBuffer read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);

    char tag[4];
    is.read(tag, 4);
    if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw IoError("not a RIFF file: " + path);
    le::read<std::uint32_t>(is); // riff size
    is.read(tag, 4);
    if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw IoError("not a WAVE file: " + path);

    std::uint16_t fmt = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::vector<char> data;
    bool have_fmt = false, have_data = false;

    while (is && !(have_fmt && have_data)) {
        is.read(tag, 4);
        if (!is) break;
        std::uint32_t chunk_size = le::read<std::uint32_t>(is);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            fmt = le::read<std::uint16_t>(is);
            channels = le::read<std::uint16_t>(is);
            rate = le::read<std::uint32_t>(is);
            le::read<std::uint32_t>(is);
            le::read<std::uint16_t>(is);
            bits = le::read<std::uint16_t>(is);
            if (chunk_size > 16) is.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(chunk_size);
            is.read(data.data(), chunk_size);
            if (!is) throw IoError("truncated data chunk: " + path);
            have_data = true;
        } else {
            is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    if (!have_fmt || !have_data) throw IoError("missing fmt/data chunk: " + path);
    if (channels == 0) throw IoError("zero channels: " + path);
    if (fmt == 0xFFFE) throw IoError("WAVE_FORMAT_EXTENSIBLE not supported: " + path);

    std::size_t bytes_per = bits / 8;
    std::size_t n_frames = data.size() / (bytes_per * channels);
    AudioBuffer buf;
    buf.sample_rate = rate;
    buf.samples.resize(n_frames);

    auto decode = [&](std::size_t byte_off) -> double {
        const unsigned char* p =
            reinterpret_cast<const unsigned char*>(data.data()) + byte_off;
        if (fmt == 1 && bits == 16) {
            std::int16_t s;
            std::memcpy(&s, p, 2);
            return s / 32768.0;
        } else if (fmt == 1 && bits == 24) {
            std::int32_t s = (p[0] << 8) | (p[1] << 16) | (p[2] << 24);
            return (s >> 8) / 8388608.0;
        } else if (fmt == 1 && bits == 32) {
            std::int32_t s;
            std::memcpy(&s, p, 4);
            return s / 2147483648.0;
        } else if (fmt == 3 && bits == 32) {
            float f;
            std::memcpy(&f, p, 4);
            return f;
        }
        throw IoError("unsupported WAV encoding (fmt=" + std::to_string(fmt) +
                      ", bits=" + std::to_string(bits) + "): " + path);
    };

    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c)
            acc += decode((i * channels + c) * bytes_per);
        buf.samples[i] = static_cast<float>(acc / channels);
    }
    return buf;
}

} // namespace wav

} // namespace vocim
