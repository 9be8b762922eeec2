#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "vocim/audio.hpp"

using namespace vocim;

namespace {
std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
} // namespace

TEST_CASE("wav float32 round trip is lossless") {
    AudioBuffer buf;
    buf.sample_rate = 16000;
    for (int i = 0; i < 1000; ++i)
        buf.samples.push_back(static_cast<float>(std::sin(0.01 * i) * 0.8));
    auto path = tmp_path("vocim_rt.wav");
    wav::write(path, buf, wav::Encoding::float32);
    AudioBuffer back = wav::read(path);
    REQUIRE(back.samples.size() == buf.samples.size());
    CHECK(back.sample_rate == doctest::Approx(16000));
    for (std::size_t i = 0; i < buf.samples.size(); ++i)
        CHECK(back.samples[i] == buf.samples[i]);
    std::remove(path.c_str());
}

TEST_CASE("wav pcm16 round trip within quantization error") {
    AudioBuffer buf;
    buf.sample_rate = 8000;
    for (int i = 0; i < 500; ++i)
        buf.samples.push_back(static_cast<float>(std::sin(0.05 * i)));
    auto path = tmp_path("vocim_pcm16.wav");
    wav::write(path, buf, wav::Encoding::pcm16);
    AudioBuffer back = wav::read(path);
    REQUIRE(back.samples.size() == buf.samples.size());
    for (std::size_t i = 0; i < buf.samples.size(); ++i)
        CHECK(std::fabs(back.samples[i] - buf.samples[i]) < 1.0 / 32000.0);
    std::remove(path.c_str());
}

TEST_CASE("peak_normalize hits the target level") {
    AudioBuffer buf;
    buf.sample_rate = 16000;
    buf.samples = {0.1f, -0.25f, 0.2f};
    AudioBuffer norm = peak_normalize(buf, -1.0);
    CHECK(peak(norm.samples) == doctest::Approx(std::pow(10.0, -1.0 / 20.0)).epsilon(1e-6));

    AudioBuffer silent;
    silent.sample_rate = 16000;
    silent.samples.assign(16, 0.0f);
    AudioBuffer still_silent = peak_normalize(silent);
    CHECK(rms(still_silent.samples) == 0.0);
}

TEST_CASE("resample preserves a sine's frequency") {
    AudioBuffer buf;
    buf.sample_rate = 48000;
    for (int i = 0; i < 48000; ++i)
        buf.samples.push_back(
            static_cast<float>(std::sin(2.0 * M_PI * 440.0 * i / 48000.0)));
    AudioBuffer out = resample(buf, 16000.0);
    CHECK(out.sample_rate == 16000.0);
    CHECK(out.samples.size() == doctest::Approx(16000).epsilon(0.01));
    // zero crossings per second should stay ~2*f
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < out.samples.size(); ++i)
        if ((out.samples[i - 1] < 0) != (out.samples[i] < 0)) ++crossings;
    CHECK(static_cast<double>(crossings) ==
          doctest::Approx(2.0 * 440.0).epsilon(0.01));
}

TEST_CASE("wav reader rejects junk") {
    auto path = tmp_path("vocim_junk.wav");
    {
        std::ofstream os(path, std::ios::binary);
        os << "this is not audio";
    }
    CHECK_THROWS_AS(wav::read(path), IoError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(wav::read(tmp_path("vocim_nonexistent.wav")), IoError);
}
