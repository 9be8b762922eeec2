#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vocim/audio.hpp"
#include "vocim/common.hpp"
#include "vocim/corpus.hpp"
#include "vocim/vocal_tract.hpp"

#include <json.hpp>

namespace vocim::demo {

// Bundled 12-referent mini-corpus: synthetic tones and noises under a
// 3-level ontology, so the whole pipeline runs in seconds without any
// external dataset.

inline nlohmann::json ontology_json() {
    auto node = [](const std::string& id, const std::string& name,
                   std::vector<std::string> children) {
        nlohmann::json n;
        n["id"] = id;
        n["name"] = name;
        n["child_ids"] = children;
        return n;
    };
    nlohmann::json doc = nlohmann::json::array();
    doc.push_back(node("machines", "Machines", {"engines", "alarms"}));
    doc.push_back(node("engines", "Engines", {"motorboat", "generator"}));
    doc.push_back(node("alarms", "Alarms", {"beeper", "siren"}));
    doc.push_back(node("nature", "Nature", {"wind", "water"}));
    doc.push_back(node("wind", "Wind", {"breeze", "gale"}));
    doc.push_back(node("water", "Water", {"rain", "stream"}));
    doc.push_back(node("animals", "Animals", {"birds", "mammals"}));
    doc.push_back(node("birds", "Birds", {"chirp", "tweet"}));
    doc.push_back(node("mammals", "Mammals", {"growl", "purr"}));
    for (const char* leaf : {"motorboat", "generator", "beeper", "siren", "breeze",
                             "gale", "rain", "stream", "chirp", "tweet", "growl",
                             "purr"})
        doc.push_back(node(leaf, leaf, {}));
    return doc;
}

namespace sig {

constexpr double rate = kPipelineSampleRate;
constexpr double seconds = 2.0;
inline std::size_t length() { return static_cast<std::size_t>(rate * seconds); }

inline std::vector<double> zeros() { return std::vector<double>(length(), 0.0); }

inline void add_sine(std::vector<double>& x, double freq, double amp) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] += amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
}

// harmonic stack with 1/h rolloff; a buzzy, saw-like periodic source
inline void add_harmonics(std::vector<double>& x, double f0, double amp, int n_harm) {
    for (int h = 1; h <= n_harm; ++h)
        add_sine(x, f0 * h, amp / static_cast<double>(h));
}

inline void add_noise(std::vector<double>& x, double amp, std::uint64_t seed) {
    auto n = noise_source(seed, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += amp * n[i];
}

inline void add_lowpass_noise(std::vector<double>& x, double amp, double cutoff,
                              std::uint64_t seed) {
    auto n = noise_source(seed, x.size());
    double a = std::exp(-2.0 * M_PI * cutoff / rate);
    double y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y = (1.0 - a) * n[i] + a * y;
        x[i] += amp * y * 4.0;
    }
}

inline void add_highpass_noise(std::vector<double>& x, double amp, std::uint64_t seed) {
    auto n = noise_source(seed, x.size());
    for (std::size_t i = 1; i < x.size(); ++i) x[i] += amp * 0.5 * (n[i] - n[i - 1]);
}

inline void am(std::vector<double>& x, double freq, double depth) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        double m = 1.0 - depth * 0.5 *
                             (1.0 + std::sin(2.0 * M_PI * freq *
                                             static_cast<double>(i) / rate));
        x[i] *= m;
    }
}

inline void add_fm_sine(std::vector<double>& x, double center, double dev, double mod_rate,
                        double amp) {
    double phase = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double f = center + dev * std::sin(2.0 * M_PI * mod_rate *
                                           static_cast<double>(i) / rate);
        phase += 2.0 * M_PI * f / rate;
        x[i] += amp * std::sin(phase);
    }
}

inline AudioBuffer finish(const std::vector<double>& x) {
    AudioBuffer buf;
    buf.sample_rate = rate;
    buf.samples.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) buf.samples[i] = static_cast<float>(x[i]);
    return peak_normalize(buf, -1.0);
}

} // namespace sig

inline AudioBuffer referent_audio(const std::string& id) {
    using namespace sig;
    std::vector<double> x = zeros();
    if (id == "motorboat") {
        // loud broadband splash over a steady low-pitched engine rumble
        add_harmonics(x, 100.0, 0.7, 8);
        am(x, 1.0, 0.6);
        add_noise(x, 0.7, 101);
    } else if (id == "generator") {
        // steady dark buzz with a little mechanical hiss
        add_harmonics(x, 120.0, 0.7, 10);
        add_noise(x, 0.15, 102);
    } else if (id == "beeper") {
        // tone switching on and off once a second
        add_sine(x, 500.0, 0.8);
        am(x, 1.0, 1.0);
        add_noise(x, 0.02, 103);
    } else if (id == "siren") {
        // slow pitch sweep across the low register
        add_fm_sine(x, 250.0, 130.0, 0.5, 0.8);
        add_noise(x, 0.02, 104);
    } else if (id == "breeze") {
        add_lowpass_noise(x, 0.5, 400.0, 105);
    } else if (id == "gale") {
        add_lowpass_noise(x, 0.8, 900.0, 106);
        am(x, 0.5, 0.6);
    } else if (id == "rain") {
        add_noise(x, 0.7, 107);
    } else if (id == "stream") {
        add_highpass_noise(x, 0.9, 108);
        add_noise(x, 0.2, 109);
    } else if (id == "chirp") {
        // bright warble: fast pitch wobble high up
        add_fm_sine(x, 2200.0, 500.0, 1.0, 0.7);
    } else if (id == "tweet") {
        add_fm_sine(x, 1600.0, 350.0, 0.5, 0.7);
    } else if (id == "growl") {
        // pulsed buzz over noise, surging once a second
        add_harmonics(x, 90.0, 0.5, 12);
        add_noise(x, 0.3, 111);
        am(x, 1.0, 0.8);
    } else if (id == "purr") {
        add_harmonics(x, 110.0, 0.5, 6);
        am(x, 0.5, 0.9);
    } else {
        throw ValidationError("unknown demo referent: " + id);
    }
    return finish(x);
}

inline const std::vector<std::string>& referent_ids() {
    static const std::vector<std::string> ids = {
        "motorboat", "generator", "beeper", "siren", "breeze", "gale",
        "rain",      "stream",    "chirp",  "tweet", "growl",  "purr"};
    return ids;
}

struct DemoPaths {
    std::string dir;
    std::string ontology_path;
    std::string manifest_path;
};

/// Write the demo corpus (WAVs, JSONL manifest, ontology) into `dir`.
inline DemoPaths write_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "audio");
    DemoPaths out;
    out.dir = dir;
    out.ontology_path = (fs::path(dir) / "ontology.json").string();
    out.manifest_path = (fs::path(dir) / "corpus.jsonl").string();

    {
        std::ofstream os(out.ontology_path, std::ios::binary);
        os << ontology_json().dump(2) << "\n";
    }
    std::ofstream manifest(out.manifest_path, std::ios::binary);
    for (const auto& id : referent_ids()) {
        std::string wav_path = (fs::path(dir) / "audio" / (id + ".wav")).string();
        wav::write(wav_path, referent_audio(id), wav::Encoding::float32);
        nlohmann::ordered_json rec;
        rec["id"] = id;
        rec["audio_path"] = wav_path;
        rec["ontology_leaf"] = id;
        rec["display_name"] = id;
        manifest << rec.dump() << "\n";
    }
    return out;
}

} // namespace vocim::demo
