#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "vocim/audio.hpp"
#include "vocim/common.hpp"
#include "vocim/fft.hpp"

namespace vocim {

enum class Track : std::uint8_t { flatness = 0, centroid, peak, rms };
enum class Transform : std::uint8_t { value = 0, derivative };
enum class Stat : std::uint8_t { mean = 0, stddev };
enum class GlobalFeature : std::uint8_t { overall_rms = 0, global_centroid, global_flatness };

/// Perceptual grouping used by the lesion harness.
enum class FeatureGroup : std::uint8_t { loudness = 0, pitch, timbre };

inline const char* track_name(Track t) {
    switch (t) {
        case Track::flatness: return "flatness";
        case Track::centroid: return "centroid";
        case Track::peak: return "peak";
        case Track::rms: return "rms";
    }
    return "?";
}

struct RegistryEntry {
    Track track;
    Transform transform;
    Stat stat;

    FeatureGroup group() const {
        switch (track) {
            case Track::rms: return FeatureGroup::loudness;
            case Track::centroid:
            case Track::peak: return FeatureGroup::pitch;
            case Track::flatness: return FeatureGroup::timbre;
        }
        return FeatureGroup::timbre;
    }

    std::string describe() const {
        std::string s = track_name(track);
        s += transform == Transform::value ? ":val" : ":diff";
        s += stat == Stat::mean ? ":mean" : ":std";
        return s;
    }
};

inline FeatureGroup global_group(GlobalFeature g) {
    switch (g) {
        case GlobalFeature::overall_rms: return FeatureGroup::loudness;
        case GlobalFeature::global_centroid: return FeatureGroup::pitch;
        case GlobalFeature::global_flatness: return FeatureGroup::timbre;
    }
    return FeatureGroup::timbre;
}

/// Ordered description of the feature vector: per-track summary statistics
/// plus whole-signal globals, and the STFT parameters they are computed with.
struct FeatureRegistry {
    std::vector<RegistryEntry> entries;
    std::vector<GlobalFeature> globals;
    std::size_t window = 2048;
    std::size_t hop = 512;
    // Flatness is the geometric/arithmetic mean ratio taken over band-averaged
    // power (linear bands); per-bin flatness of a finite-window periodogram
    // saturates near exp(-gamma) even for white noise, which would make the
    // white-noise/tone contrast useless.
    std::size_t flatness_bands = 32;

    std::size_t length() const { return entries.size() + globals.size(); }

    std::string describe() const {
        std::string s = "stft:" + std::to_string(window) + "/" + std::to_string(hop) +
                        ";bands:" + std::to_string(flatness_bands) + ";";
        for (const auto& e : entries) s += e.describe() + ";";
        for (auto g : globals) {
            switch (g) {
                case GlobalFeature::overall_rms: s += "g:rms;"; break;
                case GlobalFeature::global_centroid: s += "g:centroid;"; break;
                case GlobalFeature::global_flatness: s += "g:flatness;"; break;
            }
        }
        return s;
    }

    std::uint64_t hash() const { return fnv1a64(describe()); }

    FeatureGroup group_of(std::size_t index) const {
        if (index < entries.size()) return entries[index].group();
        return global_group(globals.at(index - entries.size()));
    }
};

/// The default 19-feature registry: {flatness, centroid, peak, rms} x
/// {value, first difference} x {mean, std} (16) plus overall RMS, whole-signal
/// centroid and whole-signal flatness (3).
inline FeatureRegistry default_registry() {
    FeatureRegistry reg;
    for (Track t : {Track::flatness, Track::centroid, Track::peak, Track::rms})
        for (Transform tr : {Transform::value, Transform::derivative})
            for (Stat st : {Stat::mean, Stat::stddev})
                reg.entries.push_back({t, tr, st});
    reg.globals = {GlobalFeature::overall_rms, GlobalFeature::global_centroid,
                   GlobalFeature::global_flatness};
    return reg;
}

/// Remove the given feature indices (indices address the concatenated
/// entries+globals vector). Downstream vectors shrink accordingly.
inline FeatureRegistry lesion(const FeatureRegistry& reg,
                              const std::vector<std::size_t>& indices) {
    std::vector<std::size_t> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("lesion: duplicate index");
    for (std::size_t i : sorted)
        if (i >= reg.length())
            throw ValidationError("lesion: index " + std::to_string(i) +
                                  " out of range (length " +
                                  std::to_string(reg.length()) + ")");
    FeatureRegistry out = reg;
    out.entries.clear();
    out.globals.clear();
    std::size_t k = 0;
    for (std::size_t i = 0; i < reg.entries.size(); ++i) {
        if (k < sorted.size() && sorted[k] == i) { ++k; continue; }
        out.entries.push_back(reg.entries[i]);
    }
    for (std::size_t i = 0; i < reg.globals.size(); ++i) {
        std::size_t idx = reg.entries.size() + i;
        if (k < sorted.size() && sorted[k] == idx) { ++k; continue; }
        out.globals.push_back(reg.globals[i]);
    }
    return out;
}

struct FeatureVector {
    std::vector<double> values;
    std::uint64_t registry_id = 0;
};

/// Per-frame analysis tracks plus the averaged power spectrum for the globals.
struct FrameTracks {
    std::vector<double> flatness;
    std::vector<double> centroid;
    std::vector<double> peak;
    std::vector<double> rms;
    std::vector<double> mean_power; // averaged across frames, window/2+1 bins
    double overall_rms = 0.0;
    double bin_hz = 0.0;
    std::size_t flatness_bands = 32;

    const std::vector<double>& track(Track t) const {
        switch (t) {
            case Track::flatness: return flatness;
            case Track::centroid: return centroid;
            case Track::peak: return peak;
            case Track::rms: return rms;
        }
        return rms;
    }
};

namespace detail {

// GM/AM over band-averaged power, bands over bins [1, half]. Silence -> 0.
inline double banded_flatness(const double* p, std::size_t half, std::size_t n_bands) {
    std::size_t usable = half; // bins 1..half
    if (n_bands == 0 || usable < n_bands) n_bands = 1;
    std::size_t per = usable / n_bands;
    double log_acc = 0.0, lin_acc = 0.0;
    std::size_t used_bands = 0;
    for (std::size_t b = 0; b < n_bands; ++b) {
        std::size_t lo = 1 + b * per;
        std::size_t hi = (b + 1 == n_bands) ? half + 1 : lo + per;
        double band = 0.0;
        for (std::size_t k = lo; k < hi; ++k) band += p[k];
        band /= static_cast<double>(hi - lo);
        log_acc += std::log(band + 1e-30);
        lin_acc += band;
        ++used_bands;
    }
    lin_acc /= static_cast<double>(used_bands);
    if (lin_acc <= 1e-30) return 0.0;
    double gm = std::exp(log_acc / static_cast<double>(used_bands));
    return gm / lin_acc;
}

inline double spectrum_centroid(const double* p, std::size_t half, double bin_hz) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k <= half; ++k) {
        num += static_cast<double>(k) * p[k];
        den += p[k];
    }
    return den > 0.0 ? bin_hz * num / den : 0.0; // silent-frame convention: 0
}

inline double spectrum_peak(const double* p, std::size_t half, double bin_hz) {
    std::size_t best = 0;
    for (std::size_t k = 1; k <= half; ++k)
        if (p[k] > p[best]) best = k;
    return p[best] > 0.0 ? bin_hz * static_cast<double>(best) : 0.0;
}

inline void mean_std(const std::vector<double>& x, double& mean, double& sd) {
    if (x.empty()) { mean = 0.0; sd = 0.0; return; }
    mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    sd = std::sqrt(acc / static_cast<double>(x.size())); // population convention
}

inline std::vector<double> first_difference(const std::vector<double>& x) {
    if (x.size() < 2) return {};
    std::vector<double> d(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
    return d;
}

} // namespace detail

/// Owns the FFT plan and Hann window; reusable across clips.
class FeatureExtractor {
public:
    explicit FeatureExtractor(FeatureRegistry reg)
        : reg_(std::move(reg)), plan_(reg_.window) {
        window_.resize(reg_.window);
        for (std::size_t i = 0; i < reg_.window; ++i)
            window_[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                              static_cast<double>(reg_.window));
        frame_.resize(reg_.window);
        power_.resize(reg_.window / 2 + 1);
    }

    const FeatureRegistry& registry() const { return reg_; }

    FrameTracks stft_tracks(const AudioBuffer& buf) const {
        if (buf.samples.size() < reg_.window)
            throw ValidationError("stft_tracks: buffer shorter than one analysis window (" +
                                  std::to_string(buf.samples.size()) + " < " +
                                  std::to_string(reg_.window) + " samples)");
        std::size_t half = reg_.window / 2;
        std::size_t n_frames = (buf.samples.size() - reg_.window) / reg_.hop + 1;

        FrameTracks tr;
        tr.bin_hz = buf.sample_rate / static_cast<double>(reg_.window);
        tr.flatness_bands = reg_.flatness_bands;
        tr.flatness.resize(n_frames);
        tr.centroid.resize(n_frames);
        tr.peak.resize(n_frames);
        tr.rms.resize(n_frames);
        tr.mean_power.assign(half + 1, 0.0);

        for (std::size_t f = 0; f < n_frames; ++f) {
            const float* x = buf.samples.data() + f * reg_.hop;
            double acc = 0.0;
            for (std::size_t i = 0; i < reg_.window; ++i) {
                acc += static_cast<double>(x[i]) * x[i];
                frame_[i] = static_cast<float>(x[i] * window_[i]);
            }
            tr.rms[f] = std::sqrt(acc / static_cast<double>(reg_.window));
            plan_.power_spectrum(frame_.data(), power_.data());
            for (std::size_t k = 0; k <= half; ++k) tr.mean_power[k] += power_[k];
            tr.flatness[f] =
                detail::banded_flatness(power_.data(), half, reg_.flatness_bands);
            tr.centroid[f] = detail::spectrum_centroid(power_.data(), half, tr.bin_hz);
            tr.peak[f] = detail::spectrum_peak(power_.data(), half, tr.bin_hz);
        }
        for (double& v : tr.mean_power) v /= static_cast<double>(n_frames);
        tr.overall_rms = rms(buf.samples);
        return tr;
    }

    FeatureVector summarize(const FrameTracks& tr) const {
        FeatureVector out;
        out.registry_id = reg_.hash();
        out.values.reserve(reg_.length());
        for (const auto& e : reg_.entries) {
            const std::vector<double>& base = tr.track(e.track);
            std::vector<double> derived;
            const std::vector<double>* src = &base;
            if (e.transform == Transform::derivative) {
                derived = detail::first_difference(base);
                src = &derived;
            }
            double mean, sd;
            detail::mean_std(*src, mean, sd);
            out.values.push_back(e.stat == Stat::mean ? mean : sd);
        }
        std::size_t half = tr.mean_power.empty() ? 0 : tr.mean_power.size() - 1;
        for (auto g : reg_.globals) {
            switch (g) {
                case GlobalFeature::overall_rms:
                    out.values.push_back(tr.overall_rms);
                    break;
                case GlobalFeature::global_centroid:
                    out.values.push_back(
                        detail::spectrum_centroid(tr.mean_power.data(), half, tr.bin_hz));
                    break;
                case GlobalFeature::global_flatness:
                    out.values.push_back(detail::banded_flatness(
                        tr.mean_power.data(), half, reg_.flatness_bands));
                    break;
            }
        }
        for (double v : out.values)
            if (!std::isfinite(v)) throw Error("summarize: non-finite feature value");
        return out;
    }

    FeatureVector extract(const AudioBuffer& buf) const {
        return summarize(stft_tracks(buf));
    }

private:
    FeatureRegistry reg_;
    FftPlan plan_;
    std::vector<double> window_;
    mutable std::vector<float> frame_;
    mutable std::vector<double> power_;
};

inline double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
    if (a.registry_id != b.registry_id)
        throw ValidationError("cosine_similarity: registry mismatch");
    if (a.values.size() != b.values.size())
        throw ValidationError("cosine_similarity: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na <= 0.0 || nb <= 0.0)
        throw ValidationError("cosine_similarity: zero-norm vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// Feature cache: versioned binary header followed by a row-major float32 LE
// matrix. Optionally carries per-column standardization statistics.
// ---------------------------------------------------------------------------

struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint64_t registry_hash = 0;
    bool standardized = false;
    std::vector<double> mean; // per column, present iff standardized
    std::vector<double> stdev;
    std::vector<float> data; // rows x cols, row-major

    const float* row(std::size_t r) const { return data.data() + r * cols; }
    float* row(std::size_t r) { return data.data() + r * cols; }
};

namespace cache {

constexpr char magic[4] = {'V', 'M', 'F', 'C'};
constexpr std::uint32_t version = 2;

inline void write(const std::string& path, const FeatureMatrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open cache for writing: " + path);
    os.write(magic, 4);
    le::write<std::uint32_t>(os, version);
    le::write<std::uint64_t>(os, m.registry_hash);
    le::write<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows));
    le::write<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols));
    le::write<std::uint8_t>(os, m.standardized ? 1 : 0);
    if (m.standardized) {
        for (std::size_t c = 0; c < m.cols; ++c) le::write<double>(os, m.mean[c]);
        for (std::size_t c = 0; c < m.cols; ++c) le::write<double>(os, m.stdev[c]);
    }
    for (float v : m.data) le::write<float>(os, v);
    if (!os) throw IoError("cache write failed: " + path);
}

inline FeatureMatrix read(const std::string& path, std::uint64_t expected_registry_hash) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open cache: " + path);
    char m4[4];
    is.read(m4, 4);
    if (!is || std::memcmp(m4, magic, 4) != 0)
        throw IoError("bad cache magic: " + path);
    auto ver = le::read<std::uint32_t>(is);
    if (ver != version)
        throw IoError("unsupported cache version " + std::to_string(ver) + ": " + path);
    FeatureMatrix m;
    m.registry_hash = le::read<std::uint64_t>(is);
    if (m.registry_hash != expected_registry_hash)
        throw IoError("stale cache (registry hash mismatch): " + path);
    m.rows = static_cast<std::size_t>(le::read<std::uint64_t>(is));
    m.cols = le::read<std::uint32_t>(is);
    m.standardized = le::read<std::uint8_t>(is) != 0;
    if (m.standardized) {
        m.mean.resize(m.cols);
        m.stdev.resize(m.cols);
        for (std::size_t c = 0; c < m.cols; ++c) m.mean[c] = le::read<double>(is);
        for (std::size_t c = 0; c < m.cols; ++c) m.stdev[c] = le::read<double>(is);
    }
    m.data.resize(m.rows * m.cols);
    for (auto& v : m.data) v = le::read<float>(is);
    return m;
}

} // namespace cache

} // namespace vocim
