#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vocim/audio.hpp"
#include "vocim/common.hpp"

namespace vocim {

/// One control-rate frame of the five vocal tract parameters.
/// f0 is in Hz; the remaining fields are normalized to [0, 1].
struct ControlFrame {
    double f0 = 150.0;
    double loudness = 0.5;
    double vowel = 0.5;
    double plosive_gate = 0.0;
    double voicedness = 0.5;
};

struct FormantAnchor {
    double f1, f2, f3;
    bool open;    // low tongue position
    bool fronted; // forward tongue position
};

struct Formants {
    std::array<double, 3> freq;
};

/// Voice configuration: pitch range, vowel formant anchors and filter Qs.
/// The vowel control indexes a piecewise-linear continuum over the anchors
/// [a], [e], [i], [o], [u] at positions 0, 0.25, 0.5, 0.75, 1.
struct VoiceProfile {
    std::string name;
    double f0_min = 80.0;
    double f0_max = 400.0;
    std::array<FormantAnchor, 5> anchors;
    std::array<double, 3> filter_q = {8.0, 10.0, 14.0};
    std::uint64_t noise_seed = 0x5eed;

    void validate() const {
        if (!(f0_min < f0_max) || f0_min <= 0)
            throw ValidationError("VoiceProfile: f0 range must satisfy 0 < min < max");
        for (const auto& a : anchors)
            if (!(a.f1 < a.f2 && a.f2 < a.f3))
                throw ValidationError("VoiceProfile: formant frequencies must be strictly increasing");
    }

    /// Map normalized pitch in [0,1] onto [f0_min, f0_max] geometrically
    /// (pitch perception is logarithmic in frequency).
    double f0_from_normalized(double x) const {
        return f0_min * std::pow(f0_max / f0_min, std::clamp(x, 0.0, 1.0));
    }

    double f0_to_normalized(double hz) const {
        return std::log(hz / f0_min) / std::log(f0_max / f0_min);
    }

    Formants formants_at(double vowel) const {
        double pos = std::clamp(vowel, 0.0, 1.0) * 4.0;
        std::size_t i0 = std::min(static_cast<std::size_t>(pos), std::size_t(3));
        double t = pos - static_cast<double>(i0);
        const FormantAnchor& a = anchors[i0];
        const FormantAnchor& b = anchors[i0 + 1];
        return {{a.f1 + t * (b.f1 - a.f1), a.f2 + t * (b.f2 - a.f2),
                 a.f3 + t * (b.f3 - a.f3)}};
    }

    const FormantAnchor& nearest_anchor(double vowel) const {
        double pos = std::clamp(vowel, 0.0, 1.0) * 4.0;
        return anchors[static_cast<std::size_t>(std::lround(pos))];
    }
};

// Peterson & Barney average formant values.
inline VoiceProfile masculine_voice() {
    VoiceProfile v;
    v.name = "masculine";
    v.f0_min = 80.0;
    v.f0_max = 400.0;
    v.anchors = {{
        {730.0, 1090.0, 2440.0, true, false},  // [a]
        {530.0, 1840.0, 2480.0, false, true},  // [e]
        {270.0, 2290.0, 3010.0, false, true},  // [i]
        {570.0, 840.0, 2410.0, false, false},  // [o]
        {300.0, 870.0, 2240.0, false, false},  // [u]
    }};
    return v;
}

inline VoiceProfile feminine_voice() {
    VoiceProfile v;
    v.name = "feminine";
    v.f0_min = 140.0;
    v.f0_max = 600.0;
    v.anchors = {{
        {850.0, 1220.0, 2810.0, true, false},
        {610.0, 2330.0, 2990.0, false, true},
        {310.0, 2790.0, 3310.0, false, true},
        {590.0, 920.0, 2710.0, false, false},
        {370.0, 950.0, 2670.0, false, false},
    }};
    return v;
}

inline VoiceProfile voice_by_name(const std::string& name) {
    if (name == "masculine") return masculine_voice();
    if (name == "feminine") return feminine_voice();
    throw ValidationError("unknown voice profile: " + name);
}

/// Frame-rate time series of control parameters; the atom of the utterance space.
struct ControlTrajectory {
    std::vector<ControlFrame> frames;
    double frame_rate = 100.0;

    double duration() const {
        return frame_rate > 0 ? static_cast<double>(frames.size()) / frame_rate : 0.0;
    }

    void validate(const VoiceProfile& voice) const {
        if (frames.empty() || frame_rate <= 0)
            throw ValidationError("ControlTrajectory: duration must be > 0");
        auto check01 = [](double v, std::size_t i, const char* field) {
            if (!(v >= 0.0 && v <= 1.0))
                throw ValidationError("ControlTrajectory: frame " + std::to_string(i) +
                                      " field '" + field + "' out of [0,1]: " +
                                      std::to_string(v));
        };
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const ControlFrame& f = frames[i];
            if (!(f.f0 >= voice.f0_min - 1e-9 && f.f0 <= voice.f0_max + 1e-9))
                throw ValidationError("ControlTrajectory: frame " + std::to_string(i) +
                                      " field 'f0' outside voice range: " +
                                      std::to_string(f.f0));
            check01(f.loudness, i, "loudness");
            check01(f.vowel, i, "vowel");
            check01(f.plosive_gate, i, "plosive_gate");
            check01(f.voicedness, i, "voicedness");
        }
    }

    // Linear interpolation of a field at a fractional frame position.
    template <typename Getter>
    double at(double pos, Getter get) const {
        if (pos <= 0.0) return get(frames.front());
        std::size_t i0 = static_cast<std::size_t>(pos);
        if (i0 + 1 >= frames.size()) return get(frames.back());
        double t = pos - static_cast<double>(i0);
        return (1.0 - t) * get(frames[i0]) + t * get(frames[i0 + 1]);
    }
};

/// Seeded broadband noise in [-1, 1). Bit-reproducible across platforms
/// (raw mt19937 words, no distribution object).
inline std::vector<double> noise_source(std::uint64_t seed, std::size_t length) {
    std::mt19937 rng(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
    std::vector<double> out(length);
    for (auto& v : out)
        v = static_cast<double>(rng() >> 8) / 8388608.0 - 1.0;
    return out;
}

/// Impulse train with exactly one impulse per period 1/f0, amplitude scaled so
/// the train has unit RMS independent of f0. f0_track is per-sample, in Hz.
inline std::vector<double> impulse_train_source(const std::vector<double>& f0_track,
                                                double sample_rate) {
    std::vector<double> out(f0_track.size(), 0.0);
    double phase = 1.0; // emit an impulse at sample 0
    for (std::size_t i = 0; i < f0_track.size(); ++i) {
        double f0 = f0_track[i];
        if (!(f0 > 0.0) || !std::isfinite(f0))
            throw ValidationError("impulse_train_source: f0 must be positive and finite");
        if (f0 > sample_rate / 4.0)
            throw ValidationError("impulse_train_source: f0 " + std::to_string(f0) +
                                  " Hz above Nyquist/2");
        phase += f0 / sample_rate;
        if (phase >= 1.0) {
            phase -= 1.0;
            out[i] = std::sqrt(sample_rate / f0);
        }
    }
    return out;
}

namespace detail {

// Two-pole resonator (Steiglitz), peak gain normalized to ~1.
struct ResonatorCoeffs {
    double a1 = 0.0, a2 = 0.0, g = 1.0;
};

inline ResonatorCoeffs resonator_coeffs(double freq, double q, double sample_rate) {
    double f = std::min(freq, 0.45 * sample_rate);
    double bw = f / q;
    double r = std::exp(-M_PI * bw / sample_rate);
    double theta = 2.0 * M_PI * f / sample_rate;
    ResonatorCoeffs c;
    c.a1 = -2.0 * r * std::cos(theta);
    c.a2 = r * r;
    c.g = (1.0 - r * r) * std::sin(theta);
    return c;
}

struct ResonatorState {
    double y1 = 0.0, y2 = 0.0;
    double step(double x, const ResonatorCoeffs& c) {
        double y = c.g * x - c.a1 * y1 - c.a2 * y2;
        y2 = y1;
        y1 = y;
        return y;
    }
};

// Linear below the knee, tanh-compressed above; output bounded by knee+margin.
inline double soft_clip(double x) {
    constexpr double knee = 0.9, margin = 0.1;
    double ax = std::fabs(x);
    if (ax <= knee) return x;
    return std::copysign(knee + margin * std::tanh((ax - knee) / margin), x);
}

} // namespace detail

/// Apply a fixed (LTI) formant filter bank to a source signal. Exposed mainly
/// for analysis; synthesize() interpolates coefficients per control frame.
inline std::vector<double> apply_formant_filter(const std::vector<double>& src,
                                                const Formants& formants,
                                                const std::array<double, 3>& q,
                                                double sample_rate) {
    std::array<detail::ResonatorCoeffs, 3> coeffs;
    for (std::size_t k = 0; k < 3; ++k)
        coeffs[k] = detail::resonator_coeffs(formants.freq[k], q[k], sample_rate);
    static constexpr std::array<double, 3> weights = {1.0, 0.7, 0.4};
    std::array<detail::ResonatorState, 3> state;
    std::vector<double> out(src.size(), 0.0);
    for (std::size_t i = 0; i < src.size(); ++i) {
        double y = 0.0;
        for (std::size_t k = 0; k < 3; ++k) y += weights[k] * state[k].step(src[i], coeffs[k]);
        out[i] = y;
    }
    return out;
}

struct SynthParams {
    double master_gain = 0.35;
    double aspiration_bypass = 0.8; // dry noise mixed past the filter when unvoiced
    double burst_gain = 2.0;
    double burst_tau = 0.010;      // s, exponential decay
    double burst_length = 0.030;   // s, envelope truncation
    double plosive_threshold = 0.5;
};

/// Deterministic source-filter synthesis of a control trajectory.
/// Source: unit-RMS impulse train (voiced) mixed with seeded broadband noise
/// (unvoiced) by voicedness, plus gate-triggered noise bursts. Filter: bank of
/// three resonators tracking the vowel's formants, coefficients interpolated
/// between control frames. Output is loudness-scaled and soft-clipped.
inline AudioBuffer synthesize(const ControlTrajectory& traj, const VoiceProfile& voice,
                              double sample_rate = 16000.0,
                              const SynthParams& params = {}) {
    voice.validate();
    traj.validate(voice);
    if (sample_rate < 8000.0)
        throw ValidationError("synthesize: sample_rate must be >= 8000 Hz");

    const std::size_t n = static_cast<std::size_t>(
        std::llround(traj.duration() * sample_rate));
    const double frames_per_sample = traj.frame_rate / sample_rate;
    const std::size_t n_frames = traj.frames.size();

    std::vector<double> noise = noise_source(voice.noise_seed, n);

    // Per-frame filter coefficients (one extra set to interpolate toward).
    std::vector<std::array<detail::ResonatorCoeffs, 3>> fc(n_frames + 1);
    for (std::size_t f = 0; f <= n_frames; ++f) {
        const ControlFrame& cf = traj.frames[std::min(f, n_frames - 1)];
        Formants fm = voice.formants_at(cf.vowel);
        for (std::size_t k = 0; k < 3; ++k)
            fc[f][k] = detail::resonator_coeffs(fm.freq[k], voice.filter_q[k], sample_rate);
    }

    // Plosive triggers: rising edge of the gate through the threshold.
    std::vector<std::size_t> triggers;
    for (std::size_t f = 0; f < n_frames; ++f) {
        double prev = f == 0 ? 0.0 : traj.frames[f - 1].plosive_gate;
        if (prev < params.plosive_threshold &&
            traj.frames[f].plosive_gate >= params.plosive_threshold)
            triggers.push_back(static_cast<std::size_t>(
                static_cast<double>(f) / frames_per_sample));
    }

    static constexpr std::array<double, 3> weights = {1.0, 0.7, 0.4};
    std::array<detail::ResonatorState, 3> state;

    AudioBuffer out;
    out.sample_rate = sample_rate;
    out.samples.resize(n);

    double phase = 1.0;
    std::size_t trig_idx = 0;
    double burst_env = 0.0;
    double burst_age = 1e9;
    const double burst_decay = std::exp(-1.0 / (params.burst_tau * sample_rate));

    for (std::size_t i = 0; i < n; ++i) {
        double pos = static_cast<double>(i) * frames_per_sample;
        double f0 = traj.at(pos, [](const ControlFrame& f) { return f.f0; });
        double loud = traj.at(pos, [](const ControlFrame& f) { return f.loudness; });
        double v = traj.at(pos, [](const ControlFrame& f) { return f.voicedness; });

        // voiced source: one impulse per period, unit RMS
        double imp = 0.0;
        phase += f0 / sample_rate;
        if (phase >= 1.0) {
            phase -= 1.0;
            imp = std::sqrt(sample_rate / f0);
        }

        if (trig_idx < triggers.size() && i >= triggers[trig_idx]) {
            burst_env = 1.0;
            burst_age = 0.0;
            ++trig_idx;
        }
        double burst = 0.0;
        if (burst_age < params.burst_length) {
            burst = params.burst_gain * burst_env * noise[i];
            burst_env *= burst_decay;
            burst_age += 1.0 / sample_rate;
        }

        double src = v * imp + (1.0 - v) * noise[i] + burst;

        // filter coefficients interpolated between frames
        std::size_t f0i = std::min(static_cast<std::size_t>(pos), n_frames - 1);
        double t = pos - static_cast<double>(f0i);
        double y = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            detail::ResonatorCoeffs c;
            c.a1 = (1.0 - t) * fc[f0i][k].a1 + t * fc[f0i + 1][k].a1;
            c.a2 = (1.0 - t) * fc[f0i][k].a2 + t * fc[f0i + 1][k].a2;
            c.g = (1.0 - t) * fc[f0i][k].g + t * fc[f0i + 1][k].g;
            y += weights[k] * state[k].step(src, c);
        }
        // aspiration/frication leaks past the oral cavity filter
        y += params.aspiration_bypass * ((1.0 - v) * noise[i] + 0.5 * burst);

        out.samples[i] = static_cast<float>(
            detail::soft_clip(loud * params.master_gain * y));
    }
    return out;
}

/// Constant-parameter trajectory helper (fixtures and tests).
inline ControlTrajectory constant_trajectory(const ControlFrame& frame, double seconds,
                                             double frame_rate = 100.0) {
    ControlTrajectory t;
    t.frame_rate = frame_rate;
    t.frames.assign(static_cast<std::size_t>(std::llround(seconds * frame_rate)), frame);
    return t;
}

} // namespace vocim
