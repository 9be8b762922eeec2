#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "vocim/common.hpp"
#include "vocim/inference.hpp"
#include "vocim/vocal_tract.hpp"

namespace vocim {

/// The four evaluation features: coded from control trajectories, never from
/// rendered audio.
struct PhoneticCode {
    bool voiced = false;
    bool has_stops = false;
    bool open_vowel = false;
    bool fronted_vowel = false;

    bool operator==(const PhoneticCode&) const = default;

    double feature(std::size_t i) const {
        switch (i) {
            case 0: return voiced ? 1.0 : 0.0;
            case 1: return has_stops ? 1.0 : 0.0;
            case 2: return open_vowel ? 1.0 : 0.0;
            default: return fronted_vowel ? 1.0 : 0.0;
        }
    }
};

constexpr std::array<const char*, 4> kPhoneticFeatureNames = {"voiced", "stops", "open",
                                                              "fronted"};

struct PhoneticThresholds {
    double level = 0.5;          // gate/voicedness level threshold
    double voiced_fraction = 0.2; // fraction of frames above level to count as voiced
};

/// Deterministic coding of a control trajectory:
///  - voiced: voicedness above threshold for at least 20% of frames
///  - stops: at least one plosive-gate rising edge through the threshold
///  - open/fronted: attributes of the dominant (modal) vowel anchor
inline PhoneticCode code_utterance(const ControlTrajectory& traj, const VoiceProfile& voice,
                                   const PhoneticThresholds& th = {}) {
    if (traj.frames.empty()) throw ValidationError("code_utterance: empty trajectory");
    PhoneticCode code;

    std::size_t voiced_frames = 0;
    for (const auto& f : traj.frames)
        if (f.voicedness > th.level) ++voiced_frames;
    code.voiced = static_cast<double>(voiced_frames) >=
                  th.voiced_fraction * static_cast<double>(traj.frames.size());

    double prev = 0.0;
    for (const auto& f : traj.frames) {
        if (prev < th.level && f.plosive_gate >= th.level) {
            code.has_stops = true;
            break;
        }
        prev = f.plosive_gate;
    }

    // modal vowel anchor over frames
    std::array<std::size_t, 5> counts{};
    for (const auto& f : traj.frames) {
        double pos = std::clamp(f.vowel, 0.0, 1.0) * 4.0;
        counts[static_cast<std::size_t>(std::lround(pos))]++;
    }
    std::size_t modal = 0;
    for (std::size_t i = 1; i < 5; ++i)
        if (counts[i] > counts[modal]) modal = i;
    code.open_vowel = voice.anchors[modal].open;
    code.fronted_vowel = voice.anchors[modal].fronted;
    return code;
}

/// Probability-weighted frequency of each phonetic feature under a speaker
/// distribution over utterances.
inline std::array<double, 4> feature_frequencies(const Distribution& dist,
                                                 const std::vector<PhoneticCode>& codes) {
    if (dist.domain != Distribution::Domain::utterances)
        throw ValidationError("feature_frequencies: expected a distribution over utterances");
    if (dist.p.size() != codes.size())
        throw ValidationError("feature_frequencies: codes missing for part of the support");
    std::array<double, 4> freq{};
    for (std::size_t u = 0; u < codes.size(); ++u)
        for (std::size_t f = 0; f < 4; ++f) freq[f] += dist.p[u] * codes[u].feature(f);
    return freq;
}

struct CorrelationResult {
    double r_squared = 0.0;
    double slope = 0.0; // sign distinguishes correlation from anti-correlation
};

/// Squared Pearson correlation over all aligned cells of two frequency tables.
inline CorrelationResult correlate(const std::vector<double>& predicted,
                                   const std::vector<double>& human) {
    if (predicted.size() != human.size() || predicted.empty())
        throw ValidationError("correlate: tables must be non-empty and aligned");
    const double n = static_cast<double>(predicted.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        mx += predicted[i];
        my += human[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        double dx = predicted[i] - mx, dy = human[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw ValidationError("correlate: zero-variance input");
    CorrelationResult res;
    double r = sxy / std::sqrt(sxx * syy);
    res.r_squared = r * r;
    res.slope = sxy / sxx;
    return res;
}

/// Human frequency table: referent id -> 4 feature frequencies in [0,1].
/// CSV format: header `referent_id,voiced,stops,open,fronted`, one row per referent.
inline std::map<std::string, std::array<double, 4>> load_human_codes_csv(
    const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open human codes CSV: " + path);
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty human codes CSV: " + path);
    if (line != "referent_id,voiced,stops,open,fronted")
        throw IoError("human codes CSV: unexpected header: " + line);
    std::map<std::string, std::array<double, 4>> table;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::array<double, 4> vals{};
        std::string id;
        std::size_t pos = line.find(',');
        if (pos == std::string::npos)
            throw IoError("human codes CSV line " + std::to_string(lineno) + ": bad row");
        id = line.substr(0, pos);
        std::string rest = line.substr(pos + 1);
        std::istringstream rs(rest);
        std::string cell;
        for (std::size_t i = 0; i < 4; ++i) {
            if (!std::getline(rs, cell, ','))
                throw IoError("human codes CSV line " + std::to_string(lineno) +
                              ": expected 4 frequencies");
            vals[i] = std::stod(cell);
            if (vals[i] < 0.0 || vals[i] > 1.0)
                throw ValidationError("human codes CSV line " + std::to_string(lineno) +
                                      ": frequency out of [0,1]");
        }
        table[id] = vals;
    }
    return table;
}

} // namespace vocim
