#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vocim/common.hpp"
#include "vocim/vocal_tract.hpp"

namespace vocim {

enum class PatternKind : std::uint8_t { constant = 0, sine, sawtooth, random_walk };

inline const char* pattern_kind_name(PatternKind k) {
    switch (k) {
        case PatternKind::constant: return "constant";
        case PatternKind::sine: return "sine";
        case PatternKind::sawtooth: return "sawtooth";
        case PatternKind::random_walk: return "random_walk";
    }
    return "?";
}

/// A modulation pattern for one control parameter, producing a normalized
/// [0,1] track at the control rate.
struct ModulationPattern {
    PatternKind kind = PatternKind::constant;
    double rate = 0.0;      // Hz, sine/sawtooth only
    double level = 0.5;     // center
    double amplitude = 0.0; // excursion around the center
    double walk_sigma = 0.0;   // Gaussian step per control frame
    double walk_lo = 0.1, walk_hi = 0.9;

    void validate() const {
        if ((kind == PatternKind::sine || kind == PatternKind::sawtooth) && !(rate > 0))
            throw ValidationError("ModulationPattern: rate must be > 0");
    }

    std::string describe() const {
        std::ostringstream os;
        os << pattern_kind_name(kind);
        switch (kind) {
            case PatternKind::constant:
                os << " level=" << level;
                break;
            case PatternKind::sine:
            case PatternKind::sawtooth:
                os << " rate=" << rate << " level=" << level
                   << " amplitude=" << amplitude;
                break;
            case PatternKind::random_walk:
                os << " sigma=" << walk_sigma << " level=" << level
                   << " lo=" << walk_lo << " hi=" << walk_hi;
                break;
        }
        return os.str();
    }

    /// Evaluate the pattern at control rate over n frames. Random walks draw
    /// Gaussian steps from `seed` with reflecting boundaries; other kinds
    /// ignore the seed. All values are clamped to [0,1].
    std::vector<double> evaluate(std::size_t n, double frame_rate,
                                 std::uint64_t seed) const {
        std::vector<double> out(n);
        switch (kind) {
            case PatternKind::constant:
                for (auto& v : out) v = level;
                break;
            case PatternKind::sine:
                for (std::size_t i = 0; i < n; ++i) {
                    double t = static_cast<double>(i) / frame_rate;
                    out[i] = level + amplitude * std::sin(2.0 * M_PI * rate * t);
                }
                break;
            case PatternKind::sawtooth:
                for (std::size_t i = 0; i < n; ++i) {
                    double t = static_cast<double>(i) / frame_rate;
                    double frac = rate * t - std::floor(rate * t);
                    out[i] = level + amplitude * (2.0 * frac - 1.0);
                }
                break;
            case PatternKind::random_walk: {
                std::mt19937_64 rng(seed);
                auto gauss = [&rng]() {
                    // Box-Muller on raw 53-bit uniforms; avoids libstdc++-specific
                    // normal_distribution streams so tracks are platform-stable.
                    double u1 = (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
                    double u2 = static_cast<double>(rng() >> 11) / 9007199254740992.0;
                    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
                };
                double x = level;
                for (std::size_t i = 0; i < n; ++i) {
                    out[i] = x;
                    x += walk_sigma * gauss();
                    // reflect into [lo, hi]
                    while (x < walk_lo || x > walk_hi) {
                        if (x < walk_lo) x = 2.0 * walk_lo - x;
                        if (x > walk_hi) x = 2.0 * walk_hi - x;
                    }
                }
                break;
            }
        }
        for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
        return out;
    }
};

/// The 11 standard patterns: one constant, sines at {0.5,1,2,4,8} Hz,
/// sawtooths at {1,2,4,8} Hz, one random walk.
inline std::vector<ModulationPattern> standard_patterns() {
    std::vector<ModulationPattern> out;
    ModulationPattern c;
    c.kind = PatternKind::constant;
    c.level = 0.5;
    out.push_back(c);
    for (double rate : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        ModulationPattern p;
        p.kind = PatternKind::sine;
        p.rate = rate;
        p.level = 0.5;
        p.amplitude = 0.4;
        out.push_back(p);
    }
    for (double rate : {1.0, 2.0, 4.0, 8.0}) {
        ModulationPattern p;
        p.kind = PatternKind::sawtooth;
        p.rate = rate;
        p.level = 0.5;
        p.amplitude = 0.4;
        out.push_back(p);
    }
    ModulationPattern w;
    w.kind = PatternKind::random_walk;
    w.level = 0.5;
    w.walk_sigma = 0.05;
    w.walk_lo = 0.1;
    w.walk_hi = 0.9;
    out.push_back(w);
    return out;
}

constexpr std::size_t kNumControlParams = 5;
// parameter order: f0, loudness, vowel, plosive_gate, voicedness
enum class ControlParam : std::size_t { f0 = 0, loudness, vowel, plosive_gate, voicedness };

/// One point of the discretized utterance space: a pattern index per parameter.
struct UtteranceSpec {
    std::array<std::size_t, kNumControlParams> pattern_ids{};
    std::uint64_t space_id = 0;
};

/// The discretized utterance space: |patterns|^5 specs in mixed-radix order
/// (parameter 0 is the least significant digit).
class UtteranceSpace {
public:
    UtteranceSpace(std::vector<ModulationPattern> patterns, double duration_s = 2.0,
                   double control_rate = 100.0)
        : patterns_(std::move(patterns)), duration_(duration_s),
          control_rate_(control_rate) {
        if (patterns_.empty()) throw ValidationError("UtteranceSpace: no patterns");
        if (!(duration_ > 0)) throw ValidationError("UtteranceSpace: duration must be > 0");
        for (const auto& p : patterns_) p.validate();
        double sz = std::pow(static_cast<double>(patterns_.size()),
                             static_cast<double>(kNumControlParams));
        if (sz > 1e18) throw ValidationError("UtteranceSpace: index overflow");
        size_ = 1;
        for (std::size_t i = 0; i < kNumControlParams; ++i) size_ *= patterns_.size();
        space_id_ = compute_space_id();
    }

    std::size_t size() const { return size_; }
    std::size_t num_patterns() const { return patterns_.size(); }
    const std::vector<ModulationPattern>& patterns() const { return patterns_; }
    double duration() const { return duration_; }
    double control_rate() const { return control_rate_; }
    std::uint64_t space_id() const { return space_id_; }

    std::uint64_t encode(const std::array<std::size_t, kNumControlParams>& ids) const {
        std::uint64_t index = 0;
        std::uint64_t radix = 1;
        for (std::size_t i = 0; i < kNumControlParams; ++i) {
            if (ids[i] >= patterns_.size())
                throw ValidationError("encode: pattern id out of range");
            index += ids[i] * radix;
            radix *= patterns_.size();
        }
        return index;
    }

    UtteranceSpec decode(std::uint64_t index) const {
        if (index >= size_)
            throw ValidationError("decode: index " + std::to_string(index) +
                                  " out of range");
        UtteranceSpec spec;
        spec.space_id = space_id_;
        for (std::size_t i = 0; i < kNumControlParams; ++i) {
            spec.pattern_ids[i] = index % patterns_.size();
            index /= patterns_.size();
        }
        return spec;
    }

    /// Realize a spec as a control trajectory: each parameter track is its
    /// assigned pattern at control rate, mapped into the parameter's physical
    /// range (f0 into the voice's pitch range, others are already normalized).
    ControlTrajectory realize(const UtteranceSpec& spec, const VoiceProfile& voice) const {
        std::size_t n = static_cast<std::size_t>(std::llround(duration_ * control_rate_));
        std::array<std::vector<double>, kNumControlParams> tracks;
        for (std::size_t p = 0; p < kNumControlParams; ++p) {
            std::size_t id = spec.pattern_ids[p];
            if (id >= patterns_.size())
                throw ValidationError("realize: pattern id out of range");
            tracks[p] = patterns_[id].evaluate(n, control_rate_, walk_seed(p));
        }
        ControlTrajectory traj;
        traj.frame_rate = control_rate_;
        traj.frames.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            ControlFrame& f = traj.frames[i];
            f.f0 = voice.f0_from_normalized(tracks[0][i]);
            f.loudness = tracks[1][i];
            f.vowel = tracks[2][i];
            f.plosive_gate = tracks[3][i];
            f.voicedness = tracks[4][i];
        }
        return traj;
    }

    /// Seed for the random-walk pattern on a given parameter; fixed by the
    /// space configuration so realization is deterministic.
    std::uint64_t walk_seed(std::size_t param_index) const {
        return mix64(space_id_ ^ (0x9e37u + param_index));
    }

    /// Deterministic text manifest; a space is reconstructible from it alone.
    std::string manifest() const {
        std::ostringstream os;
        os << "vocim-space v1\n";
        os << "patterns " << patterns_.size() << "\n";
        os << "params " << kNumControlParams << "\n";
        os << "duration " << duration_ << "\n";
        os << "control_rate " << control_rate_ << "\n";
        for (std::size_t i = 0; i < patterns_.size(); ++i)
            os << "pattern " << i << " " << patterns_[i].describe() << "\n";
        return os.str();
    }

    static UtteranceSpace from_manifest(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line != "vocim-space v1")
            throw IoError("space manifest: bad header");
        std::size_t n_patterns = 0, n_params = 0;
        double duration = 0, control_rate = 0;
        auto expect = [&](const std::string& key) {
            if (!std::getline(is, line)) throw IoError("space manifest: truncated");
            std::istringstream ls(line);
            std::string k;
            ls >> k;
            if (k != key) throw IoError("space manifest: expected '" + key + "'");
            return ls;
        };
        { auto ls = expect("patterns"); ls >> n_patterns; }
        { auto ls = expect("params"); ls >> n_params; }
        { auto ls = expect("duration"); ls >> duration; }
        { auto ls = expect("control_rate"); ls >> control_rate; }
        if (n_params != kNumControlParams)
            throw IoError("space manifest: unsupported parameter count");
        std::vector<ModulationPattern> patterns(n_patterns);
        for (std::size_t i = 0; i < n_patterns; ++i) {
            if (!std::getline(is, line)) throw IoError("space manifest: truncated");
            std::istringstream ls(line);
            std::string k, kind;
            std::size_t idx;
            ls >> k >> idx >> kind;
            if (k != "pattern" || idx != i)
                throw IoError("space manifest: bad pattern line: " + line);
            ModulationPattern& p = patterns[i];
            if (kind == "constant") p.kind = PatternKind::constant;
            else if (kind == "sine") p.kind = PatternKind::sine;
            else if (kind == "sawtooth") p.kind = PatternKind::sawtooth;
            else if (kind == "random_walk") p.kind = PatternKind::random_walk;
            else throw IoError("space manifest: unknown pattern kind: " + kind);
            std::string kv;
            while (ls >> kv) {
                auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw IoError("space manifest: bad key=value: " + kv);
                std::string key = kv.substr(0, eq);
                double val = std::stod(kv.substr(eq + 1));
                if (key == "rate") p.rate = val;
                else if (key == "level") p.level = val;
                else if (key == "amplitude") p.amplitude = val;
                else if (key == "sigma") p.walk_sigma = val;
                else if (key == "lo") p.walk_lo = val;
                else if (key == "hi") p.walk_hi = val;
                else throw IoError("space manifest: unknown key: " + key);
            }
        }
        return UtteranceSpace(std::move(patterns), duration, control_rate);
    }

    static UtteranceSpace from_manifest_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw IoError("cannot open space manifest: " + path);
        return from_manifest(is);
    }

    void write_manifest(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot write space manifest: " + path);
        os << manifest();
    }

private:
    std::uint64_t compute_space_id() const {
        std::ostringstream os;
        os << kNumControlParams << "|" << duration_ << "|" << control_rate_ << "|";
        for (const auto& p : patterns_) os << p.describe() << "|";
        return fnv1a64(os.str());
    }

    std::vector<ModulationPattern> patterns_;
    double duration_;
    double control_rate_;
    std::size_t size_ = 0;
    std::uint64_t space_id_ = 0;
};

/// First `count` of the standard patterns (test mode uses 3).
inline std::vector<ModulationPattern> standard_patterns(std::size_t count) {
    auto all = standard_patterns();
    if (count == 0 || count > all.size())
        throw ValidationError("standard_patterns: count must be in [1, " +
                              std::to_string(all.size()) + "]");
    all.resize(count);
    return all;
}

} // namespace vocim
