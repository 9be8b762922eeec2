#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vocim/common.hpp"
#include "vocim/corpus.hpp"
#include "vocim/features.hpp"
#include "vocim/ontology.hpp"
#include "vocim/vocal_tract.hpp"

namespace vocim {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ModelKind { baseline, communicative, full };

inline const char* model_name(ModelKind m) {
    switch (m) {
        case ModelKind::baseline: return "baseline";
        case ModelKind::communicative: return "communicative";
        case ModelKind::full: return "full";
    }
    return "?";
}

inline ModelKind model_by_name(const std::string& s) {
    if (s == "baseline") return ModelKind::baseline;
    if (s == "communicative") return ModelKind::communicative;
    if (s == "full") return ModelKind::full;
    throw ValidationError("unknown model: " + s + " (expected baseline|communicative|full)");
}

struct InferenceConfig {
    double beta = 5.0;    // base speaker/listener inverse temperature
    double beta_s2 = 0.0; // level-2 inverse temperature; <= 0 means "use beta"
    double w_rate = 0.05;
    double w_extreme = 1.0;
    double extreme_low = 0.05;
    double extreme_high = 0.95;
    double voiced_threshold = 0.5;
    bool whisper = false;
    std::size_t block_rows = 4096; // utterance rows per streamed block

    double level2_beta() const { return beta_s2 > 0.0 ? beta_s2 : beta; }

    void validate() const {
        if (!(beta >= 0.0) || !std::isfinite(beta))
            throw ValidationError("InferenceConfig: beta must be finite and >= 0");
        if (block_rows == 0) throw ValidationError("InferenceConfig: block_rows must be > 0");
    }
};

struct Distribution {
    enum class Domain { utterances, referents };
    Domain domain = Domain::referents;
    std::vector<double> p;

    void validate() const {
        double sum = 0.0;
        for (double v : p) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw Error("Distribution: negative or non-finite entry");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw Error("Distribution: sums to " + std::to_string(sum));
    }

    std::size_t argmax() const {
        // ties broken by lowest index, so results are platform-stable
        std::size_t best = 0;
        for (std::size_t i = 1; i < p.size(); ++i)
            if (p[i] > p[best]) best = i;
        return best;
    }

    std::vector<std::size_t> top_k(std::size_t k) const {
        std::vector<std::size_t> idx(p.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [this](std::size_t a, std::size_t b) { return p[a] > p[b]; });
        idx.resize(std::min(k, idx.size()));
        return idx;
    }
};

/// p_i proportional to exp(beta * score_i), max-subtracted for stability.
/// A score of -inf yields probability exactly 0; all -inf is an error.
inline Distribution softmax(const std::vector<double>& scores, double beta,
                            Distribution::Domain domain = Distribution::Domain::referents) {
    if (scores.empty()) throw ValidationError("softmax: empty scores");
    double mx = -kInf;
    for (double s : scores) {
        if (std::isnan(s) || s == kInf)
            throw ValidationError("softmax: scores must be finite or -inf");
        mx = std::max(mx, s);
    }
    if (mx == -kInf) throw ValidationError("softmax: empty support (all scores -inf)");
    Distribution d;
    d.domain = domain;
    d.p.resize(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        d.p[i] = scores[i] == -kInf ? 0.0 : std::exp(beta * (scores[i] - mx));
        sum += d.p[i];
    }
    for (double& v : d.p) v /= sum;
    return d;
}

/// Articulation cost: rate of control change plus time spent at parameter
/// extremes. Whisper mode prices voiced utterances out entirely (+inf).
inline double utterance_cost(const ControlTrajectory& traj, const VoiceProfile& voice,
                             const InferenceConfig& cfg) {
    if (traj.frames.empty()) throw ValidationError("utterance_cost: empty trajectory");
    const std::size_t n = traj.frames.size();

    auto normalized = [&](const ControlFrame& f, std::size_t param) {
        switch (param) {
            case 0: return voice.f0_to_normalized(f.f0);
            case 1: return f.loudness;
            case 2: return f.vowel;
            case 3: return f.plosive_gate;
            default: return f.voicedness;
        }
    };

    if (cfg.whisper) {
        for (const auto& f : traj.frames)
            if (f.voicedness > cfg.voiced_threshold) return kInf;
    }

    double rate_acc = 0.0;
    std::size_t extreme_count = 0;
    for (std::size_t p = 0; p < 5; ++p) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = normalized(traj.frames[i], p);
            if (v < cfg.extreme_low || v > cfg.extreme_high) ++extreme_count;
            if (i + 1 < n)
                rate_acc += std::fabs(normalized(traj.frames[i + 1], p) - v) *
                            traj.frame_rate;
        }
    }
    double rate_term = n > 1 ? rate_acc / static_cast<double>(5 * (n - 1)) : 0.0;
    double extreme_term = static_cast<double>(extreme_count) / static_cast<double>(5 * n);
    return cfg.w_rate * rate_term + cfg.w_extreme * extreme_term;
}

/// Ancestor-aggregated expected ontology utility:
///   V(u, r) = sum over prefixes a of r's path of (listener mass under a),
/// which equals sum_{r'} Delta(r, r') * p_L(r' | u).
inline double expected_utility(const std::vector<double>& listener_p,
                               const std::vector<OntologyPath>& paths,
                               std::size_t referent, const Ontology& ontology) {
    if (listener_p.size() != paths.size())
        throw ValidationError("expected_utility: listener/path size mismatch");
    const OntologyPath& target = paths.at(referent);
    double v = 0.0;
    for (std::size_t depth = 0; depth < target.nodes.size(); ++depth) {
        std::size_t node = target.nodes[depth];
        double mass = 0.0;
        for (std::size_t j = 0; j < paths.size(); ++j)
            if (paths[j].nodes.size() > depth && paths[j].nodes[depth] == node)
                mass += listener_p[j];
        v += mass;
    }
    (void)ontology;
    return v;
}

/// RSA engine over a referent corpus and a discretized utterance space.
/// The |U| x |R| similarity matrix is never materialized: speaker and listener
/// evaluations stream over utterance blocks, with O(|U| + |R|) working memory.
class RsaEngine {
public:
    /// `referents`: standardized corpus matrix (carries z-score stats).
    /// `utterances_raw`: raw utterance features; standardized here with the
    /// corpus statistics. `costs`: per-utterance articulation cost (may be +inf).
    RsaEngine(const FeatureMatrix& referents, const FeatureMatrix& utterances_raw,
              std::vector<double> costs, std::vector<OntologyPath> paths,
              const Ontology& ontology, Prior prior, InferenceConfig cfg)
        : ontology_(ontology), paths_(std::move(paths)), prior_(std::move(prior)),
          costs_(std::move(costs)), cfg_(cfg) {
        cfg_.validate();
        if (!referents.standardized)
            throw ValidationError("RsaEngine: referent matrix must be standardized");
        if (referents.cols != utterances_raw.cols)
            throw ValidationError("RsaEngine: feature length mismatch");
        if (referents.registry_hash != utterances_raw.registry_hash)
            throw ValidationError("RsaEngine: registry mismatch between corpora");
        if (paths_.size() != referents.rows)
            throw ValidationError("RsaEngine: one ontology path per referent required");
        if (prior_.p.size() != referents.rows)
            throw ValidationError("RsaEngine: prior size mismatch");
        if (costs_.size() != utterances_raw.rows)
            throw ValidationError("RsaEngine: one cost per utterance required");
        prior_.validate();

        n_ref_ = referents.rows;
        n_utt_ = utterances_raw.rows;
        cols_ = referents.cols;

        ref_unit_.resize(n_ref_ * cols_);
        for (std::size_t r = 0; r < n_ref_; ++r) {
            std::vector<double> row(cols_);
            for (std::size_t c = 0; c < cols_; ++c) row[c] = referents.row(r)[c];
            store_unit(row, ref_unit_.data() + r * cols_, "referent", r);
        }
        Standardization st{referents.mean, referents.stdev};
        utt_unit_.resize(n_utt_ * cols_);
        for (std::size_t u = 0; u < n_utt_; ++u) {
            std::vector<double> row(cols_);
            for (std::size_t c = 0; c < cols_; ++c) row[c] = utterances_raw.row(u)[c];
            st.apply(row.data(), cols_);
            store_unit(row, utt_unit_.data() + u * cols_, "utterance", u);
        }
    }

    std::size_t num_referents() const { return n_ref_; }
    std::size_t num_utterances() const { return n_utt_; }
    const InferenceConfig& config() const { return cfg_; }
    const std::vector<double>& costs() const { return costs_; }
    const std::vector<OntologyPath>& paths() const { return paths_; }
    const Ontology& ontology() const { return ontology_; }

    /// Standardize + unit-normalize a raw feature vector against the corpus
    /// statistics (for external query audio).
    std::vector<double> prepare_query(const FeatureVector& raw,
                                      const Standardization& st) const {
        if (raw.values.size() != cols_)
            throw ValidationError("prepare_query: feature length mismatch");
        std::vector<double> row = raw.values;
        st.apply(row.data(), cols_);
        std::vector<double> unit(cols_);
        store_unit(row, unit.data(), "query", 0);
        return unit;
    }

    double similarity(std::size_t u, std::size_t r) const {
        return dot(utt_unit_.data() + u * cols_, ref_unit_.data() + r * cols_);
    }

    /// Eq: p_S(u|r) proportional to exp(beta * cos(phi(u), phi(r))).
    Distribution baseline_speaker(std::size_t r) const {
        check_ref(r);
        std::vector<double> scores(n_utt_);
        for_each_utterance([&](std::size_t u) {
            scores[u] = excluded(u) ? -kInf : similarity(u, r);
        });
        return softmax(scores, cfg_.beta, Distribution::Domain::utterances);
    }

    /// Listener by the same rule, normalized over referents.
    Distribution baseline_listener(std::size_t u) const {
        check_utt(u);
        return softmax(listener_scores(utt_unit_.data() + u * cols_), cfg_.beta,
                       Distribution::Domain::referents);
    }

    Distribution baseline_listener_query(const std::vector<double>& query_unit) const {
        return softmax(listener_scores(query_unit.data()), cfg_.beta,
                       Distribution::Domain::referents);
    }

    /// p_L(. | u) as a plain vector (base listener row).
    std::vector<double> listener_row(std::size_t u) const {
        return baseline_listener(u).p;
    }

    /// Level-2 communicative speaker: p_S2(u|r) proportional to exp(beta * p_L(r|u)).
    Distribution s2_speaker_communicative(std::size_t r) const {
        check_ref(r);
        std::vector<double> scores(n_utt_);
        for_each_utterance([&](std::size_t u) {
            scores[u] = excluded(u) ? -kInf : baseline_listener(u).p[r];
        });
        return softmax(scores, cfg_.level2_beta(), Distribution::Domain::utterances);
    }

    /// Listener mass aggregated per ontology node for utterance u.
    std::vector<double> node_mass(std::size_t u) const {
        return node_mass_of(listener_row(u));
    }

    std::vector<double> node_mass_of(const std::vector<double>& listener_p) const {
        std::vector<double> mass(ontology_.node_count(), 0.0);
        for (std::size_t j = 0; j < paths_.size(); ++j)
            for (std::size_t node : paths_[j].nodes) mass[node] += listener_p[j];
        return mass;
    }

    /// V2(u, r) via ancestor aggregation over the base listener.
    double utility(std::size_t u, std::size_t r) const {
        check_utt(u);
        check_ref(r);
        return expected_utility(listener_row(u), paths_, r, ontology_);
    }

    /// Full speaker: p_S2(u|r) proportional to exp(beta * (V2(u,r) - c(u))).
    Distribution full_speaker(std::size_t r) const {
        check_ref(r);
        std::vector<double> scores(n_utt_);
        for_each_utterance([&](std::size_t u) {
            if (excluded(u)) {
                scores[u] = -kInf;
                return;
            }
            std::vector<double> mass = node_mass(u);
            double v = 0.0;
            for (std::size_t node : paths_[r].nodes) v += mass[node];
            scores[u] = v - costs_[u];
        });
        return softmax(scores, cfg_.level2_beta(), Distribution::Domain::utterances);
    }

    Distribution speaker(ModelKind kind, std::size_t r) const {
        switch (kind) {
            case ModelKind::baseline: return baseline_speaker(r);
            case ModelKind::communicative: return s2_speaker_communicative(r);
            case ModelKind::full: return full_speaker(r);
        }
        throw ValidationError("speaker: bad model kind");
    }

    /// L2 listener for an in-space utterance: Bayes inversion of the configured
    /// speaker against the prior.
    Distribution l2_listener(std::size_t u, ModelKind speaker_kind) const {
        check_utt(u);
        if (speaker_kind == ModelKind::baseline) return baseline_listener(u);
        if (excluded(u))
            throw ValidationError("l2_listener: utterance has infinite cost");
        return l2_from_scores(listener_row(u),
                              speaker_kind == ModelKind::full ? costs_[u] : 0.0,
                              speaker_kind, /*include_query_in_norm=*/false);
    }

    /// L2 listener for external query audio (e.g. a recorded imitation). The
    /// query is added to the speaker's normalization set as a candidate
    /// utterance with zero articulation cost.
    Distribution l2_listener_query(const std::vector<double>& query_unit,
                                   ModelKind speaker_kind) const {
        if (speaker_kind == ModelKind::baseline) return baseline_listener_query(query_unit);
        std::vector<double> query_listener =
            softmax(listener_scores(query_unit.data()), cfg_.beta,
                    Distribution::Domain::referents)
                .p;
        return l2_from_scores(query_listener, /*query_cost=*/0.0, speaker_kind,
                              /*include_query_in_norm=*/true);
    }

private:
    Distribution l2_from_scores(const std::vector<double>& query_listener,
                                double query_cost, ModelKind speaker_kind,
                                bool include_query) const {
        // score rows per utterance are streamed twice (max, then sum) so the
        // per-referent normalizer Z(r) never needs a |U| x |R| buffer.
        const double beta2 = cfg_.level2_beta();
        std::vector<double> query_scores =
            scores_from_listener(query_listener, query_cost, speaker_kind);

        std::vector<double> mx(n_ref_, -kInf);
        auto scan = [&](auto&& fn) {
            for_each_utterance([&](std::size_t u) {
                if (excluded(u)) return;
                std::vector<double> row = scores_from_listener(
                    listener_row(u), speaker_kind == ModelKind::full ? costs_[u] : 0.0,
                    speaker_kind);
                fn(row);
            });
            if (include_query) fn(query_scores);
        };
        scan([&](const std::vector<double>& row) {
            for (std::size_t r = 0; r < n_ref_; ++r) mx[r] = std::max(mx[r], row[r]);
        });
        std::vector<double> z(n_ref_, 0.0);
        scan([&](const std::vector<double>& row) {
            for (std::size_t r = 0; r < n_ref_; ++r)
                z[r] += std::exp(beta2 * (row[r] - mx[r]));
        });

        // log p_S2(u*|r) = beta2*(score - mx[r]) - log z[r]
        std::vector<double> logpost(n_ref_);
        double best = -kInf;
        for (std::size_t r = 0; r < n_ref_; ++r) {
            if (prior_.p[r] <= 0.0) {
                logpost[r] = -kInf;
                continue;
            }
            logpost[r] = beta2 * (query_scores[r] - mx[r]) - std::log(z[r]) +
                         std::log(prior_.p[r]);
            best = std::max(best, logpost[r]);
        }
        if (best == -kInf) throw Error("l2_listener: zero posterior mass everywhere");
        Distribution d;
        d.domain = Distribution::Domain::referents;
        d.p.resize(n_ref_);
        double sum = 0.0;
        for (std::size_t r = 0; r < n_ref_; ++r) {
            d.p[r] = logpost[r] == -kInf ? 0.0 : std::exp(logpost[r] - best);
            sum += d.p[r];
        }
        for (double& v : d.p) v /= sum;
        return d;
    }

    std::vector<double> scores_from_listener(const std::vector<double>& listener_p,
                                             double cost, ModelKind kind) const {
        if (kind == ModelKind::communicative) return listener_p;
        // full: V2(u,r) - c(u) for all r
        std::vector<double> mass = node_mass_of(listener_p);
        std::vector<double> out(n_ref_);
        for (std::size_t r = 0; r < n_ref_; ++r) {
            double v = 0.0;
            for (std::size_t node : paths_[r].nodes) v += mass[node];
            out[r] = v - cost;
        }
        return out;
    }

    std::vector<double> listener_scores(const double* unit) const {
        std::vector<double> scores(n_ref_);
        for (std::size_t r = 0; r < n_ref_; ++r)
            scores[r] = dot(unit, ref_unit_.data() + r * cols_);
        return scores;
    }

    template <typename Fn>
    void for_each_utterance(Fn&& fn) const {
        // blocked schedule; per-utterance work is independent, so results are
        // identical for any block size
        for (std::size_t start = 0; start < n_utt_; start += cfg_.block_rows) {
            std::size_t end = std::min(n_utt_, start + cfg_.block_rows);
            for (std::size_t u = start; u < end; ++u) fn(u);
        }
    }

    bool excluded(std::size_t u) const { return costs_[u] == kInf; }

    double dot(const double* a, const double* b) const {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) acc += a[c] * b[c];
        return acc;
    }

    void store_unit(const std::vector<double>& row, double* out, const char* what,
                    std::size_t idx) const {
        double norm = 0.0;
        for (double v : row) norm += v * v;
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw ValidationError(std::string("RsaEngine: zero-norm ") + what +
                                  " feature vector at index " + std::to_string(idx));
        for (std::size_t c = 0; c < row.size(); ++c) out[c] = row[c] / norm;
    }

    void check_ref(std::size_t r) const {
        if (r >= n_ref_) throw ValidationError("referent index out of range");
    }
    void check_utt(std::size_t u) const {
        if (u >= n_utt_) throw ValidationError("utterance index out of range");
    }

    const Ontology& ontology_;
    std::vector<OntologyPath> paths_;
    Prior prior_;
    std::vector<double> costs_;
    InferenceConfig cfg_;
    std::size_t n_ref_ = 0, n_utt_ = 0, cols_ = 0;
    std::vector<double> ref_unit_;
    std::vector<double> utt_unit_;
};

} // namespace vocim
