#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "vocim/common.hpp"
#include "vocim/corpus.hpp"
#include "vocim/features.hpp"
#include "vocim/inference.hpp"
#include "vocim/ontology.hpp"
#include "vocim/phonetics.hpp"
#include "vocim/utterance_space.hpp"
#include "vocim/vocal_tract.hpp"

#include <json.hpp>

namespace vocim {

constexpr int kReportSchemaVersion = 1;

/// Everything a pipeline run needs, resolved from CLI flags / test fixtures.
struct RunConfig {
    std::string space_dir;
    std::string corpus_manifest;
    std::string ontology_path;
    std::string out_dir = ".";

    ModelKind model = ModelKind::full;
    std::string voice = "masculine";
    double beta = 5.0;
    std::size_t top_k = 5;
    bool whisper = false;
    std::uint64_t seed = 0;
    std::size_t patterns = 11;
    double duration = 2.0;
    std::size_t memory_budget_mb = 2048;
    bool force = false;
    bool render_audio = true;

    // lesion harness (feature-robustness evaluation)
    bool lesion = false;
    std::uint64_t lesion_seed = 7;

    void validate() const {
        if (top_k < 1) throw ValidationError("RunConfig: top_k must be >= 1");
        if (patterns < 1) throw ValidationError("RunConfig: patterns must be >= 1");
    }

    InferenceConfig inference() const {
        InferenceConfig cfg;
        cfg.beta = beta;
        cfg.whisper = whisper;
        return cfg;
    }
};

/// Pick 2 features per perceptual group (loudness, pitch, timbre) at random.
inline std::vector<std::size_t> pick_lesion_indices(const FeatureRegistry& reg,
                                                    std::uint64_t seed,
                                                    std::size_t per_group = 2) {
    std::vector<std::vector<std::size_t>> groups(3);
    for (std::size_t i = 0; i < reg.length(); ++i)
        groups[static_cast<std::size_t>(reg.group_of(i))].push_back(i);
    std::mt19937_64 rng(mix64(seed ^ 0x1e510));
    std::vector<std::size_t> picked;
    for (auto& g : groups) {
        if (g.size() < per_group)
            throw ValidationError("lesion: group smaller than requested picks");
        for (std::size_t k = 0; k < per_group; ++k) {
            std::size_t j = k + static_cast<std::size_t>(rng() % (g.size() - k));
            std::swap(g[k], g[j]);
            picked.push_back(g[k]);
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

/// Column-subset a raw feature matrix to a lesioned registry. Feature values
/// are independent per column, so this equals re-extraction with the smaller
/// registry.
inline FeatureMatrix lesion_matrix(const FeatureMatrix& m,
                                   const std::vector<std::size_t>& removed,
                                   std::uint64_t new_registry_hash) {
    std::vector<bool> drop(m.cols, false);
    for (std::size_t i : removed) drop.at(i) = true;
    FeatureMatrix out;
    out.rows = m.rows;
    out.registry_hash = new_registry_hash;
    out.standardized = m.standardized;
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < m.cols; ++c)
        if (!drop[c]) keep.push_back(c);
    out.cols = keep.size();
    if (m.standardized) {
        for (std::size_t c : keep) {
            out.mean.push_back(m.mean[c]);
            out.stdev.push_back(m.stdev[c]);
        }
    }
    out.data.resize(out.rows * out.cols);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t i = 0; i < keep.size(); ++i)
            out.data[r * out.cols + i] = m.row(r)[keep[i]];
    return out;
}

/// A run over one corpus + one utterance space. Loads (or builds) all caches
/// up front; inference queries are then in-memory.
class Pipeline {
public:
    Pipeline(RunConfig cfg, std::ostream& log) : cfg_(std::move(cfg)), log_(log) {
        cfg_.validate();
        voice_ = voice_by_name(cfg_.voice);
        voice_.noise_seed ^= cfg_.seed;

        registry_ = default_registry();
        extractor_.emplace(registry_);

        ontology_ = Ontology::from_file(cfg_.ontology_path, MultiParentPolicy::first_parent);
        for (const auto& e : ontology_.dropped_edges())
            log_ << "ontology: dropped extra parent edge " << e << "\n";

        records_ = load_manifest(cfg_.corpus_manifest, ontology_);
        paths_ = referent_paths(records_, ontology_);

        load_or_build_corpus_cache();
        load_or_build_space();

        if (cfg_.lesion) {
            lesioned_indices_ = pick_lesion_indices(registry_, cfg_.lesion_seed);
            FeatureRegistry lreg = lesion(registry_, lesioned_indices_);
            std::uint64_t h = lreg.hash();
            ref_matrix_ = lesion_matrix(ref_matrix_, lesioned_indices_, h);
            utt_raw_ = lesion_matrix(utt_raw_, lesioned_indices_, h);
            registry_ = lreg;
            extractor_.emplace(registry_);
            log_ << "lesion: removed " << lesioned_indices_.size() << " of "
                 << lesioned_indices_.size() + registry_.length() << " features\n";
        }

        realize_space_side_tables();
        build_engine();
    }

    const UtteranceSpace& space() const { return *space_; }
    const RsaEngine& engine() const { return *engine_; }
    const std::vector<ReferentRecord>& records() const { return records_; }
    const Ontology& ontology() const { return ontology_; }
    const VoiceProfile& voice() const { return voice_; }
    const FeatureRegistry& registry() const { return registry_; }
    const std::vector<PhoneticCode>& codes() const { return codes_; }
    const std::vector<double>& costs() const { return costs_; }
    const std::vector<std::size_t>& lesioned_indices() const { return lesioned_indices_; }

    std::optional<std::size_t> referent_index(const std::string& id) const {
        for (std::size_t i = 0; i < records_.size(); ++i)
            if (records_[i].id == id) return i;
        return std::nullopt;
    }

    nlohmann::ordered_json report_header(const std::string& command) const {
        nlohmann::ordered_json h;
        h["schema_version"] = kReportSchemaVersion;
        h["command"] = command;
        h["model"] = model_name(cfg_.model);
        h["voice"] = cfg_.voice;
        h["beta"] = cfg_.beta;
        h["whisper"] = cfg_.whisper;
        h["seed"] = cfg_.seed;
        h["patterns"] = cfg_.patterns;
        h["space_id"] = space_->space_id();
        h["registry_hash"] = registry_.hash();
        h["corpus_size"] = records_.size();
        return h;
    }

    /// Speaker task: ranked utterances for a corpus referent. Optionally
    /// renders the top-k WAVs and control traces into out_dir.
    nlohmann::ordered_json imitate(std::size_t referent, bool write_files) const {
        Distribution dist = engine_->speaker(cfg_.model, referent);
        dist.validate();
        auto top = dist.top_k(cfg_.top_k);

        nlohmann::ordered_json report = report_header("imitate");
        report["referent"] = records_[referent].id;
        report["ontology_path"] = ontology_.path_string(paths_[referent]);
        nlohmann::ordered_json items = nlohmann::json::array();
        for (std::size_t rank = 0; rank < top.size(); ++rank) {
            std::size_t u = top[rank];
            UtteranceSpec spec = space_->decode(u);
            nlohmann::ordered_json item;
            item["rank"] = rank + 1;
            item["utterance_index"] = u;
            item["pattern_ids"] = spec.pattern_ids;
            item["probability"] = dist.p[u];
            item["cost"] = costs_[u] == kInf ? -1.0 : costs_[u];
            item["phonetics"] = {{"voiced", codes_[u].voiced},
                                 {"stops", codes_[u].has_stops},
                                 {"open", codes_[u].open_vowel},
                                 {"fronted", codes_[u].fronted_vowel}};
            if (write_files && cfg_.render_audio) {
                namespace fs = std::filesystem;
                fs::create_directories(cfg_.out_dir);
                std::string stem = records_[referent].id + "_top" +
                                   std::to_string(rank + 1);
                std::string wav_path = (fs::path(cfg_.out_dir) / (stem + ".wav")).string();
                ControlTrajectory traj = space_->realize(spec, voice_);
                wav::write(wav_path, synthesize(traj, voice_), wav::Encoding::pcm16);
                item["audio"] = wav_path;
                std::string trace_path =
                    (fs::path(cfg_.out_dir) / (stem + ".trace.json")).string();
                write_trace(traj, trace_path);
                item["trace"] = trace_path;
            }
            items.push_back(item);
        }
        report["utterances"] = items;
        return report;
    }

    /// Listener task: ranked referents (and aggregated ontology-node masses)
    /// for a query utterance recording.
    nlohmann::ordered_json retrieve(const std::string& query_wav) const {
        AudioBuffer buf = load_referent_audio(query_wav);
        FeatureVector fv = extractor_->extract(buf);
        Standardization st{ref_matrix_.mean, ref_matrix_.stdev};
        std::vector<double> unit = engine_->prepare_query(fv, st);
        Distribution posterior = engine_->l2_listener_query(unit, cfg_.model);
        posterior.validate();

        nlohmann::ordered_json report = report_header("retrieve");
        report["query"] = query_wav;
        auto top = posterior.top_k(cfg_.top_k);
        nlohmann::ordered_json items = nlohmann::json::array();
        for (std::size_t rank = 0; rank < top.size(); ++rank) {
            std::size_t r = top[rank];
            nlohmann::ordered_json item;
            item["rank"] = rank + 1;
            item["id"] = records_[r].id;
            item["name"] = records_[r].display_name;
            item["ontology_path"] = ontology_.path_string(paths_[r]);
            item["probability"] = posterior.p[r];
            items.push_back(item);
        }
        report["referents"] = items;

        // coarse classification: posterior mass per ontology node
        std::vector<double> mass = engine_->node_mass_of(posterior.p);
        std::vector<std::size_t> order;
        for (std::size_t n = 0; n < mass.size(); ++n)
            if (mass[n] > 0.0) order.push_back(n);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
        nlohmann::ordered_json agg = nlohmann::json::array();
        for (std::size_t n : order) {
            nlohmann::ordered_json item;
            item["node"] = ontology_.node(n).id;
            item["name"] = ontology_.node(n).name;
            item["probability"] = mass[n];
            agg.push_back(item);
        }
        report["categories"] = agg;
        return report;
    }

    /// Predicted phonetic feature frequencies for every corpus referent.
    std::vector<std::array<double, 4>> predicted_frequencies() const {
        std::vector<std::array<double, 4>> table(records_.size());
        for (std::size_t r = 0; r < records_.size(); ++r)
            table[r] = feature_frequencies(engine_->speaker(cfg_.model, r), codes_);
        return table;
    }

    /// Evaluation harness: correlation against a human frequency table, plus
    /// an optional retrieval confusion matrix.
    nlohmann::ordered_json evaluate(const std::string& human_csv,
                                    const std::string& retrieval_manifest = "") const {
        auto human = load_human_codes_csv(human_csv);

        std::vector<std::string> missing;
        for (const auto& [id, _] : human)
            if (!referent_index(id)) missing.push_back(id);
        for (const auto& rec : records_)
            if (!human.count(rec.id)) missing.push_back(rec.id);
        if (!missing.empty()) {
            std::string msg = "evaluate: referent ids do not align:";
            for (const auto& id : missing) msg += " " + id;
            throw ValidationError(msg);
        }

        auto predicted = predicted_frequencies();
        std::vector<double> pred_cells, human_cells;
        nlohmann::ordered_json table = nlohmann::json::array();
        for (std::size_t r = 0; r < records_.size(); ++r) {
            const auto& h = human.at(records_[r].id);
            nlohmann::ordered_json row;
            row["referent"] = records_[r].id;
            for (std::size_t f = 0; f < 4; ++f) {
                pred_cells.push_back(predicted[r][f]);
                human_cells.push_back(h[f]);
                row[std::string("pred_") + kPhoneticFeatureNames[f]] = predicted[r][f];
                row[std::string("human_") + kPhoneticFeatureNames[f]] = h[f];
            }
            table.push_back(row);
        }
        CorrelationResult corr = correlate(pred_cells, human_cells);

        nlohmann::ordered_json report = report_header("eval");
        report["lesion"] = cfg_.lesion;
        if (cfg_.lesion) report["lesioned_indices"] = lesioned_indices_;
        report["r_squared"] = corr.r_squared;
        report["slope"] = corr.slope;
        report["frequencies"] = table;

        if (!retrieval_manifest.empty())
            report["confusion"] = confusion_matrix(retrieval_manifest);
        return report;
    }

    /// Raw (unstandardized) utterance feature matrix; rows in space order.
    const FeatureMatrix& utterance_features() const { return utt_raw_; }
    const FeatureMatrix& referent_features() const { return ref_matrix_; }

private:
    void load_or_build_corpus_cache() {
        namespace fs = std::filesystem;
        std::string cache_root = cache_dir();
        fs::create_directories(cache_root);
        std::string path =
            (fs::path(cache_root) /
             ("corpus_" + hex(corpus_cache_key()) + ".features.bin")).string();
        if (!cfg_.force && fs::exists(path)) {
            try {
                ref_matrix_ = cache::read(path, corpus_cache_key());
                if (ref_matrix_.rows == records_.size()) {
                    log_ << "corpus feature cache hit: " << path << "\n";
                    ref_matrix_.registry_hash = registry_.hash();
                    return;
                }
            } catch (const IoError&) {
                // stale or corrupt; rebuild below
            }
        }
        log_ << "extracting referent features (" << records_.size() << " clips)\n";
        ref_matrix_ = build_feature_matrix(records_, *extractor_);
        // the on-disk stamp keys on manifest + registry; in memory the matrix
        // carries the plain registry hash the engine checks against
        ref_matrix_.registry_hash = corpus_cache_key();
        cache::write(path, ref_matrix_);
        ref_matrix_.registry_hash = registry_.hash();
    }

    void load_or_build_space() {
        namespace fs = std::filesystem;
        fs::create_directories(cfg_.space_dir);
        auto patterns = standard_patterns(cfg_.patterns);
        space_.emplace(patterns, cfg_.duration);
        std::string manifest_path = (fs::path(cfg_.space_dir) / "space.manifest").string();
        std::string cache_path =
            (fs::path(cfg_.space_dir) / "utterance_features.bin").string();
        std::uint64_t key = space_cache_key();
        if (!cfg_.force && fs::exists(manifest_path) && fs::exists(cache_path)) {
            try {
                UtteranceSpace loaded = UtteranceSpace::from_manifest_file(manifest_path);
                if (loaded.space_id() == space_->space_id()) {
                    utt_raw_ = cache::read(cache_path, key);
                    if (utt_raw_.rows == space_->size()) {
                        log_ << "space cache hit: " << cache_path << "\n";
                        utt_raw_.registry_hash = registry_.hash();
                        return;
                    }
                }
            } catch (const IoError&) {
                // stale or corrupt; rebuild below
            }
        }
        log_ << "rendering utterance space (" << space_->size() << " utterances)\n";
        space_->write_manifest(manifest_path);
        utt_raw_.rows = space_->size();
        utt_raw_.cols = registry_.length();
        utt_raw_.registry_hash = key;
        utt_raw_.standardized = false;
        utt_raw_.data.resize(utt_raw_.rows * utt_raw_.cols);
        for (std::size_t u = 0; u < space_->size(); ++u) {
            ControlTrajectory traj = space_->realize(space_->decode(u), voice_);
            FeatureVector fv =
                extractor_->extract(peak_normalize(synthesize(traj, voice_), -1.0));
            for (std::size_t c = 0; c < utt_raw_.cols; ++c)
                utt_raw_.data[u * utt_raw_.cols + c] = static_cast<float>(fv.values[c]);
        }
        cache::write(cache_path, utt_raw_);
        utt_raw_.registry_hash = registry_.hash();
    }

    void realize_space_side_tables() {
        InferenceConfig icfg = cfg_.inference();
        costs_.resize(space_->size());
        codes_.resize(space_->size());
        for (std::size_t u = 0; u < space_->size(); ++u) {
            ControlTrajectory traj = space_->realize(space_->decode(u), voice_);
            costs_[u] = utterance_cost(traj, voice_, icfg);
            codes_[u] = code_utterance(traj, voice_);
        }
    }

    void build_engine() {
        InferenceConfig icfg = cfg_.inference();
        std::size_t row_bytes = std::max<std::size_t>(1, records_.size() * sizeof(double));
        icfg.block_rows = std::max<std::size_t>(
            1, cfg_.memory_budget_mb * 1024 * 1024 / (2 * row_bytes));
        engine_.emplace(ref_matrix_, utt_raw_, costs_, paths_, ontology_,
                        uniform_prior(records_.size()), icfg);
    }

    std::uint64_t corpus_cache_key() const {
        std::string key = registry_.describe() + "|" + cfg_.corpus_manifest;
        for (const auto& r : records_) key += "|" + r.id + ":" + r.audio_path;
        return fnv1a64(key);
    }

    std::uint64_t space_cache_key() const {
        std::string key = registry_.describe() + "|voice:" + voice_.name + "|seed:" +
                          std::to_string(cfg_.seed) + "|gain:peak-1";
        return fnv1a64(key, space_->space_id() ^ 0x5ace5ace5ace5aceull);
    }

    std::string cache_dir() const {
        if (const char* env = std::getenv("VOCIM_CACHE_DIR")) return env;
        return (std::filesystem::path(cfg_.corpus_manifest).parent_path() / "cache")
            .string();
    }

    static std::string hex(std::uint64_t v) {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
        return buf;
    }

    static void write_trace(const ControlTrajectory& traj, const std::string& path) {
        nlohmann::ordered_json doc;
        doc["frame_rate"] = traj.frame_rate;
        nlohmann::ordered_json frames = nlohmann::json::array();
        for (const auto& f : traj.frames)
            frames.push_back({f.f0, f.loudness, f.vowel, f.plosive_gate, f.voicedness});
        doc["fields"] = {"f0", "loudness", "vowel", "plosive_gate", "voicedness"};
        doc["frames"] = frames;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot write trace: " + path);
        os << doc.dump();
    }

    nlohmann::ordered_json confusion_matrix(const std::string& manifest_path) const {
        std::ifstream is(manifest_path);
        if (!is) throw IoError("cannot open retrieval manifest: " + manifest_path);
        // coarse class of a referent: the depth-2 node of its path (its
        // subcategory), or the leaf itself for shorter paths
        auto coarse = [&](const OntologyPath& p) {
            return ontology_.node(p.nodes[std::min<std::size_t>(1, p.nodes.size() - 1)]).id;
        };
        std::map<std::string, std::map<std::string, int>> counts;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            nlohmann::json rec = nlohmann::json::parse(line);
            std::string path = rec.at("audio_path").get<std::string>();
            std::string true_leaf = rec.at("true_leaf").get<std::string>();
            OntologyPath tp = ontology_.path_of(true_leaf);

            AudioBuffer buf = load_referent_audio(path);
            FeatureVector fv = extractor_->extract(buf);
            Standardization st{ref_matrix_.mean, ref_matrix_.stdev};
            Distribution post =
                engine_->l2_listener_query(engine_->prepare_query(fv, st), cfg_.model);
            std::size_t pred = post.argmax();
            counts[coarse(tp)][coarse(paths_[pred])]++;
        }
        nlohmann::ordered_json out;
        for (const auto& [t, row] : counts) {
            nlohmann::ordered_json jrow;
            for (const auto& [p, c] : row) jrow[p] = c;
            out[t] = jrow;
        }
        return out;
    }

    RunConfig cfg_;
    std::ostream& log_;
    VoiceProfile voice_;
    FeatureRegistry registry_;
    std::optional<FeatureExtractor> extractor_;
    Ontology ontology_;
    std::vector<ReferentRecord> records_;
    std::vector<OntologyPath> paths_;
    FeatureMatrix ref_matrix_;
    std::optional<UtteranceSpace> space_;
    FeatureMatrix utt_raw_;
    std::vector<double> costs_;
    std::vector<PhoneticCode> codes_;
    std::vector<std::size_t> lesioned_indices_;
    std::optional<RsaEngine> engine_;
};

} // namespace vocim
