#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "vocim/audio.hpp"
#include "vocim/common.hpp"
#include "vocim/features.hpp"
#include "vocim/ontology.hpp"

#include <json.hpp>

namespace vocim {

constexpr double kPipelineSampleRate = 16000.0;

struct ReferentRecord {
    std::string id;
    std::string audio_path;
    std::string ontology_leaf;
    std::string display_name;
};

/// Normalized probability vector over referents, aligned with manifest order.
struct Prior {
    std::vector<double> p;

    void validate() const {
        double sum = 0.0;
        for (double v : p) {
            if (!(v >= 0.0)) throw ValidationError("Prior: negative entry");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw ValidationError("Prior: probabilities sum to " + std::to_string(sum));
    }
};

inline Prior uniform_prior(std::size_t n_referents) {
    if (n_referents == 0) throw ValidationError("uniform_prior: empty corpus");
    Prior prior;
    prior.p.assign(n_referents, 1.0 / static_cast<double>(n_referents));
    return prior;
}

/// Load a JSON-lines manifest (one record per line: id, audio_path,
/// ontology_leaf, display_name). Order is preserved and defines the feature
/// matrix row order.
inline std::vector<ReferentRecord> load_manifest(const std::string& path,
                                                 const Ontology& ontology) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open corpus manifest: " + path);
    std::vector<ReferentRecord> records;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        ReferentRecord r;
        r.id = rec.at("id").get<std::string>();
        r.audio_path = rec.at("audio_path").get<std::string>();
        r.ontology_leaf = rec.at("ontology_leaf").get<std::string>();
        r.display_name = rec.value("display_name", r.id);
        if (!seen.insert(r.id).second)
            throw ValidationError("manifest: duplicate referent id: " + r.id);
        if (!ontology.contains(r.ontology_leaf))
            throw ValidationError("manifest: unknown ontology id '" + r.ontology_leaf +
                                  "' for referent '" + r.id + "'");
        if (!std::ifstream(r.audio_path).good())
            throw IoError("manifest: missing audio file '" + r.audio_path +
                          "' for referent '" + r.id + "'");
        records.push_back(std::move(r));
    }
    if (records.empty())
        throw ValidationError("manifest: empty corpus (inference needs at least one referent)");
    return records;
}

/// Referent preprocessing before feature extraction: resample to the pipeline
/// rate and peak-normalize to -1 dBFS.
inline AudioBuffer load_referent_audio(const std::string& path) {
    AudioBuffer buf = wav::read(path);
    buf = resample(buf, kPipelineSampleRate);
    return peak_normalize(buf, -1.0);
}

/// Per-column z-score statistics computed over the referent corpus. A column
/// with (near-)zero spread is left centered but unscaled.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> stdev;

    void apply(double* row, std::size_t cols) const {
        for (std::size_t c = 0; c < cols; ++c)
            row[c] = (row[c] - mean[c]) / stdev[c];
    }
};

inline Standardization compute_standardization(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("standardization: no rows");
    std::size_t cols = rows[0].size();
    Standardization s;
    s.mean.assign(cols, 0.0);
    s.stdev.assign(cols, 0.0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < cols; ++c) s.mean[c] += r[c];
    for (auto& m : s.mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows)
        for (std::size_t c = 0; c < cols; ++c) {
            double d = r[c] - s.mean[c];
            s.stdev[c] += d * d;
        }
    for (auto& v : s.stdev) {
        v = std::sqrt(v / static_cast<double>(rows.size()));
        if (v < 1e-12) v = 1.0;
    }
    return s;
}

/// Extract, standardize, and assemble the |R| x F referent feature matrix.
/// Row i is the standardized feature vector of referent i.
inline FeatureMatrix build_feature_matrix(const std::vector<ReferentRecord>& records,
                                          const FeatureExtractor& extractor) {
    std::vector<std::vector<double>> raw;
    raw.reserve(records.size());
    for (const auto& rec : records) {
        try {
            AudioBuffer buf = load_referent_audio(rec.audio_path);
            raw.push_back(extractor.extract(buf).values);
        } catch (const Error& e) {
            throw Error("referent '" + rec.id + "': " + e.what());
        }
    }
    Standardization st = compute_standardization(raw);
    FeatureMatrix m;
    m.rows = records.size();
    m.cols = raw[0].size();
    m.registry_hash = extractor.registry().hash();
    m.standardized = true;
    m.mean = st.mean;
    m.stdev = st.stdev;
    m.data.resize(m.rows * m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        st.apply(raw[r].data(), m.cols);
        for (std::size_t c = 0; c < m.cols; ++c)
            m.data[r * m.cols + c] = static_cast<float>(raw[r][c]);
    }
    return m;
}

/// Paths of all referents, resolved once against the ontology.
inline std::vector<OntologyPath> referent_paths(const std::vector<ReferentRecord>& records,
                                                const Ontology& ontology) {
    std::vector<OntologyPath> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(ontology.path_of(rec.ontology_leaf));
    return out;
}

} // namespace vocim
