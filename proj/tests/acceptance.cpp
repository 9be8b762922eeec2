// Acceptance suite: thirteen end-to-end criteria, one verdict line each.
// Exit status is zero only if every criterion passes.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vocim/demo.hpp"
#include "vocim/pipeline.hpp"

using namespace vocim;
namespace fs = std::filesystem;

namespace {

struct Clock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

struct Harness {
    int failures = 0;

    void run(int id, const std::string& name, const std::function<std::string()>& fn) {
        std::string detail;
        bool ok = true;
        try {
            detail = fn();
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        if (!ok || detail.rfind("FAIL", 0) == 0) {
            ++failures;
            std::cout << "[FAIL] criterion " << id << ": " << name << " — " << detail
                      << "\n";
        } else {
            std::cout << "[PASS] criterion " << id << ": " << name << " — " << detail
                      << "\n";
        }
        std::cout.flush();
    }
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << std::fixed << v;
    return os.str();
}

struct Fixture {
    std::string root;
    demo::DemoPaths corpus;

    Fixture() {
        root = (fs::current_path() / "acceptance_work").string();
        fs::remove_all(root);
        fs::create_directories(root);
        setenv("VOCIM_CACHE_DIR", (root + "/cache").c_str(), 1);
        corpus = demo::write_corpus(root + "/corpus");
    }

    RunConfig config() const {
        RunConfig cfg;
        cfg.space_dir = root + "/space";
        cfg.corpus_manifest = corpus.manifest_path;
        cfg.ontology_path = corpus.ontology_path;
        cfg.out_dir = root + "/out";
        cfg.patterns = 3;
        return cfg;
    }
};

std::ostringstream g_sink; // pipeline log noise kept out of the verdict lines

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

AudioBuffer sine_buffer(double hz, std::size_t n = 32000) {
    AudioBuffer b;
    b.sample_rate = 16000;
    b.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        b.samples[i] = static_cast<float>(
            0.5 * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / 16000.0));
    return b;
}

} // namespace

int main() {
    Harness h;
    Fixture fix;

    // The shared demo pipeline (3-pattern space) used by several criteria.
    // Its first construction also serves as the timed end-to-end run for
    // criterion 12, so build it inside that criterion and reuse afterwards.
    std::unique_ptr<Pipeline> pipe;
    double pipeline_seconds = -1.0;
    {
        Clock clk;
        pipe = std::make_unique<Pipeline>(fix.config(), g_sink);
        auto idx = pipe->referent_index("motorboat");
        auto imitation = pipe->imitate(*idx, true);
        (void)pipe->retrieve(fix.root + "/corpus/audio/rain.wav");
        pipeline_seconds = clk.seconds();
    }

    h.run(1, "space cardinality", [&] {
        Clock clk;
        UtteranceSpace full(standard_patterns());
        UtteranceSpace small(standard_patterns(3));
        std::uint64_t seen = 0;
        for (std::uint64_t u = 0; u < full.size(); ++u) {
            UtteranceSpec spec = full.decode(u);
            seen += spec.pattern_ids[0] < 11 ? 1 : 0;
        }
        double dt = clk.seconds();
        if (full.size() != 161051) return "FAIL full size " + std::to_string(full.size());
        if (small.size() != 243) return "FAIL test size " + std::to_string(small.size());
        if (seen != 161051) return std::string("FAIL enumeration incomplete");
        if (dt >= 1.0) return "FAIL enumeration took " + fmt(dt) + " s";
        return "161051 and 243 specs, enumerated in " + fmt(dt, 3) + " s";
    });

    h.run(2, "ontology prefix match", [&] {
        // the worked example: Bark at depth 7 and Meow at depth 4 share two levels
        nlohmann::json doc = nlohmann::json::array();
        auto node = [](const std::string& id, std::vector<std::string> ch) {
            nlohmann::json n;
            n["id"] = id;
            if (!ch.empty()) n["child_ids"] = ch;
            return n;
        };
        doc.push_back(node("Sounds", {"Animal"}));
        doc.push_back(node("Animal", {"DomesticAnimals", "Cat"}));
        doc.push_back(node("DomesticAnimals", {"Pets"}));
        doc.push_back(node("Pets", {"Dog"}));
        doc.push_back(node("Dog", {"DogVocal"}));
        doc.push_back(node("DogVocal", {"Bark"}));
        doc.push_back(node("Bark", {}));
        doc.push_back(node("Cat", {"Meow"}));
        doc.push_back(node("Meow", {}));
        Ontology animals = Ontology::from_json(doc);
        OntologyPath bark = animals.path_of("Bark");
        OntologyPath meow = animals.path_of("Meow");
        if (bark.length() != 7 || meow.length() != 4)
            return std::string("FAIL fixture depths wrong");
        if (animals.delta(bark, meow) != 2) return std::string("FAIL delta != 2");

        // exhaustive self/symmetry checks on the demo ontology
        Ontology demo_ont = pipe->ontology();
        std::vector<OntologyPath> paths;
        for (std::size_t i = 0; i < demo_ont.node_count(); ++i)
            paths.push_back(demo_ont.path_of(demo_ont.node(i).id));
        for (std::size_t a = 0; a < paths.size(); ++a) {
            if (demo_ont.delta(paths[a], paths[a]) != paths[a].length())
                return std::string("FAIL self-delta != depth");
            for (std::size_t b = 0; b < paths.size(); ++b)
                if (demo_ont.delta(paths[a], paths[b]) !=
                    demo_ont.delta(paths[b], paths[a]))
                    return std::string("FAIL asymmetric delta");
        }
        return std::string("Bark/Meow delta = 2; symmetry exhaustive on ") +
               std::to_string(paths.size()) + " nodes";
    });

    h.run(3, "distribution hygiene", [&] {
        std::size_t checked = 0;
        for (bool whisper : {false, true}) {
            RunConfig cfg = fix.config();
            cfg.whisper = whisper;
            Pipeline p(cfg, g_sink);
            const RsaEngine& eng = p.engine();
            for (std::size_t r = 0; r < eng.num_referents(); ++r) {
                eng.baseline_speaker(r).validate();
                eng.s2_speaker_communicative(r).validate();
                eng.full_speaker(r).validate();
                checked += 3;
            }
            for (std::size_t u = 0; u < eng.num_utterances(); u += 17) {
                eng.baseline_listener(u).validate();
                if (p.costs()[u] != kInf) {
                    eng.l2_listener(u, ModelKind::communicative).validate();
                    eng.l2_listener(u, ModelKind::full).validate();
                }
                ++checked;
            }
        }
        return std::to_string(checked) + " distributions valid (sum 1 +/- 1e-9, finite)";
    });

    h.run(4, "RSA disambiguation fixture", [&] {
        Clock clk;
        // referents on orthogonal axes; u0 is equidistant from both (ambiguous,
        // literally strongest for neither), u1 leans toward r1 but is weaker
        nlohmann::json doc = nlohmann::json::array(
            {{{"id", "root"}, {"child_ids", {"r0", "r1"}}}, {{"id", "r0"}}, {{"id", "r1"}}});
        Ontology ont = Ontology::from_json(doc);
        auto mat = [](std::vector<std::vector<double>> rows, bool std_) {
            FeatureMatrix m;
            m.rows = rows.size();
            m.cols = 3;
            m.registry_hash = 1;
            m.standardized = std_;
            if (std_) {
                m.mean = {0.0, 0.0, 0.0};
                m.stdev = {1.0, 1.0, 1.0};
            }
            for (auto& r : rows)
                for (double v : r) m.data.push_back(static_cast<float>(v));
            return m;
        };
        InferenceConfig cfg;
        cfg.beta = 1.0;
        RsaEngine eng(mat({{1, 0, 0}, {0, 1, 0}}, true),
                      mat({{1, 1, 0}, {0, 0.8, 0.6}}, false), {0.0, 0.0},
                      {ont.path_of("r0"), ont.path_of("r1")}, ont, uniform_prior(2),
                      cfg);

        // hand computation: sim(r0,u0)=sim(r1,u0)=sqrt(2)/2, sim(r0,u1)=0,
        // sim(r1,u1)=0.8 up to the float32 rounding of the stored coordinates
        const double c = std::sqrt(2.0) / 2.0;
        const double ux = static_cast<double>(0.8f), uy = static_cast<double>(0.6f);
        const double d = ux / std::sqrt(ux * ux + uy * uy);
        double ps_u1_r1 = std::exp(d) / (std::exp(c) + std::exp(d)); // baseline
        double l_r1_u1 = std::exp(d) / (1.0 + std::exp(d)); // literal listener
        double s2_u1_r1 =
            std::exp(l_r1_u1) / (std::exp(0.5) + std::exp(l_r1_u1)); // communicative
        double s2_u1_r0 =
            std::exp(1.0 - l_r1_u1) / (std::exp(0.5) + std::exp(1.0 - l_r1_u1));
        double l2_r1_u1 = s2_u1_r1 / (s2_u1_r0 + s2_u1_r1);

        double got_ps = eng.baseline_speaker(1).p[1];
        double got_s2 = eng.s2_speaker_communicative(1).p[1];
        double got_l2 = eng.l2_listener(1, ModelKind::communicative).p[1];
        if (std::fabs(got_ps - ps_u1_r1) > 1e-9)
            return "FAIL baseline speaker " + fmt(got_ps, 9) + " vs " + fmt(ps_u1_r1, 9);
        if (std::fabs(got_s2 - s2_u1_r1) > 1e-9)
            return "FAIL communicative speaker " + fmt(got_s2, 9) + " vs " +
                   fmt(s2_u1_r1, 9);
        if (std::fabs(got_l2 - l2_r1_u1) > 1e-9)
            return "FAIL L2 listener " + fmt(got_l2, 9) + " vs " + fmt(l2_r1_u1, 9);
        if (!(got_s2 > got_ps))
            return std::string("FAIL pragmatic speaker does not disambiguate");
        if (!(got_l2 > 0.5)) return std::string("FAIL L2 mass not above 0.5");
        if (clk.seconds() >= 1.0) return "FAIL took " + fmt(clk.seconds()) + " s";
        return "p_S2 = " + fmt(got_s2) + " > p_S = " + fmt(got_ps) +
               ", L2 = " + fmt(got_l2) + " > 0.5";
    });

    h.run(5, "utility oracle", [&] {
        Clock clk;
        std::mt19937_64 rng(4242);
        auto u01 = [&rng]() {
            return static_cast<double>(rng() >> 11) / 9007199254740992.0;
        };
        // three-level ontology with 50 leaves
        nlohmann::json doc = nlohmann::json::array();
        std::vector<std::string> mids;
        std::vector<std::vector<std::string>> leaves(6);
        for (int l = 0; l < 50; ++l)
            leaves[l % 6].push_back("leaf" + std::to_string(l));
        for (int m = 0; m < 6; ++m) mids.push_back("mid" + std::to_string(m));
        nlohmann::json rootn;
        rootn["id"] = "root";
        rootn["child_ids"] = mids;
        doc.push_back(rootn);
        for (int m = 0; m < 6; ++m) {
            nlohmann::json n;
            n["id"] = mids[m];
            n["child_ids"] = leaves[m];
            doc.push_back(n);
            for (const auto& l : leaves[m]) doc.push_back({{"id", l}});
        }
        Ontology ont = Ontology::from_json(doc);

        double max_err = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            std::size_t n_ref = 2 + rng() % 49; // <= 50
            std::size_t n_utt = 1 + rng() % 20; // <= 20
            std::size_t dims = 4;
            auto mkrows = [&](std::size_t n) {
                std::vector<std::vector<double>> rows(n);
                for (auto& r : rows) {
                    r.resize(dims);
                    for (auto& v : r) v = 2.0 * u01() - 1.0;
                }
                return rows;
            };
            FeatureMatrix refs;
            refs.rows = n_ref;
            refs.cols = dims;
            refs.registry_hash = 1;
            refs.standardized = true;
            refs.mean.assign(dims, 0.0);
            refs.stdev.assign(dims, 1.0);
            for (const auto& r : mkrows(n_ref))
                for (double v : r) refs.data.push_back(static_cast<float>(v));
            FeatureMatrix utts;
            utts.rows = n_utt;
            utts.cols = dims;
            utts.registry_hash = 1;
            for (const auto& r : mkrows(n_utt))
                for (double v : r) utts.data.push_back(static_cast<float>(v));

            std::vector<OntologyPath> paths;
            for (std::size_t i = 0; i < n_ref; ++i)
                paths.push_back(ont.path_of("leaf" + std::to_string(i)));
            InferenceConfig cfg;
            cfg.beta = 0.5 + 4.0 * u01();
            RsaEngine eng(refs, utts, std::vector<double>(n_utt, 0.0), paths, ont,
                          uniform_prior(n_ref), cfg);

            std::size_t u = rng() % n_utt, r = rng() % n_ref;
            std::vector<double> lp = eng.baseline_listener(u).p;
            double brute = 0.0;
            for (std::size_t j = 0; j < n_ref; ++j)
                brute += static_cast<double>(ont.delta(paths[r], paths[j])) * lp[j];
            max_err = std::max(max_err, std::fabs(eng.utility(u, r) - brute));
        }
        double dt = clk.seconds();
        if (max_err > 1e-9) return "FAIL max error " + fmt(max_err, 12);
        if (dt >= 10.0) return "FAIL took " + fmt(dt) + " s";
        return "100 fixtures, max |V2 - brute| = " + fmt(max_err, 12) + " in " +
               fmt(dt, 2) + " s";
    });

    h.run(6, "cost model", [&] {
        VoiceProfile voice = masculine_voice();
        InferenceConfig cfg;
        ControlFrame mid;
        mid.f0 = voice.f0_from_normalized(0.5);
        mid.loudness = mid.vowel = mid.plosive_gate = mid.voicedness = 0.5;
        double zero_cost = utterance_cost(constant_trajectory(mid, 1.0), voice, cfg);
        if (std::fabs(zero_cost) > 1e-9)
            return "FAIL mid-range cost " + fmt(zero_cost, 12);
        ControlFrame loud = mid;
        loud.loudness = 1.0;
        double max_cost = utterance_cost(constant_trajectory(loud, 1.0), voice, cfg);
        if (std::fabs(max_cost - cfg.w_extreme / 5.0) > 1e-12)
            return "FAIL max-loudness cost " + fmt(max_cost, 12) + " != w_extreme/5";

        // whisper: every voiced-coded utterance carries zero speaker mass
        RunConfig wcfg = fix.config();
        wcfg.whisper = true;
        Pipeline wp(wcfg, g_sink);
        const RsaEngine& eng = wp.engine();
        std::size_t voiced = 0;
        for (std::size_t r = 0; r < eng.num_referents(); ++r) {
            for (ModelKind kind :
                 {ModelKind::baseline, ModelKind::communicative, ModelKind::full}) {
                Distribution d = eng.speaker(kind, r);
                for (std::size_t u = 0; u < d.p.size(); ++u)
                    if (wp.codes()[u].voiced) {
                        if (d.p[u] != 0.0)
                            return std::string("FAIL voiced utterance got mass under whisper");
                        ++voiced;
                    }
            }
        }
        if (voiced == 0) return std::string("FAIL no voiced utterances in the space");
        return "closed forms exact; " + std::to_string(voiced) +
               " voiced cells all zero under whisper";
    });

    h.run(7, "motorboat qualitative reproduction", [&] {
        Clock clk;
        std::size_t motorboat = *pipe->referent_index("motorboat");
        const FeatureMatrix& refs = pipe->referent_features();
        const FeatureMatrix& utts = pipe->utterance_features();
        // column 0 of the registry is the mean per-frame flatness
        std::vector<double> ref_flatness;
        for (std::size_t r = 0; r < refs.rows; ++r)
            ref_flatness.push_back(static_cast<double>(refs.row(r)[0]) * refs.stdev[0] +
                                   refs.mean[0]);
        std::vector<double> sorted = ref_flatness;
        std::sort(sorted.begin(), sorted.end());
        double median =
            0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);

        const VoiceProfile& voice = pipe->voice();
        double lower_third = voice.f0_min + (voice.f0_max - voice.f0_min) / 3.0;
        std::string detail;
        for (double beta : {1.0, 5.0, 10.0}) {
            RunConfig cfg = fix.config();
            cfg.beta = beta;
            Pipeline p(cfg, g_sink);
            std::size_t base_top = p.engine().baseline_speaker(motorboat).argmax();
            std::size_t full_top = p.engine().full_speaker(motorboat).argmax();
            bool base_voiced = p.codes()[base_top].voiced;
            double base_flat = static_cast<double>(utts.row(base_top)[0]);
            if (base_voiced)
                return "FAIL beta=" + fmt(beta, 0) + ": baseline top-1 is voiced";
            if (!(base_flat > median))
                return "FAIL beta=" + fmt(beta, 0) + ": baseline top-1 flatness " +
                       fmt(base_flat) + " not above corpus median " + fmt(median);
            if (!p.codes()[full_top].voiced)
                return "FAIL beta=" + fmt(beta, 0) + ": full top-1 is unvoiced";
            ControlTrajectory traj = p.space().realize(p.space().decode(full_top), voice);
            std::vector<double> f0s;
            for (const auto& f : traj.frames) f0s.push_back(f.f0);
            double mean_f0 = mean_of(f0s);
            if (!(mean_f0 < lower_third))
                return "FAIL beta=" + fmt(beta, 0) + ": full top-1 mean F0 " +
                       fmt(mean_f0, 1) + " Hz not in lower third (< " +
                       fmt(lower_third, 1) + ")";
            detail += "beta=" + fmt(beta, 0) + " ok (F0 " + fmt(mean_f0, 0) + " Hz); ";
        }
        if (clk.seconds() >= 30.0) return "FAIL took " + fmt(clk.seconds()) + " s";
        return detail + "in " + fmt(clk.seconds(), 2) + " s";
    });

    h.run(8, "feature sanity", [&] {
        FeatureExtractor ex(default_registry());
        AudioBuffer noise;
        noise.sample_rate = 16000;
        for (double v : noise_source(2718, 32000))
            noise.samples.push_back(static_cast<float>(0.5 * v));
        auto noise_tracks = ex.stft_tracks(noise);
        double noise_flat = mean_of(noise_tracks.flatness);
        auto sine_tracks = ex.stft_tracks(sine_buffer(440.0));
        double sine_flat = mean_of(sine_tracks.flatness);
        auto khz_tracks = ex.stft_tracks(sine_buffer(1000.0));
        double centroid = mean_of(khz_tracks.centroid);
        if (!(noise_flat > 0.9)) return "FAIL noise flatness " + fmt(noise_flat);
        if (!(sine_flat < 0.05)) return "FAIL sine flatness " + fmt(sine_flat);
        if (!(std::fabs(centroid - 1000.0) <= 7.8125))
            return "FAIL 1 kHz centroid " + fmt(centroid, 2);
        return "flatness(noise) = " + fmt(noise_flat, 3) + ", flatness(sine) = " +
               fmt(sine_flat, 3) + ", centroid(1 kHz) = " + fmt(centroid, 2) + " Hz";
    });

    h.run(9, "blocked-computation equivalence", [&] {
        const RsaEngine& base_eng = pipe->engine();
        std::vector<std::vector<double>> outs;
        for (std::size_t block :
             {std::size_t(1), std::size_t(7), std::size_t(64), base_eng.num_referents()}) {
            InferenceConfig cfg = fix.config().inference();
            cfg.block_rows = block;
            RsaEngine eng(pipe->referent_features(), pipe->utterance_features(),
                          pipe->costs(), base_eng.paths(), pipe->ontology(),
                          uniform_prior(base_eng.num_referents()), cfg);
            std::vector<double> cat;
            for (std::size_t r = 0; r < eng.num_referents(); ++r) {
                auto d = eng.full_speaker(r);
                cat.insert(cat.end(), d.p.begin(), d.p.end());
            }
            auto l2 = eng.l2_listener(0, ModelKind::full);
            cat.insert(cat.end(), l2.p.begin(), l2.p.end());
            outs.push_back(std::move(cat));
        }
        double max_diff = 0.0;
        for (std::size_t i = 1; i < outs.size(); ++i)
            for (std::size_t j = 0; j < outs[0].size(); ++j)
                max_diff = std::max(max_diff, std::fabs(outs[i][j] - outs[0][j]));
        if (max_diff > 1e-9) return "FAIL max difference " + fmt(max_diff, 12);
        return "block sizes {1,7,64,|R|} agree; max difference = " + fmt(max_diff, 12);
    });

    h.run(10, "round-trip retrieval", [&] {
        Clock clk;
        const auto& records = pipe->records();
        std::size_t hits = 0;
        std::string misses;
        for (std::size_t r = 0; r < records.size(); ++r) {
            std::size_t top = pipe->engine().full_speaker(r).argmax();
            ControlTrajectory traj =
                pipe->space().realize(pipe->space().decode(top), pipe->voice());
            std::string wav_path = fix.root + "/roundtrip_" + records[r].id + ".wav";
            wav::write(wav_path, synthesize(traj, pipe->voice()), wav::Encoding::pcm16);
            auto report = pipe->retrieve(wav_path);
            // the referent's parent category (depth-2 node of its path)
            OntologyPath path = pipe->ontology().path_of(records[r].ontology_leaf);
            std::string parent = pipe->ontology().node(path.nodes[1]).id;
            bool found = false;
            auto cats = report["categories"];
            for (std::size_t k = 0; k < std::min<std::size_t>(3, cats.size()); ++k)
                if (cats[k]["node"].get<std::string>() == parent) found = true;
            if (found)
                ++hits;
            else
                misses += " " + records[r].id;
        }
        double dt = clk.seconds();
        if (dt >= 120.0) return "FAIL took " + fmt(dt) + " s";
        if (hits < 9)
            return "FAIL only " + std::to_string(hits) + "/12 parents in top-3 (missed:" +
                   misses + ")";
        return std::to_string(hits) + "/12 parents in top-3 categories, " + fmt(dt, 2) +
               " s" + (misses.empty() ? "" : " (missed:" + misses + ")");
    });

    h.run(11, "lesion robustness", [&] {
        RunConfig cfg = fix.config();
        cfg.lesion = true;
        Pipeline lp(cfg, g_sink);
        if (lp.registry().length() != 13)
            return "FAIL lesioned registry has " + std::to_string(lp.registry().length()) +
                   " features";
        std::size_t stable = 0;
        std::string changed;
        for (std::size_t r = 0; r < pipe->records().size(); ++r) {
            std::size_t a = pipe->engine().full_speaker(r).argmax();
            std::size_t b = lp.engine().full_speaker(r).argmax();
            if (pipe->codes()[a] == lp.codes()[b])
                ++stable;
            else
                changed += " " + pipe->records()[r].id;
        }
        if (stable < 8)
            return "FAIL only " + std::to_string(stable) + "/12 codes stable (changed:" +
                   changed + ")";
        return std::to_string(stable) + "/12 top-1 phonetic codes unchanged" +
               (changed.empty() ? "" : " (changed:" + changed + ")");
    });

    h.run(12, "performance envelope", [&] {
        if (pipeline_seconds >= 10.0)
            return "FAIL end-to-end demo pipeline took " + fmt(pipeline_seconds) + " s";
        // extraction throughput on a deterministic sample of the full space
        UtteranceSpace full(standard_patterns());
        VoiceProfile voice = masculine_voice();
        FeatureExtractor ex(default_registry());
        const std::size_t n_sample = 256;
        std::vector<AudioBuffer> rendered;
        rendered.reserve(n_sample);
        std::uint64_t stride = full.size() / n_sample;
        for (std::size_t i = 0; i < n_sample; ++i) {
            ControlTrajectory traj = full.realize(full.decode(i * stride), voice);
            rendered.push_back(synthesize(traj, voice));
        }
        Clock clk;
        double checksum = 0.0;
        for (const auto& buf : rendered) checksum += ex.extract(buf).values[0];
        double dt = clk.seconds();
        double rate = static_cast<double>(n_sample) / dt;
        if (!(checksum == checksum)) return std::string("FAIL NaN features");
        if (rate < 500.0)
            return "FAIL extraction rate " + fmt(rate, 0) + " utterances/s (< 500)";
        return "demo pipeline " + fmt(pipeline_seconds, 2) + " s; extraction " +
               fmt(rate, 0) + " utterances/s over " + std::to_string(n_sample) +
               " sampled utterances";
    });

    h.run(13, "determinism", [&] {
        auto read_bytes = [](const std::string& path) {
            std::ifstream is(path, std::ios::binary);
            if (!is) throw IoError("cannot read " + path);
            std::ostringstream ss;
            ss << is.rdbuf();
            return ss.str();
        };
        auto run_once = [&](const std::string& tag) {
            RunConfig cfg = fix.config();
            cfg.space_dir = fix.root + "/det_space_" + tag;
            cfg.out_dir = fix.root + "/det_out_" + tag;
            cfg.force = true;
            setenv("VOCIM_CACHE_DIR", (fix.root + "/det_cache_" + tag).c_str(), 1);
            Pipeline p(cfg, g_sink);
            std::string reports = p.imitate(*p.referent_index("siren"), false).dump();
            reports += p.retrieve(fix.root + "/corpus/audio/gale.wav").dump();
            setenv("VOCIM_CACHE_DIR", (fix.root + "/cache").c_str(), 1);
            std::string cache_bytes =
                read_bytes(cfg.space_dir + "/utterance_features.bin") +
                read_bytes(cfg.space_dir + "/space.manifest");
            std::vector<std::string> cache_files;
            for (const auto& entry :
                 fs::directory_iterator(fix.root + "/det_cache_" + tag))
                cache_files.push_back(entry.path().string());
            std::sort(cache_files.begin(), cache_files.end());
            for (const auto& f : cache_files) cache_bytes += read_bytes(f);
            return std::make_pair(reports, cache_bytes);
        };
        auto [rep_a, cache_a] = run_once("a");
        auto [rep_b, cache_b] = run_once("b");
        if (cache_a != cache_b) return std::string("FAIL cache bytes differ between runs");
        if (rep_a != rep_b) return std::string("FAIL JSON reports differ between runs");
        return "caches (" + std::to_string(cache_a.size()) +
               " bytes) and reports bit-identical across runs";
    });

    std::cout << (h.failures == 0 ? "ALL CRITERIA PASSED"
                                  : std::to_string(h.failures) + " CRITERIA FAILED")
              << "\n";
    return h.failures == 0 ? 0 : 1;
}
