// vocim: vocal imitation synthesis and retrieval pipeline.
//
// Subcommands:
//   demo         write the bundled 12-referent demo corpus
//   build-space  enumerate + render the utterance space, cache its features
//   imitate      rank utterances for a referent (speaker task)
//   retrieve     rank referents for a recorded utterance (listener task)
//   eval         compare predicted phonetic feature frequencies to human data

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vocim/demo.hpp"
#include "vocim/pipeline.hpp"

namespace {

void add_common_flags(CLI::App* cmd, vocim::RunConfig& cfg, std::string& model) {
    cmd->add_option("--space-dir", cfg.space_dir, "Utterance space directory")->required();
    cmd->add_option("--corpus", cfg.corpus_manifest, "Corpus manifest (JSON lines)")
        ->required();
    cmd->add_option("--ontology", cfg.ontology_path, "Ontology JSON file")->required();
    cmd->add_option("--model", model, "Model: baseline | communicative | full");
    cmd->add_option("--beta", cfg.beta, "Softmax inverse temperature");
    cmd->add_option("--voice", cfg.voice, "Voice profile: masculine | feminine");
    cmd->add_option("--top-k", cfg.top_k, "Number of ranked results");
    cmd->add_flag("--whisper", cfg.whisper, "Constrain the speaker to unvoiced utterances");
    cmd->add_option("--seed", cfg.seed, "Random seed");
    cmd->add_option("--patterns", cfg.patterns, "Modulation patterns per parameter (<= 11)");
    cmd->add_option("--duration", cfg.duration, "Utterance duration in seconds");
    cmd->add_option("--memory-budget", cfg.memory_budget_mb,
                    "Streaming memory budget in MiB");
    cmd->add_flag("--force", cfg.force, "Rebuild caches even when present");
    cmd->add_option("--out", cfg.out_dir, "Output directory for reports and audio");
}

void write_report(const vocim::RunConfig& cfg, const std::string& name,
                  const nlohmann::ordered_json& report) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    std::string path = (fs::path(cfg.out_dir) / name).string();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw vocim::IoError("cannot write report: " + path);
    os << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    std::cerr << "report written to " << path << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vocal imitation synthesis and retrieval"};
    app.require_subcommand(1);

    std::string model = "full";
    vocim::RunConfig cfg;

    auto* demo_cmd = app.add_subcommand("demo", "Write the bundled demo corpus");
    std::string demo_dir = "demo";
    demo_cmd->add_option("--out", demo_dir, "Directory for the demo corpus");

    auto* build_cmd =
        app.add_subcommand("build-space", "Build the utterance space and feature caches");
    add_common_flags(build_cmd, cfg, model);

    auto* imitate_cmd = app.add_subcommand("imitate", "Produce a vocal imitation");
    std::string referent_id;
    imitate_cmd->add_option("referent", referent_id, "Corpus referent id")->required();
    add_common_flags(imitate_cmd, cfg, model);

    auto* retrieve_cmd =
        app.add_subcommand("retrieve", "Retrieve referents for an utterance recording");
    std::string query_wav;
    retrieve_cmd->add_option("utterance", query_wav, "Query WAV file")->required();
    add_common_flags(retrieve_cmd, cfg, model);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate against human phonetic codes");
    std::string human_csv, retrieval_manifest;
    eval_cmd->add_option("--human-csv", human_csv, "Human frequency table CSV")->required();
    eval_cmd->add_option("--retrieval-manifest", retrieval_manifest,
                         "Labeled retrieval set (JSON lines: audio_path, true_leaf)");
    eval_cmd->add_flag("--lesion", cfg.lesion, "Rerun with 6 of the 19 features removed");
    eval_cmd->add_option("--lesion-seed", cfg.lesion_seed, "Seed for lesion selection");
    add_common_flags(eval_cmd, cfg, model);

    CLI11_PARSE(app, argc, argv);

    try {
        if (demo_cmd->parsed()) {
            auto paths = vocim::demo::write_corpus(demo_dir);
            std::cerr << "demo corpus written: " << paths.manifest_path << "\n";
            return 0;
        }
        cfg.model = vocim::model_by_name(model);

        vocim::Pipeline pipeline(cfg, std::cerr);

        if (build_cmd->parsed()) {
            std::cerr << "space ready: " << pipeline.space().size() << " utterances, "
                      << pipeline.utterance_features().cols << " features\n";
        } else if (imitate_cmd->parsed()) {
            auto idx = pipeline.referent_index(referent_id);
            if (!idx)
                throw vocim::ValidationError(
                    "unknown referent id '" + referent_id +
                    "' (must be a corpus member; see the corpus manifest)");
            write_report(cfg, "imitate_" + referent_id + ".json",
                         pipeline.imitate(*idx, /*write_files=*/true));
        } else if (retrieve_cmd->parsed()) {
            write_report(cfg, "retrieve.json", pipeline.retrieve(query_wav));
        } else if (eval_cmd->parsed()) {
            write_report(cfg, "eval.json", pipeline.evaluate(human_csv, retrieval_manifest));
        }
    } catch (const vocim::IoError& e) {
        std::cerr << "error: " << e.what()
                  << "\nhint: run `vocim build-space` first to create the caches\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
