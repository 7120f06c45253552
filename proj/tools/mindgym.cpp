// mindgym: synthesis pipeline, curriculum builder, dataset analysis and
// pairwise judging over one shared configuration.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mindgym/analysis.hpp"
#include "mindgym/curriculum.hpp"
#include "mindgym/datamodel.hpp"
#include "mindgym/diversity.hpp"
#include "mindgym/gateway.hpp"
#include "mindgym/http_transport.hpp"
#include "mindgym/jsonl.hpp"
#include "mindgym/judge.hpp"
#include "mindgym/mock_backend.hpp"
#include "mindgym/prompts.hpp"
#include "mindgym/synthesis.hpp"

namespace {

using namespace mindgym;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool mock = false;
    std::size_t mock_dim = 64;
    std::string backend_kind = "mock";  // mock | http
    std::string base_url;
    std::string chat_model = "default-chat";
    std::string embed_model = "default-embed";
    int max_retries = 3;
    int max_in_flight = 4;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return j;
}

// Secrets come only from the environment, never the config file.
std::string api_key_from_env() {
    for (const char* var : {"MINDGYM_API_KEY", "OPENAI_API_KEY"}) {
        if (const char* v = std::getenv(var); v && *v) return v;
    }
    return {};
}

std::unique_ptr<Backend> make_backend(const CommonOpts& opts, const json& config) {
    std::string kind = opts.mock ? "mock" : opts.backend_kind;
    if (config.contains("gateway") && config["gateway"].contains("backend") && !opts.mock &&
        opts.backend_kind == "mock")
        kind = config["gateway"]["backend"].get<std::string>();
    if (kind == "mock") return std::make_unique<MockBackend>(opts.seed, opts.mock_dim);
    GatewayConfig gc;
    gc.base_url = opts.base_url;
    if (gc.base_url.empty()) {
        if (const char* v = std::getenv("MINDGYM_BASE_URL"); v && *v) gc.base_url = v;
        else if (config.contains("gateway") && config["gateway"].contains("base_url"))
            gc.base_url = config["gateway"]["base_url"].get<std::string>();
    }
    if (gc.base_url.empty()) throw ConfigError("http backend requires a base URL");
    gc.api_key = api_key_from_env();
    gc.chat_model = opts.chat_model;
    gc.embed_model = opts.embed_model;
    gc.max_retries = opts.max_retries;
    gc.max_in_flight = opts.max_in_flight;
    gc.vision_capable = config.value("gateway", json::object()).value("vision_capable", false);
    auto transport = std::make_shared<HttplibTransport>(gc.base_url, gc.timeout);
    return std::make_unique<Gateway>(gc, transport);
}

PromptLibrary load_prompts(const json& config) {
    PromptLibrary prompts;
    if (config.contains("prompt_overrides")) {
        for (const auto& [name, path] : config["prompt_overrides"].items())
            prompts.load_override(name, path.get<std::string>());
    }
    return prompts;
}

json domain_error(const std::string& kind, const std::string& message) {
    return json{{"error", {{"kind", kind}, {"message", message}}}};
}

int run_synth(const CommonOpts& common, const json& config, PipelineConfig pipeline,
              const std::string& output, const std::string& manifest_out) {
    PromptLibrary prompts = load_prompts(config);
    RootRng rng(common.seed);
    auto backend = make_backend(common, config);
    DiversityPool pool(pipeline.similarity_threshold);

    RunResult result = run_pipeline(pipeline, *backend, pool, prompts, rng);

    json config_snapshot{{"n", pipeline.target_n},
                         {"k", pipeline.max_seeds},
                         {"language", to_string(pipeline.language)},
                         {"modality", pipeline.modality == Modality::Text ? "text" : "anchored-image"},
                         {"relation_policy", pipeline.relation_policy == RelationPolicy::Balanced
                                                 ? "balanced"
                                                 : "model-chosen"},
                         {"similarity_threshold", pipeline.similarity_threshold},
                         {"max_regenerations", pipeline.max_regenerations}};
    Manifest manifest = Manifest::make(common.seed, config_snapshot);

    AtomicJsonlWriter writer(output);
    writer.write_line(manifest.line());
    for (const auto& sample : result.samples) writer.write_json(json(sample));
    writer.commit();

    json run_manifest{{"tool_version", kToolVersion},
                      {"rng_seed", common.seed},
                      {"config", config_snapshot},
                      {"prompt_template_hashes",
                       {{"cognitive", fnv1a64(prompts.cognitive)},
                        {"background", fnv1a64(prompts.background)},
                        {"single_hop_text", fnv1a64(prompts.single_hop_text)},
                        {"single_hop_image", fnv1a64(prompts.single_hop_image)},
                        {"multi_hop_text", fnv1a64(prompts.multi_hop_text)},
                        {"multi_hop_image", fnv1a64(prompts.multi_hop_image)},
                        {"structured_extraction", fnv1a64(prompts.structured_extraction)}}},
                      {"stage_calls", result.stats.stage_calls},
                      {"regenerations", result.stats.regenerations},
                      {"relation_histogram", result.stats.relation_histogram},
                      {"extraction_paths", result.stats.extraction_paths},
                      {"warnings", result.stats.warnings},
                      {"samples", result.samples.size()}};
    AtomicJsonlWriter mwriter(manifest_out);
    mwriter.write_line(run_manifest.dump(2));
    mwriter.commit();

    std::cerr << "synth: wrote " << result.samples.size() << " samples to " << output << "\n";
    return kExitOk;
}

std::vector<MultiHopSample> load_samples(const std::string& path) {
    JsonlFile f = read_jsonl(path);
    std::vector<MultiHopSample> samples;
    for (std::size_t i = 0; i < f.records.size(); ++i) {
        try {
            samples.push_back(f.records[i].get<MultiHopSample>());
        } catch (const std::exception& e) {
            throw ParseError("line " + std::to_string(f.line_numbers[i]) + ": " + e.what());
        }
    }
    return samples;
}

int run_curriculum(const CommonOpts& common, const std::string& input, const std::string& mode_str,
                   const std::string& output) {
    CurriculumMode mode;
    if (mode_str == "progressive") mode.ordering = CurriculumOrdering::Progressive;
    else if (mode_str == "shuffled-first-three")
        mode.ordering = CurriculumOrdering::ShuffledFirstThree;
    else throw ConfigError("unknown curriculum mode: " + mode_str);

    auto samples = load_samples(input);
    if (samples.empty()) throw ConfigError("input holds no samples");
    RootRng rng(common.seed);
    auto records = build_curriculum(samples, mode, rng.engine("curriculum"));

    json config_snapshot{{"mode", mode_str}, {"input_records", samples.size()}};
    Manifest manifest = Manifest::make(common.seed, config_snapshot);
    AtomicJsonlWriter writer(output);
    writer.write_line(manifest.line());
    for (const auto& r : records) writer.write_json(json(r));
    writer.commit();
    std::cerr << "curriculum: wrote " << records.size() << " records to " << output << "\n";
    return kExitOk;
}

std::vector<std::string> dataset_texts(const std::string& path, const std::string& text_field) {
    JsonlFile f = read_jsonl(path);
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < f.records.size(); ++i) {
        const json& rec = f.records[i];
        if (!text_field.empty()) {
            if (!rec.contains(text_field))
                throw ParseError("line " + std::to_string(f.line_numbers[i]) + ": missing field '" +
                                 text_field + "'");
            texts.push_back(rec.at(text_field).get<std::string>());
            continue;
        }
        // default: concatenation of question+answer+thinking when present
        std::string joined;
        for (const char* k : {"question", "answer", "thinking"})
            if (rec.contains(k) && rec.at(k).is_string()) joined += rec.at(k).get<std::string>() + "\n";
        if (joined.empty())
            throw ParseError("line " + std::to_string(f.line_numbers[i]) +
                             ": no question/answer/thinking fields; use --text-field");
        texts.push_back(std::move(joined));
    }
    return texts;
}

int run_analyze(const CommonOpts& common, const json& config, const std::vector<std::string>& inputs,
                const std::vector<std::string>& baseline_reports,
                const std::string& candidate_report, const std::string& tokenizer_str,
                const std::string& dep_str, const std::string& text_field,
                const std::string& report_out, const std::string& per_record_out) {
    Tokenizer tok;
    if (tokenizer_str == "whitespace-punct") tok = Tokenizer::WhitespacePunct;
    else if (tokenizer_str == "cjk-char-aware") tok = Tokenizer::CJKCharAware;
    else throw ConfigError("unknown tokenizer: " + tokenizer_str);

    DependencyAnalyzer dep;
    if (dep_str == "heuristic") dep = DependencyAnalyzer::Heuristic;
    else if (dep_str == "judge") dep = DependencyAnalyzer::JudgeBased;
    else throw ConfigError("unknown dependency analyzer: " + dep_str);

    PromptLibrary prompts = load_prompts(config);
    auto backend = make_backend(common, config);
    AnalysisBackends backends;
    backends.quality_judge = backend.get();
    backends.dependency = dep;
    backends.prompts = &prompts;

    json out = json::object();
    out["reports"] = json::array();
    std::optional<MetricsReport> candidate;

    for (const auto& input : inputs) {
        std::vector<RecordMetrics> per_record;
        MetricsReport report = analyze_dataset(dataset_texts(input, text_field), backends, tok,
                                               &per_record);
        out["reports"].push_back({{"input", input}, {"report", report}});
        if (!candidate) candidate = report;
        if (!per_record_out.empty()) {
            AtomicJsonlWriter w(per_record_out);
            for (const auto& m : per_record)
                w.write_json(json{{"quality", m.quality},
                                  {"action", m.action},
                                  {"dependency", m.dependency},
                                  {"token", m.token},
                                  {"length", m.chars}});
            w.commit();
        }
    }

    if (!candidate_report.empty()) {
        std::ifstream in(candidate_report);
        if (!in) throw ConfigError("cannot open candidate report: " + candidate_report);
        json j;
        in >> j;
        candidate = j.get<MetricsReport>();
    }

    if (!baseline_reports.empty()) {
        if (!candidate) throw ConfigError("comparison requires a candidate dataset or report");
        std::vector<MetricsReport> baselines;
        for (const auto& path : baseline_reports) {
            std::ifstream in(path);
            if (!in) throw ConfigError("cannot open baseline report: " + path);
            json j;
            in >> j;
            baselines.push_back(j.get<MetricsReport>());
        }
        ComparisonReport cmp = compare_reports(*candidate, baselines);
        out["comparison"] = cmp;
    }

    out["rng_seed"] = common.seed;
    out["tool_version"] = kToolVersion;
    out["tokenizer"] = tokenizer_str;
    out["dependency_analyzer"] = dep_str;
    out["lexicon_version"] = kLexiconVersion;

    if (report_out.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        AtomicJsonlWriter w(report_out);
        w.write_line(out.dump(2));
        w.commit();
    }
    return kExitOk;
}

struct Prediction {
    std::string id;
    std::string question;
    std::string prediction;
};

std::vector<Prediction> load_predictions(const std::string& path) {
    JsonlFile f = read_jsonl(path);
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < f.records.size(); ++i) {
        const json& rec = f.records[i];
        try {
            Prediction p;
            p.id = rec.at("id").get<std::string>();
            p.question = rec.value("question", std::string{});
            p.prediction = rec.at("prediction").get<std::string>();
            preds.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(f.line_numbers[i]) + ": " + e.what());
        }
    }
    return preds;
}

int run_judge(const CommonOpts& common, const json& config, const std::string& raw_file,
              const std::string& ft_file, int retries, const std::string& verdicts_out,
              const std::string& report_out) {
    PromptLibrary prompts = load_prompts(config);
    auto backend = make_backend(common, config);

    auto raw_preds = load_predictions(raw_file);
    auto ft_preds = load_predictions(ft_file);
    std::map<std::string, const Prediction*> ft_by_id;
    for (const auto& p : ft_preds) ft_by_id[p.id] = &p;

    std::vector<std::pair<const Prediction*, const Prediction*>> pairs;
    std::vector<std::string> unjoined;
    std::set<std::string> joined_ids;
    for (const auto& p : raw_preds) {
        auto it = ft_by_id.find(p.id);
        if (it == ft_by_id.end()) unjoined.push_back(p.id);
        else {
            pairs.emplace_back(&p, it->second);
            joined_ids.insert(p.id);
        }
    }
    for (const auto& p : ft_preds)
        if (!joined_ids.count(p.id)) unjoined.push_back(p.id);

    if (pairs.empty()) {
        std::cerr << domain_error("JoinEmpty", "0 joined pairs between prediction files").dump()
                  << "\n";
        return kExitDomain;
    }
    for (const auto& id : unjoined) std::cerr << "judge: unjoined id: " << id << "\n";

    std::vector<JudgeVerdict> verdicts;
    json verdict_lines = json::array();
    for (const auto& [raw, ft] : pairs) {
        std::vector<std::string> warnings;
        std::string question = !raw->question.empty() ? raw->question : ft->question;
        JudgeVerdict v = judge_pair(question, raw->prediction, ft->prediction, *backend, prompts,
                                    retries, &warnings);
        verdicts.push_back(v);
        json line{{"id", raw->id}, {"verdict", v}};
        if (!warnings.empty()) line["warnings"] = warnings;
        verdict_lines.push_back(std::move(line));
    }
    WinRateReport report = aggregate(verdicts);

    json header{{"tool_version", kToolVersion},
                {"rng_seed", common.seed},
                {"judge_model", common.chat_model},
                {"temperature", 0.0},
                {"n_pairs", report.n_pairs},
                {"unjoined_ids", unjoined}};

    if (!verdicts_out.empty()) {
        AtomicJsonlWriter w(verdicts_out);
        w.write_line(json{{"_manifest", header}}.dump());
        for (const auto& line : verdict_lines) w.write_json(line);
        w.commit();
    }
    json out{{"header", header}, {"win_rate", report}};
    if (report_out.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        AtomicJsonlWriter w(report_out);
        w.write_line(out.dump(2));
        w.commit();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MindGYM-style self-challenging data synthesis toolkit"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "JSON config file; flags override its fields");
    app.add_option("--seed", common.seed, "root RNG seed (recorded in every output header)");
    app.add_flag("--mock", common.mock, "use the deterministic offline mock backend");
    app.add_option("--mock-dim", common.mock_dim, "mock embedding dimension");
    app.add_option("--backend", common.backend_kind, "backend kind: mock | http");
    app.add_option("--base-url", common.base_url, "endpoint base URL (http backend)");
    app.add_option("--chat-model", common.chat_model, "chat model identifier");
    app.add_option("--embed-model", common.embed_model, "embedding model identifier");
    app.add_option("--max-retries", common.max_retries, "gateway retry budget");
    app.add_option("--max-in-flight", common.max_in_flight, "gateway parallelism bound");

    // synth
    auto* synth = app.add_subcommand("synth", "run the four-stage synthesis pipeline");
    PipelineConfig pipeline;
    std::string language_str = "CN", modality_str = "text", relation_str = "model-chosen",
                topic_str = "round-robin";
    bool balance_relations = false;
    std::string synth_out = "dataset.jsonl", synth_manifest;
    synth->add_option("--n", pipeline.target_n, "target pool size N");
    synth->add_option("--k", pipeline.max_seeds, "max seeds per batch (1..5)");
    synth->add_option("--language", language_str, "CN | EN | MIX");
    synth->add_option("--modality", modality_str, "text | anchored-image");
    synth->add_option("--relation-policy", relation_str, "model-chosen | balanced");
    synth->add_flag("--balance-relations", balance_relations, "shorthand for balanced policy");
    synth->add_option("--topic-policy", topic_str, "round-robin | uniform");
    synth->add_option("--threshold", pipeline.similarity_threshold, "cosine similarity threshold");
    synth->add_option("--max-regenerations", pipeline.max_regenerations,
                      "per-slot regeneration budget");
    synth->add_option("--anchor-file", pipeline.anchor_file, "anchor JSONL (anchored-image mode)");
    synth->add_option("--workers", pipeline.workers, "concurrent sample slots");
    synth->add_option("--output", synth_out, "output dataset path");
    synth->add_option("--manifest-out", synth_manifest, "run manifest path");

    // curriculum
    auto* curriculum = app.add_subcommand("curriculum", "expand samples into the 4-phase corpus");
    std::string cur_input, cur_mode = "progressive", cur_out = "curriculum.jsonl";
    curriculum->add_option("--input", cur_input, "MultiHopSample JSONL")->required();
    curriculum->add_option("--mode", cur_mode, "progressive | shuffled-first-three");
    curriculum->add_option("--output", cur_out, "output path");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "five diagnostic filters over datasets");
    std::vector<std::string> analyze_inputs, baseline_reports;
    std::string candidate_report, tokenizer_str = "whitespace-punct", dep_str = "heuristic",
                text_field, report_out, per_record_out;
    analyze->add_option("inputs", analyze_inputs, "dataset JSONL files");
    analyze->add_option("--baseline-report", baseline_reports,
                        "MetricsReport JSON file (repeatable)");
    analyze->add_option("--candidate-report", candidate_report, "MetricsReport JSON for candidate");
    analyze->add_option("--tokenizer", tokenizer_str, "whitespace-punct | cjk-char-aware");
    analyze->add_option("--dependency-analyzer", dep_str, "heuristic | judge");
    analyze->add_option("--text-field", text_field, "record field to analyze");
    analyze->add_option("--report-out", report_out, "write the report here instead of stdout");
    analyze->add_option("--per-record-out", per_record_out, "optional per-record metrics JSONL");

    // judge
    auto* judge = app.add_subcommand("judge", "pairwise depth/breadth judging of two prediction files");
    std::string raw_file, ft_file, verdicts_out = "verdicts.jsonl", judge_report_out;
    int judge_retries = 2;
    judge->add_option("--raw", raw_file, "raw-model predictions JSONL")->required();
    judge->add_option("--finetuned", ft_file, "fine-tuned-model predictions JSONL")->required();
    judge->add_option("--retries", judge_retries, "parse retry budget");
    judge->add_option("--verdicts-out", verdicts_out, "per-pair verdict file");
    judge->add_option("--report-out", judge_report_out, "win-rate report path");

    // Let global flags appear after the subcommand name as well.
    for (auto* sub : {synth, curriculum, analyze, judge}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        json config = load_config(common.config_path);
        if (config.contains("rng_seed") && common.seed == 0)
            common.seed = config["rng_seed"].get<std::uint64_t>();

        if (synth->parsed()) {
            pipeline.language = language_from_string(language_str);
            if (modality_str == "text") pipeline.modality = Modality::Text;
            else if (modality_str == "anchored-image") pipeline.modality = Modality::AnchoredImage;
            else throw ConfigError("unknown modality: " + modality_str);
            if (balance_relations) relation_str = "balanced";
            if (relation_str == "balanced") pipeline.relation_policy = RelationPolicy::Balanced;
            else if (relation_str == "model-chosen")
                pipeline.relation_policy = RelationPolicy::ModelChosen;
            else throw ConfigError("unknown relation policy: " + relation_str);
            if (topic_str == "round-robin") pipeline.topic_policy = TopicPolicy::RoundRobin;
            else if (topic_str == "uniform") pipeline.topic_policy = TopicPolicy::UniformRandom;
            else throw ConfigError("unknown topic policy: " + topic_str);
            pipeline.validate();
            if (pipeline.modality == Modality::AnchoredImage &&
                !std::filesystem::exists(pipeline.anchor_file))
                throw ConfigError("anchor file not found: " + pipeline.anchor_file);
            if (synth_manifest.empty()) synth_manifest = synth_out + ".manifest.json";
            return run_synth(common, config, pipeline, synth_out, synth_manifest);
        }
        if (curriculum->parsed()) return run_curriculum(common, cur_input, cur_mode, cur_out);
        if (analyze->parsed()) {
            if (analyze_inputs.empty() && candidate_report.empty())
                throw ConfigError("analyze: at least one input dataset or --candidate-report");
            return run_analyze(common, config, analyze_inputs, baseline_reports, candidate_report,
                               tokenizer_str, dep_str, text_field, report_out, per_record_out);
        }
        if (judge->parsed())
            return run_judge(common, config, raw_file, ft_file, judge_retries, verdicts_out,
                             judge_report_out);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << domain_error("ConfigError", e.what()).dump() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::string kind = "Error";
        if (dynamic_cast<const PoolStarvation*>(&e)) kind = "PoolStarvation";
        else if (dynamic_cast<const TransportError*>(&e)) kind = "TransportError";
        else if (dynamic_cast<const ParseError*>(&e)) kind = "ParseError";
        else if (dynamic_cast<const JudgeUnparseable*>(&e)) kind = "JudgeUnparseable";
        std::cerr << domain_error(kind, e.what()).dump() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << domain_error("Unexpected", e.what()).dump() << "\n";
        return kExitDomain;
    }
}
