#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mindgym/datamodel.hpp"
#include "mindgym/diversity.hpp"
#include "mindgym/errors.hpp"
#include "mindgym/gateway.hpp"
#include "mindgym/jsonl.hpp"
#include "mindgym/prompts.hpp"
#include "mindgym/rng.hpp"
#include "mindgym/text.hpp"

namespace mindgym {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Modality { Text, AnchoredImage };
enum class RelationPolicy { ModelChosen, Balanced };
enum class TopicPolicy { RoundRobin, UniformRandom };
enum class NoveltyGranularity { SeedLevel, SampleLevel };

struct PipelineConfig {
    std::size_t target_n = 400;
    int max_seeds = 5;  // k
    Language language = Language::CN;
    Modality modality = Modality::Text;
    RelationPolicy relation_policy = RelationPolicy::ModelChosen;
    TopicPolicy topic_policy = TopicPolicy::RoundRobin;
    int max_regenerations = 10;
    double similarity_threshold = 0.85;
    NoveltyGranularity novelty = NoveltyGranularity::SampleLevel;
    std::string anchor_file;
    int workers = 1;
    int blank_retries = 2;  // extra attempts when the model returns a blank reply

    void validate() const {
        if (target_n < 1) throw ConfigError("target_n must be >= 1");
        if (max_seeds < 1 || max_seeds > 5) throw ConfigError("k must lie in [1,5]");
        if (!(similarity_threshold > 0.0 && similarity_threshold < 1.0))
            throw ConfigError("similarity_threshold must lie in (0,1)");
        if (max_regenerations < 1) throw ConfigError("max_regenerations must be >= 1");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        if (modality == Modality::AnchoredImage && anchor_file.empty())
            throw ConfigError("AnchoredImage mode requires an anchor file");
    }
};

struct RawComposition {
    std::string raw_text;
    std::optional<std::string> thinking_span;
    std::optional<std::string> question_span;
    std::optional<std::string> answer_span;
};

// ---------------------------------------------------------------------------
// Meta-topic sampling
// ---------------------------------------------------------------------------

class TopicSampler {
public:
    TopicSampler(TopicPolicy policy, std::mt19937_64 engine)
        : policy_(policy), engine_(std::move(engine)) {}

    const MetaTopic& next() {
        const auto& reg = meta_topic_registry();
        if (policy_ == TopicPolicy::RoundRobin) return reg[cursor_++ % reg.size()];
        std::uniform_int_distribution<std::size_t> pick(0, reg.size() - 1);
        return reg[pick(engine_)];
    }

    // Deterministic topic for a slot index, independent of call order.
    static const MetaTopic& for_slot(TopicPolicy policy, const RootRng& rng, std::size_t slot) {
        const auto& reg = meta_topic_registry();
        if (policy == TopicPolicy::RoundRobin) return reg[slot % reg.size()];
        auto eng = rng.engine("topic", slot);
        std::uniform_int_distribution<std::size_t> pick(0, reg.size() - 1);
        return reg[pick(eng)];
    }

private:
    TopicPolicy policy_;
    std::mt19937_64 engine_;
    std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

struct ParsedSeeds {
    std::vector<std::string> questions;
    CompositionType relation = CompositionType::Bridging;
    std::vector<std::string> warnings;
};

namespace detail {

// Strips list markers: arabic "1." / "1)" / "1、", CJK numerals "一、",
// bullets "-" "*" "•". Returns nullopt when the line carries no marker.
inline std::optional<std::string> strip_list_marker(std::string_view line) {
    std::string_view s = trim(line);
    if (s.empty()) return std::nullopt;
    static const std::vector<std::string> cjk_numerals = {"一", "二", "三", "四", "五",
                                                          "六", "七", "八", "九", "十"};
    for (const auto& num : cjk_numerals) {
        if (s.substr(0, num.size()) == num) {
            std::string_view rest = s.substr(num.size());
            if (!rest.empty() && (rest.substr(0, 3) == "、" || rest.front() == '.' ||
                                  rest.front() == ')' || rest.substr(0, 3) == "．")) {
                rest.remove_prefix(rest.front() == '.' || rest.front() == ')' ? 1 : 3);
                return std::string(trim(rest));
            }
        }
    }
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size()) {
        std::string_view rest = s.substr(i);
        if (rest.front() == '.' || rest.front() == ')') return std::string(trim(rest.substr(1)));
        if (rest.substr(0, 3) == "、" || rest.substr(0, 3) == "．")
            return std::string(trim(rest.substr(3)));
    }
    if (s.front() == '-' || s.front() == '*') return std::string(trim(s.substr(1)));
    if (s.substr(0, 3) == "•") return std::string(trim(s.substr(3)));
    return std::nullopt;
}

inline bool looks_like_question(std::string_view s) {
    return !s.empty() &&
           (s.back() == '?' || (s.size() >= 3 && s.substr(s.size() - 3) == "？"));
}

inline std::optional<CompositionType> find_relation_label(std::string_view line) {
    std::string norm = to_lower_ascii(line);
    std::string squashed;
    for (char c : norm)
        if (c != '-' && c != ' ' && c != '_') squashed += c;
    static const std::vector<std::pair<std::string, CompositionType>> labels = {
        {"visualtextualalignment", CompositionType::VisualTextualAlignment},
        {"spatialreasoning", CompositionType::SpatialReasoning},
        {"causalinference", CompositionType::CausalInference},
        {"contextualsynthesis", CompositionType::ContextualSynthesis},
        {"bridging", CompositionType::Bridging},
        {"comparison", CompositionType::Comparison},
        {"temporal", CompositionType::Temporal},
    };
    for (const auto& [label, kind] : labels)
        if (squashed.find(label) != std::string::npos) return kind;
    return std::nullopt;
}

inline bool mentions_relation_marker(std::string_view line) {
    std::string norm = to_lower_ascii(line);
    return norm.find("category") != std::string::npos ||
           norm.find("relationship") != std::string::npos ||
           norm.find("relation") != std::string::npos ||
           std::string(line).find("关系") != std::string::npos ||
           std::string(line).find("类别") != std::string::npos;
}

}  // namespace detail

// Tolerant parse of a seed-question reply: numbered/bulleted/CJK-numbered
// lists and bare question lines, plus one declared relation category.
inline ParsedSeeds parse_seed_reply(const std::string& reply, int k, bool multimodal) {
    ParsedSeeds out;
    std::optional<CompositionType> relation;
    std::vector<std::string> questions;

    for (const auto& line : split_lines(reply)) {
        std::string_view t = trim(line);
        if (t.empty()) continue;
        if (detail::mentions_relation_marker(t)) {
            if (auto rel = detail::find_relation_label(t)) {
                relation = rel;
                continue;
            }
        }
        if (auto stripped = detail::strip_list_marker(t)) {
            if (!stripped->empty()) questions.push_back(*stripped);
            continue;
        }
        if (detail::looks_like_question(t)) questions.push_back(std::string(t));
    }
    if (!relation) {
        // fall back: a line that is exactly a relation label
        for (const auto& line : split_lines(reply)) {
            std::string_view t = trim(line);
            if (t.empty() || t.size() > 60) continue;
            if (auto rel = detail::find_relation_label(t)) {
                relation = rel;
                break;
            }
        }
    }
    if (questions.empty()) throw ParseError("no seed questions found in reply");
    if (!relation) throw ParseError("no recognizable relation category in reply");

    const bool rel_multimodal = is_multimodal(*relation);
    if (rel_multimodal != multimodal)
        throw RelationUnknown("relation '" + to_string(*relation) + "' outside the " +
                              (multimodal ? "multimodal" : "text") + " kinds");
    if (static_cast<int>(questions.size()) > k) {
        out.warnings.push_back("reply listed " + std::to_string(questions.size()) +
                               " questions; truncated to k=" + std::to_string(k));
        questions.resize(static_cast<std::size_t>(k));
    }
    out.questions = std::move(questions);
    out.relation = *relation;
    return out;
}

struct StructuredBlocks {
    std::string question;
    std::string answer;
    std::string thinking;
};

// Delimiter-based parse of labeled Question/Answer/Thinking blocks.
inline std::optional<StructuredBlocks> parse_structured_blocks(const std::string& text) {
    enum class Block { None, Question, Answer, Thinking };
    auto classify = [](std::string_view line) -> std::optional<std::pair<Block, std::string>> {
        std::string low = to_lower_ascii(line);
        static const std::vector<std::pair<std::string, Block>> labels = {
            {"question:", Block::Question}, {"answer:", Block::Answer},
            {"thinking:", Block::Thinking}, {"问题：", Block::Question},
            {"问题:", Block::Question},     {"答案：", Block::Answer},
            {"答案:", Block::Answer},       {"思考：", Block::Thinking},
            {"思考:", Block::Thinking}};
        for (const auto& [label, block] : labels) {
            std::string probe = (label.front() & 0x80) ? std::string(line) : low;
            if (probe.substr(0, label.size()) == label)
                return std::make_pair(block, std::string(trim(line.substr(label.size()))));
        }
        return std::nullopt;
    };

    StructuredBlocks blocks;
    Block current = Block::None;
    auto append = [&](Block b, const std::string& s) {
        std::string* dst = b == Block::Question ? &blocks.question
                           : b == Block::Answer ? &blocks.answer
                                                : &blocks.thinking;
        if (!dst->empty()) *dst += '\n';
        *dst += s;
    };
    for (const auto& line : split_lines(text)) {
        std::string_view t = trim(line);
        if (auto hit = classify(t)) {
            current = hit->first;
            if (!hit->second.empty()) append(current, hit->second);
            continue;
        }
        if (current != Block::None && !t.empty()) append(current, std::string(t));
    }
    if (blocks.question.empty() || blocks.answer.empty() || blocks.thinking.empty())
        return std::nullopt;
    return blocks;
}

// ---------------------------------------------------------------------------
// Anchors
// ---------------------------------------------------------------------------

inline std::vector<AnchorRef> load_anchors(const std::filesystem::path& path) {
    JsonlFile f = read_jsonl(path);
    std::vector<AnchorRef> anchors;
    anchors.reserve(f.records.size());
    for (std::size_t i = 0; i < f.records.size(); ++i) {
        try {
            anchors.push_back(f.records[i].get<AnchorRef>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("anchor line " + std::to_string(f.line_numbers[i]) + ": " + e.what());
        }
    }
    if (anchors.empty()) throw ConfigError("anchor file holds no records: " + path.string());
    return anchors;
}

// ---------------------------------------------------------------------------
// Synthesis engine: the four stages
// ---------------------------------------------------------------------------

struct RunStats {
    std::map<std::string, std::size_t> stage_calls;  // stage name -> chat calls
    std::size_t regenerations = 0;
    std::map<std::string, std::size_t> relation_histogram;
    std::map<std::string, std::size_t> extraction_paths;  // "model" / "local"
    std::vector<std::string> warnings;
    // Logical per-stage timestamps per emitted sample, index-aligned.
    std::vector<std::array<std::uint64_t, 4>> stage_clocks;
};

struct RunResult {
    std::vector<MultiHopSample> samples;
    RunStats stats;
};

class SynthesisEngine {
public:
    SynthesisEngine(Backend& backend, PromptLibrary prompts, Language language,
                    double temperature = 0.7, int blank_retries = 2)
        : backend_(backend),
          prompts_(std::move(prompts)),
          language_(language),
          temperature_(temperature),
          blank_retries_(blank_retries) {
        if (language_ == Language::MIX)
            throw ConfigError("engine language must be resolved to CN or EN");
    }

    const PromptLibrary& prompts() const { return prompts_; }
    Language language() const { return language_; }

    // Stage 1. The issued user message carries the background template with
    // the topic name interpolated. Word count is the model's business; we do
    // not enforce the 150-200 range.
    std::string generate_context(const MetaTopic& topic,
                                 std::optional<std::uint64_t> call_seed = std::nullopt) {
        std::string task = interpolate(prompts_.background, {{"category", topic.name},
                                                             {"language", language_name(language_)}});
        return chat_nonempty(task, {}, call_seed, "stage1 background");
    }

    // Stage 2, text mode. `forced_relation` pins the category for
    // relation-balanced runs.
    SeedBatch generate_seed_batch(const std::string& context, int k,
                                  std::optional<CompositionType> forced_relation,
                                  const MetaTopic& topic, std::vector<std::string>* warnings,
                                  std::optional<std::uint64_t> call_seed = std::nullopt) {
        if (context.empty()) throw ConfigError("generate_seed_batch: context must be non-empty");
        std::string task = interpolate(prompts_.single_hop_text,
                                       {{"language", language_name(language_)}});
        if (forced_relation)
            task += "\nUse the relationship category: " + to_string(*forced_relation) + ".\n";
        std::string user = "Background document:\n" + context + "\n\n" + task;
        std::string reply = chat_nonempty_user(user, {}, call_seed, "stage2 seeds");
        ParsedSeeds parsed = parse_seed_reply(reply, k, /*multimodal=*/false);
        if (warnings)
            warnings->insert(warnings->end(), parsed.warnings.begin(), parsed.warnings.end());
        SeedBatch batch;
        batch.relation = forced_relation.value_or(parsed.relation);
        batch.source_context = context;
        batch.topic = topic;
        for (std::size_t i = 0; i < parsed.questions.size(); ++i)
            batch.seeds.push_back({"q" + std::to_string(i + 1), parsed.questions[i], std::nullopt});
        return batch;
    }

    // Stage 2, anchored-image mode: attaches the anchor image and
    // interpolates the original QA pair.
    SeedBatch generate_seed_batch_multimodal(const AnchorRef& anchor, int k,
                                             std::vector<std::string>* warnings,
                                             std::optional<std::uint64_t> call_seed = std::nullopt) {
        std::string image_url = resolve_image(anchor.image_path);
        std::string task = interpolate(prompts_.single_hop_image,
                                       {{"original_question", anchor.original_question},
                                        {"original_answer", anchor.original_answer},
                                        {"language", language_name(language_)}});
        std::string reply =
            chat_nonempty_user(task, {ImagePart{image_url}}, call_seed, "stage2 seeds (image)");
        ParsedSeeds parsed = parse_seed_reply(reply, k, /*multimodal=*/true);
        if (warnings)
            warnings->insert(warnings->end(), parsed.warnings.begin(), parsed.warnings.end());
        SeedBatch batch;
        batch.relation = parsed.relation;
        batch.source_context = anchor;
        for (std::size_t i = 0; i < parsed.questions.size(); ++i)
            batch.seeds.push_back({"q" + std::to_string(i + 1), parsed.questions[i], std::nullopt});
        return batch;
    }

    // Stage 3. Raw output is stored verbatim, untrimmed.
    RawComposition compose_multihop(const SeedBatch& batch, const std::string& context,
                                    std::optional<std::uint64_t> call_seed = std::nullopt) {
        if (batch.seeds.empty()) throw ConfigError("compose_multihop: empty seed batch");
        const bool anchored = std::holds_alternative<AnchorRef>(batch.source_context);
        std::string user;
        std::vector<ImagePart> images;
        if (anchored) {
            const auto& anchor = std::get<AnchorRef>(batch.source_context);
            images.push_back(ImagePart{resolve_image(anchor.image_path)});
            user += "Original question: " + anchor.original_question + "\n";
            user += "Original answer: " + anchor.original_answer + "\n\n";
        } else {
            user += "Background document:\n" + context + "\n\n";
        }
        user += "Sub-questions (" + to_string(batch.relation) + "):\n";
        for (std::size_t i = 0; i < batch.seeds.size(); ++i)
            user += std::to_string(i + 1) + ". " + batch.seeds[i].text + "\n";
        user += "\n";
        user += interpolate(anchored ? prompts_.multi_hop_image : prompts_.multi_hop_text,
                            {{"language", language_name(language_)}});
        std::string reply = chat_nonempty_user(user, images, call_seed, "stage3 composition");
        return RawComposition{reply, std::nullopt, std::nullopt, std::nullopt};
    }

    // Stage 4: a second model call with the structured-extraction task,
    // falling back to a local delimiter parse of the stage-3 output.
    // `extraction_path` reports which route produced the fields.
    MultiHopSample extract_structured(const RawComposition& raw, const SeedBatch& batch,
                                      const std::string& sample_id, std::string* extraction_path,
                                      std::optional<std::uint64_t> call_seed = std::nullopt) {
        if (raw.raw_text.empty()) throw ConfigError("extract_structured: raw text must be non-empty");
        std::optional<StructuredBlocks> blocks;
        std::string path_taken;
        try {
            std::string user = raw.raw_text + "\n\n" + prompts_.structured_extraction;
            std::string reply = chat_nonempty_user(user, {}, call_seed, "stage4 extraction");
            blocks = parse_structured_blocks(reply);
            path_taken = "model";
        } catch (const GenerationEmpty&) {
            // fall through to the local parse
        }
        if (!blocks) {
            blocks = parse_structured_blocks(raw.raw_text);
            path_taken = "local";
        }
        if (!blocks)
            throw ExtractionFailed("neither model reply nor local parse yields all three blocks");
        if (extraction_path) *extraction_path = path_taken;

        MultiHopSample sample;
        sample.id = sample_id;
        sample.question = blocks->question;
        sample.answer = blocks->answer;
        sample.thinking = blocks->thinking;
        sample.composition = batch.relation;
        sample.seeds = batch;
        sample.context = batch.source_context;
        sample.language = language_;
        return sample;
    }

    // Flux Step 1: emits a text-to-image prompt string; image generation
    // itself is out of scope.
    std::string generate_image_description(const std::string& category,
                                           std::optional<std::uint64_t> call_seed = std::nullopt) {
        const auto& cats = image_categories();
        auto it = cats.find(category);
        if (it == cats.end()) throw ConfigError("unknown image category: " + category);
        std::string task = interpolate(prompts_.image_description,
                                       {{"category", category}, {"description", it->second}});
        return chat_nonempty(task, {}, call_seed, "image description");
    }

    static const std::map<std::string, std::string>& image_categories() {
        static const std::map<std::string, std::string> cats = {
            {"Geometry", "basic geometric shapes with labeled lengths and angles"},
            {"Physics", "simple mechanics such as pulleys, inclined planes, or force diagrams"},
            {"Chemistry", "molecular structures or reaction schemes"},
            {"Math Word Problem", "real-world scenes involving objects and quantities"},
            {"Logic Diagram", "flowcharts or condition-based logical structures"},
            {"Statistics Chart", "visualizations such as bar charts, pie charts, or line graphs"},
            {"Timeline or History Map", "event timelines or migration maps"},
            {"Circuit Diagram", "basic electronic circuits with labeled components"},
        };
        return cats;
    }

    std::size_t chat_calls() const { return chat_calls_.load(); }

private:
    std::string resolve_image(const std::string& image_path) {
        if (image_path.rfind("http://", 0) == 0 || image_path.rfind("https://", 0) == 0)
            return image_path;  // remote URLs pass through untouched
        std::ifstream in(image_path, std::ios::binary);
        if (!in) throw ImageUnreadable("cannot read image: " + image_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return "data:image/png;base64," + base64_encode(buf.str());
    }

    std::string chat_nonempty(const std::string& task, std::vector<ImagePart> images,
                              std::optional<std::uint64_t> call_seed, const std::string& what) {
        return chat_nonempty_user(task, std::move(images), call_seed, what);
    }

    std::string chat_nonempty_user(const std::string& user_text, std::vector<ImagePart> images,
                                   std::optional<std::uint64_t> call_seed, const std::string& what) {
        ChatRequest req;
        req.temperature = temperature_;
        req.messages.push_back({Role::System, prompts_.cognitive, {}});
        req.messages.push_back({Role::User, user_text, std::move(images)});
        for (int attempt = 0; attempt <= blank_retries_; ++attempt) {
            if (call_seed) req.seed = *call_seed + static_cast<std::uint64_t>(attempt);
            ++chat_calls_;
            std::string reply = backend_.chat(req);
            if (!trim(reply).empty()) return reply;
        }
        throw GenerationEmpty(what + ": blank reply after " + std::to_string(blank_retries_ + 1) +
                              " attempts");
    }

    Backend& backend_;
    PromptLibrary prompts_;
    Language language_;
    double temperature_;
    int blank_retries_;
    std::atomic<std::size_t> chat_calls_{0};
};

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

namespace detail {

// Anchors are drawn without replacement (seeded shuffle) until the file is
// exhausted, then with replacement.
inline AnchorRef anchor_for_slot(const std::vector<AnchorRef>& anchors, const RootRng& rng,
                                 std::size_t slot) {
    std::vector<std::size_t> order(anchors.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto eng = rng.engine("anchor-order");
    std::shuffle(order.begin(), order.end(), eng);
    if (slot < anchors.size()) return anchors[order[slot]];
    auto slot_eng = rng.engine("anchor-replacement", slot);
    std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
    return anchors[pick(slot_eng)];
}

inline Language language_for_slot(Language configured, const RootRng& rng, std::size_t slot) {
    if (configured != Language::MIX) return configured;
    auto eng = rng.engine("language", slot);
    return std::uniform_int_distribution<int>(0, 1)(eng) == 0 ? Language::CN : Language::EN;
}

}  // namespace detail

// Runs Stages 1-4 for N sample slots against the diversity pool. Slots may
// synthesize concurrently; pool admission happens in slot order, so output
// is reproducible for a fixed (seed, config, mock) triple.
inline RunResult run_pipeline(const PipelineConfig& config, Backend& backend,
                              DiversityPool& pool, const PromptLibrary& prompts,
                              const RootRng& rng) {
    config.validate();

    std::vector<AnchorRef> anchors;
    if (config.modality == Modality::AnchoredImage) anchors = load_anchors(config.anchor_file);

    const auto& kinds = text_composition_kinds();

    RunResult result;
    result.samples.resize(config.target_n);
    result.stats.stage_clocks.resize(config.target_n);

    std::mutex mu;
    std::condition_variable cv;
    std::size_t next_admit = 0;
    std::atomic<std::size_t> next_slot{0};
    std::atomic<std::uint64_t> clock{0};
    std::array<std::atomic<std::size_t>, 4> stage_counts{};
    std::exception_ptr failure;
    std::vector<std::string> extraction_paths(config.target_n);
    std::vector<std::size_t> slot_regens(config.target_n, 0);
    std::vector<std::string> warnings;
    std::mutex warn_mu;

    auto synthesize_once = [&](std::size_t slot, int attempt, SynthesisEngine& engine,
                               std::array<std::uint64_t, 4>& clocks,
                               std::string& path) -> MultiHopSample {
        std::vector<std::string> local_warnings;
        const std::uint64_t base = rng.derive("slot", slot) ^ (static_cast<std::uint64_t>(attempt)
                                                               * 0x9e3779b97f4a7c15ull);
        MultiHopSample sample;
        if (config.modality == Modality::Text) {
            const MetaTopic& topic = TopicSampler::for_slot(config.topic_policy, rng, slot);
            std::optional<CompositionType> forced;
            if (config.relation_policy == RelationPolicy::Balanced)
                forced = kinds[slot % kinds.size()];
            std::string context = engine.generate_context(topic, base + 1);
            clocks[0] = ++clock;
            ++stage_counts[0];
            SeedBatch batch = engine.generate_seed_batch(context, config.max_seeds, forced, topic,
                                                         &local_warnings, base + 10);
            clocks[1] = ++clock;
            ++stage_counts[1];
            RawComposition raw = engine.compose_multihop(batch, context, base + 20);
            clocks[2] = ++clock;
            ++stage_counts[2];
            sample = engine.extract_structured(raw, batch, "sample-" + std::to_string(slot), &path,
                                               base + 30);
            clocks[3] = ++clock;
            ++stage_counts[3];
        } else {
            AnchorRef anchor = detail::anchor_for_slot(anchors, rng, slot);
            clocks[0] = ++clock;  // anchored mode has no stage-1 generation call
            SeedBatch batch = engine.generate_seed_batch_multimodal(anchor, config.max_seeds,
                                                                    &local_warnings, base + 10);
            clocks[1] = ++clock;
            ++stage_counts[1];
            RawComposition raw = engine.compose_multihop(batch, {}, base + 20);
            clocks[2] = ++clock;
            ++stage_counts[2];
            sample = engine.extract_structured(raw, batch, "sample-" + std::to_string(slot), &path,
                                               base + 30);
            clocks[3] = ++clock;
            ++stage_counts[3];
        }
        sample.others["extraction_path"] = path;
        sample.others["slot"] = std::to_string(slot);
        if (!local_warnings.empty()) {
            std::lock_guard lock(warn_mu);
            warnings.insert(warnings.end(), local_warnings.begin(), local_warnings.end());
        }
        return sample;
    };

    auto novelty_text = [&](const MultiHopSample& s) {
        if (config.novelty == NoveltyGranularity::SampleLevel) return s.question;
        std::string joined;
        for (const auto& q : s.seeds.seeds) joined += q.text + "\n";
        return joined;
    };

    auto worker = [&] {
        for (;;) {
            std::size_t slot = next_slot.fetch_add(1);
            if (slot >= config.target_n) return;
            try {
                Language lang = detail::language_for_slot(config.language, rng, slot);
                SynthesisEngine engine(backend, prompts, lang, 0.7, config.blank_retries);

                int attempt = 0;
                std::array<std::uint64_t, 4> clocks{};
                std::string path;
                MultiHopSample candidate = synthesize_once(slot, attempt, engine, clocks, path);

                std::unique_lock lock(mu);
                cv.wait(lock, [&] { return next_admit == slot || failure; });
                if (failure) return;
                for (;;) {
                    AdmitResult r = pool.admit_vector(
                        candidate.id + "/a" + std::to_string(attempt),
                        backend.embed({novelty_text(candidate)}).front());
                    if (std::holds_alternative<Admitted>(r)) break;
                    ++attempt;
                    ++slot_regens[slot];
                    if (attempt >= config.max_regenerations)
                        throw PoolStarvation("slot " + std::to_string(slot) + " exceeded " +
                                             std::to_string(config.max_regenerations) +
                                             " regenerations");
                    candidate = synthesize_once(slot, attempt, engine, clocks, path);
                }
                auto vr = validate_sample(candidate);
                if (!vr.ok())
                    throw ExtractionFailed("slot " + std::to_string(slot) +
                                           " produced an invalid sample: " + vr.errors[0].field);
                result.samples[slot] = std::move(candidate);
                result.stats.stage_clocks[slot] = clocks;
                extraction_paths[slot] = path;
                ++next_admit;
                lock.unlock();
                cv.notify_all();
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                cv.notify_all();
                return;
            }
        }
    };

    if (config.workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < config.workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    if (next_admit != config.target_n) throw Error("pipeline ended before reaching N");

    for (std::size_t i = 0; i < config.target_n; ++i) {
        ++result.stats.relation_histogram[to_string(result.samples[i].composition)];
        ++result.stats.extraction_paths[extraction_paths[i]];
        result.stats.regenerations += slot_regens[i];
    }
    result.stats.stage_calls["stage1_context"] = stage_counts[0];
    result.stats.stage_calls["stage2_seeds"] = stage_counts[1];
    result.stats.stage_calls["stage3_composition"] = stage_counts[2];
    result.stats.stage_calls["stage4_extraction"] = stage_counts[3];
    result.stats.warnings = std::move(warnings);
    return result;
}

}  // namespace mindgym
