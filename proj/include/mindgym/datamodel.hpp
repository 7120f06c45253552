#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mindgym/errors.hpp"
#include "mindgym/text.hpp"

namespace mindgym {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Dimension { Quantitative, Causal, Temporal, SocialEthical };

enum class Language { CN, EN, MIX };

enum class CompositionType {
    // text-modal
    Bridging,
    Comparison,
    Temporal,
    // multimodal
    VisualTextualAlignment,
    SpatialReasoning,
    CausalInference,
    ContextualSynthesis,
};

enum class Phase { GuidedAnswering, ReasonReconstruction, PairedReasoning, AutonomousSolving };

inline bool is_multimodal(CompositionType k) {
    return k == CompositionType::VisualTextualAlignment || k == CompositionType::SpatialReasoning ||
           k == CompositionType::CausalInference || k == CompositionType::ContextualSynthesis;
}

inline const std::vector<CompositionType>& text_composition_kinds() {
    static const std::vector<CompositionType> kinds = {
        CompositionType::Bridging, CompositionType::Comparison, CompositionType::Temporal};
    return kinds;
}

inline const std::vector<CompositionType>& multimodal_composition_kinds() {
    static const std::vector<CompositionType> kinds = {
        CompositionType::VisualTextualAlignment, CompositionType::SpatialReasoning,
        CompositionType::CausalInference, CompositionType::ContextualSynthesis};
    return kinds;
}

inline std::string to_string(CompositionType k) {
    switch (k) {
        case CompositionType::Bridging: return "Bridging";
        case CompositionType::Comparison: return "Comparison";
        case CompositionType::Temporal: return "Temporal";
        case CompositionType::VisualTextualAlignment: return "Visual-Textual Alignment";
        case CompositionType::SpatialReasoning: return "Spatial Reasoning";
        case CompositionType::CausalInference: return "Causal Inference";
        case CompositionType::ContextualSynthesis: return "Contextual Synthesis";
    }
    throw Error("unknown CompositionType");
}

inline std::optional<CompositionType> composition_from_string(std::string_view label) {
    std::string key = to_lower_ascii(trim(label));
    // label matching tolerates hyphen/space variation in model replies
    std::string norm;
    for (char c : key)
        if (c != '-' && c != ' ' && c != '_') norm += c;
    if (norm == "bridging") return CompositionType::Bridging;
    if (norm == "comparison") return CompositionType::Comparison;
    if (norm == "temporal") return CompositionType::Temporal;
    if (norm == "visualtextualalignment") return CompositionType::VisualTextualAlignment;
    if (norm == "spatialreasoning") return CompositionType::SpatialReasoning;
    if (norm == "causalinference") return CompositionType::CausalInference;
    if (norm == "contextualsynthesis") return CompositionType::ContextualSynthesis;
    return std::nullopt;
}

inline std::string to_string(Language l) {
    switch (l) {
        case Language::CN: return "CN";
        case Language::EN: return "EN";
        case Language::MIX: return "MIX";
    }
    throw Error("unknown Language");
}

inline Language language_from_string(std::string_view s) {
    std::string key = to_lower_ascii(trim(s));
    if (key == "cn" || key == "zh" || key == "chinese") return Language::CN;
    if (key == "en" || key == "english") return Language::EN;
    if (key == "mix") return Language::MIX;
    throw ConfigError("unknown language: " + std::string(s));
}

inline std::string to_string(Dimension d) {
    switch (d) {
        case Dimension::Quantitative: return "quantitative";
        case Dimension::Causal: return "causal";
        case Dimension::Temporal: return "temporal";
        case Dimension::SocialEthical: return "social-ethical";
    }
    throw Error("unknown Dimension");
}

inline Dimension dimension_from_string(std::string_view s) {
    std::string key = to_lower_ascii(trim(s));
    if (key == "quantitative") return Dimension::Quantitative;
    if (key == "causal") return Dimension::Causal;
    if (key == "temporal") return Dimension::Temporal;
    if (key == "social-ethical") return Dimension::SocialEthical;
    throw ConfigError("unknown dimension: " + std::string(s));
}

inline std::string to_string(Phase p) {
    switch (p) {
        case Phase::GuidedAnswering: return "GuidedAnswering";
        case Phase::ReasonReconstruction: return "ReasonReconstruction";
        case Phase::PairedReasoning: return "PairedReasoning";
        case Phase::AutonomousSolving: return "AutonomousSolving";
    }
    throw Error("unknown Phase");
}

inline Phase phase_from_string(std::string_view s) {
    std::string key = to_lower_ascii(trim(s));
    if (key == "guidedanswering" || key == "guided") return Phase::GuidedAnswering;
    if (key == "reasonreconstruction" || key == "reconstruction") return Phase::ReasonReconstruction;
    if (key == "pairedreasoning" || key == "paired") return Phase::PairedReasoning;
    if (key == "autonomoussolving" || key == "autonomous") return Phase::AutonomousSolving;
    throw ConfigError("unknown phase: " + std::string(s));
}

inline const std::vector<Phase>& all_phases() {
    static const std::vector<Phase> phases = {Phase::GuidedAnswering, Phase::ReasonReconstruction,
                                              Phase::PairedReasoning, Phase::AutonomousSolving};
    return phases;
}

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

struct MetaTopic {
    std::string id;
    std::string name;
    std::string description;
    Dimension dimension = Dimension::Quantitative;

    bool operator==(const MetaTopic&) const = default;
};

// The bundled registry of eight meta-topics spanning the four reasoning
// dimensions.
inline const std::vector<MetaTopic>& meta_topic_registry() {
    static const std::vector<MetaTopic> topics = {
        {"math", "Mathematical Reasoning", "Solving quantitative problems using numbers and formulas.",
         Dimension::Quantitative},
        {"science", "Scientific Knowledge", "Understanding natural laws and scientific principles.",
         Dimension::Causal},
        {"logic", "Logical Deduction", "Forming conclusions through logical progression from premises.",
         Dimension::Causal},
        {"technical", "Technical Procedures", "Following step-by-step instructions for practical tasks.",
         Dimension::Temporal},
        {"history", "Historical Events", "Analyzing past events and their consequences.",
         Dimension::Temporal},
        {"ethics", "Ethical Considerations", "Evaluating decisions through moral frameworks.",
         Dimension::SocialEthical},
        {"economics", "Economic Principles", "Studying resource allocation and valuation.",
         Dimension::Quantitative},
        {"psychology", "Psychological Insights", "Exploring human behavior and cognition.",
         Dimension::SocialEthical},
    };
    return topics;
}

inline const MetaTopic& meta_topic_by_name(std::string_view name) {
    for (const auto& t : meta_topic_registry())
        if (t.name == name) return t;
    throw ConfigError("unknown meta-topic: " + std::string(name));
}

struct PromptBundle {
    std::string cognitive;  // constant across all stages of one run
    std::string context;
    std::string task;
    Language language = Language::CN;
};

struct SeedQuestion {
    std::string id;
    std::string text;
    std::optional<std::vector<double>> embedding;

    bool operator==(const SeedQuestion&) const = default;
};

struct AnchorRef {
    std::string image_path;
    std::string original_question;
    std::string original_answer;
    std::string source_dataset;

    bool operator==(const AnchorRef&) const = default;
};

using ContextRef = std::variant<std::string, AnchorRef>;

struct SeedBatch {
    std::vector<SeedQuestion> seeds;
    CompositionType relation = CompositionType::Bridging;
    ContextRef source_context;
    std::optional<MetaTopic> topic;

    bool operator==(const SeedBatch&) const = default;
};

struct MultiHopSample {
    std::string id;
    std::string question;
    std::string answer;
    std::string thinking;
    CompositionType composition = CompositionType::Bridging;
    SeedBatch seeds;
    ContextRef context;
    std::map<std::string, std::string> others;  // opaque, never interpreted
    Language language = Language::CN;

    bool operator==(const MultiHopSample&) const = default;
};

struct CurriculumRecord {
    Phase phase = Phase::GuidedAnswering;
    std::string input;
    std::string target;
    std::string sample_id;

    bool operator==(const CurriculumRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationError {
    std::string field;
    std::string rule;

    bool operator==(const ValidationError&) const = default;
};

struct ValidationResult {
    std::vector<ValidationError> errors;
    bool ok() const { return errors.empty(); }
};

// Total over arbitrary field contents: reports violations, never faults.
inline ValidationResult validate_sample(const MultiHopSample& sample) {
    ValidationResult r;
    auto add = [&](std::string field, std::string rule) {
        r.errors.push_back({std::move(field), std::move(rule)});
    };

    if (sample.id.empty()) add("id", "must be non-empty");
    if (sample.question.empty()) add("question", "must be non-empty");
    if (sample.answer.empty()) add("answer", "must be non-empty");
    if (sample.thinking.empty()) add("thinking", "must be non-empty");
    if (sample.language == Language::MIX)
        add("language", "per-sample language must be CN or EN");

    if (sample.composition != sample.seeds.relation)
        add("composition", "must equal seeds.relation");

    if (sample.seeds.seeds.empty()) add("seeds.seeds", "batch must hold at least one seed");
    std::optional<std::size_t> dim;
    for (std::size_t i = 0; i < sample.seeds.seeds.size(); ++i) {
        const auto& s = sample.seeds.seeds[i];
        std::string prefix = "seeds.seeds[" + std::to_string(i) + "]";
        if (s.text.empty()) add(prefix + ".text", "must be non-empty");
        if (s.embedding) {
            if (!dim) dim = s.embedding->size();
            else if (*dim != s.embedding->size())
                add(prefix + ".embedding", "dimension differs within sample");
        }
    }

    const bool anchored = std::holds_alternative<AnchorRef>(sample.context);
    if (anchored && !is_multimodal(sample.composition))
        add("composition", "text-modal kind on image-anchored sample");
    if (!anchored && is_multimodal(sample.composition))
        add("composition", "multimodal kind on text-only sample");
    if (anchored) {
        const auto& a = std::get<AnchorRef>(sample.context);
        if (a.image_path.empty()) add("context.image_path", "must be non-empty");
        if (a.original_question.empty()) add("context.original_question", "must be non-empty");
        if (a.original_answer.empty()) add("context.original_answer", "must be non-empty");
    }
    return r;
}

inline std::vector<std::string> duplicate_ids(const std::vector<MultiHopSample>& samples) {
    std::map<std::string, int> counts;
    for (const auto& s : samples) ++counts[s.id];
    std::vector<std::string> dups;
    for (const auto& [id, n] : counts)
        if (n > 1) dups.push_back(id);
    return dups;
}

// ---------------------------------------------------------------------------
// JSON (persistence format: one record per JSONL line)
// ---------------------------------------------------------------------------

inline void to_json(json& j, const MetaTopic& t) {
    j = json{{"id", t.id},
             {"name", t.name},
             {"description", t.description},
             {"dimension", to_string(t.dimension)}};
}

inline void from_json(const json& j, MetaTopic& t) {
    j.at("id").get_to(t.id);
    j.at("name").get_to(t.name);
    j.at("description").get_to(t.description);
    t.dimension = dimension_from_string(j.at("dimension").get<std::string>());
}

inline void to_json(json& j, const SeedQuestion& s) {
    j = json{{"id", s.id}, {"text", s.text}};
    if (s.embedding) j["embedding"] = *s.embedding;
}

inline void from_json(const json& j, SeedQuestion& s) {
    j.at("id").get_to(s.id);
    j.at("text").get_to(s.text);
    if (j.contains("embedding")) s.embedding = j.at("embedding").get<std::vector<double>>();
    else s.embedding.reset();
}

inline void to_json(json& j, const AnchorRef& a) {
    j = json{{"image_path", a.image_path},
             {"original_question", a.original_question},
             {"original_answer", a.original_answer},
             {"source_dataset", a.source_dataset}};
}

inline void from_json(const json& j, AnchorRef& a) {
    j.at("image_path").get_to(a.image_path);
    j.at("original_question").get_to(a.original_question);
    j.at("original_answer").get_to(a.original_answer);
    j.at("source_dataset").get_to(a.source_dataset);
}

inline json context_to_json(const ContextRef& c) {
    if (std::holds_alternative<std::string>(c)) return json(std::get<std::string>(c));
    return json(std::get<AnchorRef>(c));
}

inline ContextRef context_from_json(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    return j.get<AnchorRef>();
}

inline void to_json(json& j, const SeedBatch& b) {
    j = json{{"seeds", b.seeds},
             {"relation", to_string(b.relation)},
             {"source_context", context_to_json(b.source_context)}};
    if (b.topic) j["topic"] = *b.topic;
}

inline void from_json(const json& j, SeedBatch& b) {
    j.at("seeds").get_to(b.seeds);
    auto rel = composition_from_string(j.at("relation").get<std::string>());
    if (!rel) throw ProtocolError("unknown relation label: " + j.at("relation").dump());
    b.relation = *rel;
    b.source_context = context_from_json(j.at("source_context"));
    if (j.contains("topic")) b.topic = j.at("topic").get<MetaTopic>();
    else b.topic.reset();
}

inline void to_json(json& j, const MultiHopSample& s) {
    j = json{{"id", s.id},
             {"question", s.question},
             {"answer", s.answer},
             {"thinking", s.thinking},
             {"composition", to_string(s.composition)},
             {"seeds", s.seeds},
             {"context", context_to_json(s.context)},
             {"others", s.others},
             {"language", to_string(s.language)}};
}

inline void from_json(const json& j, MultiHopSample& s) {
    j.at("id").get_to(s.id);
    j.at("question").get_to(s.question);
    j.at("answer").get_to(s.answer);
    j.at("thinking").get_to(s.thinking);
    auto comp = composition_from_string(j.at("composition").get<std::string>());
    if (!comp) throw ProtocolError("unknown composition label: " + j.at("composition").dump());
    s.composition = *comp;
    j.at("seeds").get_to(s.seeds);
    s.context = context_from_json(j.at("context"));
    j.at("others").get_to(s.others);
    s.language = language_from_string(j.at("language").get<std::string>());
}

inline void to_json(json& j, const CurriculumRecord& r) {
    j = json{{"phase", to_string(r.phase)},
             {"input", r.input},
             {"target", r.target},
             {"sample_id", r.sample_id}};
}

inline void from_json(const json& j, CurriculumRecord& r) {
    r.phase = phase_from_string(j.at("phase").get<std::string>());
    j.at("input").get_to(r.input);
    j.at("target").get_to(r.target);
    j.at("sample_id").get_to(r.sample_id);
}

}  // namespace mindgym
