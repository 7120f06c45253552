#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mindgym/datamodel.hpp"
#include "mindgym/errors.hpp"
#include "mindgym/gateway.hpp"
#include "mindgym/prompts.hpp"
#include "mindgym/text.hpp"

namespace mindgym {

inline constexpr const char* kLexiconVersion = "lex-1";

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

enum class Tokenizer { WhitespacePunct, CJKCharAware };

namespace detail {

inline bool is_punct_cp(char32_t cp) {
    if (cp < 128) return std::ispunct(static_cast<int>(cp)) != 0;
    // general punctuation, CJK symbols/punctuation, fullwidth forms
    return (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x3000 && cp <= 0x303F) ||
           (cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
           (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65);
}

inline bool is_space_cp(char32_t cp) {
    if (cp < 128) return std::isspace(static_cast<int>(cp)) != 0;
    return cp == 0x3000 || cp == 0x00A0;
}

}  // namespace detail

// Splits on whitespace and punctuation boundaries; punctuation is a
// separator, not a token. CJKCharAware additionally emits each CJK character
// as its own token.
inline std::vector<std::string> tokenize(std::string_view text, Tokenizer tok) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        char32_t cp = utf8_next(text, i);
        if (detail::is_space_cp(cp) || detail::is_punct_cp(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (tok == Tokenizer::CJKCharAware && is_cjk(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            tokens.emplace_back(text.substr(start, i - start));
            continue;
        }
        current += text.substr(start, i - start);
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline std::size_t token_count(std::string_view text, Tokenizer tok) {
    return tokenize(text, tok).size();
}

// Character count as Unicode scalar values.
inline std::size_t length(std::string_view text) { return utf8_length(text); }

// ---------------------------------------------------------------------------
// Action-verb counting
// ---------------------------------------------------------------------------

// Bundled lexicons, versioned as kLexiconVersion. EN matching is case-folded
// over word tokens; CN matching counts non-overlapping substring occurrences.
inline const std::set<std::string>& action_verb_lexicon_en() {
    static const std::set<std::string> verbs = {
        "analyze", "apply",    "arrange", "build",   "calculate", "check",    "choose",
        "combine", "compare",  "compute", "conclude", "construct", "convert",  "count",
        "derive",  "describe", "design",  "determine", "estimate", "evaluate", "explain",
        "find",    "identify", "infer",   "list",    "measure",   "plan",     "predict",
        "prove",   "rank",     "run",     "select",  "solve",     "sort",     "test",
        "verify"};
    return verbs;
}

inline const std::vector<std::string>& action_verb_lexicon_cn() {
    static const std::vector<std::string> verbs = {
        "计算", "比较", "分析", "解释", "确定", "验证", "证明", "评估", "判断", "选择",
        "列出", "描述", "推断", "推导", "构建", "设计", "测量", "预测", "排序", "求解"};
    return verbs;
}

inline std::size_t action_count(std::string_view text) {
    std::size_t count = 0;
    for (const auto& tok : tokenize(text, Tokenizer::WhitespacePunct)) {
        if (action_verb_lexicon_en().count(to_lower_ascii(tok))) ++count;
    }
    std::string s(text);
    for (const auto& verb : action_verb_lexicon_cn()) {
        std::size_t pos = 0;
        while ((pos = s.find(verb, pos)) != std::string::npos) {
            ++count;
            pos += verb.size();
        }
    }
    return count;
}

// ---------------------------------------------------------------------------
// Number extraction from judge replies
// ---------------------------------------------------------------------------

inline std::optional<double> first_number(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isdigit(static_cast<unsigned char>(text[i])) ||
            (text[i] == '-' && i + 1 < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            std::size_t j = i + (text[i] == '-' ? 1 : 0);
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            if (j < text.size() && text[j] == '.') {
                ++j;
                while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            }
            return std::stod(std::string(text.substr(i, j - i)));
        }
        ++i;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Judge-backed metrics
// ---------------------------------------------------------------------------

struct QualityScore {
    double value = 0.0;
    bool clamped = false;
};

// Prompts the judge with the bundled quality rubric at temperature 0 and
// parses a single score in [0,1], clamping out-of-range replies.
inline QualityScore quality_score(const std::string& record_text, Backend& judge,
                                  const PromptLibrary& prompts, int retries = 2) {
    ChatRequest req;
    req.temperature = 0.0;
    req.messages.push_back({Role::User,
                            interpolate(prompts.quality_rubric, {{"record", record_text}}), {}});
    for (int attempt = 0; attempt <= retries; ++attempt) {
        std::string reply = judge.chat(req);
        if (auto n = first_number(reply)) {
            QualityScore s;
            s.value = std::clamp(*n, 0.0, 1.0);
            s.clamped = (*n != s.value);
            return s;
        }
    }
    throw JudgeUnparseable("quality judge returned no numeric score after " +
                           std::to_string(retries + 1) + " attempts");
}

enum class DependencyAnalyzer { Heuristic, JudgeBased };

// Shallow-pattern count of noun phrases attached to a governing head.
// Bundled rules: EN possessives ('s), of-phrases (the token "of"), and the
// relative markers "which"/"whose"; CN attributive particle 的.
inline double dependency_count_heuristic(std::string_view text) {
    std::size_t count = 0;
    auto tokens = tokenize(text, Tokenizer::WhitespacePunct);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string low = to_lower_ascii(tokens[i]);
        if ((low == "of" || low == "which" || low == "whose") && i > 0) ++count;
    }
    std::string s(text);
    for (const char* apostrophe : {"'s", "\xE2\x80\x99s"}) {
        std::string m(apostrophe);
        std::size_t pos = 0;
        while ((pos = s.find(m, pos)) != std::string::npos) {
            std::size_t after = pos + m.size();
            bool word_before = pos > 0 && std::isalnum(static_cast<unsigned char>(s[pos - 1]));
            bool boundary_after =
                after >= s.size() || !std::isalnum(static_cast<unsigned char>(s[after]));
            if (word_before && boundary_after) ++count;
            pos = after;
        }
    }
    std::size_t pos = 0;
    while ((pos = s.find("的", pos)) != std::string::npos) {
        ++count;
        pos += 3;
    }
    return static_cast<double>(count);
}

inline double dependency_count(const std::string& text, DependencyAnalyzer analyzer,
                               Backend* judge = nullptr, const PromptLibrary* prompts = nullptr,
                               int retries = 2) {
    if (text.empty()) return 0.0;
    if (analyzer == DependencyAnalyzer::Heuristic) return dependency_count_heuristic(text);
    if (!judge || !prompts) throw ConfigError("JudgeBased dependency analyzer needs a backend");
    ChatRequest req;
    req.temperature = 0.0;
    req.messages.push_back({Role::User,
                            interpolate(prompts->dependency_rubric, {{"record", text}}), {}});
    for (int attempt = 0; attempt <= retries; ++attempt) {
        std::string reply = judge->chat(req);
        if (auto n = first_number(reply)) return std::max(0.0, *n);
    }
    throw JudgeUnparseable("dependency judge returned no numeric count");
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct MetricsReport {
    double quality_mean = 0.0;
    double quality_std = 0.0;  // population standard deviation
    double action_mean = 0.0;
    double dependency_mean = 0.0;
    double token_mean = 0.0;
    double length_mean = 0.0;
    std::size_t n = 0;
    std::string lexicon_version = kLexiconVersion;
};

inline void to_json(json& j, const MetricsReport& r) {
    j = json{{"quality_mean", r.quality_mean},   {"quality_std", r.quality_std},
             {"action_mean", r.action_mean},     {"dependency_mean", r.dependency_mean},
             {"token_mean", r.token_mean},       {"length_mean", r.length_mean},
             {"n", r.n},                         {"lexicon_version", r.lexicon_version}};
}

inline void from_json(const json& j, MetricsReport& r) {
    j.at("quality_mean").get_to(r.quality_mean);
    j.at("quality_std").get_to(r.quality_std);
    r.action_mean = j.value("action_mean", 0.0);
    r.dependency_mean = j.value("dependency_mean", 0.0);
    r.token_mean = j.value("token_mean", 0.0);
    r.length_mean = j.value("length_mean", 0.0);
    r.n = j.value("n", std::size_t{0});
    r.lexicon_version = j.value("lexicon_version", std::string(kLexiconVersion));
}

struct ComparisonReport {
    double quality_improvement_pct = 0.0;
    double std_reduction_pct = 0.0;
};

inline void to_json(json& j, const ComparisonReport& r) {
    j = json{{"quality_improvement_pct", r.quality_improvement_pct},
             {"std_reduction_pct", r.std_reduction_pct}};
}

struct AnalysisBackends {
    Backend* quality_judge = nullptr;  // required
    DependencyAnalyzer dependency = DependencyAnalyzer::Heuristic;
    Backend* dependency_judge = nullptr;  // required for JudgeBased
    const PromptLibrary* prompts = nullptr;
};

struct RecordMetrics {
    double quality = 0.0;
    std::size_t action = 0;
    double dependency = 0.0;
    std::size_t token = 0;
    std::size_t chars = 0;
};

inline RecordMetrics analyze_record(const std::string& text, const AnalysisBackends& backends,
                                    Tokenizer tok) {
    if (!backends.quality_judge || !backends.prompts)
        throw ConfigError("analysis requires a quality judge backend and prompts");
    RecordMetrics m;
    m.quality = quality_score(text, *backends.quality_judge, *backends.prompts).value;
    m.action = action_count(text);
    m.dependency = dependency_count(text, backends.dependency,
                                    backends.dependency_judge ? backends.dependency_judge
                                                              : backends.quality_judge,
                                    backends.prompts);
    m.token = token_count(text, tok);
    m.chars = length(text);
    return m;
}

inline MetricsReport analyze_dataset(const std::vector<std::string>& records,
                                     const AnalysisBackends& backends, Tokenizer tok,
                                     std::vector<RecordMetrics>* per_record = nullptr) {
    if (records.empty()) throw ConfigError("analyze_dataset: at least one record required");
    std::vector<RecordMetrics> metrics;
    metrics.reserve(records.size());
    for (const auto& r : records) metrics.push_back(analyze_record(r, backends, tok));

    MetricsReport report;
    report.n = metrics.size();
    double qsum = 0.0;
    for (const auto& m : metrics) {
        qsum += m.quality;
        report.action_mean += static_cast<double>(m.action);
        report.dependency_mean += m.dependency;
        report.token_mean += static_cast<double>(m.token);
        report.length_mean += static_cast<double>(m.chars);
    }
    const double n = static_cast<double>(metrics.size());
    report.quality_mean = qsum / n;
    report.action_mean /= n;
    report.dependency_mean /= n;
    report.token_mean /= n;
    report.length_mean /= n;
    double var = 0.0;
    for (const auto& m : metrics) var += (m.quality - report.quality_mean) *
                                         (m.quality - report.quality_mean);
    report.quality_std = std::sqrt(var / n);
    if (per_record) *per_record = std::move(metrics);
    return report;
}

// Candidate vs. unweighted mean over baseline datasets.
inline ComparisonReport compare_reports(const MetricsReport& candidate,
                                        const std::vector<MetricsReport>& baselines) {
    if (baselines.empty()) throw ConfigError("compare_reports: at least one baseline required");
    double mean_of_means = 0.0, mean_of_stds = 0.0;
    for (const auto& b : baselines) {
        mean_of_means += b.quality_mean;
        mean_of_stds += b.quality_std;
    }
    mean_of_means /= static_cast<double>(baselines.size());
    mean_of_stds /= static_cast<double>(baselines.size());
    if (mean_of_means == 0.0 || mean_of_stds == 0.0)
        throw DivisionDegenerate("baseline mean of means or stds is zero");
    ComparisonReport r;
    r.quality_improvement_pct = 100.0 * (candidate.quality_mean / mean_of_means - 1.0);
    r.std_reduction_pct = 100.0 * (1.0 - candidate.quality_std / mean_of_stds);
    return r;
}

inline std::map<std::string, std::size_t> relation_distribution(
    const std::vector<MultiHopSample>& samples) {
    std::map<std::string, std::size_t> hist;
    for (auto k : text_composition_kinds()) hist[to_string(k)] = 0;
    for (auto k : multimodal_composition_kinds()) hist[to_string(k)] = 0;
    for (const auto& s : samples) ++hist[to_string(s.composition)];
    return hist;
}

}  // namespace mindgym
