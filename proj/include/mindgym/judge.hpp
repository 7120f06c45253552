#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mindgym/errors.hpp"
#include "mindgym/gateway.hpp"
#include "mindgym/prompts.hpp"
#include "mindgym/text.hpp"

namespace mindgym {

struct JudgeVerdict {
    int accuracy_raw = 0;
    int accuracy_finetuned = 0;
    int depth_raw = 0;
    int depth_finetuned = 0;
    // The scoring rubric defines breadth 0-3 but replies may omit the keys;
    // absent breadth is tracked, not an error.
    std::optional<int> breadth_raw;
    std::optional<int> breadth_finetuned;
    std::vector<std::string> comparison;

    bool has_breadth() const { return breadth_raw.has_value() && breadth_finetuned.has_value(); }

    bool operator==(const JudgeVerdict&) const = default;
};

inline void to_json(json& j, const JudgeVerdict& v) {
    j = json{{"accuracy_raw", v.accuracy_raw},
             {"accuracy_finetuned", v.accuracy_finetuned},
             {"depth_raw", v.depth_raw},
             {"depth_finetuned", v.depth_finetuned},
             {"comparison", v.comparison}};
    if (v.breadth_raw) j["breadth_raw"] = *v.breadth_raw;
    if (v.breadth_finetuned) j["breadth_finetuned"] = *v.breadth_finetuned;
}

namespace detail {

// Extracts the first parseable JSON object from a reply, tolerating
// surrounding prose and code fences. Reports whether more than one object
// followed it.
inline std::optional<json> first_json_object(const std::string& text, bool* multiple) {
    std::optional<json> first;
    std::size_t pos = 0;
    int objects = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t end = std::string::npos;
        for (std::size_t i = pos; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) {
                    end = i;
                    break;
                }
            }
        }
        if (end == std::string::npos) break;
        try {
            json j = json::parse(text.substr(pos, end - pos + 1));
            if (j.is_object()) {
                ++objects;
                if (!first) first = std::move(j);
            }
        } catch (const json::exception&) {
            // not a valid object at this brace; keep scanning
        }
        pos = end + 1;
    }
    if (multiple) *multiple = objects > 1;
    return first;
}

inline int require_range(const json& j, const char* key, int lo, int hi) {
    if (!j.contains(key)) throw JudgeUnparseable(std::string("missing key: ") + key);
    if (!j.at(key).is_number_integer())
        throw JudgeUnparseable(std::string("non-integer value for key: ") + key);
    int v = j.at(key).get<int>();
    if (v < lo || v > hi)
        throw JudgeUnparseable(std::string(key) + "=" + std::to_string(v) + " outside [" +
                               std::to_string(lo) + "," + std::to_string(hi) + "]");
    return v;
}

}  // namespace detail

inline JudgeVerdict parse_verdict(const std::string& reply_text,
                                  std::vector<std::string>* warnings = nullptr) {
    bool multiple = false;
    auto obj = detail::first_json_object(reply_text, &multiple);
    if (!obj) throw JudgeUnparseable("no JSON object found in reply");
    if (multiple && warnings) warnings->push_back("multiple JSON objects in reply; first used");

    JudgeVerdict v;
    v.accuracy_raw = detail::require_range(*obj, "accuracy_raw", 0, 2);
    v.accuracy_finetuned = detail::require_range(*obj, "accuracy_finetuned", 0, 2);
    v.depth_raw = detail::require_range(*obj, "depth_raw", 0, 3);
    v.depth_finetuned = detail::require_range(*obj, "depth_finetuned", 0, 3);

    const bool has_braw = obj->contains("breadth_raw");
    const bool has_bft = obj->contains("breadth_finetuned");
    if (has_braw != has_bft)
        throw JudgeUnparseable("breadth keys must be present together or absent together");
    if (has_braw) {
        v.breadth_raw = detail::require_range(*obj, "breadth_raw", 0, 3);
        v.breadth_finetuned = detail::require_range(*obj, "breadth_finetuned", 0, 3);
    } else if (warnings) {
        warnings->push_back("breadth keys absent from reply");
    }
    if (obj->contains("comparison")) {
        if (!obj->at("comparison").is_array())
            throw JudgeUnparseable("comparison must be an array of strings");
        for (const auto& item : obj->at("comparison")) {
            if (!item.is_string()) throw JudgeUnparseable("comparison entries must be strings");
            v.comparison.push_back(item.get<std::string>());
        }
    }
    return v;
}

// Issues the pairwise-comparison prompt at temperature 0 and parses the
// verdict, retrying unparseable replies up to the retry budget.
inline JudgeVerdict judge_pair(const std::string& question, const std::string& pred_raw,
                               const std::string& pred_finetuned, Backend& gateway,
                               const PromptLibrary& prompts, int retries = 2,
                               std::vector<std::string>* warnings = nullptr) {
    if (question.empty() || pred_raw.empty() || pred_finetuned.empty())
        throw ConfigError("judge_pair: question and both predictions must be non-empty");
    ChatRequest req;
    req.temperature = 0.0;
    req.messages.push_back({Role::User,
                            interpolate(prompts.judge_pair, {{"question", question},
                                                             {"pred_raw", pred_raw},
                                                             {"pred_finetuned", pred_finetuned}}),
                            {}});
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        std::string reply = gateway.chat(req);
        try {
            return parse_verdict(reply, warnings);
        } catch (const JudgeUnparseable& e) {
            last_error = e.what();
        }
    }
    throw JudgeUnparseable("judge reply unparseable after " + std::to_string(retries + 1) +
                           " attempts: " + last_error);
}

struct WinRateReport {
    double depth_improvement_pct = 0.0;
    double breadth_improvement_pct = 0.0;
    double avg_improvement_pct = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_breadth = 0;  // verdicts that carried breadth scores
    std::string formula = "ratio-of-sums";
};

inline void to_json(json& j, const WinRateReport& r) {
    j = json{{"depth_improvement_pct", r.depth_improvement_pct},
             {"breadth_improvement_pct", r.breadth_improvement_pct},
             {"avg_improvement_pct", r.avg_improvement_pct},
             {"n_pairs", r.n_pairs},
             {"n_breadth", r.n_breadth},
             {"formula", r.formula}};
}

// Per-dimension relative improvement as ratio of summed scores; verdicts
// without breadth are excluded from the breadth sums only.
inline WinRateReport aggregate(const std::vector<JudgeVerdict>& verdicts) {
    if (verdicts.empty()) throw ConfigError("aggregate: at least one verdict required");
    long depth_raw = 0, depth_ft = 0, breadth_raw = 0, breadth_ft = 0;
    std::size_t n_breadth = 0;
    for (const auto& v : verdicts) {
        depth_raw += v.depth_raw;
        depth_ft += v.depth_finetuned;
        if (v.has_breadth()) {
            breadth_raw += *v.breadth_raw;
            breadth_ft += *v.breadth_finetuned;
            ++n_breadth;
        }
    }
    if (depth_raw == 0) throw DegenerateDenominator("sum of raw depth scores is zero");
    if (breadth_raw == 0) throw DegenerateDenominator("sum of raw breadth scores is zero");
    WinRateReport r;
    r.n_pairs = verdicts.size();
    r.n_breadth = n_breadth;
    r.depth_improvement_pct =
        100.0 * static_cast<double>(depth_ft - depth_raw) / static_cast<double>(depth_raw);
    r.breadth_improvement_pct =
        100.0 * static_cast<double>(breadth_ft - breadth_raw) / static_cast<double>(breadth_raw);
    r.avg_improvement_pct = (r.depth_improvement_pct + r.breadth_improvement_pct) / 2.0;
    return r;
}

}  // namespace mindgym
