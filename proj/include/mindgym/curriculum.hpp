#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "mindgym/datamodel.hpp"
#include "mindgym/errors.hpp"

namespace mindgym {

enum class CurriculumOrdering { Progressive, ShuffledFirstThree };

struct CurriculumMode {
    CurriculumOrdering ordering = CurriculumOrdering::Progressive;
};

namespace detail {

struct SectionLabels {
    const char* question;
    const char* answer;
    const char* thinking;
};

// Fixed per-language section labels so downstream tokenization is stable.
inline SectionLabels section_labels(Language lang) {
    if (lang == Language::CN) return {"问题：", "答案：", "思考："};
    return {"Question: ", "Answer: ", "Thinking: "};
}

}  // namespace detail

// One (input, target) pair per phase. Inputs carry labeled sections; targets
// are the bare field except PairedReasoning, whose target renders both the
// answer and the thinking under labels. The phase is recoverable from which
// labels appear: {Q,T} input => Guided, {Q,A} input => Reconstruction, bare Q
// with a labeled target => Paired, bare Q with a bare target => Autonomous.
inline CurriculumRecord phase_record(const MultiHopSample& sample, Phase phase) {
    auto labels = detail::section_labels(sample.language);
    CurriculumRecord r;
    r.phase = phase;
    r.sample_id = sample.id;
    switch (phase) {
        case Phase::GuidedAnswering:
            r.input = std::string(labels.question) + sample.question + "\n\n" + labels.thinking +
                      sample.thinking;
            r.target = sample.answer;
            break;
        case Phase::ReasonReconstruction:
            r.input = std::string(labels.question) + sample.question + "\n\n" + labels.answer +
                      sample.answer;
            r.target = sample.thinking;
            break;
        case Phase::PairedReasoning:
            r.input = std::string(labels.question) + sample.question;
            r.target = std::string(labels.answer) + sample.answer + "\n\n" + labels.thinking +
                       sample.thinking;
            break;
        case Phase::AutonomousSolving:
            r.input = std::string(labels.question) + sample.question;
            r.target = sample.answer;
            break;
    }
    return r;
}

// Expands samples into the four-phase corpus: 4N records, Autonomous always
// last. Progressive keeps the four phase blocks contiguous and in order;
// ShuffledFirstThree applies a seeded permutation to the first three blocks.
inline std::vector<CurriculumRecord> build_curriculum(const std::vector<MultiHopSample>& samples,
                                                      CurriculumMode mode, std::mt19937_64 rng) {
    if (samples.empty()) throw ConfigError("build_curriculum: samples must be non-empty");
    std::vector<CurriculumRecord> first_three;
    first_three.reserve(samples.size() * 3);
    for (Phase p : {Phase::GuidedAnswering, Phase::ReasonReconstruction, Phase::PairedReasoning})
        for (const auto& s : samples) first_three.push_back(phase_record(s, p));

    if (mode.ordering == CurriculumOrdering::ShuffledFirstThree)
        std::shuffle(first_three.begin(), first_three.end(), rng);

    std::vector<CurriculumRecord> out = std::move(first_three);
    out.reserve(samples.size() * 4);
    for (const auto& s : samples) out.push_back(phase_record(s, Phase::AutonomousSolving));
    return out;
}

}  // namespace mindgym
