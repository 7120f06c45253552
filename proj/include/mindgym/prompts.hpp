#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mindgym/datamodel.hpp"
#include "mindgym/errors.hpp"

namespace mindgym {

// Bundled prompt templates. Placeholders use `{name}` syntax:
//   background:          {category}, {language}
//   single_hop_text:     {language}
//   single_hop_image:    {original_question}, {original_answer}, {language}
//   multi_hop_text:      {language}
//   multi_hop_image:     {language}
//   structured_extraction: (none)
//   image_description:   {category}, {description}
//   judge_pair:          {question}, {pred_raw}, {pred_finetuned}
//   quality_rubric:      {record}
//   dependency_rubric:   {record}
// All templates are overridable from files via PromptLibrary::load_override.
struct PromptLibrary {
    // The cognitive setting: a stream-of-consciousness protocol injected
    // unchanged into every generation stage of one run.
    std::string cognitive =
        "You are operating under a stream-of-consciousness protocol. Before producing any "
        "final output, think through the problem in an explicit inner monologue: restate "
        "what is being asked in your own words, form hypotheses and test them against the "
        "given material, consider the question from multiple angles, entertain "
        "counterfactuals where they sharpen the analysis, and verify your own intermediate "
        "conclusions before relying on them. Let the monologue be natural and exploratory "
        "rather than a rigid checklist; backtrack freely when a line of thought fails. "
        "Only after this reasoning settles should you produce the requested output.";

    std::string background =
        "Write a background document of approximately 150-200 words. \n"
        "The document should describe a scenario or context that includes interconnected "
        "details, suitable for reasoning tasks. \n"
        "The document should focus on the reasoning category: {category}.\n"
        "\n"
        "The document should be rich enough to support multi-hop reasoning in {language}. \n";

    std::string single_hop_text =
        "Based on the background document provided, generate up to 5 logically connected "
        "sub-questions. \n"
        "The relationship between these sub-questions should belong to a single category:\n"
        "\n"
        "- Bridging: requiring connecting facts or pieces of information from the document.\n"
        "\n"
        "- Comparison: involving comparing two or more elements described in the document.\n"
        "\n"
        "- Temporal: requiring reasoning about the order or timing of events.\n"
        "\n"
        "Clearly state the relationship category that links all sub-questions in {language}:\n";

    std::string single_hop_image =
        "Based on the provided image, original question, and original answer, generate up "
        "to 5 logically connected sub-questions. The relationship between these "
        "sub-questions should belong to one of the following categories:\n"
        "\n"
        "- Visual-Textual Alignment: Requiring alignment between visual (e.g., images, "
        "charts) and textual information.\n"
        "\n"
        "- Spatial Reasoning: Involving spatial relationships or geometric layouts.\n"
        "\n"
        "- Causal Inference: Requiring reasoning about cause-and-effect relationships.\n"
        "\n"
        "- Contextual Synthesis: Requiring synthesis of information across multiple "
        "modalities (e.g., text, images, charts).\n"
        "\n"
        "Original question: {original_question}\n"
        "Original answer: {original_answer}\n"
        "\n"
        "Clearly state the relationship category that links all sub-questions in {language}:\n";

    std::string multi_hop_text =
        "Combine the sub-questions into a single, complex multi-hop question. \n"
        "The question should require reasoning across the sub-questions and synthesizing "
        "information from the background document. \n"
        "Then, provide a detailed answer to the multi-hop question, ensuring it is "
        "consistent with the background document and sub-questions.\n"
        "\n"
        "Synthesize a multi-hop question and its answer based on the above sub-questions "
        "and background document in {language}.\n"
        "Please start thinking and return the thinking process: \n";

    std::string multi_hop_image =
        "Combine the sub-questions into a single, complex multi-hop question.\n"
        "\n"
        "The question should require reasoning across the sub-questions and synthesizing "
        "information from the image and original question. \n"
        "\n"
        "Then, provide a detailed answer to the multi-hop question, ensuring it is "
        "consistent with the image and sub-questions.\n"
        "\n"
        "Synthesize a multi-hop question and its answer based on the above sub-questions, "
        "original image, and original question in {language}.\n"
        "Please start thinking and return the thinking process:\n";

    std::string structured_extraction =
        "Reformat the material above into exactly three clearly separated blocks, each "
        "introduced by its label on its own line:\n"
        "\n"
        "Question: the final multi-hop question.\n"
        "Answer: the detailed answer.\n"
        "Thinking: the full reasoning trace.\n"
        "\n"
        "Do not add commentary outside the three blocks.\n";

    std::string image_description =
        "For each of the following categories, generate a simple and reliable prompt for a "
        "text-to-image generation model. The goal is to create educational images with "
        "accurate content, clear structure, and moderate visual complexity.\n"
        "\n"
        "The generated prompt should describe a plausible, textbook-style diagram with "
        "correct labels or values, suitable for multi-step reasoning (e.g. in math, "
        "science, or logic).\n"
        "\n"
        "The content should avoid errors, and not be too crowded or complex.\n"
        "\n"
        "Each prompt should be concise, standalone, and directly usable for image "
        "generation - do not include explanations or extra output.\n"
        "\n"
        "Use this category {category} and its description {description}:\n";

    std::string judge_pair =
        "As a mathematical problem solver, please strictly compare and analyze the "
        "predictions of the two models:\n"
        "\n"
        "[Problem description]\n"
        "\n"
        "{question}\n"
        "\n"
        "[Original model prediction]\n"
        "\n"
        "{pred_raw}\n"
        "\n"
        "[Fine-tuned model prediction]\n"
        "\n"
        "{pred_finetuned}\n"
        "\n"
        "Evaluation requirements:\n"
        "\n"
        "Give the scores of raw and finetuned respectively\n"
        "\n"
        "1. Reasoning depth score (0-3 points):\n"
        "\n"
        "- 3 points: multi-step derivation with verification\n"
        "\n"
        "- 2 points: complete derivation steps\n"
        "\n"
        "- 1 point: simple calculation steps\n"
        "\n"
        "- 0 points: no derivation process\n"
        "\n"
        "2. Reasoning breadth score (0-3):\n"
        "\n"
        "- 3 points: Explores multiple valid methods/angles, justifies optimal choice\n"
        "\n"
        "- 2 points: Mentions alternative approaches briefly but focuses on one\n"
        "\n"
        "- 1 points: Suggests another method without analysis\n"
        "\n"
        "- 0 points: Single approach with no alternatives considered\n"
        "\n"
        "3. Comparative analysis: use bullet points to list the main "
        "improvements/degradations\n"
        "\n"
        "Please return a JSON that strictly follows this format: \"accuracy_raw\": 0-2, "
        "\"accuracy_finetuned\": 0-2, \"depth_raw\": 0-3, \"depth_finetuned\": 0-3, "
        "\"breadth_raw\": 0-3, \"breadth_finetuned\": 0-3, "
        "\"comparison\": [\"Point 1\", \"Point 2\"]\n";

    std::string quality_rubric =
        "Rate the overall textual quality of the following record, considering clarity, "
        "coherence, informativeness, and fluency. Respond with a single number between 0 "
        "and 1 and nothing else.\n"
        "\n"
        "Record:\n"
        "{record}\n";

    std::string dependency_rubric =
        "Count the noun phrases in the following record that are not independent, i.e. "
        "noun phrases attached to a governing head (possessives, of-phrases, relative "
        "clauses). Respond with a single number and nothing else.\n"
        "\n"
        "Record:\n"
        "{record}\n";

    void load_override(const std::string& name, const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read prompt override: " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string* slot = field(name);
        if (!slot) throw ConfigError("unknown prompt template name: " + name);
        *slot = buf.str();
    }

    std::string* field(const std::string& name) {
        static const std::map<std::string, std::string PromptLibrary::*> fields = {
            {"cognitive", &PromptLibrary::cognitive},
            {"background", &PromptLibrary::background},
            {"single_hop_text", &PromptLibrary::single_hop_text},
            {"single_hop_image", &PromptLibrary::single_hop_image},
            {"multi_hop_text", &PromptLibrary::multi_hop_text},
            {"multi_hop_image", &PromptLibrary::multi_hop_image},
            {"structured_extraction", &PromptLibrary::structured_extraction},
            {"image_description", &PromptLibrary::image_description},
            {"judge_pair", &PromptLibrary::judge_pair},
            {"quality_rubric", &PromptLibrary::quality_rubric},
            {"dependency_rubric", &PromptLibrary::dependency_rubric},
        };
        auto it = fields.find(name);
        if (it == fields.end()) return nullptr;
        return &(this->*(it->second));
    }
};

inline std::string language_name(Language l) {
    switch (l) {
        case Language::CN: return "Chinese";
        case Language::EN: return "English";
        case Language::MIX: break;
    }
    throw ConfigError("MIX must be resolved to CN or EN before prompt rendering");
}

}  // namespace mindgym
