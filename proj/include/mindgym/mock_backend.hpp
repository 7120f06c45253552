#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "mindgym/gateway.hpp"
#include "mindgym/rng.hpp"

namespace mindgym {

// Deterministic offline backend. Fixtured requests get their recorded reply;
// everything else gets a pseudo-reply derived from (seed, request hash), so
// identical seeds produce identical transcripts. The fallback is shaped by
// which prompt template the request carries, so pipeline stages parse it the
// same way they parse live model output.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::uint64_t seed, std::size_t embedding_dim = 64)
        : seed_(seed), dim_(embedding_dim) {}

    // Exact match on the last user message text.
    void add_fixture(std::string user_text, std::string reply) {
        std::lock_guard lock(mu_);
        exact_fixtures_[std::move(user_text)] = std::move(reply);
    }

    // First matching substring rule wins; checked after exact fixtures.
    void add_fixture_contains(std::string needle, std::string reply) {
        std::lock_guard lock(mu_);
        substring_fixtures_.emplace_back(std::move(needle), std::move(reply));
    }

    std::string chat(const ChatRequest& req) override {
        if (req.messages.empty()) throw ConfigError("chat: at least one message required");
        std::string user_text = last_user_text(req);
        {
            std::lock_guard lock(mu_);
            transcript_.push_back(req);
            if (auto it = exact_fixtures_.find(user_text); it != exact_fixtures_.end())
                return it->second;
            for (const auto& [needle, reply] : substring_fixtures_)
                if (user_text.find(needle) != std::string::npos) return reply;
        }
        return pseudo_reply(user_text, fnv1a64(canonical_request(req), seed_));
    }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        check_embed_inputs(texts);
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            std::mt19937_64 eng(fnv1a64(t, seed_ ^ 0x656d626564ull));
            std::normal_distribution<double> dist(0.0, 1.0);
            std::vector<double> v(dim_);
            for (double& x : v) x = dist(eng);
            out.push_back(std::move(v));
        }
        return out;
    }

    std::vector<ChatRequest> transcript() const {
        std::lock_guard lock(mu_);
        return transcript_;
    }

    std::size_t chat_calls() const {
        std::lock_guard lock(mu_);
        return transcript_.size();
    }

    std::uint64_t seed() const { return seed_; }
    std::size_t embedding_dim() const { return dim_; }

private:
    static std::string last_user_text(const ChatRequest& req) {
        for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it)
            if (it->role == Role::User) return it->text;
        return req.messages.back().text;
    }

    static const std::vector<std::string>& word_bank() {
        static const std::vector<std::string> words = {
            "harbor",  "ledger",   "catalyst", "meridian", "lattice",  "orchard",
            "granite", "tempo",    "voltage",  "estuary",  "pigment",  "quorum",
            "sextant", "monsoon",  "archive",  "pendulum", "ratio",    "glacier",
            "turbine", "manifold", "census",   "isotope",  "caravan",  "theorem",
            "pulley",  "basilica", "tariff",   "enzyme",   "mosaic",   "drought",
            "furnace", "compass",  "aquifer",  "dynasty",  "pollen",   "syllable",
            "trellis", "magnet",   "estate",   "circuit"};
        return words;
    }

    static std::string pseudo_words(std::mt19937_64& eng, std::size_t n) {
        const auto& bank = word_bank();
        std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
        std::string out;
        for (std::size_t i = 0; i < n; ++i) {
            if (i) out += ' ';
            out += bank[pick(eng)];
        }
        return out;
    }

    std::string pseudo_reply(const std::string& user_text, std::uint64_t h) const {
        std::mt19937_64 eng(h);
        if (user_text.find("approximately 150-200 words") != std::string::npos)
            return pseudo_passage(eng);
        if (user_text.find("sub-questions") != std::string::npos) {
            const bool multimodal = user_text.find("provided image") != std::string::npos;
            return pseudo_seed_list(eng, user_text, multimodal);
        }
        if (user_text.find("Combine the sub-questions into") != std::string::npos)
            return pseudo_composition(eng);
        if (user_text.find("three clearly separated blocks") != std::string::npos)
            return pseudo_extraction(eng);
        if (user_text.find("text-to-image generation model") != std::string::npos)
            return "A clean textbook-style diagram of " + pseudo_words(eng, 6) +
                   " with labeled values.";
        if (user_text.find("Rate the overall textual quality") != std::string::npos) {
            std::uniform_int_distribution<int> pct(50, 100);
            int v = pct(eng);
            return (v == 100) ? "1.00" : "0." + std::to_string(v);
        }
        if (user_text.find("noun phrases") != std::string::npos) {
            std::uniform_int_distribution<int> n(0, 4);
            return std::to_string(n(eng));
        }
        if (user_text.find("Reasoning depth score") != std::string::npos)
            return pseudo_verdict(eng);
        return "Observation: " + pseudo_words(eng, 12) + ".";
    }

    std::string pseudo_passage(std::mt19937_64& eng) const {
        std::string out;
        for (int s = 0; s < 10; ++s) {
            std::string sentence = pseudo_words(eng, 16);
            sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
            out += sentence + ". ";
        }
        return out;
    }

    std::string pseudo_seed_list(std::mt19937_64& eng, const std::string& user_text,
                                 bool multimodal) const {
        std::string out;
        for (int i = 1; i <= 5; ++i)
            out += std::to_string(i) + ". What explains the " + pseudo_words(eng, 5) + "?\n";
        // A request may pin the category (relation-balanced runs); otherwise
        // the mock "model" declares one pseudo-randomly.
        std::string relation;
        const std::string marker = "Use the relationship category: ";
        if (auto pos = user_text.find(marker); pos != std::string::npos) {
            auto end = user_text.find_first_of(".\n", pos + marker.size());
            relation = user_text.substr(pos + marker.size(),
                                        end == std::string::npos ? std::string::npos
                                                                 : end - pos - marker.size());
        } else if (multimodal) {
            static const std::vector<std::string> kinds = {
                "Visual-Textual Alignment", "Spatial Reasoning", "Causal Inference",
                "Contextual Synthesis"};
            relation = kinds[std::uniform_int_distribution<std::size_t>(0, 3)(eng)];
        } else {
            static const std::vector<std::string> kinds = {"Bridging", "Comparison", "Temporal"};
            relation = kinds[std::uniform_int_distribution<std::size_t>(0, 2)(eng)];
        }
        out += "Relationship category: " + relation + "\n";
        return out;
    }

    std::string pseudo_composition(std::mt19937_64& eng) const {
        return "Let me reason through the sub-questions. " + pseudo_words(eng, 30) +
               ". Considering all of them together, the combined question is: how does the " +
               pseudo_words(eng, 7) + " ultimately determine the " + pseudo_words(eng, 4) +
               "? The answer, after weighing each step, is that " + pseudo_words(eng, 18) + ".";
    }

    std::string pseudo_extraction(std::mt19937_64& eng) const {
        std::string q = "How does the " + pseudo_words(eng, 6) + " affect the " +
                        pseudo_words(eng, 4) + "?";
        std::string a = "It follows that " + pseudo_words(eng, 14) + ".";
        std::string t = "First, " + pseudo_words(eng, 10) + ". Then, " + pseudo_words(eng, 10) +
                        ". Finally, " + pseudo_words(eng, 8) + ".";
        return "Question: " + q + "\nAnswer: " + a + "\nThinking: " + t + "\n";
    }

    std::string pseudo_verdict(std::mt19937_64& eng) const {
        std::uniform_int_distribution<int> acc(0, 2);
        std::uniform_int_distribution<int> dim3(0, 3);
        nlohmann::json v{{"accuracy_raw", acc(eng)},      {"accuracy_finetuned", acc(eng)},
                         {"depth_raw", dim3(eng)},        {"depth_finetuned", dim3(eng)},
                         {"breadth_raw", dim3(eng)},      {"breadth_finetuned", dim3(eng)},
                         {"comparison", nlohmann::json::array({"pseudo comparison point"})}};
        return v.dump();
    }

    std::uint64_t seed_;
    std::size_t dim_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> exact_fixtures_;
    std::vector<std::pair<std::string, std::string>> substring_fixtures_;
    std::vector<ChatRequest> transcript_;
};

}  // namespace mindgym
