#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "mindgym/mock_backend.hpp"
#include "mindgym/synthesis.hpp"

using namespace mindgym;

// ---------------------------------------------------------------------------
// Topic sampling
// ---------------------------------------------------------------------------

TEST_CASE("round-robin topic sampling walks the registry in order") {
    RootRng rng(1);
    TopicSampler sampler(TopicPolicy::RoundRobin, rng.engine("topics"));
    const auto& reg = meta_topic_registry();
    for (int lap = 0; lap < 3; ++lap)
        for (std::size_t i = 0; i < reg.size(); ++i) REQUIRE(sampler.next() == reg[i]);
    // the slot-indexed form agrees with sequential next()
    for (std::size_t slot = 0; slot < 24; ++slot)
        REQUIRE(TopicSampler::for_slot(TopicPolicy::RoundRobin, rng, slot) == reg[slot % 8]);
}

TEST_CASE("uniform topic sampling covers all topics within statistical bounds") {
    RootRng rng(20240817);
    std::map<std::string, int> counts;
    const int draws = 8000;
    for (int slot = 0; slot < draws; ++slot)
        ++counts[TopicSampler::for_slot(TopicPolicy::UniformRandom, rng, slot).name];
    REQUIRE(counts.size() == 8);
    for (const auto& [name, n] : counts) {
        REQUIRE(n > 1000 - 100);
        REQUIRE(n < 1000 + 100);
    }
}

TEST_CASE("slot-indexed uniform topics are order-independent and seed-stable") {
    RootRng rng(5);
    auto a = TopicSampler::for_slot(TopicPolicy::UniformRandom, rng, 17);
    auto b = TopicSampler::for_slot(TopicPolicy::UniformRandom, rng, 3);
    REQUIRE(TopicSampler::for_slot(TopicPolicy::UniformRandom, rng, 17) == a);
    REQUIRE(TopicSampler::for_slot(TopicPolicy::UniformRandom, rng, 3) == b);
}

// ---------------------------------------------------------------------------
// Seed reply parsing
// ---------------------------------------------------------------------------

TEST_CASE("parse_seed_reply handles list styles and the relation line") {
    SECTION("arabic numbered list") {
        auto p = parse_seed_reply("1. What is A?\n2. What is B?\nRelationship category: Bridging\n",
                                  5, false);
        REQUIRE(p.questions == std::vector<std::string>{"What is A?", "What is B?"});
        REQUIRE(p.relation == CompositionType::Bridging);
        REQUIRE(p.warnings.empty());
    }
    SECTION("parenthesis and bullet markers") {
        auto p = parse_seed_reply("1) First question?\n- Second question?\n* Third question?\n"
                                  "The relation category is Comparison.\n",
                                  5, false);
        REQUIRE(p.questions.size() == 3);
        REQUIRE(p.relation == CompositionType::Comparison);
    }
    SECTION("CJK numerals and fullwidth question marks") {
        auto p = parse_seed_reply("一、第一个问题是什么？\n二、第二个问题是什么？\n"
                                  "关系类别：Temporal\n",
                                  5, false);
        REQUIRE(p.questions.size() == 2);
        REQUIRE(p.questions[0] == "第一个问题是什么？");
        REQUIRE(p.relation == CompositionType::Temporal);
    }
    SECTION("bare question lines without markers") {
        auto p = parse_seed_reply("What drives X?\nWhat limits Y?\nCategory: Bridging\n", 5, false);
        REQUIRE(p.questions.size() == 2);
    }
    SECTION("six questions truncate to k=5 with a warning") {
        std::string reply;
        for (int i = 1; i <= 6; ++i) reply += std::to_string(i) + ". Question " +
                                              std::to_string(i) + "?\n";
        reply += "Relationship category: Bridging\n";
        auto p = parse_seed_reply(reply, 5, false);
        REQUIRE(p.questions.size() == 5);
        REQUIRE(p.warnings.size() == 1);
        REQUIRE(p.warnings[0].find("truncated") != std::string::npos);
    }
    SECTION("hyphen/case variation in the relation label") {
        auto p = parse_seed_reply("1. Q?\nRelationship category: visual textual alignment\n", 5,
                                  true);
        REQUIRE(p.relation == CompositionType::VisualTextualAlignment);
    }
}

TEST_CASE("parse_seed_reply error cases") {
    SECTION("no questions") {
        REQUIRE_THROWS_AS(parse_seed_reply("Relationship category: Bridging\n", 5, false),
                          ParseError);
    }
    SECTION("no relation") {
        REQUIRE_THROWS_AS(parse_seed_reply("1. What is A?\n", 5, false), ParseError);
    }
    SECTION("modality mismatch raises RelationUnknown") {
        REQUIRE_THROWS_AS(
            parse_seed_reply("1. Q?\nRelationship category: Spatial Reasoning\n", 5, false),
            RelationUnknown);
        REQUIRE_THROWS_AS(parse_seed_reply("1. Q?\nRelationship category: Bridging\n", 5, true),
                          RelationUnknown);
    }
}

// ---------------------------------------------------------------------------
// Structured extraction parsing
// ---------------------------------------------------------------------------

TEST_CASE("parse_structured_blocks extracts labeled blocks") {
    SECTION("single-line blocks") {
        auto b = parse_structured_blocks("Question: Q1?\nAnswer: A1.\nThinking: T1.");
        REQUIRE(b.has_value());
        REQUIRE(b->question == "Q1?");
        REQUIRE(b->answer == "A1.");
        REQUIRE(b->thinking == "T1.");
    }
    SECTION("multi-line blocks accumulate continuation lines") {
        auto b = parse_structured_blocks(
            "Question: Why does\nthe ice melt?\nAnswer: Because of heat.\n"
            "Thinking: step one.\nstep two.");
        REQUIRE(b.has_value());
        REQUIRE(b->question == "Why does\nthe ice melt?");
        REQUIRE(b->thinking == "step one.\nstep two.");
    }
    SECTION("CN labels") {
        auto b = parse_structured_blocks("问题：为什么？\n答案：因为。\n思考：先想一想。");
        REQUIRE(b.has_value());
        REQUIRE(b->question == "为什么？");
    }
    SECTION("missing any block returns nullopt") {
        REQUIRE_FALSE(parse_structured_blocks("Question: Q?\nAnswer: A.").has_value());
        REQUIRE_FALSE(parse_structured_blocks("free-form prose only").has_value());
        REQUIRE_FALSE(
            parse_structured_blocks("Question:\nAnswer: A.\nThinking: T.").has_value());
    }
}

// ---------------------------------------------------------------------------
// Engine stages
// ---------------------------------------------------------------------------

namespace {

PipelineConfig small_config(std::size_t n) {
    PipelineConfig c;
    c.target_n = n;
    c.language = Language::EN;
    return c;
}

}  // namespace

TEST_CASE("engine stage calls carry the issued prompt template literals") {
    MockBackend backend(3);
    PromptLibrary prompts;
    SynthesisEngine engine(backend, prompts, Language::EN);
    const auto& topic = meta_topic_registry()[0];

    std::string context = engine.generate_context(topic, 1);
    REQUIRE_FALSE(context.empty());
    std::vector<std::string> warnings;
    SeedBatch batch = engine.generate_seed_batch(context, 5, std::nullopt, topic, &warnings, 2);
    REQUIRE_FALSE(batch.seeds.empty());
    RawComposition raw = engine.compose_multihop(batch, context, 3);
    std::string path;
    MultiHopSample sample = engine.extract_structured(raw, batch, "sample-x", &path, 4);
    REQUIRE(validate_sample(sample).ok());

    auto transcript = backend.transcript();
    REQUIRE(transcript.size() == 4);
    REQUIRE(transcript[0].messages[1].text.find("approximately 150-200 words") !=
            std::string::npos);
    REQUIRE(transcript[0].messages[1].text.find(topic.name) != std::string::npos);
    REQUIRE(transcript[1].messages[1].text.find("up to 5 logically connected sub-questions") !=
            std::string::npos);
    REQUIRE(transcript[2].messages[1].text.find("Combine the sub-questions into") !=
            std::string::npos);
    REQUIRE(transcript[3].messages[1].text.find("three clearly separated blocks") !=
            std::string::npos);

    SECTION("the cognitive segment is byte-identical across all four stages") {
        for (const auto& req : transcript) {
            REQUIRE(req.messages[0].role == Role::System);
            REQUIRE(req.messages[0].text == prompts.cognitive);
        }
    }
    SECTION("each stage interpolates the configured language") {
        REQUIRE(transcript[0].messages[1].text.find("English") != std::string::npos);
        REQUIRE(transcript[1].messages[1].text.find("English") != std::string::npos);
    }
}

TEST_CASE("balanced relation policy pins the declared category") {
    MockBackend backend(3);
    PromptLibrary prompts;
    SynthesisEngine engine(backend, prompts, Language::EN);
    const auto& topic = meta_topic_registry()[0];
    std::string context = engine.generate_context(topic, 1);
    std::vector<std::string> warnings;
    SeedBatch batch =
        engine.generate_seed_batch(context, 5, CompositionType::Temporal, topic, &warnings, 2);
    REQUIRE(batch.relation == CompositionType::Temporal);
    auto transcript = backend.transcript();
    REQUIRE(transcript.back().messages[1].text.find(
                "Use the relationship category: Temporal") != std::string::npos);
}

TEST_CASE("blank replies exhaust the retry budget then raise GenerationEmpty") {
    MockBackend backend(3);
    backend.add_fixture_contains("approximately 150-200 words", "   \n  ");
    PromptLibrary prompts;
    SynthesisEngine engine(backend, prompts, Language::EN, 0.7, /*blank_retries=*/2);
    REQUIRE_THROWS_AS(engine.generate_context(meta_topic_registry()[0], 1), GenerationEmpty);
    REQUIRE(backend.chat_calls() == 3);  // initial + 2 retries
}

TEST_CASE("stage 4 falls back to a local parse when the model call stays blank") {
    MockBackend backend(3);
    backend.add_fixture_contains("three clearly separated blocks", "");
    PromptLibrary prompts;
    SynthesisEngine engine(backend, prompts, Language::EN);
    SeedBatch batch;
    batch.relation = CompositionType::Bridging;
    batch.source_context = std::string("ctx");
    batch.seeds = {{"q1", "Q?", std::nullopt}};
    RawComposition raw{"Question: combined?\nAnswer: the answer.\nThinking: the trace.",
                       std::nullopt, std::nullopt, std::nullopt};
    std::string path;
    MultiHopSample s = engine.extract_structured(raw, batch, "sample-y", &path, 9);
    REQUIRE(path == "local");
    REQUIRE(s.question == "combined?");

    SECTION("ExtractionFailed when neither route yields blocks") {
        RawComposition bad{"free prose with no labels", std::nullopt, std::nullopt, std::nullopt};
        REQUIRE_THROWS_AS(engine.extract_structured(bad, batch, "sample-z", &path, 10),
                          ExtractionFailed);
    }
}

TEST_CASE("unreadable anchor images fail before any network call") {
    MockBackend backend(3);
    PromptLibrary prompts;
    SynthesisEngine engine(backend, prompts, Language::EN);
    AnchorRef anchor{"/nonexistent/image.png", "Q?", "A.", "src"};
    std::vector<std::string> warnings;
    REQUIRE_THROWS_AS(engine.generate_seed_batch_multimodal(anchor, 5, &warnings, 1),
                      ImageUnreadable);
    REQUIRE(backend.chat_calls() == 0);
}

TEST_CASE("remote image URLs pass through while local files become data URIs") {
    MockBackend backend(3);
    PromptLibrary prompts;
    SynthesisEngine engine(backend, prompts, Language::EN);
    std::vector<std::string> warnings;

    AnchorRef remote{"https://example.test/p.png", "Q?", "A.", "src"};
    engine.generate_seed_batch_multimodal(remote, 5, &warnings, 1);
    REQUIRE(backend.transcript().back().messages[1].images[0].url == "https://example.test/p.png");

    auto tmp = std::filesystem::temp_directory_path() / "mindgym-test-image.png";
    std::ofstream(tmp, std::ios::binary) << "PNGBYTES";
    AnchorRef local{tmp.string(), "Q?", "A.", "src"};
    engine.generate_seed_batch_multimodal(local, 5, &warnings, 2);
    REQUIRE(backend.transcript().back().messages[1].images[0].url.rfind("data:image/png;base64,",
                                                                        0) == 0);
    std::filesystem::remove(tmp);
}

TEST_CASE("image description generation covers the bundled categories") {
    MockBackend backend(3);
    PromptLibrary prompts;
    SynthesisEngine engine(backend, prompts, Language::EN);
    REQUIRE(SynthesisEngine::image_categories().size() == 8);
    std::string desc = engine.generate_image_description("Geometry", 1);
    REQUIRE_FALSE(desc.empty());
    REQUIRE(backend.transcript().back().messages[1].text.find(
                "text-to-image generation model") != std::string::npos);
    REQUIRE_THROWS_AS(engine.generate_image_description("Astrology", 2), ConfigError);
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

TEST_CASE("run_pipeline fills the pool with N schema-valid, diverse samples") {
    MockBackend backend(11);
    PromptLibrary prompts;
    RootRng rng(11);
    DiversityPool pool(0.85);
    auto config = small_config(20);
    RunResult r = run_pipeline(config, backend, pool, prompts, rng);

    REQUIRE(r.samples.size() == 20);
    REQUIRE(pool.size() == 20);
    std::set<std::string> ids;
    for (const auto& s : r.samples) {
        REQUIRE(validate_sample(s).ok());
        ids.insert(s.id);
    }
    REQUIRE(ids.size() == 20);

    SECTION("pool invariant holds pairwise") {
        auto entries = pool.entries();
        for (std::size_t i = 0; i < entries.size(); ++i)
            for (std::size_t j = i + 1; j < entries.size(); ++j)
                REQUIRE(cosine_similarity(entries[i].vector, entries[j].vector) <= 0.85);
    }
    SECTION("stage clocks are strictly increasing per sample") {
        for (const auto& clocks : r.stats.stage_clocks) {
            REQUIRE(clocks[0] < clocks[1]);
            REQUIRE(clocks[1] < clocks[2]);
            REQUIRE(clocks[2] < clocks[3]);
        }
    }
    SECTION("stage call counts cover all four stages") {
        REQUIRE(r.stats.stage_calls.at("stage1_context") >= 20);
        REQUIRE(r.stats.stage_calls.at("stage2_seeds") >= 20);
        REQUIRE(r.stats.stage_calls.at("stage3_composition") >= 20);
        REQUIRE(r.stats.stage_calls.at("stage4_extraction") >= 20);
    }
    SECTION("relation histogram sums to N over declared kinds") {
        std::size_t total = 0;
        for (const auto& [kind, n] : r.stats.relation_histogram) {
            REQUIRE(composition_from_string(kind).has_value());
            total += n;
        }
        REQUIRE(total == 20);
    }
}

TEST_CASE("run_pipeline is reproducible for a fixed seed and differs across seeds") {
    PromptLibrary prompts;
    auto run = [&](std::uint64_t seed) {
        MockBackend backend(seed);
        RootRng rng(seed);
        DiversityPool pool(0.85);
        return run_pipeline(small_config(8), backend, pool, prompts, rng);
    };
    RunResult a = run(21), b = run(21), c = run(22);
    REQUIRE(a.samples == b.samples);
    REQUIRE(a.samples != c.samples);
}

TEST_CASE("multi-worker runs reproduce the single-worker output") {
    PromptLibrary prompts;
    auto run = [&](int workers) {
        MockBackend backend(33);
        RootRng rng(33);
        DiversityPool pool(0.85);
        auto config = small_config(12);
        config.workers = workers;
        return run_pipeline(config, backend, pool, prompts, rng);
    };
    REQUIRE(run(1).samples == run(4).samples);
}

TEST_CASE("balanced policy yields the exact {3,3,3} histogram for N=9") {
    MockBackend backend(5);
    PromptLibrary prompts;
    RootRng rng(5);
    DiversityPool pool(0.85);
    auto config = small_config(9);
    config.relation_policy = RelationPolicy::Balanced;
    RunResult r = run_pipeline(config, backend, pool, prompts, rng);
    REQUIRE(r.stats.relation_histogram.at("Bridging") == 3);
    REQUIRE(r.stats.relation_histogram.at("Comparison") == 3);
    REQUIRE(r.stats.relation_histogram.at("Temporal") == 3);
}

TEST_CASE("model-chosen policy records the declared relations verbatim") {
    MockBackend backend(5);
    PromptLibrary prompts;
    RootRng rng(5);
    DiversityPool pool(0.85);
    RunResult r = run_pipeline(small_config(10), backend, pool, prompts, rng);
    // the mock declares the relation inside each stage-2 reply; recompute it
    std::map<std::string, std::size_t> declared;
    for (const auto& s : r.samples) ++declared[to_string(s.seeds.relation)];
    REQUIRE(declared == r.stats.relation_histogram);
    for (const auto& req : backend.transcript())
        REQUIRE(req.messages[1].text.find("Use the relationship category:") == std::string::npos);
}

TEST_CASE("a starving pool raises PoolStarvation through the pipeline") {
    // An embedder that maps every text to the same vector defeats novelty.
    class ConstantEmbedder : public MockBackend {
    public:
        using MockBackend::MockBackend;
        std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
            check_embed_inputs(texts);
            return std::vector<std::vector<double>>(texts.size(), std::vector<double>{1.0, 2.0});
        }
    };
    ConstantEmbedder backend(5);
    PromptLibrary prompts;
    RootRng rng(5);
    DiversityPool pool(0.85);
    auto config = small_config(3);
    config.max_regenerations = 4;
    REQUIRE_THROWS_AS(run_pipeline(config, backend, pool, prompts, rng), PoolStarvation);
    REQUIRE(pool.size() == 1);  // first slot admitted, second starved
}

TEST_CASE("anchored-image pipeline runs end to end against an anchor file") {
    auto dir = std::filesystem::temp_directory_path();
    auto anchors = dir / "mindgym-test-anchors.jsonl";
    {
        std::ofstream out(anchors);
        for (int i = 0; i < 3; ++i)
            out << nlohmann::json{{"image_path", "https://example.test/img" + std::to_string(i) +
                                                     ".png"},
                                  {"original_question", "What is shown in figure " +
                                                            std::to_string(i) + "?"},
                                  {"original_answer", "Object " + std::to_string(i) + "."},
                                  {"source_dataset", "demo"}}
                       .dump()
                << "\n";
    }
    MockBackend backend(9);
    PromptLibrary prompts;
    RootRng rng(9);
    DiversityPool pool(0.85);
    PipelineConfig config = small_config(5);
    config.modality = Modality::AnchoredImage;
    config.anchor_file = anchors.string();
    RunResult r = run_pipeline(config, backend, pool, prompts, rng);
    REQUIRE(r.samples.size() == 5);
    for (const auto& s : r.samples) {
        REQUIRE(validate_sample(s).ok());
        REQUIRE(is_multimodal(s.composition));
        REQUIRE(std::holds_alternative<AnchorRef>(s.context));
    }
    // no stage-1 generation call in anchored mode
    REQUIRE(r.stats.stage_calls.at("stage1_context") == 0);
    std::filesystem::remove(anchors);
}

TEST_CASE("malformed anchor files report the offending line") {
    auto path = std::filesystem::temp_directory_path() / "mindgym-bad-anchors.jsonl";
    {
        std::ofstream out(path);
        out << nlohmann::json{{"image_path", "x.png"},
                              {"original_question", "q"},
                              {"original_answer", "a"},
                              {"source_dataset", "d"}}
                   .dump()
            << "\n";
        out << "{\"image_path\": \"y.png\"}\n";  // missing required keys
    }
    try {
        load_anchors(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("pipeline config validation") {
    PipelineConfig c;
    REQUIRE_NOTHROW(c.validate());
    SECTION("k bounds") {
        c.max_seeds = 0;
        REQUIRE_THROWS_AS(c.validate(), ConfigError);
        c.max_seeds = 6;
        REQUIRE_THROWS_AS(c.validate(), ConfigError);
    }
    SECTION("threshold bounds") {
        c.similarity_threshold = 1.0;
        REQUIRE_THROWS_AS(c.validate(), ConfigError);
    }
    SECTION("anchored mode requires an anchor file") {
        c.modality = Modality::AnchoredImage;
        REQUIRE_THROWS_AS(c.validate(), ConfigError);
    }
}

TEST_CASE("MIX language resolves per slot to CN or EN") {
    MockBackend backend(13);
    PromptLibrary prompts;
    RootRng rng(13);
    DiversityPool pool(0.85);
    auto config = small_config(16);
    config.language = Language::MIX;
    RunResult r = run_pipeline(config, backend, pool, prompts, rng);
    std::set<Language> seen;
    for (const auto& s : r.samples) {
        REQUIRE(s.language != Language::MIX);
        seen.insert(s.language);
    }
    REQUIRE(seen.size() == 2);  // 16 fair coin flips virtually surely hit both
}
