#include "mind/augment.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace mind;
using namespace mind::testing;

namespace {

// Reference splitter: scans character by character for the delimiter.
std::vector<std::string> reference_split(const std::string& text) {
    std::vector<std::string> pieces(1);
    const std::string d(kDelimiter);
    for (std::size_t i = 0; i < text.size();) {
        if (text.compare(i, d.size(), d) == 0) {
            pieces.emplace_back();
            i += d.size();
        } else {
            pieces.back() += text[i++];
        }
    }
    std::vector<std::string> out;
    for (auto& p : pieces) {
        std::string_view v = trim(p);
        for (auto label : {kPositiveLabel, kNegativeLabel})
            if (v.substr(0, label.size()) == label) {
                v = trim(v.substr(label.size()));
                break;
            }
        if (!v.empty()) out.emplace_back(v);
    }
    return out;
}

GeneratorClient mock_client(std::uint64_t seed = 0) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    return GeneratorClient(cfg);
}

AugmentOptions fixed_clock(int pos, int neg, int repeat) {
    AugmentOptions o;
    o.pos_count = pos;
    o.neg_count = neg;
    o.repeat_number = repeat;
    o.clock = [] { return Timestamp{}; };
    return o;
}

std::shared_ptr<ScriptedBackend> scripted(std::vector<ScriptedBackend::Step> steps) {
    return std::make_shared<ScriptedBackend>(std::move(steps));
}

std::string labelled(std::string_view label, const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += kDelimiter;
        out += std::string(label) + " " + parts[i];
    }
    return out;
}

}  // namespace

// --- split_batch ----------------------------------------------------------------

TEST(SplitBatch, Examples) {
    EXPECT_EQ(split_batch({"", "Adjusted Solution: A\n\n~~~\n\nAdjusted Solution: B"}),
              (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(split_batch({"", "just one rationale"}), (std::vector<std::string>{"just one rationale"}));
    EXPECT_EQ(split_batch({"", "\n\n~~~\n\n\n\n~~~\n\nX"}), (std::vector<std::string>{"X"}));
    EXPECT_TRUE(split_batch({"", ""}).empty());
    EXPECT_TRUE(split_batch({"", "Negative Solution:   \n\n~~~\n\n  "}).empty());
}

TEST(SplitBatch, LabelStrippingIsCaseSensitiveAndSingle) {
    EXPECT_EQ(split_batch({"", "adjusted solution: x"}), (std::vector<std::string>{"adjusted solution: x"}));
    EXPECT_EQ(split_batch({"", "Negative Solution:Negative Solution: y"}),
              (std::vector<std::string>{"Negative Solution: y"}));
}

TEST(SplitBatch, NearDelimitersDoNotSplit) {
    EXPECT_EQ(split_batch({"", "a\n~~~\nb"}).size(), 1u);
    EXPECT_EQ(split_batch({"", "a ~~~ b"}).size(), 1u);
    EXPECT_EQ(split_batch({"", "a\n\n~~\n\nb"}).size(), 1u);
    EXPECT_EQ(split_batch({"", "a\r\n\r\n~~~\r\n\r\nb"}).size(), 1u);
}

TEST(SplitBatch, FuzzRecoversSegments) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto b = random_batch(rng);
        ASSERT_EQ(split_batch({"", b.text}), b.expected) << "case " << i;
    }
}

TEST(SplitBatch, MatchesReferenceOnRandomDelimiterPlacements) {
    std::mt19937_64 rng(12);
    const std::vector<std::string> atoms = {"\n", "~", "~~~", "\n\n", "x", " ", "Adjusted Solution:", "y z",
                                            std::string(kDelimiter)};
    std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
    std::uniform_int_distribution<int> len(0, 16);
    for (int i = 0; i < 3000; ++i) {
        std::string text;
        for (int j = len(rng); j > 0; --j) text += atoms[pick(rng)];
        ASSERT_EQ(split_batch({"", text}), reference_split(text)) << ::testing::PrintToString(text);
    }
}

// --- prompts --------------------------------------------------------------------

TEST(Prompts, PositiveFragments) {
    const auto p = build_positive_prompt(make_sample(), make_sample().rationale_gt, 10);
    for (const char* frag : {"within a range of 10% to 50%", "semantics remain unchanged", "Adjusted Solution:",
                             "Use \"\\n\\n~~~\\n\\n\" to separate them.", "Please output 10 different solutions.",
                             "make random content adjustments to \"The caption says the box is blue.\""}) {
        EXPECT_NE(p.find(frag), std::string::npos) << frag;
    }
    auto count = [&](std::string_view needle) {
        std::size_t n = 0;
        for (auto pos = p.find(needle); pos != std::string::npos; pos = p.find(needle, pos + 1)) ++n;
        return n;
    };
    EXPECT_EQ(count("Adjusted Solution:"), 1u);
    EXPECT_EQ(count("to separate them"), 1u);
    EXPECT_EQ(p.find("Negative Solution:"), std::string::npos);
}

TEST(Prompts, NegativeFragments) {
    const auto p = build_negative_prompt(make_sample(), make_sample().rationale_gt, 10);
    for (const char* frag :
         {"reverse its meaning", "ensure the correct answer cannot be logically derived",
          "keeping most of the original words and structure intact", "Negative Solution:",
          "Use \"\\n\\n~~~\\n\\n\" to separate them.", "\"The caption says the box is blue.\" is the explanation"}) {
        EXPECT_NE(p.find(frag), std::string::npos) << frag;
    }
    EXPECT_EQ(p.find("Adjusted Solution:"), std::string::npos);
}

TEST(Prompts, SingularRepeat) {
    EXPECT_NE(build_positive_prompt(make_sample(), "x y z", 1).find("Please output 1 different solutions."),
              std::string::npos);
    EXPECT_NE(build_negative_prompt(make_sample(), "x y z", 1).find("Please output 1 different solutions."),
              std::string::npos);
}

TEST(Prompts, InvalidSpecs) {
    EXPECT_THROW(build_positive_prompt(make_sample(), "", 10), ValidationError);
    EXPECT_THROW(build_negative_prompt(make_sample(), "sol", 0), ValidationError);
}

TEST(Prompts, DifferOnlyInSlots) {
    Sample a = make_sample("a");
    Sample b = make_sample("b");
    b.question = "What color is the kite?";
    b.caption = "the kite is green.";
    const auto pa = build_positive_prompt(a, "SOLUTION-A", 3);
    const auto pb = build_positive_prompt(b, "SOLUTION-B", 3);
    // Removing the substituted slots leaves the same template text.
    auto strip = [](std::string p, const Sample& s, const std::string& sol) {
        const std::string task = render_task_info(s);
        p.replace(p.find(task), task.size(), "{task}");
        for (auto pos = p.find(sol); pos != std::string::npos; pos = p.find(sol)) p.replace(pos, sol.size(), "{sol}");
        return p;
    };
    EXPECT_EQ(strip(pa, a, "SOLUTION-A"), strip(pb, b, "SOLUTION-B"));
    EXPECT_NE(pa, pb);
}

TEST(Prompts, PositiveAndNegativeShareSlotContents) {
    const Sample s = make_sample();
    const auto pos = build_positive_prompt(s, s.rationale_gt, 4);
    const auto neg = build_negative_prompt(s, s.rationale_gt, 4);
    const std::string task = "\"" + render_task_info(s) + "\"\n";
    EXPECT_TRUE(pos.starts_with(task));
    EXPECT_TRUE(neg.starts_with(task));
    EXPECT_NE(pos.substr(task.size()), neg.substr(task.size()));
    const std::string shared_tail =
        "Please output 4 different solutions. Each output format is \"";
    EXPECT_NE(pos.find(shared_tail + "Adjusted Solution:\""), std::string::npos);
    EXPECT_NE(neg.find(shared_tail + "Negative Solution:\""), std::string::npos);
}

// --- cleaning -------------------------------------------------------------------

TEST(Clean, NormalizesWhitespace) {
    const Sample s = make_sample();
    const auto r = clean_rationale("  The force increases.  ", Polarity::positive, s, s.rationale_gt, {});
    ASSERT_TRUE(std::holds_alternative<Rationale>(r));
    EXPECT_EQ(std::get<Rationale>(r).text, "The force increases.");
    EXPECT_EQ(std::get<Rationale>(r).parent_id, "s1");
    const auto r2 = clean_rationale("a\t b\n\nc d e f g", Polarity::positive, s, s.rationale_gt, {});
    EXPECT_EQ(std::get<Rationale>(r2).text, "a b c d e f g");
}

TEST(Clean, ReasonCodes) {
    const Sample s = make_sample();
    auto reason = [&](std::string_view seg, Polarity pol = Polarity::positive, CleanConfig cfg = {}) {
        const auto r = clean_rationale(seg, pol, s, s.rationale_gt, {}, cfg);
        return std::holds_alternative<RejectReason>(r) ? std::string(reject_code(std::get<RejectReason>(r)))
                                                       : std::string("ACCEPT");
    };
    EXPECT_EQ(reason(""), "EMPTY");
    EXPECT_EQ(reason("   \n "), "EMPTY");
    EXPECT_EQ(reason("Adjusted Solution:  "), "EMPTY");
    EXPECT_EQ(reason("too short"), "TOO_SHORT");
    EXPECT_EQ(reason(std::string(2001, 'x')), "TOO_LONG");
    EXPECT_EQ(reason(std::string(2000, 'x')), "ACCEPT");
    EXPECT_EQ(reason(s.rationale_gt), "VERBATIM_COPY");
    EXPECT_EQ(reason("  The caption   says the box\nis blue. "), "VERBATIM_COPY");
    EXPECT_EQ(reason(s.rationale_gt, Polarity::negative), "VERBATIM_COPY");
    EXPECT_EQ(reason("first part\n\n~~~\n\nsecond part"), "DELIMITER_LEAK");
    EXPECT_EQ(reason("The caption says the box is red.", Polarity::negative), "ACCEPT");
    CleanConfig tight{5, 12};
    EXPECT_EQ(reason("abcd", Polarity::positive, tight), "TOO_SHORT");
    EXPECT_EQ(reason("abcdefghijklm", Polarity::positive, tight), "TOO_LONG");
}

TEST(Clean, Idempotent) {
    const Sample s = make_sample();
    std::mt19937_64 rng(3);
    int accepted = 0;
    for (int i = 0; i < 2000; ++i) {
        const std::string seg = "  " + random_text(rng, 1, 80) + " \n";
        const auto first = clean_rationale(seg, Polarity::negative, s, s.rationale_gt, {});
        if (!std::holds_alternative<Rationale>(first)) continue;
        ++accepted;
        const auto& text = std::get<Rationale>(first).text;
        const auto second = clean_rationale(text, Polarity::negative, s, s.rationale_gt, {});
        ASSERT_TRUE(std::holds_alternative<Rationale>(second)) << text;
        EXPECT_EQ(std::get<Rationale>(second).text, text);
        EXPECT_FALSE(rationale_text_violation(text)) << text;
    }
    EXPECT_GT(accepted, 1000);
}

TEST(Clean, TokenEditDistance) {
    EXPECT_EQ(token_edit_distance("a b c", "a b c"), 0u);
    EXPECT_EQ(token_edit_distance("a b c", "a  b\tc"), 0u);
    EXPECT_EQ(token_edit_distance("a b c", "a x c"), 1u);
    EXPECT_EQ(token_edit_distance("a b c", "a b"), 1u);
    EXPECT_EQ(token_edit_distance("", "a b"), 2u);
    EXPECT_EQ(token_edit_distance("kitten sat on mat", "sitting sat mat"), 2u);
}

// --- mock rules -----------------------------------------------------------------

TEST(MockRules, ParsesItsOwnPrompts) {
    const Sample s = make_sample();
    const auto pp = rules::parse_prompt(build_negative_prompt(s, s.rationale_gt, 7));
    ASSERT_TRUE(pp);
    EXPECT_EQ(pp->polarity, Polarity::negative);
    EXPECT_EQ(pp->solution, s.rationale_gt);
    EXPECT_EQ(pp->repeat_number, 7);
    EXPECT_EQ(pp->options, s.options);
    EXPECT_EQ(pp->answer_index, 1u);
    EXPECT_FALSE(rules::parse_prompt("hello"));
}

TEST(MockRules, ResponseHasRepeatSegments) {
    const Sample s = make_sample();
    for (int k : {1, 3, 10}) {
        for (auto pol : {Polarity::positive, Polarity::negative}) {
            const auto prompt = pol == Polarity::positive ? build_positive_prompt(s, s.rationale_gt, k)
                                                          : build_negative_prompt(s, s.rationale_gt, k);
            const auto segs = split_batch({"", rules::respond(prompt, 5)});
            EXPECT_EQ(segs.size(), static_cast<std::size_t>(k));
        }
    }
}

TEST(MockRules, InversionsChangeTheAnswer) {
    const Sample s = make_sample();
    std::mt19937_64 rng(1);
    for (const auto& t : rules::inversions(s.rationale_gt, s.options, s.answer_index, 10, rng)) {
        EXPECT_NE(t, s.rationale_gt);
        EXPECT_GT(token_edit_distance(t, s.rationale_gt), 0u);
    }
    for (int i = 0; i < 20; ++i) {
        const auto inv = rules::invert(s.rationale_gt, s, rng);
        EXPECT_EQ(inv.find(" blue"), std::string::npos) << inv;
    }
    Sample no_entity = s;
    no_entity.rationale_gt = "Colors appear in the caption.";
    EXPECT_NE(rules::invert(no_entity.rationale_gt, no_entity, rng), no_entity.rationale_gt);
}

TEST(MockRules, ParaphrasesKeepTheAnswer) {
    const Sample s = make_sample();
    std::mt19937_64 rng(2);
    for (const auto& t : rules::paraphrases(s.rationale_gt, 20, rng)) {
        EXPECT_NE(t.find("blue"), std::string::npos) << t;
        EXPECT_NE(t, s.rationale_gt);
    }
}

// --- generator client ---------------------------------------------------------------

TEST(Generator, MockEchoesRequestedCount) {
    auto client = mock_client();
    const Sample s = make_sample();
    const auto raw = client.generate(build_positive_prompt(s, s.rationale_gt, 6));
    EXPECT_EQ(split_batch(raw).size(), 6u);
    EXPECT_EQ(raw.prompt_digest, sha256_hex(build_positive_prompt(s, s.rationale_gt, 6)));
    EXPECT_EQ(raw.prompt_digest.size(), 64u);
}

TEST(Generator, MockIsDeterministicPerNonce) {
    auto a = mock_client(9);
    auto b = mock_client(9);
    const Sample s = make_sample();
    const auto prompt = build_positive_prompt(s, s.rationale_gt, 5);
    EXPECT_EQ(a.generate(prompt, 0).text, b.generate(prompt, 0).text);
    EXPECT_NE(a.generate(prompt, 0).text, a.generate(prompt, 1).text);
}

TEST(Generator, RetryThenSuccess) {
    auto backend = scripted({ScriptedBackend::Drop{}, CompletionReply{200, "ok text"}});
    GeneratorConfig cfg;
    cfg.max_attempts = 2;
    std::vector<std::chrono::milliseconds> sleeps;
    GeneratorClient client(cfg, backend, [&](auto d) { sleeps.push_back(d); });
    EXPECT_EQ(client.generate("p").text, "ok text");
    EXPECT_EQ(backend->calls(), 2u);
    ASSERT_EQ(sleeps.size(), 1u);
    EXPECT_EQ(sleeps[0], cfg.initial_backoff);
}

TEST(Generator, TransientStatusIsRetried) {
    auto backend = scripted({CompletionReply{503, "busy"}, CompletionReply{429, "slow"}, CompletionReply{200, "x"}});
    GeneratorConfig cfg;
    cfg.max_attempts = 3;
    std::vector<std::chrono::milliseconds> sleeps;
    GeneratorClient client(cfg, backend, [&](auto d) { sleeps.push_back(d); });
    EXPECT_EQ(client.generate("p").text, "x");
    EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                              std::chrono::milliseconds(1000)}));
}

TEST(Generator, ExhaustedRetriesIsTransportError) {
    auto backend = scripted({ScriptedBackend::Drop{}});
    GeneratorConfig cfg;
    cfg.max_attempts = 3;
    GeneratorClient client(cfg, backend, [](auto) {});
    try {
        client.generate("p");
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_EQ(backend->calls(), 3u);
}

TEST(Generator, ClientErrorIsNotRetried) {
    auto backend = scripted({CompletionReply{400, "bad request body"}});
    GeneratorConfig cfg;
    cfg.max_attempts = 5;
    GeneratorClient client(cfg, backend, [](auto) {});
    try {
        client.generate("p");
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.status(), 400);
        EXPECT_EQ(e.body(), "bad request body");
    }
    EXPECT_EQ(backend->calls(), 1u);
}

TEST(Generator, ConfigValidation) {
    GeneratorConfig cfg;
    cfg.max_attempts = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.max_parallel = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.endpoint = "ftp://x";
    EXPECT_THROW(GeneratorClient{cfg}, ConfigError);
    EXPECT_THROW(BackendProfile::named("nope"), ConfigError);
}

// --- augmentation ---------------------------------------------------------------

TEST(Augment, CountsAndCalls) {
    auto client = mock_client();
    const auto res = augment_sample(make_sample(), client, fixed_clock(10, 10, 10));
    EXPECT_EQ(res.rad.positives.size(), 10u);
    EXPECT_EQ(res.rad.negatives.size(), 10u);
    EXPECT_EQ(res.stats.calls(), 2u);
    EXPECT_EQ(client.requests_sent(), 2u);
    EXPECT_TRUE(validate_rad_sample(res.rad).ok());
    for (const auto& r : res.rad.positives) EXPECT_EQ(r.provenance.generator_id, "mock-rules");
}

TEST(Augment, CallCountIsCeilingAndMonotone) {
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (int repeat = 1; repeat <= 12; ++repeat) {
        auto client = mock_client();
        const auto res = augment_sample(make_sample(), client, fixed_clock(10, 7, repeat));
        const std::size_t expected = static_cast<std::size_t>((10 + repeat - 1) / repeat + (7 + repeat - 1) / repeat);
        EXPECT_EQ(res.stats.calls(), expected);
        EXPECT_LE(expected, prev);
        prev = expected;
    }
}

TEST(Augment, ZeroCountsIsNoOp) {
    auto client = mock_client();
    const auto res = augment_sample(make_sample(), client, fixed_clock(0, 0, 10));
    EXPECT_TRUE(res.rad.positives.empty());
    EXPECT_TRUE(res.rad.negatives.empty());
    EXPECT_EQ(client.requests_sent(), 0u);
    EXPECT_TRUE(res.stats.warnings.empty());
}

TEST(Augment, DuplicatesAndRejectionsAreCounted) {
    const Sample s = make_sample();
    const std::string pos = labelled(kPositiveLabel, {"Reason one is long enough.", "Reason one is long enough.",
                                                      "short", s.rationale_gt, "Another distinct reason."});
    const std::string neg = labelled(kNegativeLabel, {"The caption says the box is red.", "Another distinct reason."});
    auto backend = scripted({CompletionReply{200, pos}, CompletionReply{200, neg}});
    GeneratorClient client({}, backend, [](auto) {});
    const auto res = augment_sample(s, client, fixed_clock(5, 5, 5));
    EXPECT_EQ(res.rad.positives.size(), 2u);
    EXPECT_EQ(res.stats.positive.duplicates, 1u);
    EXPECT_EQ(res.stats.positive.rejected[static_cast<std::size_t>(RejectReason::TOO_SHORT)], 1u);
    EXPECT_EQ(res.stats.positive.rejected[static_cast<std::size_t>(RejectReason::VERBATIM_COPY)], 1u);
    // Cross-polarity collision is dropped from the negative side.
    ASSERT_EQ(res.rad.negatives.size(), 1u);
    EXPECT_EQ(res.stats.negative.duplicates, 1u);
    EXPECT_TRUE(validate_rad_sample(res.rad).ok());
}

TEST(Augment, SurplusIsTrimmed) {
    const std::string five = labelled(kPositiveLabel, {"First reason about the box.", "Second reason about the box.",
                                                       "Third reason about the box.", "Fourth reason about the box.",
                                                       "Fifth reason about the box."});
    auto backend = scripted({CompletionReply{200, five}});
    GeneratorClient client({}, backend, [](auto) {});
    const auto res = augment_sample(make_sample(), client, fixed_clock(3, 0, 5));
    EXPECT_EQ(res.rad.positives.size(), 3u);
    EXPECT_EQ(res.stats.positive.surplus, 2u);
}

TEST(Augment, ZeroYieldWarnsWithoutFailing) {
    auto backend = scripted({CompletionReply{200, ""}});
    GeneratorClient client({}, backend, [](auto) {});
    const auto res = augment_sample(make_sample(), client, fixed_clock(4, 0, 10));
    EXPECT_TRUE(res.rad.positives.empty());
    ASSERT_EQ(res.stats.warnings.size(), 1u);
    EXPECT_NE(res.stats.warnings[0].find("zero usable pos"), std::string::npos);
}

TEST(Augment, DeterministicUnderMock) {
    auto a = mock_client(4);
    auto b = mock_client(4);
    const auto ra = augment_sample(make_sample(), a, fixed_clock(12, 12, 5));
    const auto rb = augment_sample(make_sample(), b, fixed_clock(12, 12, 5));
    EXPECT_EQ(ra.rad, rb.rad);
}

TEST(Augment, DatasetRunExpansionAndOrder) {
    TempDir dir("aug");
    std::vector<Sample> ss;
    for (int i = 0; i < 6; ++i) ss.push_back(make_sample("s" + std::to_string(i)));
    auto client = mock_client();
    const auto rep =
        augment_dataset(ss, client, fixed_clock(10, 10, 10), dir / "pos.jsonl", dir / "neg.jsonl", 3);
    EXPECT_FALSE(rep.error);
    EXPECT_EQ(rep.completed, 6u);
    EXPECT_EQ(rep.positive_pool.record_count, 60u);
    EXPECT_EQ(rep.negative_pool.record_count, 60u);
    EXPECT_DOUBLE_EQ(rep.expansion_factor, 21.0);
    const auto pos = read_pool(dir / "pos.jsonl");
    for (std::size_t i = 0; i < pos.size(); ++i) EXPECT_EQ(pos[i].parent_id, "s" + std::to_string(i / 10));
    const auto joined = join_pools(ss, pos, read_pool(dir / "neg.jsonl"));
    EXPECT_DOUBLE_EQ(compute_stats(joined).expansion_factor, 21.0);
}

TEST(Augment, WorkerCountDoesNotChangePools) {
    TempDir dir("aug");
    std::vector<Sample> ss;
    for (int i = 0; i < 8; ++i) ss.push_back(make_sample("s" + std::to_string(i)));
    auto c1 = mock_client(1);
    auto c4 = mock_client(1);
    augment_dataset(ss, c1, fixed_clock(4, 4, 2), dir / "p1.jsonl", dir / "n1.jsonl", 1);
    augment_dataset(ss, c4, fixed_clock(4, 4, 2), dir / "p4.jsonl", dir / "n4.jsonl", 4);
    EXPECT_EQ(read_pool(dir / "p1.jsonl"), read_pool(dir / "p4.jsonl"));
    EXPECT_EQ(read_pool(dir / "n1.jsonl"), read_pool(dir / "n4.jsonl"));
}

TEST(Augment, TransportFailureKeepsCompletedSamples) {
    TempDir dir("aug");
    const Sample s0 = make_sample("s0");
    const std::string pos = labelled(kPositiveLabel, {"Reason alpha is fine.", "Reason beta is fine."});
    const std::string neg = labelled(kNegativeLabel, {"The caption says the box is red.", "It is green here."});
    auto backend = scripted({CompletionReply{200, pos}, CompletionReply{200, neg}, ScriptedBackend::Drop{}});
    GeneratorConfig cfg;
    cfg.max_attempts = 2;
    GeneratorClient client(cfg, backend, [](auto) {});
    std::vector<Sample> ss = {s0, make_sample("s1"), make_sample("s2")};
    const auto rep = augment_dataset(ss, client, fixed_clock(2, 2, 2), dir / "pos.jsonl", dir / "neg.jsonl", 1);
    ASSERT_TRUE(rep.error);
    EXPECT_THROW(std::rethrow_exception(rep.error), TransportError);
    EXPECT_EQ(rep.completed, 1u);
    EXPECT_EQ(read_pool(dir / "pos.jsonl").size(), 2u);
    EXPECT_EQ(read_pool(dir / "neg.jsonl").size(), 2u);
}

TEST(Augment, OptionValidation) {
    auto client = mock_client();
    EXPECT_THROW(augment_sample(make_sample(), client, fixed_clock(-1, 0, 1)), ConfigError);
    EXPECT_THROW(augment_sample(make_sample(), client, fixed_clock(1, 1, 0)), ConfigError);
}
