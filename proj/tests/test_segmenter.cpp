#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <natsel/errors.hpp>
#include <natsel/segmenter.hpp>
#include <natsel/util.hpp>

#include "test_support.hpp"

using namespace natsel;

namespace {

std::vector<std::string> step_texts(const std::vector<Step>& steps) {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.text);
    return out;
}

} // namespace

TEST_CASE("terminal punctuation followed by whitespace splits") {
    const auto steps = segment("A is 2. So B is 3!");
    CHECK(step_texts(steps) == std::vector<std::string>{"A is 2. ", "So B is 3!"});
}

TEST_CASE("decimal numbers never split") {
    const auto steps = segment("The value is 3.14 exactly");
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].text == "The value is 3.14 exactly");
}

TEST_CASE("math spans protect interior punctuation") {
    const auto steps = segment("Since $x. y$ holds. Done.");
    CHECK(step_texts(steps) == std::vector<std::string>{"Since $x. y$ holds. ", "Done."});

    SegmenterConfig no_protect;
    no_protect.protect_math_spans = false;
    const auto split = segment("Since $x. y$ holds. Done.", no_protect);
    CHECK(split.size() == 3);
}

TEST_CASE("display math spans protect too") {
    const auto steps = segment("We use $$a. b$$ here. End.");
    CHECK(step_texts(steps) == std::vector<std::string>{"We use $$a. b$$ here. ", "End."});
}

TEST_CASE("unpaired dollar is literal text") {
    const auto steps = segment("It costs $5. Next sentence.");
    // The '$' before 5 finds no closing partner, so the '.' still splits.
    CHECK(steps.size() == 2);
}

TEST_CASE("abbreviations do not split") {
    const auto steps = segment("See Eq. 4 for details. Then e.g. this case. Done.");
    CHECK(step_texts(steps) == std::vector<std::string>{"See Eq. 4 for details. ",
                                                        "Then e.g. this case. ", "Done."});
}

TEST_CASE("abbreviation must start at a word boundary") {
    // "badger." ends with "er." but no configured abbreviation matches at a
    // word start, so the split fires.
    SegmenterConfig config;
    config.abbreviations = {"er."};
    const auto steps = segment("The badger. It ran.", config);
    CHECK(steps.size() == 2); // "badger." does not match "er." mid-word
}

TEST_CASE("abbreviation entries must end with a dot") {
    SegmenterConfig config;
    config.abbreviations = {"eg"};
    CHECK_THROWS_AS(segment("text", config), ValidationError);
}

TEST_CASE("blank lines split when enabled") {
    const auto steps = segment("First paragraph\n\nSecond paragraph");
    CHECK(step_texts(steps) ==
          std::vector<std::string>{"First paragraph\n\n", "Second paragraph"});

    SegmenterConfig config;
    config.split_on_blank_line = false;
    CHECK(segment("First paragraph\n\nSecond paragraph", config).size() == 1);
}

TEST_CASE("blank line with interior spaces still splits") {
    const auto steps = segment("First\n \t\nSecond");
    CHECK(step_texts(steps) == std::vector<std::string>{"First\n \t\n", "Second"});
}

TEST_CASE("leading whitespace does not create an empty first step") {
    const auto steps = segment("\n\nOnly paragraph");
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].text == "\n\nOnly paragraph");
}

TEST_CASE("fullwidth terminators split at whitespace or end of text") {
    const auto steps = segment("合計です。 次の文。");
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].text == "合計です。 ");
    CHECK(steps[1].text == "次の文。");
}

TEST_CASE("run-on text with no boundary is a single step") {
    const auto steps = segment("no terminal punctuation here at all");
    REQUIRE(steps.size() == 1);
}

TEST_CASE("empty text is an error") {
    CHECK_THROWS_AS(segment(""), ValidationError);
}

TEST_CASE("step indexes are contiguous from one") {
    const auto steps = segment("A. B. C. D.");
    REQUIRE(steps.size() == 4);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        CHECK(steps[i].index == static_cast<int>(i) + 1);
    }
}

TEST_CASE("reconstruct inverts segment on simple input") {
    const std::string t = "A. B. C.";
    CHECK(reconstruct(segment(t)) == t);
    const auto single = segment("one step only");
    CHECK(reconstruct(single) == "one step only");
}

TEST_CASE("losslessness holds on 1000 fuzzed strings") {
    testsupport::FuzzText fuzz(0xABCDEF);
    for (int i = 0; i < 1000; ++i) {
        const std::string t = fuzz.text(1 + fuzz.below(8));
        const auto steps = segment(t);
        REQUIRE(reconstruct(steps) == t);
        for (const auto& s : steps) REQUIRE(!s.text.empty());
    }
}

TEST_CASE("segment is deterministic") {
    testsupport::FuzzText fuzz(999);
    for (int i = 0; i < 50; ++i) {
        const std::string t = fuzz.text(1 + fuzz.below(6));
        CHECK(segment(t) == segment(t));
    }
}

TEST_CASE("every boundary satisfies the punctuation or blank-line rule") {
    testsupport::FuzzText fuzz(31337);
    for (int i = 0; i < 200; ++i) {
        const std::string t = fuzz.text(1 + fuzz.below(8));
        const auto steps = segment(t);
        for (std::size_t s = 0; s + 1 < steps.size(); ++s) {
            const std::string& text = steps[s].text;
            // A step ends with whitespace after a terminal, a terminal
            // itself, or a blank-line run.
            const auto cps = util::decode_utf8_cps(text);
            REQUIRE(!cps.empty());
            std::size_t end = cps.size();
            int newlines = 0;
            while (end > 0 && util::is_ascii_space(cps[end - 1])) {
                if (cps[end - 1] == U'\n') ++newlines;
                --end;
            }
            const bool blank_line = newlines >= 2;
            const bool after_terminal =
                end > 0 && (cps[end - 1] == U'.' || cps[end - 1] == U'!' || cps[end - 1] == U'?' ||
                            cps[end - 1] == U'。' || cps[end - 1] == U'！' ||
                            cps[end - 1] == U'？');
            CHECK((blank_line || (after_terminal && end < cps.size())));
        }
    }
}
