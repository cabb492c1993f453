#include <doctest.h>

#include <random>

#include "mcot/tagformat.hpp"
#include "support/fixtures.hpp"

using namespace mcot;

namespace {

SolutionBlock random_block(std::mt19937_64& rng) {
    SolutionBlock b;
    b.analysis = rng() % 5 ? testing::random_sentence(rng) : "";
    if (rng() % 4) {
        b.code = "x = " + std::to_string(rng() % 100) + "\n  print(x)";
        if (rng() % 3) b.output = rng() % 4 ? std::to_string(rng() % 1000) : "";
        if (rng() % 3 == 0) b.remark = testing::random_sentence(rng) + "\n" + testing::random_sentence(rng);
    }
    switch (rng() % 3) {
        case 0: break;
        case 1: b.terminal = Terminal::sub_question(testing::random_sentence(rng)); break;
        default: b.terminal = Terminal::final_answer(testing::random_word(rng)); break;
    }
    return b;
}

}  // namespace

TEST_SUITE("tagformat") {

TEST_CASE("full block") {
    const auto b = parse_solution(
        "<solution>\nThink.\n<code>\nprint(19/8 * 2)\n</code>\n<output>\n4.75\n</output>\nSo k is known.\n"
        "Final Answer: \\(\\frac{19}{4}\\)\n</solution>");
    CHECK(b.analysis == "Think.");
    CHECK(b.code == std::optional<std::string>("print(19/8 * 2)"));
    CHECK(b.output == std::optional<std::string>("4.75"));
    CHECK(b.remark == "So k is known.");
    CHECK(b.terminal == Terminal::final_answer("\\(\\frac{19}{4}\\)"));
}

TEST_CASE("wrapper tags are optional and the close may be missing") {
    CHECK(parse_solution("Sub Question: what is 2+2?").terminal == Terminal::sub_question("what is 2+2?"));
    const auto b = parse_solution("<solution>\nJust prose\n");
    CHECK(b.analysis == "Just prose");
    CHECK(b.terminal.kind == Terminal::Kind::none);
    CHECK_FALSE(b.code);
}

TEST_CASE("code and output bodies are opaque") {
    const auto b = parse_solution("<code>\nprint('Final Answer: 3')\nSub Question: x\n</code>\n<output>\nFinal Answer: 3\n</output>");
    CHECK(b.code == std::optional<std::string>("print('Final Answer: 3')\nSub Question: x"));
    CHECK(b.output == std::optional<std::string>("Final Answer: 3"));
    CHECK(b.terminal.kind == Terminal::Kind::none);
}

TEST_CASE("markers count only at the start of a line") {
    const auto b = parse_solution("The phrase Final Answer: appears inline.\nFinal Answer: 7");
    CHECK(b.analysis == "The phrase Final Answer: appears inline.");
    CHECK(b.terminal == Terminal::final_answer("7"));
}

TEST_CASE("structural errors carry offsets") {
    auto offset_of = [](std::string_view text) -> std::size_t {
        try {
            parse_solution(text);
        } catch (const ParseError& e) {
            return e.offset;
        }
        return SIZE_MAX;
    };
    CHECK(offset_of("a\nSub Question: x\nFinal Answer: y") == 18);
    CHECK(offset_of("Final Answer: 1\nFinal Answer: 2") == 16);
    CHECK(offset_of("Final Answer: 1\n<code>\nx\n</code>") == 0);
    CHECK(offset_of("<code>\nx = 1\n") == 0);
    CHECK(offset_of("<output>\n1\n</output>") == 0);
    CHECK(offset_of("<code>x</code><code>y</code>") == 14);
    CHECK(offset_of("<code>x</code>\n<output>\n1\n") == 15);
    CHECK(offset_of("text </solution> more") == 5);
}

TEST_CASE("ambiguity error names both markers") {
    try {
        parse_solution("Sub Question: a\nFinal Answer: b");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("both") != std::string::npos);
    }
}

TEST_CASE("open block ends right after the output tag") {
    SolutionBlock b;
    b.analysis = "A";
    b.code = "print(1)";
    b.output = "1";
    CHECK(render_open_block(b) == "<solution>\nA\n<code>\nprint(1)\n</code>\n<output>\n1\n</output>");
    CHECK(render_open_block(SolutionBlock{}) == "<solution>\n");
}

TEST_CASE("render rejects what the markup cannot hold") {
    SolutionBlock b;
    b.code = "x = '</code>'";
    CHECK_THROWS_AS(render_block(b), UnrepresentableError);
    b.code = "x";
    b.output = "</output>";
    CHECK_THROWS_AS(render_block(b), UnrepresentableError);
    SolutionBlock c;
    c.analysis = "line\nFinal Answer: 2";
    CHECK_THROWS_AS(render_block(c), UnrepresentableError);
    SolutionBlock d;
    d.output = "1";
    CHECK_THROWS_AS(render_block(d), UnrepresentableError);
    SolutionBlock e;
    e.terminal = Terminal::sub_question("a\nSub Question: b");
    CHECK_THROWS_AS(render_block(e), UnrepresentableError);
    CHECK_FALSE(is_canonical(e));
}

TEST_CASE("parse of render is the identity on canonical blocks") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const SolutionBlock b = random_block(rng);
        REQUIRE(is_canonical(b));
        CHECK(parse_solution(render_block(b)) == b);
    }
}

TEST_CASE("replay transcripts render back byte for byte") {
    for (const auto& c : testing::replay_cases()) {
        const std::string text = testing::read_file(testing::data_path(c.file));
        const Transcript t = parse_transcript(text);
        CHECK(t.blocks.size() == c.chain_length);
        CHECK(render_transcript(t) == text);
        for (const auto& b : t.blocks) CHECK(parse_solution(render_block(b)) == b);
    }
}

TEST_CASE("transcript errors") {
    CHECK_THROWS_AS(parse_transcript("<solution>\nx\n</solution>"), ParseError);
    CHECK_THROWS_AS(parse_transcript("<question>\nq\n"), ParseError);
    CHECK_THROWS_AS(parse_transcript("<question>\nq\n</question>\n"), ParseError);
    CHECK_THROWS_AS(parse_transcript("<question>\nq\n</question>\n<solution>\na\n</solution>\njunk"), ParseError);
}

TEST_CASE("final answer extraction") {
    CHECK(extract_final_answer("\\(\\frac{19}{4}\\)") == "\\frac{19}{4}");
    CHECK(extract_final_answer(" $3$ ") == "3");
    CHECK(extract_final_answer("\\[ $$10$$ \\]") == "10");
    CHECK(extract_final_answer("50") == "50");
    CHECK_THROWS_AS(extract_final_answer("   "), EmptyAnswerError);
    CHECK_THROWS_AS(extract_final_answer("\\(\\)"), EmptyAnswerError);
}

TEST_CASE("fuzz: parser never fails outside ParseError and parsed blocks round-trip") {
    std::mt19937_64 rng(20240601);
    std::size_t accepted = 0;
    for (int i = 0; i < 100000; ++i) {
        const std::string s = testing::random_markup(rng);
        try {
            const SolutionBlock b = parse_solution(s);
            ++accepted;
            REQUIRE_MESSAGE(parse_solution(render_block(b)) == b, s);
        } catch (const ParseError&) {
        }
    }
    CHECK(accepted > 1000);
}

}
