#include <doctest.h>

#include <random>

#include "mcot/chain.hpp"
#include "mcot/errors.hpp"
#include "support/fixtures.hpp"

using namespace mcot;

namespace {

DerivationStep coded(std::string analysis, std::string code, std::string out) {
    DerivationStep s;
    s.analysis = std::move(analysis);
    s.code = std::move(code);
    s.observation = ExecutionResult{ExecStatus::ok, std::move(out), {}, 0.1, false};
    return s;
}

MarkovChain two_step_chain() {
    MarkovChain c;
    c.steps.push_back({State{"q1", 1}, coded("a1", "print(1)", "1\n"), Transition::reduce("q2")});
    c.steps.push_back({State{"q2", 2}, coded("a2", "print(2)", "2\n"), Transition::final_answer("2")});
    c.status = ChainStatus::solved;
    return c;
}

bool has_kind(const std::vector<Violation>& v, Violation::Kind k) {
    for (const auto& x : v)
        if (x.kind == k) return true;
    return false;
}

}  // namespace

TEST_SUITE("chain") {

TEST_CASE("observation text per execution status") {
    CHECK(observation_text({ExecStatus::ok, "19/8\n\n", "", 0, false}) == "19/8");
    CHECK(observation_text({ExecStatus::error, "",
                            "Traceback (most recent call last):\n  File x\nNameError: name 'k' is not defined\n\n", 0,
                            false}) == "NameError: name 'k' is not defined");
    CHECK(observation_text({ExecStatus::error, "partial\n", "ValueError: bad\n", 0, false}) == "partial\nValueError: bad");
    CHECK(observation_text({ExecStatus::timeout, "", "", 10, false}) == "TimeoutError: execution exceeded 10 s");
    CHECK(observation_text({ExecStatus::ok, "", "", 0, false}).empty());
}

TEST_CASE("transition exposes exactly one of question and answer") {
    auto r = Transition::reduce("next");
    CHECK(r.next_question() == std::optional<std::string>("next"));
    CHECK_FALSE(r.answer());
    auto f = Transition::final_answer("42");
    CHECK(f.answer() == std::optional<std::string>("42"));
    CHECK_FALSE(f.next_question());
}

TEST_CASE("valid two-step chain has no violations") {
    CHECK(validate_chain(two_step_chain()).empty());
}

TEST_CASE("validation reports each broken invariant") {
    SUBCASE("empty solved chain") {
        MarkovChain c;
        CHECK(has_kind(validate_chain(c), Violation::Kind::empty));
        c.status = ChainStatus::failed;
        CHECK(validate_chain(c).empty());
    }
    SUBCASE("broken linkage") {
        auto c = two_step_chain();
        c.steps[0].transition = Transition::reduce("something else");
        auto v = validate_chain(c);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == Violation::Kind::linkage);
        CHECK(v[0].index == 2);
    }
    SUBCASE("final before the end") {
        auto c = two_step_chain();
        c.steps[0].transition = Transition::final_answer("1");
        CHECK(has_kind(validate_chain(c), Violation::Kind::terminal));
    }
    SUBCASE("solved chain must end in a final answer") {
        auto c = two_step_chain();
        c.steps[1].transition = Transition::reduce("q3");
        CHECK(has_kind(validate_chain(c), Violation::Kind::terminal));
        c.status = ChainStatus::exhausted;
        CHECK(validate_chain(c).empty());
    }
    SUBCASE("exhausted chain must not end in a final answer") {
        auto c = two_step_chain();
        c.status = ChainStatus::exhausted;
        CHECK(has_kind(validate_chain(c), Violation::Kind::terminal));
    }
    SUBCASE("unexecuted code") {
        auto c = two_step_chain();
        c.steps[1].step.observation.reset();
        CHECK(has_kind(validate_chain(c), Violation::Kind::observation));
    }
    SUBCASE("index and question") {
        auto c = two_step_chain();
        c.steps[1].state.index = 5;
        c.steps[0].state.question = "  ";
        auto v = validate_chain(c);
        CHECK(has_kind(v, Violation::Kind::index));
        CHECK(has_kind(v, Violation::Kind::question));
    }
    SUBCASE("length cap") {
        auto c = two_step_chain();
        CHECK(has_kind(validate_chain(c, 1), Violation::Kind::length));
    }
    SUBCASE("empty reduce text") {
        MarkovChain c;
        c.status = ChainStatus::exhausted;
        c.steps.push_back({State{"q1", 1}, {}, Transition::reduce(" ")});
        CHECK(has_kind(validate_chain(c), Violation::Kind::terminal));
    }
}

TEST_CASE("decompose yields one independent triplet per entry") {
    auto t = decompose_chain(two_step_chain());
    REQUIRE(t.size() == 2);
    CHECK(t[0].question == "q1");
    CHECK(t[0].outcome == Transition::reduce("q2"));
    CHECK(t[1].question == "q2");
    CHECK(t[1].outcome == Transition::final_answer("2"));
}

TEST_CASE("decompose rejects invalid chains with the offending index") {
    auto c = two_step_chain();
    c.steps[0].transition = Transition::reduce("q9");
    try {
        decompose_chain(c);
        FAIL("expected ChainError");
    } catch (const ChainError& e) {
        CHECK(e.index == 2);
    }
}

TEST_CASE("reassemble errors") {
    CHECK_THROWS_AS(reassemble_chain({}), ChainError);
    auto t = decompose_chain(two_step_chain());
    std::swap(t[0], t[1]);
    CHECK_THROWS_AS(reassemble_chain(t), ChainError);
    auto u = decompose_chain(two_step_chain());
    u[1].question = "other";
    CHECK_THROWS_AS(reassemble_chain(u), ChainError);
}

TEST_CASE("decompose then reassemble is the identity on random chains") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const MarkovChain c = testing::random_chain(rng);
        REQUIRE(validate_chain(c).empty());
        CHECK(reassemble_chain(decompose_chain(c)) == c);
    }
}

TEST_CASE("chain json round trip keeps executions") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const MarkovChain c = testing::random_chain(rng);
        CHECK(chain_from_json(nlohmann::json::parse(chain_to_json(c).dump())) == c);
    }
}

TEST_CASE("triplet json keeps question, step text and outcome") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        for (const auto& t : decompose_chain(testing::random_chain(rng))) {
            const Triplet back = triplet_from_json(nlohmann::json::parse(triplet_to_json(t).dump()));
            CHECK(back.question == t.question);
            CHECK(back.step.analysis == t.step.analysis);
            CHECK(back.step.code == t.step.code);
            CHECK(back.step.output() == t.step.output());
            CHECK(back.step.remark == t.step.remark);
            CHECK(back.outcome == t.outcome);
        }
    }
}

TEST_CASE("remark is written only when present") {
    DerivationStep s = coded("a", "print(1)", "1");
    CHECK_FALSE(step_to_json(s).contains("remark"));
    s.remark = "so the answer follows";
    CHECK(step_to_json(s)["remark"] == "so the answer follows");
}

TEST_CASE("trajectory json round trip") {
    Trajectory t{"q", {coded("a", "print(3)", "3\n"), coded("b", "", "")}, "3"};
    t.steps[1].observation.reset();
    CHECK(trajectory_from_json(trajectory_to_json(t)) == t);
    CHECK_THROWS(trajectory_from_json(nlohmann::json{{"question", "q"}}));
}

TEST_CASE("execution json") {
    ExecutionResult r{ExecStatus::timeout, "a", "b", 10.0, true};
    CHECK(execution_from_json(execution_to_json(r)) == r);
    CHECK_THROWS(execution_from_json(nlohmann::json{{"status", "weird"}}));
}

}
