#pragma once

// Parser and serializer for the tagged solution markup:
//
//   <solution>
//   analysis prose
//   <code>
//   snippet
//   </code>
//   <output>
//   observation
//   </output>
//   remark prose
//   Sub Question: ...        (or)   Final Answer: ...
//   </solution>
//
// The grammar is documented in docs/tagformat.md.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcot/errors.hpp"

namespace mcot {

inline constexpr std::string_view kSubQuestionMarker = "Sub Question:";
inline constexpr std::string_view kFinalAnswerMarker = "Final Answer:";

struct Terminal {
    enum class Kind { none, sub_question, final_answer };

    Kind kind = Kind::none;
    std::string text;

    static Terminal none() { return {}; }
    static Terminal sub_question(std::string text) { return {Kind::sub_question, std::move(text)}; }
    static Terminal final_answer(std::string text) { return {Kind::final_answer, std::move(text)}; }

    bool operator==(const Terminal&) const = default;
};

struct SolutionBlock {
    std::string analysis;
    std::optional<std::string> code;
    std::optional<std::string> output;
    std::string remark;
    Terminal terminal;

    bool operator==(const SolutionBlock&) const = default;
};

/// A field holds text the markup cannot represent (e.g. "</code>" inside code).
struct UnrepresentableError : Error {
    using Error::Error;
};

struct EmptyAnswerError : Error {
    using Error::Error;
};

/// Parses one <solution>...</solution> region. The wrapping tags are optional;
/// a missing closing tag is accepted so partially generated text can be parsed.
/// Throws ParseError (with byte offset into `text`) on any structural problem.
SolutionBlock parse_solution(std::string_view text);

/// Canonical rendering, including the <solution> wrapper.
std::string render_block(const SolutionBlock& block);

/// Renders the opening part of a block for continued generation: the wrapper
/// opening tag, analysis, code and output, with no remark/terminal/closing tag.
/// When output is present the text ends immediately after "</output>".
std::string render_open_block(const SolutionBlock& block);

/// Strips \( \), \[ \], $ $, $$ $$ delimiters and surrounding whitespace.
std::string extract_final_answer(std::string_view terminal_text);

/// True when the block is already in the form render_block/parse_solution produce.
bool is_canonical(const SolutionBlock& block);

struct Transcript {
    std::string question;
    std::vector<SolutionBlock> blocks;

    bool operator==(const Transcript&) const = default;
};

/// "<question>...</question>" followed by one or more solution regions.
Transcript parse_transcript(std::string_view text);
std::string render_transcript(const Transcript& transcript);

}  // namespace mcot
