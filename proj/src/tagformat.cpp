#include "mcot/tagformat.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "mcot/chain.hpp"

namespace mcot {

namespace {

constexpr std::string_view kOpenSolution = "<solution>";
constexpr std::string_view kCloseSolution = "</solution>";
constexpr std::string_view kOpenCode = "<code>";
constexpr std::string_view kCloseCode = "</code>";
constexpr std::string_view kOpenOutput = "<output>";
constexpr std::string_view kCloseOutput = "</output>";
constexpr std::string_view kOpenQuestion = "<question>";
constexpr std::string_view kCloseQuestion = "</question>";

constexpr std::array<std::string_view, 6> kBlockTags = {kOpenSolution, kCloseSolution, kOpenCode,
                                                        kCloseCode,    kOpenOutput,    kCloseOutput};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct TagHit {
    std::size_t pos;
    std::string_view tag;
};

// Earliest block tag in [from, end).
std::optional<TagHit> next_tag(std::string_view text, std::size_t from, std::size_t end) {
    std::optional<TagHit> best;
    std::string_view window = text.substr(0, end);
    for (auto tag : kBlockTags) {
        auto p = window.find(tag, from);
        if (p != std::string_view::npos && (!best || p < best->pos)) best = TagHit{p, tag};
    }
    return best;
}

std::string trim_newlines(std::string_view s) {
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

struct MarkerHit {
    std::size_t pos;
    Terminal::Kind kind;
};

// Terminal markers that start a line within [begin, end), after optional
// indentation. The span start counts as a line start.
std::vector<MarkerHit> find_markers(std::string_view text, std::size_t begin, std::size_t end) {
    std::vector<MarkerHit> hits;
    std::size_t line = begin;
    while (line < end) {
        std::string_view rest = text.substr(line, end - line);
        const std::size_t indent = std::min(rest.find_first_not_of(" \t\r\f\v"), rest.size());
        const std::string_view head = rest.substr(indent);
        if (head.starts_with(kSubQuestionMarker)) hits.push_back({line + indent, Terminal::Kind::sub_question});
        else if (head.starts_with(kFinalAnswerMarker)) hits.push_back({line + indent, Terminal::Kind::final_answer});
        auto nl = rest.find('\n');
        if (nl == std::string_view::npos) break;
        line += nl + 1;
    }
    return hits;
}

void split_terminal(std::string_view text, std::size_t begin, std::size_t end, std::string& body, Terminal& terminal) {
    auto hits = find_markers(text, begin, end);
    if (hits.empty()) {
        body = trim(text.substr(begin, end - begin));
        terminal = Terminal::none();
        return;
    }
    for (std::size_t i = 1; i < hits.size(); ++i) {
        if (hits[i].kind != hits[0].kind)
            throw ParseError(hits[i].pos, "both 'Sub Question:' and 'Final Answer:' present");
        throw ParseError(hits[i].pos, "more than one terminal line");
    }
    const auto& hit = hits.front();
    auto marker = hit.kind == Terminal::Kind::sub_question ? kSubQuestionMarker : kFinalAnswerMarker;
    body = trim(text.substr(begin, hit.pos - begin));
    terminal.kind = hit.kind;
    terminal.text = trim(text.substr(hit.pos + marker.size(), end - hit.pos - marker.size()));
}

bool has_marker_line(std::string_view text, bool include_first_line) {
    for (const auto& hit : find_markers(text, 0, text.size()))
        if (include_first_line || hit.pos != 0) return true;
    return false;
}

void require_no_tags(std::string_view field, const char* name) {
    for (auto tag : kBlockTags)
        if (field.find(tag) != std::string_view::npos)
            throw UnrepresentableError(std::string(name) + " contains the tag " + std::string(tag));
}

void require_representable(const SolutionBlock& b) {
    require_no_tags(b.analysis, "analysis");
    require_no_tags(b.remark, "remark");
    require_no_tags(b.terminal.text, "terminal");
    if (b.code && b.code->find(kCloseCode) != std::string::npos)
        throw UnrepresentableError("code contains </code>");
    if (b.output && b.output->find(kCloseOutput) != std::string::npos)
        throw UnrepresentableError("output contains </output>");
    if (b.output && !b.code) throw UnrepresentableError("output without a code block");
    if (!b.remark.empty() && !b.code) throw UnrepresentableError("remark without a code block");
    if (has_marker_line(b.analysis, true)) throw UnrepresentableError("analysis contains a terminal line");
    if (has_marker_line(b.remark, true)) throw UnrepresentableError("remark contains a terminal line");
    if (has_marker_line(b.terminal.text, false)) throw UnrepresentableError("terminal text contains a terminal line");
}

std::string_view marker_for(Terminal::Kind kind) {
    return kind == Terminal::Kind::sub_question ? kSubQuestionMarker : kFinalAnswerMarker;
}

}  // namespace

SolutionBlock parse_solution(std::string_view text) {
    std::size_t begin = 0;
    while (begin < text.size() && is_space(text[begin])) ++begin;
    std::size_t tail = text.size();
    while (tail > begin && is_space(text[tail - 1])) --tail;

    if (text.substr(begin, tail - begin).starts_with(kOpenSolution)) begin += kOpenSolution.size();
    if (tail - begin >= kCloseSolution.size() &&
        text.substr(tail - kCloseSolution.size(), kCloseSolution.size()) == kCloseSolution)
        tail -= kCloseSolution.size();

    SolutionBlock block;
    auto hit = next_tag(text, begin, tail);
    if (!hit) {
        split_terminal(text, begin, tail, block.analysis, block.terminal);
        return block;
    }
    if (hit->tag != kOpenCode) throw ParseError(hit->pos, "unexpected " + std::string(hit->tag));

    if (auto markers = find_markers(text, begin, hit->pos); !markers.empty())
        throw ParseError(markers.front().pos, "terminal line before the code block");
    block.analysis = trim(text.substr(begin, hit->pos - begin));

    const std::size_t code_begin = hit->pos + kOpenCode.size();
    const std::size_t code_end = text.substr(0, tail).find(kCloseCode, code_begin);
    if (code_end == std::string_view::npos) throw ParseError(hit->pos, "unbalanced <code>: no </code>");
    block.code = trim_newlines(text.substr(code_begin, code_end - code_begin));

    std::size_t pos = code_end + kCloseCode.size();
    std::size_t probe = pos;
    while (probe < tail && is_space(text[probe])) ++probe;
    if (text.substr(probe, tail - probe).starts_with(kOpenOutput)) {
        const std::size_t out_begin = probe + kOpenOutput.size();
        const std::size_t out_end = text.substr(0, tail).find(kCloseOutput, out_begin);
        if (out_end == std::string_view::npos) throw ParseError(probe, "unbalanced <output>: no </output>");
        block.output = trim_newlines(text.substr(out_begin, out_end - out_begin));
        pos = out_end + kCloseOutput.size();
    }

    if (auto stray = next_tag(text, pos, tail))
        throw ParseError(stray->pos, "unexpected " + std::string(stray->tag) + " after the code block");
    split_terminal(text, pos, tail, block.remark, block.terminal);
    return block;
}

std::string render_open_block(const SolutionBlock& b) {
    require_representable(b);
    std::string out(kOpenSolution);
    out += '\n';
    if (!b.analysis.empty()) out.append(b.analysis).append("\n");
    if (b.code) out.append(kOpenCode).append("\n").append(*b.code).append("\n").append(kCloseCode);
    if (b.output) out.append("\n").append(kOpenOutput).append("\n").append(*b.output).append("\n").append(kCloseOutput);
    else if (b.code) out += '\n';
    return out;
}

std::string render_block(const SolutionBlock& b) {
    std::string out = render_open_block(b);
    if (b.output) out += '\n';
    if (!b.remark.empty()) out.append(b.remark).append("\n");
    if (b.terminal.kind != Terminal::Kind::none) {
        out.append(marker_for(b.terminal.kind));
        if (!b.terminal.text.empty()) out.append(" ").append(b.terminal.text);
        out += '\n';
    }
    out.append(kCloseSolution);
    return out;
}

bool is_canonical(const SolutionBlock& b) {
    try {
        require_representable(b);
    } catch (const UnrepresentableError&) {
        return false;
    }
    if (b.analysis != trim(b.analysis) || b.remark != trim(b.remark) || b.terminal.text != trim(b.terminal.text))
        return false;
    if (b.code && *b.code != trim_newlines(*b.code)) return false;
    if (b.output && *b.output != trim_newlines(*b.output)) return false;
    return true;
}

std::string extract_final_answer(std::string_view terminal_text) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 4> kDelims = {{
        {"\\(", "\\)"},
        {"\\[", "\\]"},
        {"$$", "$$"},
        {"$", "$"},
    }};
    std::string s = trim(terminal_text);
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& [open, close] : kDelims) {
            if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
                s = trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
                changed = true;
                break;
            }
        }
    }
    if (s.empty()) throw EmptyAnswerError("final answer is empty after stripping delimiters");
    return s;
}

Transcript parse_transcript(std::string_view text) {
    auto skip_ws = [&](std::size_t p) {
        while (p < text.size() && is_space(text[p])) ++p;
        return p;
    };
    Transcript t;
    std::size_t pos = skip_ws(0);
    if (!text.substr(pos).starts_with(kOpenQuestion)) throw ParseError(pos, "expected <question>");
    const std::size_t q_begin = pos + kOpenQuestion.size();
    const std::size_t q_end = text.find(kCloseQuestion, q_begin);
    if (q_end == std::string_view::npos) throw ParseError(pos, "unbalanced <question>: no </question>");
    t.question = trim(text.substr(q_begin, q_end - q_begin));
    pos = skip_ws(q_end + kCloseQuestion.size());

    while (pos < text.size()) {
        if (!text.substr(pos).starts_with(kOpenSolution)) throw ParseError(pos, "expected <solution>");
        // Walk to the matching </solution>, treating code and output bodies as opaque.
        std::size_t cursor = pos + kOpenSolution.size();
        std::size_t region_end = std::string_view::npos;
        while (region_end == std::string_view::npos) {
            auto c = text.find(kCloseSolution, cursor);
            auto k = text.find(kOpenCode, cursor);
            auto o = text.find(kOpenOutput, cursor);
            auto first = std::min({c, k, o});
            if (first == std::string_view::npos) throw ParseError(pos, "unterminated <solution>");
            if (first == c) {
                region_end = c + kCloseSolution.size();
            } else {
                auto close = first == k ? kCloseCode : kCloseOutput;
                auto e = text.find(close, first);
                if (e == std::string_view::npos)
                    throw ParseError(first, "unbalanced " + std::string(first == k ? kOpenCode : kOpenOutput));
                cursor = e + close.size();
            }
        }
        try {
            t.blocks.push_back(parse_solution(text.substr(pos, region_end - pos)));
        } catch (const ParseError& e) {
            throw ParseError(pos + e.offset, std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
        }
        pos = skip_ws(region_end);
    }
    if (t.blocks.empty()) throw ParseError(pos, "transcript has no <solution> block");
    return t;
}

std::string render_transcript(const Transcript& t) {
    if (t.question.find(kCloseQuestion) != std::string::npos)
        throw UnrepresentableError("question contains </question>");
    std::string out(kOpenQuestion);
    out.append("\n").append(t.question).append("\n").append(kCloseQuestion).append("\n");
    for (const auto& b : t.blocks) out.append(render_block(b)).append("\n");
    return out;
}

}  // namespace mcot
