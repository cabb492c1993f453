#include "mcot/tokenizer.hpp"

#include <cctype>

namespace mcot {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) || c == '_'; }

template <typename Sink>
void scan(std::string_view text, Sink&& sink) {
    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_word_byte(c)) {
            std::size_t j = i + 1;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            sink(text.substr(i, j - i));
            i = j;
        } else {
            sink(text.substr(i, 1));
            ++i;
        }
    }
}

}  // namespace

std::size_t count_tokens(std::string_view text) {
    std::size_t n = 0;
    scan(text, [&n](std::string_view) { ++n; });
    return n;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    scan(text, [&out](std::string_view tok) { out.emplace_back(tok); });
    return out;
}

}  // namespace mcot
