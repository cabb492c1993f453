#include "mcot/verifier.hpp"

#include <array>
#include <cctype>
#include <regex>
#include <stdexcept>

#include "mcot/chain.hpp"

namespace mcot {

namespace {

using boost::multiprecision::cpp_int;

bool strip_pair(std::string& s, std::string_view open, std::string_view close) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
        s = trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
        return true;
    }
    return false;
}

std::string surface_form(std::string_view raw) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kWrappers = {{
        {"\\(", "\\)"},
        {"\\[", "\\]"},
        {"$$", "$$"},
        {"$", "$"},
        {"\\boxed{", "}"},
    }};
    std::string s(raw);
    for (;;) {
        std::string before = s;
        s = trim(s);
        for (const auto& [open, close] : kWrappers)
            if (strip_pair(s, open, close)) break;
        while (!s.empty() && (s.back() == '.' || std::isspace(static_cast<unsigned char>(s.back())))) s.pop_back();
        std::string compact;
        compact.reserve(s.size());
        for (char c : s)
            if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
        s = std::move(compact);
        if (s == before) return s;
    }
}

std::string render_decimal(const Rational& v) {
    cpp_int num = boost::multiprecision::numerator(v);
    cpp_int den = boost::multiprecision::denominator(v);
    std::string out;
    if (num < 0) {
        out += '-';
        num = -num;
    }
    cpp_int whole = num / den;
    cpp_int rem = num % den;
    out += whole.str();
    out += '.';
    if (rem == 0) return out + "0";
    // Decimal literals have denominators dividing a power of ten, so this terminates.
    while (rem != 0) {
        rem *= 10;
        out += static_cast<char>('0' + static_cast<int>(rem / den));
        rem %= den;
    }
    return out;
}

CanonicalAnswer make_exact(const cpp_int& num, const cpp_int& den) {
    CanonicalAnswer a;
    a.value = Rational(num, den);
    if (boost::multiprecision::denominator(a.value) == 1) {
        a.kind = CanonicalAnswer::Kind::integer;
        a.text = boost::multiprecision::numerator(a.value).str();
    } else {
        a.kind = CanonicalAnswer::Kind::rational;
        a.text = boost::multiprecision::numerator(a.value).str() + "/" + boost::multiprecision::denominator(a.value).str();
    }
    return a;
}

cpp_int parse_int(std::string digits) {
    std::erase(digits, ',');
    bool neg = false;
    if (!digits.empty() && (digits[0] == '+' || digits[0] == '-')) {
        neg = digits[0] == '-';
        digits.erase(0, 1);
    }
    // cpp_int reads a leading 0 as octal
    const auto nz = digits.find_first_not_of('0');
    digits = nz == std::string::npos ? "0" : digits.substr(nz);
    cpp_int v(digits);
    return neg ? cpp_int(-v) : v;
}

Rational abs_value(const Rational& v) { return v < 0 ? Rational(-v) : v; }

}  // namespace

const char* to_string(CanonicalAnswer::Kind kind) {
    switch (kind) {
        case CanonicalAnswer::Kind::integer: return "integer";
        case CanonicalAnswer::Kind::rational: return "rational";
        case CanonicalAnswer::Kind::decimal: return "decimal";
        case CanonicalAnswer::Kind::text: return "text";
    }
    return "text";
}

CanonicalAnswer normalize(std::string_view answer) {
    static const std::regex kInteger(R"(^[+-]?(\d{1,3}(,\d{3})+|\d+)$)");
    static const std::regex kDecimal(R"(^([+-]?)(\d*)\.(\d+)$)");
    static const std::regex kFrac(R"(^([+-]?)\\[dt]?frac\{([+-]?\d+)\}\{([+-]?\d+)\}$)");
    static const std::regex kSlash(R"(^([+-]?\d+)/([+-]?\d+)$)");

    const std::string s = surface_form(answer);
    std::smatch m;

    if (std::regex_match(s, kInteger)) return make_exact(parse_int(s), 1);

    if (std::regex_match(s, m, kFrac)) {
        cpp_int num = parse_int(m[2].str());
        cpp_int den = parse_int(m[3].str());
        if (den != 0) return make_exact(m[1].str() == "-" ? cpp_int(-num) : num, den);
    }
    if (std::regex_match(s, m, kSlash)) {
        cpp_int den = parse_int(m[2].str());
        if (den != 0) return make_exact(parse_int(m[1].str()), den);
    }
    if (std::regex_match(s, m, kDecimal)) {
        const std::string whole = m[2].str().empty() ? "0" : m[2].str();
        const std::string frac = m[3].str();
        cpp_int scale = boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(frac.size()));
        cpp_int num = parse_int(whole) * scale + parse_int(frac);
        if (m[1].str() == "-") num = -num;
        CanonicalAnswer a;
        a.kind = CanonicalAnswer::Kind::decimal;
        a.value = Rational(num, scale);
        a.text = render_decimal(a.value);
        return a;
    }

    CanonicalAnswer a;
    a.kind = CanonicalAnswer::Kind::text;
    a.text = s;
    return a;
}

bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b, double rel_tol) {
    if (!(rel_tol >= 0.0)) throw std::invalid_argument("rel_tol must be >= 0");
    if (a.is_numeric() != b.is_numeric()) return false;
    if (!a.is_numeric()) return a.text == b.text;
    if ((a.is_exact() && b.is_exact()) || rel_tol == 0.0) return a.value == b.value;
    const Rational diff = abs_value(a.value - b.value);
    const Rational scale = std::max(abs_value(a.value), abs_value(b.value));
    return diff <= Rational(rel_tol) * scale;
}

bool equivalent(std::string_view a, std::string_view b, double rel_tol) {
    return equivalent(normalize(a), normalize(b), rel_tol);
}

}  // namespace mcot
