#pragma once

// Answer normalization and equivalence.
//
// Supported numeric forms: integers (optionally with thousands separators),
// decimals, \frac{a}{b} / \dfrac / \tfrac with integer parts, and a/b. All
// numeric values are held as exact rationals. Anything else is compared as
// text after whitespace removal. Unsupported forms are listed in
// docs/verifier.md.

#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace mcot {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr double kDefaultRelTol = 1e-6;

struct CanonicalAnswer {
    enum class Kind { integer, rational, decimal, text };

    Kind kind = Kind::text;
    Rational value{0};  // meaningful for numeric kinds
    std::string text;   // canonical rendering; re-normalizes to the same answer

    bool is_numeric() const { return kind != Kind::text; }
    bool is_exact() const { return kind == Kind::integer || kind == Kind::rational; }

    bool operator==(const CanonicalAnswer&) const = default;
};

const char* to_string(CanonicalAnswer::Kind kind);

/// Total and idempotent: normalize(normalize(x).text) == normalize(x).
CanonicalAnswer normalize(std::string_view answer);

/// Rational vs rational compares exactly. When either side is a decimal the
/// comparison is |a-b| <= rel_tol * max(|a|,|b|), evaluated exactly. Text
/// compares byte-for-byte after normalization. Numeric never equals text.
bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b, double rel_tol = kDefaultRelTol);
bool equivalent(std::string_view a, std::string_view b, double rel_tol = kDefaultRelTol);

}  // namespace mcot
