#include "stepcache/math_verifier.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "stepcache/text_util.hpp"

namespace stepcache {

namespace detail {

namespace {

constexpr double kDecimalTolerance = 1e-9;

bool is_space(char c) { return c == ' ' || c == '\t'; }

// Skips spaces backward from i (exclusive upper bound semantics: i points at
// the last candidate character). Returns npos when the start is reached.
std::size_t prev_non_space(const std::string& s, std::size_t i) {
    while (i != std::string::npos && i < s.size() && is_space(s[i])) {
        i = i == 0 ? std::string::npos : i - 1;
    }
    return i;
}

std::size_t next_non_space(const std::string& s, std::size_t i) {
    while (i < s.size() && is_space(s[i])) ++i;
    return i;
}

// UTF-8 middle dot "·" used as a multiplication sign.
bool is_mul_dot_end(const std::string& s, std::size_t i) {
    return i >= 1 && static_cast<unsigned char>(s[i]) == 0xB7 &&
           static_cast<unsigned char>(s[i - 1]) == 0xC2;
}

// UTF-8 minus sign "−" starting at i.
bool is_utf8_minus(const std::string& s, std::size_t i) {
    return i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
           static_cast<unsigned char>(s[i + 1]) == 0x88 &&
           static_cast<unsigned char>(s[i + 2]) == 0x92;
}

std::optional<NumberLit> make_literal(const std::string& digits, bool negative) {
    if (digits.empty()) return std::nullopt;
    std::string norm = digits.front() == '.' ? "0" + digits : digits;
    if (negative) norm = "-" + norm;
    NumberLit lit;
    lit.is_decimal = norm.find('.') != std::string::npos;
    const auto exact = Rational::parse(norm);
    if (exact) {
        lit.exact = *exact;
        lit.approx = exact->to_double();
    } else {
        // Out-of-range integer or long decimal: fall back to double only.
        lit.is_decimal = true;
        lit.approx = std::strtod(norm.c_str(), nullptr);
    }
    return lit;
}

// Parses a number forward from i: optional sign, digits, optional fraction.
// Rejects literals glued to a following letter. On success advances i past
// the literal.
std::optional<NumberLit> parse_number_forward(const std::string& s, std::size_t& i) {
    std::size_t j = next_non_space(s, i);
    bool negative = false;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) {
        negative = s[j] == '-';
        j = next_non_space(s, j + 1);
    } else if (j < s.size() && is_utf8_minus(s, j)) {
        negative = true;
        j = next_non_space(s, j + 3);
    }
    std::string digits;
    bool seen_dot = false;
    while (j < s.size()) {
        if (is_ascii_digit(s[j])) {
            digits.push_back(s[j]);
            ++j;
        } else if (s[j] == '.' && !seen_dot && j + 1 < s.size() && is_ascii_digit(s[j + 1]) &&
                   !digits.empty()) {
            seen_dot = true;
            digits.push_back('.');
            ++j;
        } else {
            break;
        }
    }
    if (digits.empty()) return std::nullopt;
    if (j < s.size() && (is_ascii_alpha(s[j]) || s[j] == '_')) return std::nullopt;
    const auto lit = make_literal(digits, negative);
    if (!lit) return std::nullopt;
    i = j;
    return lit;
}

struct CoeffScan {
    bool rejected = false;   // expression context, e.g. "17 - 2x"
    bool has_coeff = false;  // explicit digits or unary minus present
    NumberLit coeff;         // defaults to 1
};

// Parses an optional coefficient ending just before the variable at var_pos.
CoeffScan parse_coefficient_backward(const std::string& s, std::size_t var_pos) {
    CoeffScan out;
    out.coeff = NumberLit{false, Rational(1), 1.0};
    if (var_pos == 0) return out;

    std::size_t i = prev_non_space(s, var_pos - 1);
    if (i == std::string::npos) return out;

    // Optional explicit multiplication sign.
    if (s[i] == '*') {
        i = prev_non_space(s, i == 0 ? std::string::npos : i - 1);
    } else if (is_mul_dot_end(s, i)) {
        i = prev_non_space(s, i < 2 ? std::string::npos : i - 2);
    }
    if (i == std::string::npos) return out;

    // Digits (and at most one dot) scanned backward.
    std::string digits;
    bool seen_dot = false;
    while (i != std::string::npos) {
        const char c = s[i];
        if (is_ascii_digit(c)) {
            digits.insert(digits.begin(), c);
        } else if (c == '.' && !seen_dot && !digits.empty()) {
            seen_dot = true;
            digits.insert(digits.begin(), c);
        } else {
            break;
        }
        i = i == 0 ? std::string::npos : i - 1;
    }

    // Optional unary sign; a sign or digit chained to another operand means
    // this is a larger expression we do not model, so reject the occurrence.
    bool negative = false;
    std::size_t sign_end = i == std::string::npos ? std::string::npos : prev_non_space(s, i);
    if (sign_end != std::string::npos && (s[sign_end] == '-' || s[sign_end] == '+')) {
        const std::size_t before =
            prev_non_space(s, sign_end == 0 ? std::string::npos : sign_end - 1);
        if (before != std::string::npos && (is_ascii_digit(s[before]) || s[before] == ')')) {
            out.rejected = true;
            return out;
        }
        negative = s[sign_end] == '-';
    } else if (sign_end != std::string::npos && is_mul_dot_end(s, sign_end)) {
        // stray multiplication dot with nothing before it
    } else if (sign_end != std::string::npos &&
               (is_ascii_digit(s[sign_end]) || s[sign_end] == '.' || s[sign_end] == ')')) {
        if (!digits.empty() || s[sign_end] == ')') {
            out.rejected = true;
            return out;
        }
    } else if (sign_end != std::string::npos && sign_end >= 2 && is_utf8_minus(s, sign_end - 2)) {
        negative = true;
    }

    if (digits.empty()) {
        if (negative) {
            out.has_coeff = true;
            out.coeff = NumberLit{false, Rational(-1), -1.0};
        }
        return out;
    }
    auto lit = make_literal(digits, negative);
    if (!lit) {
        out.rejected = true;
        return out;
    }
    out.has_coeff = true;
    out.coeff = *lit;
    return out;
}

}  // namespace

std::vector<LinearStatement> scan_linear_statements(const std::string& text) {
    std::vector<LinearStatement> out;
    for (std::size_t p = 0; p < text.size(); ++p) {
        const char v = text[p];
        if (!is_ascii_alpha(v)) continue;
        // Standalone variable letter: not inside a word.
        if (p > 0 && (is_ascii_alpha(text[p - 1]) || text[p - 1] == '_')) continue;
        if (p + 1 < text.size() && is_word_char(text[p + 1])) continue;

        const CoeffScan coeff = parse_coefficient_backward(text, p);
        if (coeff.rejected) continue;

        std::size_t i = next_non_space(text, p + 1);
        std::optional<NumberLit> offset;
        if (i < text.size() && (text[i] == '+' || text[i] == '-' || is_utf8_minus(text, i))) {
            const bool minus = text[i] != '+';
            i = next_non_space(text, i + (text[i] == '+' || text[i] == '-' ? 1 : 3));
            std::size_t j = i;
            auto m = parse_number_forward(text, j);
            if (!m) continue;
            if (minus) {
                m->approx = -m->approx;
                if (!m->is_decimal) m->exact = -m->exact;
            }
            offset = *m;
            i = next_non_space(text, j);
        }
        if (i >= text.size() || text[i] != '=') continue;
        while (i < text.size() && text[i] == '=') ++i;
        std::size_t j = i;
        const auto rhs = parse_number_forward(text, j);
        if (!rhs) continue;

        LinearStatement st;
        st.var = v;
        st.pos = p;
        st.rhs = *rhs;
        if (offset) {
            st.form = LinearStatement::Form::Equation;
            st.coeff = coeff.coeff;
            st.offset = offset;
        } else if (coeff.has_coeff) {
            st.form = LinearStatement::Form::Intermediate;
            st.coeff = coeff.coeff;
        } else {
            st.form = LinearStatement::Form::FinalAssignment;
            st.coeff = NumberLit{false, Rational(1), 1.0};
        }
        out.push_back(std::move(st));
    }
    return out;
}

bool statement_consistent(const LinearStatement& st, const Rational& v_star) {
    const NumberLit zero{false, Rational(0), 0.0};
    const NumberLit& m = st.offset ? *st.offset : zero;
    const bool all_exact = !st.coeff.is_decimal && !m.is_decimal && !st.rhs.is_decimal;
    if (all_exact) {
        try {
            return st.coeff.exact * v_star + m.exact == st.rhs.exact;
        } catch (const std::overflow_error&) {
            // fall through to the double comparison
        }
    }
    const double lhs = st.coeff.approx * v_star.to_double() + m.approx;
    return std::fabs(lhs - st.rhs.approx) <= kDecimalTolerance;
}

}  // namespace detail

MathState make_math_state(const Rational& a, const Rational& b, const Rational& c, char var) {
    if (a.is_zero()) {
        throw std::domain_error("linear equation with zero coefficient");
    }
    MathState st;
    st.a = a;
    st.b = b;
    st.c = c;
    st.var = var;
    st.intermediate = c - b;
    st.v_star = st.intermediate / a;
    return st;
}

bool same_equation(const MathState& lhs, const MathState& rhs) {
    const auto lower = [](char c) { return c >= 'A' && c <= 'Z' ? char(c - 'A' + 'a') : c; };
    return lhs.a == rhs.a && lhs.b == rhs.b && lhs.c == rhs.c && lower(lhs.var) == lower(rhs.var);
}

std::optional<MathState> parse_math_prompt(const std::string& prompt) {
    using detail::LinearStatement;
    const auto statements = detail::scan_linear_statements(prompt);

    const LinearStatement* equation = nullptr;
    for (const auto& st : statements) {
        if (st.form != LinearStatement::Form::Equation) continue;
        if (st.coeff.is_decimal ? st.coeff.approx == 0.0 : st.coeff.exact.is_zero()) continue;
        equation = &st;
        break;
    }
    if (!equation) return std::nullopt;

    // Trailing "for <v>" clause overrides the equation's variable.
    char var = equation->var;
    for (std::size_t p = prompt.size(); p >= 4;) {
        --p;
        const std::size_t f = prompt.rfind("for ", p);
        if (f == std::string::npos) break;
        p = f;
        if (f > 0 && is_word_char(prompt[f - 1])) continue;
        std::size_t i = f + 4;
        while (i < prompt.size() && prompt[i] == ' ') ++i;
        if (i < prompt.size() && is_ascii_alpha(prompt[i]) &&
            (i + 1 >= prompt.size() || !is_word_char(prompt[i + 1]))) {
            var = prompt[i];
            break;
        }
    }

    const auto to_rational = [](const detail::NumberLit& lit) {
        return lit.is_decimal ? Rational::parse(shortest_round_trip(lit.approx))
                                    .value_or(Rational(static_cast<std::int64_t>(lit.approx)))
                              : lit.exact;
    };
    return make_math_state(to_rational(equation->coeff), to_rational(*equation->offset),
                           to_rational(equation->rhs), var);
}

MathVerdict verify_steps(const std::vector<Step>& steps, const MathState& state) {
    MathVerdict verdict;
    verdict.per_step_pass.assign(steps.size(), true);

    std::size_t raw_fails = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        bool ok = true;
        for (const auto& st : detail::scan_linear_statements(steps[i].text)) {
            if (std::tolower(st.var) != std::tolower(state.var)) continue;
            if (!detail::statement_consistent(st, state.v_star)) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            ++raw_fails;
            if (!verdict.first_inconsistent) {
                verdict.first_inconsistent = static_cast<int>(i + 1);
            }
        }
    }
    verdict.inconsistent_fraction =
        steps.empty() ? 0.0 : static_cast<double>(raw_fails) / static_cast<double>(steps.size());

    // Failures propagate to the end of the list: later steps depend on the
    // first inconsistent one.
    if (verdict.first_inconsistent) {
        for (std::size_t i = static_cast<std::size_t>(*verdict.first_inconsistent) - 1;
             i < steps.size(); ++i) {
            verdict.per_step_pass[i] = false;
        }
    }
    return verdict;
}

std::string deterministic_solve(const MathState& state) {
    return std::string(1, state.var) + " = " + state.v_star.to_string();
}

CheckResult final_math_check(const std::string& answer, const MathState& state) {
    bool has_correct_final = false;
    const char* contradiction = nullptr;

    for (const auto& st : detail::scan_linear_statements(answer)) {
        if (std::tolower(st.var) != std::tolower(state.var)) continue;
        const bool consistent = detail::statement_consistent(st, state.v_star);
        if (st.form == detail::LinearStatement::Form::FinalAssignment) {
            if (consistent) {
                has_correct_final = true;
            } else if (!contradiction) {
                contradiction = "final_assignment_mismatch";
            }
        } else if (!consistent && !contradiction) {
            contradiction = st.form == detail::LinearStatement::Form::Intermediate
                                ? "intermediate_mismatch"
                                : "equation_constant_mismatch";
        }
    }

    if (contradiction) return CheckResult::fail(contradiction);
    if (!has_correct_final) return CheckResult::fail("no_final_assignment");
    return CheckResult::ok();
}

}  // namespace stepcache
