#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stepcache/check_result.hpp"
#include "stepcache/rational.hpp"
#include "stepcache/step.hpp"

namespace stepcache {

// Parsed linear equation a*v + b = c with derived expected values. a is
// nonzero; v_star = (c - b) / a and intermediate = c - b hold exactly.
struct MathState {
    Rational a;
    Rational b;
    Rational c;
    char var = 'x';
    Rational v_star;
    Rational intermediate;
};

// Throws std::domain_error when a is zero.
MathState make_math_state(const Rational& a, const Rational& b, const Rational& c, char var);

// Same (a, b, c, v) tuple; variable compared case-insensitively.
bool same_equation(const MathState& lhs, const MathState& rhs);

// Locates the pattern "<a><v> (+|-) <b> = <c>" anywhere in the prompt
// (paraphrase wrappers tolerated); the target variable comes from a trailing
// "for <v>" clause when present, else from the equation. Returns nullopt when
// no equation with a nonzero coefficient is found.
std::optional<MathState> parse_math_prompt(const std::string& prompt);

// Per-step verdict. per_step_pass is the suffix-propagated marking (failures
// form a suffix); first_inconsistent and inconsistent_fraction reflect the
// raw per-step checks before propagation.
struct MathVerdict {
    std::vector<bool> per_step_pass;
    std::optional<int> first_inconsistent;  // 1-based
    double inconsistent_fraction = 0.0;
};

// Flags steps that contradict the expected solution: a recognized statement
// "k*v [+ m] = n" fails when substituting v = v_star breaks the equality
// (final assignments, intermediate equalities, and restated equation
// constants all reduce to this). Steps with no recognizable equation content
// pass. Integer literals compare exactly; decimal literals within 1e-9.
MathVerdict verify_steps(const std::vector<Step>& steps, const MathState& state);

// The guaranteed-correct minimal answer "<v> = <v_star>".
std::string deterministic_solve(const MathState& state);

// PASS iff the answer contains a final assignment equal to v_star and no
// contradicting statement. FAIL reasons: final_assignment_mismatch,
// intermediate_mismatch, equation_constant_mismatch, no_final_assignment.
CheckResult final_math_check(const std::string& answer, const MathState& state);

namespace detail {

// A numeric literal from scanned text; exact is valid only for integers.
struct NumberLit {
    bool is_decimal = false;
    Rational exact;
    double approx = 0.0;
};

// A recognized statement about a single variable: k*v = rhs (Intermediate),
// v = rhs (FinalAssignment), or k*v + offset = rhs (Equation).
struct LinearStatement {
    enum class Form { FinalAssignment, Intermediate, Equation };
    Form form = Form::FinalAssignment;
    char var = 'x';
    NumberLit coeff;                  // implicit 1 for FinalAssignment
    std::optional<NumberLit> offset;  // present iff Form::Equation
    NumberLit rhs;
    std::size_t pos = 0;  // offset of the variable occurrence, reading order
};

std::vector<LinearStatement> scan_linear_statements(const std::string& text);

// True when substituting v = v_star satisfies the statement.
bool statement_consistent(const LinearStatement& st, const Rational& v_star);

}  // namespace detail

}  // namespace stepcache
