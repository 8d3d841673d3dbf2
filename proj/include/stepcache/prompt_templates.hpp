#pragma once

// Fixed wording of the patch and repair prompt templates. The builders in
// prompts.hpp substitute the {...} fields; the simulated backend recognizes
// the leading marker lines. Changing these strings changes the wire behavior
// of every patch/repair call, so they live in one place.

namespace stepcache::templates {

// Fields: {PROMPT} {A} {B} {C} {VAR} {V_STAR} {INTERMEDIATE} {LAST_STEPS}
// {FAILED_STEP}. The math state hint carries (a, b, c, var, expected
// solution, expected intermediate) so the backend cannot reuse stale
// constants; the instruction pins the required final line.
inline constexpr const char* kMathPatch =
    "We are patching a cached step-by-step solution to a linear equation.\n"
    "\n"
    "New problem: {PROMPT}\n"
    "\n"
    "Math state (must match): a={A}, b={B}, c={C}, var={VAR}, "
    "expected_solution={V_STAR}, expected_intermediate={INTERMEDIATE}\n"
    "\n"
    "Last verified step(s):\n"
    "{LAST_STEPS}\n"
    "\n"
    "First failing step (for reference):\n"
    "{FAILED_STEP}\n"
    "\n"
    "Task: Output only the remaining steps needed to finish the solution. "
    "Be concise and end with \"{VAR} = {V_STAR}\".\n";

// Fields: {PROMPT} {REQUIRED_KEYS_CLAUSE} {CACHED_JSON}. The keys clause is
// omitted entirely when no keys are required.
inline constexpr const char* kJsonPatch =
    "Return valid JSON only. No markdown, no code fences, no explanations.\n"
    "\n"
    "New request: {PROMPT}\n"
    "{REQUIRED_KEYS_CLAUSE}"
    "\n"
    "Cached JSON (may be missing keys):\n"
    "{CACHED_JSON}\n"
    "\n"
    "Task: Produce a JSON object that satisfies the new request and includes "
    "all required keys. Preserve existing fields where consistent, but add or "
    "modify fields as needed.\n";

// Fields: {PROMPT} {REQUIRED_KEYS_CLAUSE} {BAD_OUTPUT} {ERROR_REASON}.
inline constexpr const char* kJsonRepair =
    "Return valid JSON only. No markdown, no code fences, no explanations.\n"
    "\n"
    "New request: {PROMPT}\n"
    "{REQUIRED_KEYS_CLAUSE}"
    "\n"
    "Previous output:\n"
    "{BAD_OUTPUT}\n"
    "\n"
    "Validator error:\n"
    "{ERROR_REASON}\n"
    "\n"
    "Task: Fix the JSON so it parses and includes all required keys. "
    "Output only the corrected JSON.\n";

inline constexpr const char* kRequiredKeysClause = "\nRequired keys: {KEYS}\n";

}  // namespace stepcache::templates
