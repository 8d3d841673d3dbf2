#pragma once

#include <string>
#include <vector>

#include "stepcache/json_verifier.hpp"
#include "stepcache/math_verifier.hpp"
#include "stepcache/step.hpp"

namespace stepcache {

enum class PatchPromptKind {
    MathBlock,
    JsonStrict,
    JsonRepair,
};

struct PatchPrompt {
    PatchPromptKind kind = PatchPromptKind::MathBlock;
    std::string body;
};

// Block patch for the failing suffix of a math solution. The body carries the
// new prompt verbatim, the full math state hint (a, b, c, var,
// expected_solution, expected_intermediate), the verified prefix and the
// first failing step, and instructs the backend to emit only the remaining
// steps ending with "v = v_star".
PatchPrompt build_math_patch_prompt(const std::string& new_prompt, const MathState& state,
                                    const std::vector<Step>& verified_prefix,
                                    const Step& first_failed);

// Strict structured patch: demands valid JSON only, lists required keys (the
// clause is omitted when empty) and embeds the cached JSON as a schema
// example.
PatchPrompt build_json_patch_prompt(const std::string& new_prompt,
                                    const JsonConstraint& constraint,
                                    const std::string& cached_json);

// One-shot repair with validator feedback: embeds the previous bad output and
// the machine-readable error reason.
PatchPrompt build_json_repair_prompt(const std::string& new_prompt,
                                     const JsonConstraint& constraint,
                                     const std::string& bad_output,
                                     const std::string& error_reason);

}  // namespace stepcache
