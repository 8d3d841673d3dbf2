#pragma once

#include <string>
#include <vector>

#include "stepcache/check_result.hpp"
#include "stepcache/step.hpp"

namespace stepcache {

// Top-level keys a structured output must contain. Keys are unique, non-empty
// strings; order is preserved for reporting.
struct JsonConstraint {
    std::vector<std::string> required_keys;

    bool operator==(const JsonConstraint& o) const { return required_keys == o.required_keys; }
};

// PASS iff step.text parses as a JSON object and every required key is
// present at top level. FAIL reasons: "parse_error: <detail>" or
// "missing_keys: [<keys>]" (exact set difference, in required order). An
// array parses but cannot satisfy keys, so any non-empty requirement fails
// with missing_keys.
CheckResult verify_json_step(const Step& step, const JsonConstraint& constraint);

// Same semantics applied to a stitched answer: extracts the JSON payload
// first and fails with a parse_error when extraction fails.
CheckResult final_json_check(const std::string& answer, const JsonConstraint& constraint);

}  // namespace stepcache
