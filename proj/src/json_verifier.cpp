#include "stepcache/json_verifier.hpp"

#include <nlohmann/json.hpp>

#include "stepcache/errors.hpp"
#include "stepcache/segmenter.hpp"

namespace stepcache {

namespace {

std::string missing_keys_reason(const std::vector<std::string>& missing) {
    std::string reason = "missing_keys: [";
    for (std::size_t i = 0; i < missing.size(); ++i) {
        if (i > 0) reason += ", ";
        reason += missing[i];
    }
    reason += "]";
    return reason;
}

}  // namespace

CheckResult verify_json_step(const Step& step, const JsonConstraint& constraint) {
    const auto parsed = nlohmann::json::parse(step.text, nullptr, false);
    if (parsed.is_discarded()) {
        return CheckResult::fail("parse_error: invalid JSON");
    }
    if (!parsed.is_object()) {
        // Arrays (and scalars) parse but carry no keys.
        if (!constraint.required_keys.empty()) {
            return CheckResult::fail(missing_keys_reason(constraint.required_keys));
        }
        return CheckResult::fail("parse_error: top-level value is not an object");
    }

    std::vector<std::string> missing;
    for (const std::string& key : constraint.required_keys) {
        if (!parsed.contains(key)) missing.push_back(key);
    }
    if (!missing.empty()) {
        return CheckResult::fail(missing_keys_reason(missing));
    }
    return CheckResult::ok();
}

CheckResult final_json_check(const std::string& answer, const JsonConstraint& constraint) {
    try {
        const Step payload = extract_json_step(answer);
        return verify_json_step(payload, constraint);
    } catch (const NoJsonFoundError&) {
        return CheckResult::fail("parse_error: no JSON payload found");
    }
}

}  // namespace stepcache
