#pragma once

#include <string>

namespace stepcache {

// Outcome of a rule-based check; reason is a machine-readable token (plus
// optional detail) and is empty on PASS.
struct CheckResult {
    bool pass = false;
    std::string reason;

    static CheckResult ok() { return {true, ""}; }
    static CheckResult fail(std::string why) { return {false, std::move(why)}; }
};

}  // namespace stepcache
