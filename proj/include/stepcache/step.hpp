#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stepcache {

enum class StepKind {
    Generic,
    JsonPayload,
};

// One unit of a segmented model response; the reuse granule. Indices within a
// step list are 1-based and contiguous; a JsonPayload step is always the sole
// step of its list.
struct Step {
    int index = 1;
    std::string text;
    StepKind kind = StepKind::Generic;

    bool operator==(const Step& o) const {
        return index == o.index && text == o.text && kind == o.kind;
    }
};

std::string to_string(StepKind kind);
StepKind step_kind_from_string(const std::string& name);

}  // namespace stepcache
