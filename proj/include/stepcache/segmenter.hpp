#pragma once

#include <string>
#include <vector>

#include "stepcache/step.hpp"

namespace stepcache {

// Stitch delimiter between generic steps; paragraph boundaries are also the
// coarsest segmentation rule, so stitch and segment_generic are inverses.
inline constexpr const char* kStitchDelimiter = "\n\n";

// Splits a response into ordered generic steps. Splits on paragraph
// boundaries (double newlines) first, then within each paragraph at
// "Step <n>" markers (case-insensitive, optional ':' or '.') and at
// line-leading list bullets ("- ", "* ", "<n>. "). Marker text is kept as
// part of the step so stitching reproduces the original content.
// Throws EmptyResponseError if the input is whitespace-only.
std::vector<Step> segment_generic(const std::string& response_text);

// Extracts the first syntactically valid JSON object or array (reading order)
// after stripping Markdown code fence lines, and returns it as the sole
// json_payload step. Throws NoJsonFoundError when nothing parses.
Step extract_json_step(const std::string& response_text);

// Joins generic steps with the stitch delimiter in index order; a single
// json_payload step is returned verbatim. Throws EmptyStepListError.
std::string stitch(const std::vector<Step>& steps);

// Removes Markdown code fence marker lines (``` with optional language tag),
// keeping fence contents.
std::string strip_code_fences(const std::string& text);

}  // namespace stepcache
