#include "stepcache/prompts.hpp"

#include <map>

#include "stepcache/prompt_templates.hpp"
#include "stepcache/segmenter.hpp"

namespace stepcache {

namespace {

// Single-pass substitution: scans the template for {FIELD} tokens and splices
// in the mapped values, so substituted text is never re-scanned.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& fields) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        const std::size_t close = tmpl.find('}', open);
        if (close == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        const std::string name = tmpl.substr(open + 1, close - open - 1);
        const auto it = fields.find(name);
        if (it != fields.end()) {
            out += it->second;
        } else {
            out.append(tmpl, open, close - open + 1);
        }
        pos = close + 1;
    }
    return out;
}

std::string keys_clause(const JsonConstraint& constraint) {
    if (constraint.required_keys.empty()) return "";
    std::string keys;
    for (std::size_t i = 0; i < constraint.required_keys.size(); ++i) {
        if (i > 0) keys += ", ";
        keys += constraint.required_keys[i];
    }
    return render_template(templates::kRequiredKeysClause, {{"KEYS", keys}});
}

}  // namespace

PatchPrompt build_math_patch_prompt(const std::string& new_prompt, const MathState& state,
                                    const std::vector<Step>& verified_prefix,
                                    const Step& first_failed) {
    std::string body = render_template(
        templates::kMathPatch,
        {{"PROMPT", new_prompt},
         {"A", state.a.to_string()},
         {"B", state.b.to_string()},
         {"C", state.c.to_string()},
         {"VAR", std::string(1, state.var)},
         {"V_STAR", state.v_star.to_string()},
         {"INTERMEDIATE", state.intermediate.to_string()},
         {"LAST_STEPS", verified_prefix.empty() ? "(none)" : stitch(verified_prefix)},
         {"FAILED_STEP", first_failed.text.empty() ? "(none)" : first_failed.text}});
    return PatchPrompt{PatchPromptKind::MathBlock, std::move(body)};
}

PatchPrompt build_json_patch_prompt(const std::string& new_prompt,
                                    const JsonConstraint& constraint,
                                    const std::string& cached_json) {
    std::string body = render_template(
        templates::kJsonPatch,
        {{"PROMPT", new_prompt},
         {"REQUIRED_KEYS_CLAUSE", keys_clause(constraint)},
         {"CACHED_JSON", cached_json.empty() ? "(none)" : cached_json}});
    return PatchPrompt{PatchPromptKind::JsonStrict, std::move(body)};
}

PatchPrompt build_json_repair_prompt(const std::string& new_prompt,
                                     const JsonConstraint& constraint,
                                     const std::string& bad_output,
                                     const std::string& error_reason) {
    std::string body = render_template(
        templates::kJsonRepair,
        {{"PROMPT", new_prompt},
         {"REQUIRED_KEYS_CLAUSE", keys_clause(constraint)},
         {"BAD_OUTPUT", bad_output.empty() ? "(empty)" : bad_output},
         {"ERROR_REASON", error_reason}});
    return PatchPrompt{PatchPromptKind::JsonRepair, std::move(body)};
}

}  // namespace stepcache
