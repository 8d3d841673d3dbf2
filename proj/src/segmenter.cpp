#include "stepcache/segmenter.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "stepcache/errors.hpp"
#include "stepcache/text_util.hpp"

namespace stepcache {

namespace {

// True if a "Step <n>" enumeration marker begins at position pos. The word
// must sit on a word boundary and be followed by whitespace and digits; a
// trailing ':' or '.' is optional and not required.
bool is_step_marker(const std::string& s, std::size_t pos) {
    if (pos + 4 > s.size()) return false;
    if (pos > 0 && is_word_char(s[pos - 1])) return false;
    const std::string word = lowercase(s.substr(pos, 4));
    if (word != "step") return false;
    std::size_t i = pos + 4;
    if (i >= s.size() || (s[i] != ' ' && s[i] != '\t')) return false;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return i < s.size() && is_ascii_digit(s[i]);
}

// True if a list bullet begins the line whose first non-blank character is at
// position pos: "- ", "* ", or "<digits>. ".
bool is_bullet_at(const std::string& s, std::size_t pos) {
    if (pos >= s.size()) return false;
    if ((s[pos] == '-' || s[pos] == '*') && pos + 1 < s.size() && s[pos + 1] == ' ') {
        return true;
    }
    std::size_t i = pos;
    while (i < s.size() && is_ascii_digit(s[i])) ++i;
    return i > pos && i + 1 < s.size() && s[i] == '.' && s[i + 1] == ' ';
}

void split_at_positions(const std::string& text, const std::vector<std::size_t>& cuts,
                        std::vector<std::string>& out) {
    std::size_t start = 0;
    for (std::size_t cut : cuts) {
        if (cut > start) out.push_back(text.substr(start, cut - start));
        start = cut;
    }
    out.push_back(text.substr(start));
}

std::vector<std::string> split_paragraphs(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find("\n\n", start);
        if (pos == std::string::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + 2;
    }
    return out;
}

std::vector<std::string> split_step_markers(const std::string& fragment) {
    std::vector<std::size_t> cuts;
    for (std::size_t i = 1; i < fragment.size(); ++i) {
        if (is_step_marker(fragment, i)) cuts.push_back(i);
    }
    std::vector<std::string> out;
    split_at_positions(fragment, cuts, out);
    return out;
}

std::vector<std::string> split_bullets(const std::string& fragment) {
    std::vector<std::size_t> cuts;
    std::size_t line_start = 0;
    while (line_start < fragment.size()) {
        std::size_t first = line_start;
        while (first < fragment.size() && (fragment[first] == ' ' || fragment[first] == '\t')) {
            ++first;
        }
        if (line_start > 0 && is_bullet_at(fragment, first)) {
            cuts.push_back(line_start);
        }
        const std::size_t nl = fragment.find('\n', line_start);
        if (nl == std::string::npos) break;
        line_start = nl + 1;
    }
    std::vector<std::string> out;
    split_at_positions(fragment, cuts, out);
    return out;
}

}  // namespace

std::vector<Step> segment_generic(const std::string& response_text) {
    if (trim_view(response_text).empty()) {
        throw EmptyResponseError();
    }

    std::vector<std::string> texts;
    for (const std::string& para : split_paragraphs(response_text)) {
        for (const std::string& piece : split_step_markers(para)) {
            for (const std::string& leaf : split_bullets(piece)) {
                std::string t = trim(leaf);
                if (!t.empty()) texts.push_back(std::move(t));
            }
        }
    }

    std::vector<Step> steps;
    steps.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        steps.push_back(Step{static_cast<int>(i + 1), std::move(texts[i]), StepKind::Generic});
    }
    return steps;
}

std::string strip_code_fences(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        const std::size_t nl = text.find('\n', line_start);
        const std::size_t line_end = nl == std::string::npos ? text.size() : nl;
        const std::string_view line(text.data() + line_start, line_end - line_start);
        if (!trim_view(line).starts_with("```")) {
            out.append(line);
            if (nl != std::string::npos) out.push_back('\n');
        }
        if (nl == std::string::npos) break;
        line_start = nl + 1;
    }
    return out;
}

Step extract_json_step(const std::string& response_text) {
    const std::string text = strip_code_fences(response_text);

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char open = text[i];
        if (open != '{' && open != '[') continue;

        // Bounded scan for the matching close bracket, skipping string
        // literals and escapes, then validate the candidate with a real parse.
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t j = i; j < text.size(); ++j) {
            const char c = text[j];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{' || c == '[') {
                ++depth;
            } else if (c == '}' || c == ']') {
                --depth;
                if (depth == 0) {
                    std::string candidate = text.substr(i, j - i + 1);
                    if (nlohmann::json::accept(candidate)) {
                        return Step{1, std::move(candidate), StepKind::JsonPayload};
                    }
                    break;
                }
                if (depth < 0) break;
            }
        }
    }
    throw NoJsonFoundError();
}

std::string stitch(const std::vector<Step>& steps) {
    if (steps.empty()) {
        throw EmptyStepListError();
    }
    if (steps.size() == 1 && steps.front().kind == StepKind::JsonPayload) {
        return steps.front().text;
    }

    std::vector<const Step*> ordered;
    ordered.reserve(steps.size());
    for (const Step& s : steps) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Step* a, const Step* b) { return a->index < b->index; });

    std::string out;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (i > 0) out += kStitchDelimiter;
        out += ordered[i]->text;
    }
    return out;
}

std::string to_string(StepKind kind) {
    return kind == StepKind::JsonPayload ? "json_payload" : "generic";
}

StepKind step_kind_from_string(const std::string& name) {
    return name == "json_payload" ? StepKind::JsonPayload : StepKind::Generic;
}

}  // namespace stepcache
