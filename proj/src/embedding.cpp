#include "stepcache/embedding.hpp"

#include <cmath>

#include "stepcache/errors.hpp"
#include "stepcache/text_util.hpp"

namespace stepcache {

double cosine_similarity(const Embedding& a, const Embedding& b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    const std::size_t n = std::min(a.values.size(), b.values.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

TrigramEmbedder::TrigramEmbedder(std::size_t dimension, double digit_weight)
    : dimension_(dimension), digit_weight_(digit_weight) {}

Embedding TrigramEmbedder::embed(const std::string& prompt) const {
    if (trim_view(prompt).empty()) {
        throw EmptyPromptError();
    }
    const std::string text = lowercase(trim_view(prompt));

    Embedding out;
    out.values.assign(dimension_, 0.0);

    // FNV-1a over each 3-byte window (whole text when shorter); fixed
    // constants keep the mapping stable across platforms.
    const auto bucket = [this](const char* data, std::size_t len) {
        std::uint64_t h = 1469598103934665603ull;
        for (std::size_t i = 0; i < len; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h % dimension_);
    };
    const auto weight = [this](const char* data, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            if (data[i] >= '0' && data[i] <= '9') return digit_weight_;
        }
        return 1.0;
    };

    if (text.size() < 3) {
        out.values[bucket(text.data(), text.size())] += weight(text.data(), text.size());
    } else {
        for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
            out.values[bucket(text.data() + i, 3)] += weight(text.data() + i, 3);
        }
    }

    double norm = 0.0;
    for (double v : out.values) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : out.values) v /= norm;
    return out;
}

nlohmann::json TrigramEmbedder::config() const {
    return {{"kind", "char_trigram_tf"},
            {"dimension", dimension_},
            {"digit_weight", digit_weight_}};
}

std::shared_ptr<const Embedder> embedder_from_config(const nlohmann::json& config) {
    const std::string kind = config.value("kind", "");
    if (kind == "char_trigram_tf") {
        return std::make_shared<TrigramEmbedder>(config.value("dimension", std::size_t{512}),
                                                 config.value("digit_weight", 3.0));
    }
    throw CorruptStoreError(0, "unknown embedder kind '" + kind + "'");
}

}  // namespace stepcache
