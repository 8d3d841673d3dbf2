#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stepcache {

// L2-normalized prompt embedding; dimension is fixed per embedder.
struct Embedding {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
};

double cosine_similarity(const Embedding& a, const Embedding& b);

// Pluggable prompt embedder. Implementations must be deterministic: identical
// prompts map to identical vectors for a fixed configuration.
class Embedder {
public:
    virtual ~Embedder() = default;

    // Throws EmptyPromptError for whitespace-only prompts.
    virtual Embedding embed(const std::string& prompt) const = 0;
    virtual std::size_t dimension() const = 0;

    // Configuration block persisted in the cache file header; restore() uses
    // it to rebuild an equivalent embedder.
    virtual nlohmann::json config() const = 0;
};

// Default dependency-free embedder: hashed character-trigram term frequencies
// over the lowercased prompt, L2-normalized. Trigrams containing digits get a
// higher weight: numeric constants carry the task identity, while paraphrase
// templates share most of the plain-text trigrams. A learned model can be
// plugged in behind the Embedder interface without touching the store.
class TrigramEmbedder : public Embedder {
public:
    explicit TrigramEmbedder(std::size_t dimension = 512, double digit_weight = 3.0);

    Embedding embed(const std::string& prompt) const override;
    std::size_t dimension() const override { return dimension_; }
    nlohmann::json config() const override;

private:
    std::size_t dimension_;
    double digit_weight_;
};

// Builds an embedder from a persisted config block; throws CorruptStoreError
// (record 0) on unknown kinds.
std::shared_ptr<const Embedder> embedder_from_config(const nlohmann::json& config);

}  // namespace stepcache
