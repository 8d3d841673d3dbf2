#include "stepcache/cache_store.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "stepcache/errors.hpp"

namespace stepcache {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

void validate_entry(const CacheEntry& entry) {
    if (entry.steps.empty()) {
        throw std::invalid_argument("cache entry has no steps");
    }
    for (std::size_t i = 0; i < entry.steps.size(); ++i) {
        if (entry.steps[i].index != static_cast<int>(i + 1)) {
            throw std::invalid_argument("step indices must be contiguous from 1");
        }
        if (entry.steps[i].text.empty()) {
            throw std::invalid_argument("step text must be non-empty");
        }
        if (entry.steps[i].kind == StepKind::JsonPayload && entry.steps.size() != 1) {
            throw std::invalid_argument("a json_payload step must be the sole step");
        }
    }
    if (entry.constraints.task_type != TaskType::Json &&
        !entry.constraints.required_keys.required_keys.empty()) {
        throw std::invalid_argument("required_keys set on a non-json entry");
    }
}

json entry_to_json(const CacheEntry& e) {
    json steps = json::array();
    for (const Step& s : e.steps) {
        steps.push_back({{"index", s.index}, {"text", s.text}, {"kind", to_string(s.kind)}});
    }
    return json{
        {"id", e.id},
        {"prompt", e.prompt},
        {"embedding", e.embedding.values},
        {"steps", std::move(steps)},
        {"task_type", to_string(e.task_type)},
        {"constraints",
         {{"task_type", to_string(e.constraints.task_type)},
          {"required_keys", e.constraints.required_keys.required_keys},
          {"force_skip_reuse", e.constraints.force_skip_reuse}}},
        {"tool_outputs", e.tool_outputs},
        {"created_at", e.created_at},
        {"creating_call_id", e.creating_call_id},
        {"counters",
         {{"hits", e.counters.hits}, {"patches", e.counters.patches}, {"skips", e.counters.skips}}},
    };
}

CacheEntry entry_from_json(const json& j) {
    CacheEntry e;
    e.id = j.at("id").get<std::uint64_t>();
    e.prompt = j.at("prompt").get<std::string>();
    e.embedding.values = j.at("embedding").get<std::vector<double>>();
    for (const json& s : j.at("steps")) {
        e.steps.push_back(Step{s.at("index").get<int>(), s.at("text").get<std::string>(),
                               step_kind_from_string(s.at("kind").get<std::string>())});
    }
    e.task_type = task_type_from_string(j.at("task_type").get<std::string>());
    const json& c = j.at("constraints");
    e.constraints.task_type = task_type_from_string(c.at("task_type").get<std::string>());
    e.constraints.required_keys.required_keys =
        c.at("required_keys").get<std::vector<std::string>>();
    e.constraints.force_skip_reuse = c.at("force_skip_reuse").get<bool>();
    e.tool_outputs = j.at("tool_outputs").get<std::vector<std::string>>();
    e.created_at = j.at("created_at").get<std::string>();
    e.creating_call_id = j.at("creating_call_id").get<std::uint64_t>();
    const json& k = j.at("counters");
    e.counters.hits = k.at("hits").get<std::uint64_t>();
    e.counters.patches = k.at("patches").get<std::uint64_t>();
    e.counters.skips = k.at("skips").get<std::uint64_t>();
    return e;
}

}  // namespace

std::string to_string(TaskType t) {
    switch (t) {
        case TaskType::Math: return "math";
        case TaskType::Json: return "json";
        case TaskType::Other: return "other";
    }
    return "other";
}

TaskType task_type_from_string(const std::string& name) {
    if (name == "math") return TaskType::Math;
    if (name == "json") return TaskType::Json;
    return TaskType::Other;
}

CacheStore::CacheStore(std::shared_ptr<const Embedder> embedder, double similarity_floor)
    : embedder_(std::move(embedder)), similarity_floor_(similarity_floor) {}

CacheStore::CacheStore(CacheStore&& other) noexcept {
    std::unique_lock lock(other.mutex_);
    embedder_ = std::move(other.embedder_);
    similarity_floor_ = other.similarity_floor_;
    entries_ = std::move(other.entries_);
    next_id_ = other.next_id_;
}

Embedding CacheStore::embed(const std::string& prompt) const { return embedder_->embed(prompt); }

std::uint64_t CacheStore::insert(CacheEntry entry) {
    validate_entry(entry);
    if (entry.embedding.dimension() != embedder_->dimension()) {
        throw std::invalid_argument("embedding dimension mismatch");
    }

    std::unique_lock lock(mutex_);
    if (entry.id == 0) {
        entry.id = next_id_;
    }
    const std::uint64_t id = entry.id;
    const auto pos = std::lower_bound(
        entries_.begin(), entries_.end(), id,
        [](const CacheEntry& e, std::uint64_t want) { return e.id < want; });
    if (pos != entries_.end() && pos->id == id) {
        throw DuplicateIdError(id);
    }
    next_id_ = std::max(next_id_, id + 1);
    entries_.insert(pos, std::move(entry));
    return id;
}

std::optional<RetrievalHit> CacheStore::retrieve_best(const Embedding& query) const {
    std::shared_lock lock(mutex_);
    const CacheEntry* best = nullptr;
    double best_sim = 0.0;
    // Ascending id order makes "first wins" the lowest-id tie break.
    for (const CacheEntry& e : entries_) {
        const double sim = cosine_similarity(query, e.embedding);
        if (!best || sim > best_sim) {
            best = &e;
            best_sim = sim;
        }
    }
    if (!best || best_sim < similarity_floor_) {
        return std::nullopt;
    }
    return RetrievalHit{*best, best_sim};
}

std::optional<CacheEntry> CacheStore::lookup(std::uint64_t id) const {
    std::shared_lock lock(mutex_);
    const auto pos = std::lower_bound(
        entries_.begin(), entries_.end(), id,
        [](const CacheEntry& e, std::uint64_t want) { return e.id < want; });
    if (pos == entries_.end() || pos->id != id) return std::nullopt;
    return *pos;
}

std::size_t CacheStore::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void CacheStore::record_hit(std::uint64_t id) {
    std::unique_lock lock(mutex_);
    for (CacheEntry& e : entries_) {
        if (e.id == id) {
            ++e.counters.hits;
            return;
        }
    }
}

void CacheStore::record_patch(std::uint64_t id) {
    std::unique_lock lock(mutex_);
    for (CacheEntry& e : entries_) {
        if (e.id == id) {
            ++e.counters.patches;
            return;
        }
    }
}

void CacheStore::record_skip(std::uint64_t id) {
    std::unique_lock lock(mutex_);
    for (CacheEntry& e : entries_) {
        if (e.id == id) {
            ++e.counters.skips;
            return;
        }
    }
}

void CacheStore::persist(const std::filesystem::path& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open cache file for writing: " + path.string());
    }
    out << json{{"format_version", kFormatVersion}, {"embedder", embedder_->config()}}.dump()
        << '\n';
    for (const CacheEntry& e : entries_) {
        out << entry_to_json(e).dump() << '\n';
    }
    out.flush();
    if (!out) {
        throw IoError("failed writing cache file: " + path.string());
    }
}

CacheStore CacheStore::restore(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open cache file for reading: " + path.string());
    }

    std::string line;
    if (!std::getline(in, line)) {
        throw CorruptStoreError(0, "missing header record");
    }
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
        throw CorruptStoreError(0, "unparseable header record");
    }
    if (header.value("format_version", -1) != kFormatVersion) {
        throw CorruptStoreError(0, "unsupported format_version");
    }
    if (!header.contains("embedder")) {
        throw CorruptStoreError(0, "header missing embedder config");
    }

    CacheStore store(embedder_from_config(header.at("embedder")));
    std::size_t record = 0;
    while (std::getline(in, line)) {
        ++record;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw CorruptStoreError(record, "unparseable entry record");
        }
        CacheEntry entry;
        try {
            entry = entry_from_json(j);
        } catch (const json::exception& e) {
            throw CorruptStoreError(record, e.what());
        } catch (const std::exception& e) {
            throw CorruptStoreError(record, e.what());
        }
        if (entry.id == 0) {
            throw CorruptStoreError(record, "entry id 0 is reserved");
        }
        if (entry.embedding.dimension() != store.embedder_->dimension()) {
            throw CorruptStoreError(record, "embedding dimension mismatch");
        }
        try {
            store.insert(std::move(entry));
        } catch (const DuplicateIdError& e) {
            throw CorruptStoreError(record, e.what());
        } catch (const std::invalid_argument& e) {
            throw CorruptStoreError(record, e.what());
        }
    }
    return store;
}

std::string iso_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace stepcache
