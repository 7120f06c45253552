#pragma once

#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mindgym/errors.hpp"
#include "mindgym/gateway.hpp"

namespace mindgym {

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw DimensionMismatch("cosine: empty vector");
    if (a.size() != b.size()) throw DimensionMismatch("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine: all-zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Admitted {
    std::vector<double> vector;
};

struct Rejected {
    double max_similarity = 0.0;
    std::string nearest_id;
};

using AdmitResult = std::variant<Admitted, Rejected>;

// Reject-sampling pool. Admission maintains by construction that every
// stored pair has cosine <= threshold. The compare-and-append step is a
// single critical section, so the invariant holds under concurrent fill.
class DiversityPool {
public:
    explicit DiversityPool(double threshold) : threshold_(threshold) {
        if (!(threshold > 0.0 && threshold < 1.0))
            throw ConfigError("similarity threshold must lie in (0,1)");
    }

    double threshold() const { return threshold_; }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return entries_.size();
    }

    std::optional<std::size_t> dimension() const {
        std::lock_guard lock(mu_);
        if (entries_.empty()) return std::nullopt;
        return entries_.front().vector.size();
    }

    // Embeds the candidate, then admits iff its max cosine against the pool
    // is <= threshold (ties admit; an empty pool always admits).
    AdmitResult admit(const std::string& id, const std::string& candidate_text,
                      Backend& embedder) {
        auto vectors = embedder.embed({candidate_text});
        return admit_vector(id, std::move(vectors.front()));
    }

    AdmitResult admit_vector(const std::string& id, std::vector<double> vec) {
        std::lock_guard lock(mu_);
        if (!entries_.empty() && entries_.front().vector.size() != vec.size())
            throw DimensionMismatch("candidate dimension differs from pool dimension");
        double max_sim = -2.0;
        const Entry* nearest = nullptr;
        for (const auto& e : entries_) {
            double sim = cosine_similarity(e.vector, vec);
            if (sim > max_sim) {
                max_sim = sim;
                nearest = &e;
            }
        }
        if (nearest && max_sim > threshold_) return Rejected{max_sim, nearest->id};
        entries_.push_back({id, std::move(vec)});
        return Admitted{entries_.back().vector};
    }

    struct Entry {
        std::string id;
        std::vector<double> vector;
    };

    std::vector<Entry> entries() const {
        std::lock_guard lock(mu_);
        return entries_;
    }

    // Line-delimited (id, vector) audit snapshot; threshold and dimension in
    // a header line.
    std::string snapshot() const {
        std::lock_guard lock(mu_);
        nlohmann::json header{{"threshold", threshold_},
                              {"dimension", entries_.empty() ? 0 : entries_.front().vector.size()},
                              {"count", entries_.size()}};
        std::string out = header.dump() + "\n";
        for (const auto& e : entries_)
            out += nlohmann::json{{"id", e.id}, {"vector", e.vector}}.dump() + "\n";
        return out;
    }

private:
    double threshold_;
    mutable std::mutex mu_;
    std::vector<Entry> entries_;
};

struct PoolCandidate {
    std::string id;
    std::string text;
};

// Generator takes the regeneration attempt index for the current slot (0 on
// the first try) so regenerated candidates can differ deterministically.
using CandidateGenerator = std::function<PoolCandidate(int attempt)>;

// Fills the pool to N entries, regenerating rejected candidates up to
// max_regenerations per slot.
inline std::vector<std::string> fill_pool(const CandidateGenerator& generator, DiversityPool& pool,
                                          std::size_t target_n, int max_regenerations,
                                          Backend& embedder) {
    if (target_n < pool.size()) throw ConfigError("fill_pool: target below current pool size");
    std::vector<std::string> admitted_ids;
    while (pool.size() < target_n) {
        bool admitted = false;
        for (int attempt = 0; attempt < max_regenerations; ++attempt) {
            PoolCandidate c = generator(attempt);
            AdmitResult r = pool.admit(c.id, c.text, embedder);
            if (std::holds_alternative<Admitted>(r)) {
                admitted_ids.push_back(c.id);
                admitted = true;
                break;
            }
        }
        if (!admitted)
            throw PoolStarvation("slot exceeded " + std::to_string(max_regenerations) +
                                 " regenerations before admission");
    }
    return admitted_ids;
}

}  // namespace mindgym
