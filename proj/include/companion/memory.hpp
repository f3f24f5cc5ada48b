#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "companion/dates.hpp"
#include "companion/json_util.hpp"
#include "companion/text.hpp"

namespace companion {

struct Turn {
    std::string role; ///< "user" or "assistant"
    std::string content;
};

struct Session {
    int session_index = 0;
    Date date;
    std::vector<Turn> turns;

    Json to_json() const {
        Json j;
        j["session_index"] = session_index;
        j["date"] = date.str();
        Json ts = Json::array();
        for (const auto& t : turns) {
            ts.push_back(Json{{"role", t.role}, {"content", t.content}});
        }
        j["turns"] = ts;
        return j;
    }

    static Session from_json(const Json& j, const std::string& where) {
        if (!j.is_object()) throw SchemaError(where + ": session must be an object");
        Session s;
        const Json& idx = require_field(j, "session_index", where);
        if (!idx.is_number_integer()) throw SchemaError(where + ": 'session_index' must be an integer");
        s.session_index = idx.get<int>();
        s.date = parse_date(require_string(j, "date", where));
        const Json& turns = require_field(j, "turns", where);
        if (!turns.is_array() || turns.empty()) {
            throw SchemaError(where + ": 'turns' must be a non-empty array");
        }
        for (std::size_t i = 0; i < turns.size(); ++i) {
            const std::string twhere = where + ".turns[" + std::to_string(i) + "]";
            Turn t;
            t.role = require_string(turns[i], "role", twhere);
            if (t.role != "user" && t.role != "assistant") {
                throw SchemaError(twhere + ": role must be 'user' or 'assistant'");
            }
            t.content = require_string(turns[i], "content", twhere);
            s.turns.push_back(std::move(t));
        }
        return s;
    }
};

/// The long-term conversation haystack for one benchmark instance.
/// Immutable after construction; session indices are 0-based and contiguous.
class MemoryStore {
public:
    static MemoryStore from_sessions(std::vector<Session> sessions, const std::string& where = "history") {
        for (std::size_t i = 0; i < sessions.size(); ++i) {
            if (sessions[i].session_index != static_cast<int>(i)) {
                throw SchemaError(where + ": session_index must be contiguous from 0, got " +
                                  std::to_string(sessions[i].session_index) + " at position " +
                                  std::to_string(i));
            }
        }
        MemoryStore m;
        m.sessions_ = std::move(sessions);
        return m;
    }

    /// Loads a history JSON file: an array of session objects.
    static MemoryStore load(const std::string& path) {
        Json j;
        try {
            j = Json::parse(read_text_file(path));
        } catch (const IoError&) {
            throw;
        } catch (const std::exception& e) {
            throw SchemaError(path + ": invalid JSON: " + e.what());
        }
        if (!j.is_array()) throw SchemaError(path + ": history must be a JSON array of sessions");
        std::vector<Session> sessions;
        for (std::size_t i = 0; i < j.size(); ++i) {
            sessions.push_back(Session::from_json(j[i], path + "[" + std::to_string(i) + "]"));
        }
        return from_sessions(std::move(sessions), path);
    }

    std::size_t size() const { return sessions_.size(); }
    const Session* find(int session_index) const {
        if (session_index < 0 || static_cast<std::size_t>(session_index) >= sessions_.size()) {
            return nullptr;
        }
        return &sessions_[static_cast<std::size_t>(session_index)];
    }
    const std::vector<Session>& sessions() const { return sessions_; }
    std::size_t total_turns() const {
        std::size_t n = 0;
        for (const auto& s : sessions_) n += s.turns.size();
        return n;
    }

private:
    std::vector<Session> sessions_;
};

inline MemoryStore load_history(const std::string& path) { return MemoryStore::load(path); }

/// Text embedding contract. Implementations must be deterministic and never
/// return the all-zero vector for non-empty text.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    virtual int dim() const = 0;
    virtual std::vector<double> embed(std::string_view text) const = 0;
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) const {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed(t));
        return out;
    }
};

/// Default backend: feature-hashing bag of words into d buckets (FNV-1a 64),
/// L2-normalized. Text with no tokens maps to the reserved basis vector e0 so
/// cosine is always defined.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(int dim = 384) : dim_(dim) {
        if (dim < 1) throw ArgumentError("HashingEmbedder: dim must be >= 1");
    }
    std::string name() const override { return "hashing-bow-" + std::to_string(dim_); }
    int dim() const override { return dim_; }

    std::vector<double> embed(std::string_view text) const override {
        std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
        const auto tokens = tokenize(text);
        if (tokens.empty()) {
            v[0] = 1.0;
            return v;
        }
        for (const auto& t : tokens) {
            v[fnv1a64(t) % static_cast<std::uint64_t>(dim_)] += 1.0;
        }
        double norm_sq = 0.0;
        for (const double x : v) norm_sq += x * x;
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : v) x *= inv;
        return v;
    }

private:
    static std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 1469598103934665603ULL;
        for (const char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }
    int dim_;
};

/// One embedding vector per turn, rows mapped back to (session, turn).
class MemoryIndex {
public:
    static MemoryIndex build(const MemoryStore& store, const Embedder& embedder) {
        MemoryIndex idx;
        idx.embedder_name_ = embedder.name();
        idx.dim_ = embedder.dim();
        for (const auto& s : store.sessions()) {
            for (std::size_t t = 0; t < s.turns.size(); ++t) {
                idx.refs_.emplace_back(s.session_index, static_cast<int>(t));
                idx.vectors_.push_back(embedder.embed(s.turns[t].content));
            }
        }
        return idx;
    }

    std::size_t rows() const { return vectors_.size(); }
    int dim() const { return dim_; }
    const std::string& embedder_name() const { return embedder_name_; }
    const std::vector<double>& vector_at(std::size_t row) const { return vectors_[row]; }
    std::pair<int, int> ref_at(std::size_t row) const { return refs_[row]; }

private:
    std::string embedder_name_;
    int dim_ = 0;
    std::vector<std::vector<double>> vectors_;
    std::vector<std::pair<int, int>> refs_; // (session_index, turn_index)
};

struct MemoryHit {
    int session_index = 0;
    int turn_index = 0;
    double similarity = 0.0;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline constexpr int kDefaultMemSearchK = 5;

/// Tool backend for `mem_search`: per-query top-k turns by cosine similarity,
/// descending, ties by (session_index, turn_index) ascending. Queries are
/// scored independently; overlapping hits are not deduplicated.
inline std::vector<std::vector<MemoryHit>> mem_search(const MemoryIndex& index,
                                                      const Embedder& embedder,
                                                      const std::vector<std::string>& queries,
                                                      std::size_t k = kDefaultMemSearchK) {
    if (queries.empty()) throw ArgumentError("mem_search: empty query list");
    if (k < 1) throw ArgumentError("mem_search: k must be >= 1");
    std::vector<std::vector<MemoryHit>> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        const auto qv = embedder.embed(q);
        std::vector<MemoryHit> hits;
        hits.reserve(index.rows());
        for (std::size_t row = 0; row < index.rows(); ++row) {
            const auto [s, t] = index.ref_at(row);
            hits.push_back({s, t, dot(qv, index.vector_at(row))});
        }
        std::sort(hits.begin(), hits.end(), [](const MemoryHit& a, const MemoryHit& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            if (a.session_index != b.session_index) return a.session_index < b.session_index;
            return a.turn_index < b.turn_index;
        });
        if (hits.size() > k) hits.resize(k);
        out.push_back(std::move(hits));
    }
    return out;
}

/// `[session s, turn t, date] role: content`
inline std::string render_memory_hit(const MemoryStore& store, const MemoryHit& hit) {
    const Session* s = store.find(hit.session_index);
    if (!s || hit.turn_index < 0 || static_cast<std::size_t>(hit.turn_index) >= s->turns.size()) {
        return "[session " + std::to_string(hit.session_index) + ", turn " +
               std::to_string(hit.turn_index) + "] not found";
    }
    const Turn& t = s->turns[static_cast<std::size_t>(hit.turn_index)];
    return "[session " + std::to_string(hit.session_index) + ", turn " +
           std::to_string(hit.turn_index) + ", " + s->date.str() + "] " + t.role + ": " + t.content;
}

inline std::string render_mem_search(const MemoryStore& store,
                                     const std::vector<std::string>& queries,
                                     const std::vector<std::vector<MemoryHit>>& results) {
    std::string out;
    for (std::size_t q = 0; q < results.size(); ++q) {
        if (q) out += "\n";
        out += "query: " + queries[q];
        for (const auto& hit : results[q]) {
            out += "\n" + render_memory_hit(store, hit);
        }
        if (results[q].empty()) out += "\n(no results)";
    }
    return out;
}

struct SessionViewEntry {
    int session_index = 0;
    const Session* session = nullptr; ///< null when the index is unknown
};

/// Tool backend for `mem_view`: whole sessions in request order; unknown
/// indices become not-found entries.
inline std::vector<SessionViewEntry> mem_view(const MemoryStore& store,
                                              const std::vector<int>& session_indices) {
    if (session_indices.empty()) throw ArgumentError("mem_view: empty session_indices");
    std::vector<SessionViewEntry> out;
    out.reserve(session_indices.size());
    for (const int idx : session_indices) {
        out.push_back({idx, store.find(idx)});
    }
    return out;
}

inline std::string render_mem_view(const std::vector<SessionViewEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        if (!out.empty()) out += "\n";
        if (!e.session) {
            out += "[session " + std::to_string(e.session_index) + "] not found";
            continue;
        }
        out += "[session " + std::to_string(e.session_index) + ", " + e.session->date.str() + "]";
        for (const auto& t : e.session->turns) {
            out += "\n" + t.role + ": " + t.content;
        }
    }
    return out;
}

/// Session summarization contract; the default is deterministic and
/// extractive so tests need no model backend.
class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual std::string summarize(const Session& session) const = 0;
};

/// First sentence of each turn, truncated to at most 40 words per turn.
class ExtractiveSummarizer final : public Summarizer {
public:
    std::string summarize(const Session& session) const override {
        std::string out;
        for (const auto& t : session.turns) {
            if (!out.empty()) out.push_back(' ');
            out += truncate_words(first_sentence(t.content), 40);
        }
        return out;
    }
};

struct SessionSummary {
    int session_index = 0;
    Date date;
    std::string summary;
};

/// Tool backend for `mem_summarize_by_date`: covers exactly the sessions with
/// start <= date <= end (closed range).
inline std::vector<SessionSummary> mem_summarize_by_date(const MemoryStore& store, Date start,
                                                         Date end, const Summarizer& summarizer) {
    if (end < start) throw ArgumentError("mem_summarize_by_date: start date is after end date");
    std::vector<SessionSummary> out;
    for (const auto& s : store.sessions()) {
        if (start <= s.date && s.date <= end) {
            out.push_back({s.session_index, s.date, summarizer.summarize(s)});
        }
    }
    return out;
}

inline std::string render_summaries(const std::vector<SessionSummary>& summaries) {
    if (summaries.empty()) return "(no sessions in range)";
    std::string out;
    for (const auto& s : summaries) {
        if (!out.empty()) out += "\n";
        out += "[session " + std::to_string(s.session_index) + ", " + s.date.str() + "] " + s.summary;
    }
    return out;
}

} // namespace companion
