#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "companion/catalog.hpp"
#include "companion/json_util.hpp"
#include "companion/money.hpp"
#include "companion/text.hpp"

namespace companion {

inline constexpr int kProductIndexFormatVersion = 1;
inline constexpr int kDefaultProductSearchK = 50;

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
    bool stem = false;
};

/// Inclusive price window. Grammar: "a-b", "<=x", ">=x".
struct PriceFilter {
    Money min = Money::from_cents(0);
    Money max = Money::from_cents(INT64_MAX);

    bool contains(Money price) const { return min <= price && price <= max; }

    static PriceFilter parse(std::string_view raw) {
        const std::string s = trim(raw);
        if (s.empty()) throw ArgumentError("price filter: empty");
        PriceFilter f;
        if (s.rfind("<=", 0) == 0) {
            f.max = Money::parse(s.substr(2));
            return f;
        }
        if (s.rfind(">=", 0) == 0) {
            f.min = Money::parse(s.substr(2));
            return f;
        }
        const auto dash = s.find('-', 1); // position 0 would be a sign
        if (dash == std::string::npos) {
            throw ArgumentError("price filter: expected 'a-b', '<=x' or '>=x', got '" + s + "'");
        }
        f.min = Money::parse(s.substr(0, dash));
        f.max = Money::parse(s.substr(dash + 1));
        if (f.max < f.min) throw ArgumentError("price filter: empty range '" + s + "'");
        return f;
    }
};

struct SearchHit {
    std::string product_id;
    double score = 0.0;
};

/// Offline sparse lexical index over product documents.
///
/// Scoring is Okapi BM25 with the non-negative idf variant
/// ln(1 + (N - df + 0.5)/(df + 0.5)) and term weight tf*(k1+1) /
/// (tf + k1*(1 - b + b*len/avg_len)). Query terms are deduplicated in
/// first-occurrence order and each unique term contributes once; candidate
/// scores accumulate per term in that order, which pins down tie behaviour
/// bit-for-bit. Immutable and safe for concurrent readers after build.
class ProductIndex {
public:
    static ProductIndex build(const Catalog& catalog, Bm25Params params = {}) {
        ProductIndex idx;
        idx.params_ = params;
        const TokenizerOptions topts{params.stem};
        idx.docs_.reserve(catalog.size());
        std::map<std::string, std::vector<Posting>> postings; // term -> (doc, tf)
        for (std::size_t d = 0; d < catalog.size(); ++d) {
            const Product& p = catalog.at(d);
            const auto tokens = tokenize(document_text(p), topts);
            std::map<std::string, std::uint32_t> tf;
            for (const auto& t : tokens) ++tf[t];
            for (const auto& [term, freq] : tf) {
                postings[term].push_back({static_cast<std::uint32_t>(d), freq});
            }
            idx.docs_.push_back({p.product_id, p.shop_id, p.price,
                                 static_cast<std::uint32_t>(tokens.size())});
            idx.total_tokens_ += tokens.size();
        }
        // Postings sorted by product_id; ids are unique so the order is strict.
        for (auto& [term, list] : postings) {
            std::sort(list.begin(), list.end(), [&](const Posting& a, const Posting& b) {
                return idx.docs_[a.doc].product_id < idx.docs_[b.doc].product_id;
            });
        }
        idx.postings_.assign(postings.begin(), postings.end());
        return idx;
    }

    std::size_t doc_count() const { return docs_.size(); }
    std::size_t vocab_size() const { return postings_.size(); }
    std::uint64_t total_tokens() const { return total_tokens_; }
    double avg_doc_length() const {
        return docs_.empty() ? 0.0
                             : static_cast<double>(total_tokens_) / static_cast<double>(docs_.size());
    }
    const Bm25Params& params() const { return params_; }
    std::uint32_t doc_length(std::size_t doc) const { return docs_[doc].length; }

    std::vector<SearchHit> search(std::string_view query, std::size_t k = kDefaultProductSearchK,
                                  const std::optional<std::string>& shop_id = std::nullopt,
                                  const std::optional<PriceFilter>& price = std::nullopt) const {
        if (k < 1) throw ArgumentError("product_search: k must be >= 1");
        std::vector<SearchHit> out;
        if (docs_.empty()) return out;

        const auto raw_terms = tokenize(query, TokenizerOptions{params_.stem});
        std::vector<std::string> terms; // unique, first-occurrence order
        for (const auto& t : raw_terms) {
            if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
        }
        if (terms.empty()) return out;

        const double n_docs = static_cast<double>(docs_.size());
        const double avg_len = avg_doc_length();
        std::vector<double> scores(docs_.size(), 0.0);
        std::vector<std::uint32_t> touched;
        std::vector<char> seen(docs_.size(), 0);

        for (const auto& term : terms) {
            const auto* list = find_postings(term);
            if (!list) continue;
            const double df = static_cast<double>(list->size());
            const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
            for (const Posting& post : *list) {
                const DocMeta& doc = docs_[post.doc];
                if (shop_id && doc.shop_id != *shop_id) continue;
                if (price && !price->contains(doc.price)) continue;
                const double tf = static_cast<double>(post.tf);
                const double len_norm =
                    1.0 - params_.b + params_.b * static_cast<double>(doc.length) / avg_len;
                scores[post.doc] += idf * tf * (params_.k1 + 1.0) / (tf + params_.k1 * len_norm);
                if (!seen[post.doc]) {
                    seen[post.doc] = 1;
                    touched.push_back(post.doc);
                }
            }
        }

        out.reserve(touched.size());
        for (const auto doc : touched) {
            if (scores[doc] > 0.0) out.push_back({docs_[doc].product_id, scores[doc]});
        }
        std::sort(out.begin(), out.end(), [](const SearchHit& a, const SearchHit& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.product_id < b.product_id;
        });
        if (out.size() > k) out.resize(k);
        return out;
    }

    /// Persists to a versioned directory: index-meta.json, docs.tsv,
    /// postings.tsv. Deterministic byte-for-byte for a given catalog.
    void save(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        Json meta;
        meta["format_version"] = kProductIndexFormatVersion;
        meta["k1"] = params_.k1;
        meta["b"] = params_.b;
        meta["stem"] = params_.stem;
        meta["doc_count"] = docs_.size();
        meta["total_tokens"] = total_tokens_;
        meta["vocab_size"] = postings_.size();
        write_text_file(dir + "/index-meta.json", meta.dump(2) + "\n");

        std::string docs;
        for (const auto& d : docs_) {
            docs += d.product_id;
            docs.push_back('\t');
            docs += d.shop_id;
            docs.push_back('\t');
            docs += std::to_string(d.price.cents());
            docs.push_back('\t');
            docs += std::to_string(d.length);
            docs.push_back('\n');
        }
        write_text_file(dir + "/docs.tsv", docs);

        std::string out;
        for (const auto& [term, list] : postings_) {
            out += term;
            out.push_back('\t');
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (i) out.push_back(' ');
                out += std::to_string(list[i].doc);
                out.push_back(':');
                out += std::to_string(list[i].tf);
            }
            out.push_back('\n');
        }
        write_text_file(dir + "/postings.tsv", out);
    }

    static ProductIndex load(const std::string& dir) {
        ProductIndex idx;
        Json meta;
        try {
            meta = Json::parse(read_text_file(dir + "/index-meta.json"));
        } catch (const std::exception& e) {
            throw SchemaError(dir + "/index-meta.json: " + e.what());
        }
        const int version = require_field(meta, "format_version", dir).get<int>();
        if (version != kProductIndexFormatVersion) {
            throw SchemaError(dir + ": unsupported index format_version " + std::to_string(version));
        }
        idx.params_.k1 = require_field(meta, "k1", dir).get<double>();
        idx.params_.b = require_field(meta, "b", dir).get<double>();
        idx.params_.stem = require_field(meta, "stem", dir).get<bool>();

        for (const auto& line : split_lines(read_text_file(dir + "/docs.tsv"))) {
            const auto cols = split_tabs(line);
            if (cols.size() != 4) throw SchemaError(dir + "/docs.tsv: expected 4 columns");
            DocMeta d;
            d.product_id = cols[0];
            d.shop_id = cols[1];
            d.price = Money::from_cents(std::stoll(cols[2]));
            d.length = static_cast<std::uint32_t>(std::stoul(cols[3]));
            idx.total_tokens_ += d.length;
            idx.docs_.push_back(std::move(d));
        }
        for (const auto& line : split_lines(read_text_file(dir + "/postings.tsv"))) {
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw SchemaError(dir + "/postings.tsv: missing tab");
            std::vector<Posting> list;
            std::size_t i = tab + 1;
            while (i < line.size()) {
                const auto colon = line.find(':', i);
                auto end = line.find(' ', i);
                if (end == std::string::npos) end = line.size();
                if (colon == std::string::npos || colon > end) {
                    throw SchemaError(dir + "/postings.tsv: malformed posting");
                }
                list.push_back({static_cast<std::uint32_t>(std::stoul(line.substr(i, colon - i))),
                                static_cast<std::uint32_t>(std::stoul(line.substr(colon + 1, end - colon - 1)))});
                i = end + 1;
            }
            idx.postings_.emplace_back(line.substr(0, tab), std::move(list));
        }
        const auto expected_docs = require_field(meta, "doc_count", dir).get<std::size_t>();
        if (expected_docs != idx.docs_.size()) {
            throw SchemaError(dir + ": doc_count mismatch between meta and docs.tsv");
        }
        return idx;
    }

private:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };
    struct DocMeta {
        std::string product_id;
        std::string shop_id;
        Money price;
        std::uint32_t length = 0;
    };

    const std::vector<Posting>* find_postings(const std::string& term) const {
        const auto it = std::lower_bound(
            postings_.begin(), postings_.end(), term,
            [](const auto& entry, const std::string& t) { return entry.first < t; });
        if (it == postings_.end() || it->first != term) return nullptr;
        return &it->second;
    }

    static std::vector<std::string> split_lines(const std::string& text) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (start < text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            if (end > start) out.push_back(text.substr(start, end - start));
            start = end + 1;
        }
        return out;
    }
    static std::vector<std::string> split_tabs(const std::string& line) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            const auto end = line.find('\t', start);
            if (end == std::string::npos) {
                out.push_back(line.substr(start));
                break;
            }
            out.push_back(line.substr(start, end - start));
            start = end + 1;
        }
        return out;
    }

    Bm25Params params_;
    std::vector<DocMeta> docs_;                                       // catalog order
    std::vector<std::pair<std::string, std::vector<Posting>>> postings_; // sorted by term
    std::uint64_t total_tokens_ = 0;
};

/// Tool backend for `product_search`: up to k hits with positive BM25 score,
/// descending, ties by ascending product_id; filters apply before ranking.
inline std::vector<SearchHit> product_search(const ProductIndex& index, std::string_view query,
                                             const std::optional<std::string>& shop_id = std::nullopt,
                                             const std::optional<std::string>& price = std::nullopt,
                                             std::size_t k = kDefaultProductSearchK) {
    std::optional<PriceFilter> filter;
    if (price && !trim(*price).empty()) filter = PriceFilter::parse(*price);
    return index.search(query, k, shop_id, filter);
}

} // namespace companion
