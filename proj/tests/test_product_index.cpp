#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "companion/product_index.hpp"
#include "companion/rng.hpp"
#include "companion/synth.hpp"

using namespace companion;

namespace {

Product make_product(std::string id, std::string name, std::string category,
                     std::optional<std::string> brand = std::nullopt, double price = 10.0,
                     std::string shop = "shop-1",
                     std::vector<std::pair<std::string, std::string>> features = {},
                     std::vector<std::pair<std::string, std::vector<std::string>>> options = {}) {
    Product p;
    p.product_id = std::move(id);
    p.name = std::move(name);
    p.category = std::move(category);
    p.brand = std::move(brand);
    p.price = Money::from_number(price);
    p.shop_id = std::move(shop);
    p.features = std::move(features);
    p.options = std::move(options);
    return p;
}

// Exhaustive-scoring oracle, independent of the index: recomputes df/tf from
// raw token lists and scores every document directly.
std::vector<SearchHit> bm25_oracle(const Catalog& catalog, const std::string& query,
                                   const Bm25Params& params, std::size_t k,
                                   const std::optional<std::string>& shop = std::nullopt,
                                   const std::optional<PriceFilter>& price = std::nullopt) {
    std::vector<std::vector<std::string>> doc_tokens;
    for (const auto& p : catalog.all()) {
        doc_tokens.push_back(tokenize(document_text(p), TokenizerOptions{params.stem}));
    }
    double avg_len = 0.0;
    for (const auto& toks : doc_tokens) avg_len += static_cast<double>(toks.size());
    avg_len /= static_cast<double>(doc_tokens.size());

    std::vector<std::string> terms;
    for (const auto& t : tokenize(query, TokenizerOptions{params.stem})) {
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    }

    std::vector<SearchHit> hits;
    for (std::size_t d = 0; d < doc_tokens.size(); ++d) {
        const Product& product = catalog.at(d);
        if (shop && product.shop_id != *shop) continue;
        if (price && !price->contains(product.price)) continue;
        double score = 0.0;
        for (const auto& term : terms) {
            double df = 0.0;
            for (const auto& toks : doc_tokens) {
                if (std::find(toks.begin(), toks.end(), term) != toks.end()) df += 1.0;
            }
            if (df == 0.0) continue;
            const double tf = static_cast<double>(
                std::count(doc_tokens[d].begin(), doc_tokens[d].end(), term));
            if (tf == 0.0) continue;
            const double n_docs = static_cast<double>(doc_tokens.size());
            const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
            const double len_norm = 1.0 - params.b +
                                    params.b * static_cast<double>(doc_tokens[d].size()) / avg_len;
            score += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * len_norm);
        }
        if (score > 0.0) hits.push_back({product.product_id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.product_id < b.product_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

bool same_ranking(const std::vector<SearchHit>& a, const std::vector<SearchHit>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].product_id != b[i].product_id) return false;
        if (a[i].score != b[i].score) return false;
    }
    return true;
}

} // namespace

TEST_CASE("tokenize: lowercase alphanumeric runs") {
    CHECK(tokenize("USB-C Charger 65W") == std::vector<std::string>{"usb", "c", "charger", "65w"});
    CHECK(tokenize("  wireless   MOUSE!! ") == std::vector<std::string>{"wireless", "mouse"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("...!?") == std::vector<std::string>{});
    // Latin-1 uppercase lowercases, other code points pass through
    CHECK(tokenize("CafÉ résumé") ==
          std::vector<std::string>{"café", "résumé"});
    const TokenizerOptions stem{true};
    CHECK(tokenize("chargers berries glasses bus", stem) ==
          std::vector<std::string>{"charger", "berry", "glass", "bus"});
}

TEST_CASE("build: doc count and postings contract") {
    Catalog c;
    c.add(make_product("P1", "Wireless Mouse", "mouse"));
    c.add(make_product("P2", "Mechanical Keyboard", "keyboard"));
    c.add(make_product("P3", "Desk Lamp", "lamp"));
    const ProductIndex idx = ProductIndex::build(c);
    CHECK(idx.doc_count() == 3);
    // postings for both name tokens contain the product
    CHECK(idx.search("wireless").at(0).product_id == "P1");
    CHECK(idx.search("mouse").at(0).product_id == "P1");
}

TEST_CASE("build: average doc length equals the hand count") {
    // Token counts per document, by hand:
    //   P1 "Wireless Mouse mouse Logi color black"        -> 6
    //   P2 "USB-C Charger 65W charger"                    -> 5
    //   P3 "Desk Lamp lamp Lumen color white material steel" -> 8
    //   P4 "Kettle kettle size 1L 2L"                     -> 5
    //   P5 "Pro Keyboard keyboard Acme layout ansi"       -> 6
    // total 30, mean 6.0
    Catalog c;
    c.add(make_product("P1", "Wireless Mouse", "mouse", "Logi", 10, "s", {{"color", "black"}}));
    c.add(make_product("P2", "USB-C Charger 65W", "charger"));
    c.add(make_product("P3", "Desk Lamp", "lamp", "Lumen", 10, "s",
                       {{"color", "white"}, {"material", "steel"}}));
    c.add(make_product("P4", "Kettle", "kettle", std::nullopt, 10, "s", {}, {{"size", {"1L", "2L"}}}));
    c.add(make_product("P5", "Pro Keyboard", "keyboard", "Acme", 10, "s", {{"layout", "ansi"}}));
    const ProductIndex idx = ProductIndex::build(c);
    CHECK(idx.total_tokens() == 30);
    CHECK(idx.avg_doc_length() == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(idx.doc_length(0) == 6);
    CHECK(idx.doc_length(1) == 5);
    CHECK(idx.doc_length(2) == 8);
    CHECK(idx.doc_length(3) == 5);
    CHECK(idx.doc_length(4) == 6);
}

TEST_CASE("search: single-product corpus with every query term ranks it first") {
    Catalog c;
    c.add(make_product("P1", "Wireless Mouse", "mouse"));
    const ProductIndex idx = ProductIndex::build(c);
    const auto hits = idx.search("wireless mouse");
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].product_id == "P1");
    CHECK(hits[0].score > 0.0);
}

TEST_CASE("search: query with no matching term returns an empty list") {
    Catalog c;
    c.add(make_product("P1", "Wireless Mouse", "mouse"));
    c.add(make_product("P2", "Desk Lamp", "lamp"));
    const ProductIndex idx = ProductIndex::build(c);
    CHECK(idx.search("quantum flux capacitor").empty());
    CHECK(idx.search("").empty());
}

TEST_CASE("search: 200-product corpus matches the exhaustive oracle") {
    const Catalog c = make_synthetic_catalog(200, 42);
    const ProductIndex idx = ProductIndex::build(c);
    const auto got = idx.search("usb-c charger 65w", 10);
    const auto expected = bm25_oracle(c, "usb-c charger 65w", Bm25Params{}, 10);
    REQUIRE(!expected.empty());
    CHECK(same_ranking(got, expected));
}

TEST_CASE("search: prefix stability and deterministic tie order") {
    const Catalog c = make_synthetic_catalog(150, 7);
    const ProductIndex idx = ProductIndex::build(c);
    const auto top50 = idx.search("portable bluetooth speaker", 50);
    for (const std::size_t k : {1u, 3u, 10u, 25u}) {
        const auto topk = idx.search("portable bluetooth speaker", k);
        REQUIRE(topk.size() == std::min<std::size_t>(k, top50.size()));
        for (std::size_t i = 0; i < topk.size(); ++i) {
            CHECK(topk[i].product_id == top50[i].product_id);
            CHECK(topk[i].score == top50[i].score);
        }
    }
    for (std::size_t i = 0; i + 1 < top50.size(); ++i) {
        const bool ordered = top50[i].score > top50[i + 1].score ||
                             (top50[i].score == top50[i + 1].score &&
                              top50[i].product_id < top50[i + 1].product_id);
        CHECK(ordered);
    }
}

TEST_CASE("search: filters never leak out-of-scope products") {
    const Catalog c = make_synthetic_catalog(300, 11);
    const ProductIndex idx = ProductIndex::build(c);
    Rng rng(3);
    const char* queries[] = {"mouse", "keyboard color black", "lamp", "speaker bluetooth",
                             "backpack fabric"};
    for (int trial = 0; trial < 40; ++trial) {
        const std::string query = queries[rng.below(5)];
        const std::string shop = "shop-" + std::to_string(rng.range(1, 10));
        const Money lo = Money::from_cents(rng.range(500, 12000));
        const Money hi = lo + Money::from_cents(rng.range(100, 10000));
        const std::string price = lo.str() + "-" + hi.str();
        const auto hits = product_search(idx, query, shop, price, 50);
        for (const auto& h : hits) {
            const Product* p = c.find(h.product_id);
            REQUIRE(p != nullptr);
            CHECK(p->shop_id == shop);
            CHECK(p->price >= lo);
            CHECK(p->price <= hi);
        }
        // filters apply before ranking: match the oracle on the same filter
        PriceFilter f;
        f.min = lo;
        f.max = hi;
        const auto expected = bm25_oracle(c, query, Bm25Params{}, 50, shop, f);
        CHECK(same_ranking(hits, expected));
    }
}

TEST_CASE("price filter grammar") {
    const PriceFilter range = PriceFilter::parse("10-25.50");
    CHECK(range.min.cents() == 1000);
    CHECK(range.max.cents() == 2550);
    CHECK(range.contains(Money::from_cents(1000)));
    CHECK(range.contains(Money::from_cents(2550)));
    CHECK(!range.contains(Money::from_cents(2551)));

    const PriceFilter le = PriceFilter::parse("<=99.99");
    CHECK(le.contains(Money::from_cents(0)));
    CHECK(!le.contains(Money::from_cents(10000)));

    const PriceFilter ge = PriceFilter::parse(">=5");
    CHECK(!ge.contains(Money::from_cents(499)));
    CHECK(ge.contains(Money::from_cents(500)));

    CHECK_THROWS_AS(PriceFilter::parse("50"), ArgumentError);
    CHECK_THROWS_AS(PriceFilter::parse("abc"), ArgumentError);
    CHECK_THROWS_AS(PriceFilter::parse("30-10"), ArgumentError);
    CHECK_THROWS_AS(PriceFilter::parse(""), ArgumentError);
}

TEST_CASE("index persistence: versioned, byte-identical, and load-faithful") {
    const Catalog c = make_synthetic_catalog(80, 5);
    const ProductIndex idx = ProductIndex::build(c);
    const auto dir = std::filesystem::temp_directory_path() / "companion_index_a";
    const auto dir2 = std::filesystem::temp_directory_path() / "companion_index_b";
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
    idx.save(dir.string());
    ProductIndex::build(c).save(dir2.string());

    for (const char* file : {"index-meta.json", "docs.tsv", "postings.tsv"}) {
        const auto a = read_text_file((dir / file).string());
        const auto b = read_text_file((dir2 / file).string());
        CHECK(a == b);
    }
    const Json meta = Json::parse(read_text_file((dir / "index-meta.json").string()));
    CHECK(meta["format_version"] == kProductIndexFormatVersion);

    const ProductIndex loaded = ProductIndex::load(dir.string());
    CHECK(loaded.doc_count() == idx.doc_count());
    CHECK(loaded.avg_doc_length() == idx.avg_doc_length());
    CHECK(same_ranking(loaded.search("mouse color", 20), idx.search("mouse color", 20)));

    // version mismatch is rejected
    Json bad = meta;
    bad["format_version"] = 999;
    write_text_file((dir / "index-meta.json").string(), bad.dump(2) + "\n");
    CHECK_THROWS_AS(ProductIndex::load(dir.string()), SchemaError);
}
