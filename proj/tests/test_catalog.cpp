#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "companion/catalog.hpp"

using namespace companion;

namespace {

std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "companion_catalog_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

const char* kValidLine =
    R"({"product_id":"P1","name":"Wireless Mouse","category":"mouse","brand":"Logi","price":24.99,"shop_id":"shop-1","features":{"color":"black"},"options":{"size":["S","M"]}})";

} // namespace

TEST_CASE("ingest: one valid line yields a catalog of size 1") {
    const auto path = temp_path("one.jsonl");
    write_file(path, std::string(kValidLine) + "\n");
    const Catalog c = ingest_products(path);
    REQUIRE(c.size() == 1);
    const Product* p = c.find("P1");
    REQUIRE(p != nullptr);
    CHECK(p->name == "Wireless Mouse");
    CHECK(p->brand.has_value());
    CHECK(p->price.cents() == 2499);
    CHECK(p->features.size() == 1);
    CHECK(p->options.at(0).second.size() == 2);
}

TEST_CASE("ingest: empty file yields an empty catalog") {
    const auto path = temp_path("empty.jsonl");
    write_file(path, "");
    CHECK(ingest_products(path).size() == 0);
}

TEST_CASE("ingest: duplicate product_id rejects the whole file naming the key") {
    const auto path = temp_path("dup.jsonl");
    write_file(path, std::string(kValidLine) + "\n" + kValidLine + "\n");
    try {
        ingest_products(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("P1") != std::string::npos);
        CHECK(std::string(e.what()).find(":2") != std::string::npos); // line number
    }
}

TEST_CASE("ingest: schema violations report line and field") {
    const auto path = temp_path("bad.jsonl");
    write_file(path,
               std::string(kValidLine) + "\n" +
                   R"({"product_id":"P2","name":"X","category":"c","brand":null,"shop_id":"s","features":{},"options":{}})" +
                   "\n");
    try {
        ingest_products(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":2") != std::string::npos);
        CHECK(msg.find("price") != std::string::npos);
    }
    write_file(path, R"({"product_id":"","name":"X","category":"c","brand":null,"price":1,"shop_id":"s","features":{},"options":{}})");
    CHECK_THROWS_AS(ingest_products(path), SchemaError);
    write_file(path, R"({"product_id":"P","name":"X","category":"c","brand":null,"price":-2,"shop_id":"s","features":{},"options":{}})");
    CHECK_THROWS_AS(ingest_products(path), SchemaError);
    CHECK_THROWS_AS(ingest_products(temp_path("missing-file.jsonl")), IoError);
}

TEST_CASE("document_text: fixed concatenation order") {
    Product p;
    p.product_id = "P1";
    p.name = "Wireless Mouse";
    p.category = "mouse";
    p.brand = "Logi";
    p.features = {{"color", "black"}};
    p.options = {{"size", {"S", "M"}}};
    CHECK(document_text(p) == "Wireless Mouse mouse Logi color black size S M");
    p.brand.reset();
    CHECK(document_text(p) == "Wireless Mouse mouse color black size S M");
}

TEST_CASE("product_view: records in request order") {
    Catalog c;
    Product p1;
    p1.product_id = "P1";
    p1.name = "A";
    Product p2;
    p2.product_id = "P2";
    p2.name = "B";
    c.add(p1);
    c.add(p2);

    SUBCASE("single known id") {
        const auto view = product_view(c, {"P1"});
        REQUIRE(view.size() == 1);
        CHECK(view[0].product != nullptr);
        CHECK(view[0].product->name == "A");
    }
    SUBCASE("unknown ids become per-id not-found entries") {
        const auto view = product_view(c, {"P1", "PX"});
        REQUIRE(view.size() == 2);
        CHECK(view[0].product != nullptr);
        CHECK(view[1].product == nullptr);
        CHECK(view[1].product_id == "PX");
        CHECK(render_product_view(view).find("[PX] not found") != std::string::npos);
    }
    SUBCASE("request order preserved") {
        const auto view = product_view(c, {"P2", "P1"});
        REQUIRE(view.size() == 2);
        CHECK(view[0].product_id == "P2");
        CHECK(view[1].product_id == "P1");
    }
    SUBCASE("empty id list is an argument error") {
        CHECK_THROWS_AS(product_view(c, {}), ArgumentError);
    }
}

TEST_CASE("money: parse, format and percent arithmetic are exact") {
    CHECK(Money::parse("12.34").cents() == 1234);
    CHECK(Money::parse("12.3").cents() == 1230);
    CHECK(Money::parse("12").cents() == 1200);
    CHECK(Money::parse("$0.05").cents() == 5);
    CHECK(Money::from_number(19.99).cents() == 1999);
    CHECK(Money::from_cents(1999).str() == "19.99");
    CHECK(Money::from_cents(5).str() == "0.05");
    CHECK_THROWS_AS(Money::parse("12.345"), ArgumentError);
    CHECK_THROWS_AS(Money::parse("abc"), ArgumentError);
    // 10.5% of $20.00 = $2.10; half-cent rounds away from zero
    CHECK(Money::percent_of(Money::from_cents(2000), 1050).cents() == 210);
    CHECK(Money::percent_of(Money::from_cents(1), 5000).cents() == 1);
}
