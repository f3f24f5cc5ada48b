#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "companion/json_util.hpp"
#include "companion/money.hpp"
#include "companion/text.hpp"

namespace companion {

/// One catalog item. `features` and `options` preserve input order; feature
/// names are unique within a product.
struct Product {
    std::string product_id;
    std::string name;
    std::string category;
    std::optional<std::string> brand;
    Money price;
    std::string shop_id;
    std::vector<std::pair<std::string, std::string>> features;
    std::vector<std::pair<std::string, std::vector<std::string>>> options;

    Json to_json() const {
        Json j;
        j["product_id"] = product_id;
        j["name"] = name;
        j["category"] = category;
        if (brand) {
            j["brand"] = *brand;
        } else {
            j["brand"] = nullptr;
        }
        j["price"] = price.to_number();
        j["shop_id"] = shop_id;
        Json f = Json::object();
        for (const auto& [k, v] : features) f[k] = v;
        j["features"] = f;
        Json o = Json::object();
        for (const auto& [k, vs] : options) o[k] = vs;
        j["options"] = o;
        return j;
    }

    static Product from_json(const Json& j, const std::string& where) {
        if (!j.is_object()) throw SchemaError(where + ": product must be a JSON object");
        Product p;
        p.product_id = require_string(j, "product_id", where);
        if (p.product_id.empty()) throw SchemaError(where + ": field 'product_id' must be non-empty");
        p.name = require_string(j, "name", where);
        p.category = require_string(j, "category", where);
        const Json& brand = require_field(j, "brand", where);
        if (brand.is_string()) {
            p.brand = brand.get<std::string>();
        } else if (!brand.is_null()) {
            throw SchemaError(where + ": field 'brand' must be a string or null");
        }
        const Json& price = require_field(j, "price", where);
        if (!price.is_number()) throw SchemaError(where + ": field 'price' must be a number");
        p.price = Money::from_number(price.get<double>());
        if (p.price < Money::from_cents(0)) throw SchemaError(where + ": field 'price' must be >= 0");
        p.shop_id = require_string(j, "shop_id", where);
        const Json& features = require_field(j, "features", where);
        if (!features.is_object()) throw SchemaError(where + ": field 'features' must be an object");
        for (const auto& [k, v] : features.items()) {
            if (!v.is_string()) throw SchemaError(where + ": feature '" + k + "' must be a string");
            p.features.emplace_back(k, v.get<std::string>());
        }
        const Json& options = require_field(j, "options", where);
        if (!options.is_object()) throw SchemaError(where + ": field 'options' must be an object");
        for (const auto& [k, v] : options.items()) {
            if (!v.is_array()) throw SchemaError(where + ": option '" + k + "' must be an array");
            std::vector<std::string> values;
            for (const auto& e : v) {
                if (!e.is_string()) throw SchemaError(where + ": option '" + k + "' values must be strings");
                values.push_back(e.get<std::string>());
            }
            p.options.emplace_back(k, std::move(values));
        }
        return p;
    }
};

/// Immutable after ingestion; products keep file order and ids are unique.
class Catalog {
public:
    Catalog() = default;

    void add(Product p) {
        const auto [it, inserted] = by_id_.emplace(p.product_id, products_.size());
        if (!inserted) {
            throw SchemaError("duplicate product_id '" + p.product_id + "'");
        }
        products_.push_back(std::move(p));
    }

    std::size_t size() const { return products_.size(); }
    bool empty() const { return products_.empty(); }
    const Product& at(std::size_t i) const { return products_[i]; }
    const std::vector<Product>& all() const { return products_; }

    const Product* find(const std::string& product_id) const {
        const auto it = by_id_.find(product_id);
        return it == by_id_.end() ? nullptr : &products_[it->second];
    }

    static Catalog from_jsonl(const std::string& path) {
        Catalog c;
        for_each_jsonl(path, [&](std::size_t lineno, const Json& j) {
            const std::string where = path + ":" + std::to_string(lineno);
            Product p = Product::from_json(j, where);
            try {
                c.add(std::move(p));
            } catch (const SchemaError& e) {
                throw SchemaError(where + ": " + e.what());
            }
        });
        return c;
    }

    void save_jsonl(const std::string& path) const {
        std::string out;
        for (const auto& p : products_) {
            out += p.to_json().dump();
            out.push_back('\n');
        }
        write_text_file(path, out);
    }

private:
    std::vector<Product> products_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Catalog ingestion from JSONL (one product object per line). Rejects the
/// whole file on any schema violation or duplicate id.
inline Catalog ingest_products(const std::string& path) { return Catalog::from_jsonl(path); }

/// The indexed text of a product. Concatenation order is fixed (name,
/// category, brand, features, options) so BM25 scores are reproducible.
inline std::string document_text(const Product& p) {
    std::string out = p.name;
    out += ' ';
    out += p.category;
    if (p.brand) {
        out += ' ';
        out += *p.brand;
    }
    for (const auto& [k, v] : p.features) {
        out += ' ';
        out += k;
        out += ' ';
        out += v;
    }
    for (const auto& [k, vs] : p.options) {
        out += ' ';
        out += k;
        for (const auto& v : vs) {
            out += ' ';
            out += v;
        }
    }
    return out;
}

/// Human-readable record used in tool observations.
inline std::string render_product(const Product& p) {
    std::string out = "[" + p.product_id + "] " + p.name;
    out += "\n  category: " + p.category;
    if (p.brand) out += "\n  brand: " + *p.brand;
    out += "\n  price: " + p.price.str();
    out += "\n  shop_id: " + p.shop_id;
    if (!p.features.empty()) {
        out += "\n  features:";
        for (const auto& [k, v] : p.features) out += "\n    " + k + ": " + v;
    }
    if (!p.options.empty()) {
        out += "\n  options:";
        for (const auto& [k, vs] : p.options) {
            out += "\n    " + k + ":";
            for (std::size_t i = 0; i < vs.size(); ++i) {
                out += i ? ", " : " ";
                out += vs[i];
            }
        }
    }
    return out;
}

struct ProductViewEntry {
    std::string product_id;
    const Product* product = nullptr; ///< null when the id is unknown
};

/// Full records in request order; unknown ids become not-found entries.
inline std::vector<ProductViewEntry> product_view(const Catalog& catalog,
                                                  const std::vector<std::string>& product_ids) {
    if (product_ids.empty()) throw ArgumentError("product_view: empty product_ids");
    std::vector<ProductViewEntry> out;
    out.reserve(product_ids.size());
    for (const auto& id : product_ids) {
        out.push_back({id, catalog.find(id)});
    }
    return out;
}

inline std::string render_product_view(const std::vector<ProductViewEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        if (!out.empty()) out += "\n";
        if (e.product) {
            out += render_product(*e.product);
        } else {
            out += "[" + e.product_id + "] not found";
        }
    }
    return out;
}

} // namespace companion
