#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "companion/errors.hpp"
#include "companion/text.hpp"

namespace companion {

/// All wire and file formats use insertion-ordered JSON so serialized output
/// is stable and ordered maps (product features, options) keep their order.
using Json = nlohmann::ordered_json;

inline const Json& require_field(const Json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(where + ": missing field '" + key + "'");
    }
    return *it;
}

inline std::string require_string(const Json& obj, const char* key, const std::string& where) {
    const Json& v = require_field(obj, key, where);
    if (!v.is_string()) throw SchemaError(where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

/// Streams a JSONL file line by line; `fn(line_number, parsed)` starting at 1.
/// Blank lines are skipped. Parse failures report the line number.
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(std::size_t, const Json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        Json parsed;
        try {
            parsed = Json::parse(line);
        } catch (const std::exception& e) {
            throw SchemaError(path + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        fn(lineno, parsed);
    }
}

} // namespace companion
