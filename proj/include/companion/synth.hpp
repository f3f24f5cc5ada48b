#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "companion/catalog.hpp"
#include "companion/instance.hpp"
#include "companion/memory.hpp"
#include "companion/product_index.hpp"
#include "companion/prompts.hpp"
#include "companion/rewards.hpp"
#include "companion/rng.hpp"

namespace companion {

/// Text-generation contract for the synthesis pipeline. The mock backend is
/// a pure function of (template_id, slots), so datasets are reproducible
/// without any model in the loop.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual std::string identity() const = 0;
    virtual std::string generate(const std::string& template_id, const Json& slots) = 0;
};

/// Deterministic template-filling backend.
class MockGenerator final : public GeneratorBackend {
public:
    std::string identity() const override { return "mock"; }

    std::string generate(const std::string& template_id, const Json& slots) override {
        const int variant = slots.value("variant", 0);
        if (template_id == "instruction_single") {
            const std::string category = to_lower_ascii(slots.at("category").get<std::string>());
            static const char* kForms[] = {"Looking for a %s.", "I need a %s.",
                                           "Please find me a %s.", "Searching for a good %s."};
            char buf[160];
            std::snprintf(buf, sizeof(buf), kForms[variant % 4], category.c_str());
            return std::string(buf);
        }
        if (template_id == "instruction_addon") {
            std::string cats;
            const auto& arr = slots.at("categories");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                if (i && i + 1 == arr.size()) {
                    cats += " and ";
                } else if (i) {
                    cats += ", ";
                }
                cats += to_lower_ascii(arr[i].get<std::string>());
            }
            return "Product bundle includes: " + cats + ". Voucher: " +
                   slots.at("voucher").get<std::string>() + ". Budget: $" +
                   slots.at("budget").get<std::string>() + ".";
        }
        if (template_id == "preference_dialogue") {
            return mock_dialogue(slots);
        }
        throw BackendError("mock backend: unknown template '" + template_id + "'");
    }

private:
    static std::string mock_dialogue(const Json& slots) {
        const std::string category = to_lower_ascii(slots.at("category").get<std::string>());
        const auto& features = slots.at("features"); // [[name, value], ...]
        const int n_wanted = slots.at("n_features").get<int>();
        static const char* kScenarios[] = {
            "I've been thinking about getting a %s for my home setup. Can you help me decide?",
            "My old %s finally gave up, so I'm researching a replacement.",
            "A friend suggested I look into a new %s. Where should I start?",
            "I keep running into situations where a %s would really help."};
        const int variant = slots.value("variant", 0);

        Json wanted = Json::array();
        Json dnm = Json::array();
        Json dialogue = Json::array();
        char buf[240];
        std::snprintf(buf, sizeof(buf), kScenarios[variant % 4], category.c_str());
        dialogue.push_back(Json{{"role", "user"}, {"content", std::string(buf)}});

        std::vector<std::string> dnm_names;
        for (std::size_t i = 0; i < features.size(); ++i) {
            const std::string name = features[i][0].get<std::string>();
            const std::string value = features[i][1].get<std::string>();
            const std::string pair = name + ": " + value;
            if (static_cast<int>(i) < n_wanted) {
                wanted.push_back(pair);
                dialogue.push_back(Json{{"role", "assistant"},
                                        {"content", "Happy to help with the " + category +
                                                        ". Do you have any requirement on the " +
                                                        name + "?"}});
                dialogue.push_back(Json{
                    {"role", "user"},
                    {"content", "Yes, from experience I definitely want " + pair + "."}});
            } else {
                dnm.push_back(pair);
                dnm_names.push_back(name);
            }
        }
        std::string recap = "So to confirm before we wrap up: for the " + category + " I want";
        for (std::size_t i = 0; i < wanted.size(); ++i) {
            recap += i ? "; " : " ";
            recap += wanted[i].get<std::string>();
        }
        recap += ".";
        for (std::size_t i = 0; i < dnm_names.size(); ++i) {
            recap += i ? ", " : " The ";
            recap += dnm_names[i];
        }
        if (!dnm_names.empty()) recap += " I am easy about.";
        recap += " I will not buy it today, just researching.";
        dialogue.push_back(Json{{"role", "assistant"},
                                {"content", "Understood. Anything else I should note down?"}});
        dialogue.push_back(Json{{"role", "user"}, {"content", recap}});

        Json out;
        out["wanted_features"] = wanted;
        out["does_not_matter_features"] = dnm;
        out["dialogue"] = dialogue;
        return out.dump();
    }
};

// ---------------------------------------------------------------------------
// Synthetic catalog
// ---------------------------------------------------------------------------

namespace synth_data {

inline constexpr const char* kCategories[] = {"mouse",   "keyboard", "headphones", "monitor",
                                              "lamp",    "backpack", "blender",    "kettle",
                                              "speaker", "charger",  "notebook",   "tripod"};
inline constexpr const char* kBrands[] = {"Zenith", "Acme",  "Orbit", "Nova",
                                          "Apex",   "Lumen", "Cedar", "Quill"};
inline constexpr const char* kAdjectives[] = {"Compact", "Ergonomic", "Portable", "Classic",
                                              "Premium", "Travel",    "Pro",      "Studio"};
inline constexpr const char* kColors[] = {"black", "white", "navy", "olive",
                                          "silver", "teal", "crimson"};
inline constexpr const char* kMaterials[] = {"aluminum", "plastic", "steel",
                                             "rubber",   "fabric",  "bamboo"};
inline constexpr const char* kConnectivity[] = {"bluetooth", "usb", "wired", "cordless"};
inline constexpr const char* kWarranty[] = {"1 year", "2 years", "3 years"};
inline constexpr const char* kWeightClass[] = {"featherweight", "midweight", "heavyduty"};
inline constexpr const char* kFinish[] = {"matte", "glossy", "brushed", "textured"};

} // namespace synth_data

/// Deterministic desk-scale catalog honoring the product schema: every item
/// carries 6 features so preference sampling always has room.
inline Catalog make_synthetic_catalog(int count, std::uint64_t seed) {
    using namespace synth_data;
    Catalog catalog;
    Rng rng(Rng::mix(seed, 0xCA7A106));
    auto pick = [&rng](const auto& pool) {
        return pool[rng.below(std::size(pool))];
    };
    for (int i = 0; i < count; ++i) {
        Product p;
        char id[16];
        std::snprintf(id, sizeof(id), "P%04d", i + 1);
        p.product_id = id;
        p.category = kCategories[static_cast<std::size_t>(i) % std::size(kCategories)];
        const std::string brand = pick(kBrands);
        p.brand = brand;
        std::string cap_category = p.category;
        cap_category[0] = static_cast<char>(cap_category[0] - 0x20);
        p.name = brand + " " + std::string(pick(kAdjectives)) + " " + cap_category;
        p.price = Money::from_cents(rng.range(500, 25000));
        p.shop_id = "shop-" + std::to_string(rng.range(1, 10));
        p.features = {{"color", pick(kColors)},
                      {"material", pick(kMaterials)},
                      {"connectivity", pick(kConnectivity)},
                      {"warranty", pick(kWarranty)},
                      {"weight class", pick(kWeightClass)},
                      {"finish", pick(kFinish)}};
        p.options = {{"gift wrap", {"yes", "no"}}};
        catalog.add(std::move(p));
    }
    return catalog;
}

// ---------------------------------------------------------------------------
// Distractor pool
// ---------------------------------------------------------------------------

/// Generic everyday sessions with no product-shopping content; stands in for
/// an external conversation corpus, same Session schema.
inline std::vector<std::vector<Turn>> default_distractor_pool() {
    auto s = [](std::initializer_list<std::pair<const char*, const char*>> turns) {
        std::vector<Turn> out;
        for (const auto& [role, content] : turns) out.push_back({role, content});
        return out;
    };
    return {
        s({{"user", "The forecast says rain all weekend again."},
           {"assistant", "A good excuse to stay in. Any indoor plans?"},
           {"user", "Probably just catching up on reading and some cleaning."}}),
        s({{"user", "I tried that pasta recipe you mentioned last week."},
           {"assistant", "How did the sauce turn out?"},
           {"user", "A bit salty, but the family still finished every plate."},
           {"assistant", "Next time cut the anchovies in half and taste as you go."}}),
        s({{"user", "Planning a short hike on Saturday, maybe the ridge trail."},
           {"assistant", "The ridge is lovely this season. Start early to beat the crowds."},
           {"user", "Good call, I'll pack water and leave by seven."},
           {"assistant", "Check the trailhead notice board for closures before you go."}}),
        s({{"user", "My tomato plants are drooping even though I water them daily."},
           {"assistant", "Daily watering can drown the roots. How is the drainage?"},
           {"user", "The pots sit in saucers that are usually full."},
           {"assistant", "Empty the saucers and water only when the topsoil feels dry."}}),
        s({{"user", "We watched three movies in a row last night."},
           {"assistant", "A proper marathon. Which one was the favorite?"},
           {"user", "The old heist film. The remake did not hold up."}}),
        s({{"user", "Taxes are due soon and my receipts are a mess."},
           {"assistant", "Sorting by month first usually makes it painless."},
           {"user", "I'll set aside Sunday morning for it."},
           {"assistant", "Remember to flag anything deductible as you sort."}}),
        s({{"user", "Traffic on the bridge was terrible again this morning."},
           {"assistant", "The early train might save you twenty minutes."},
           {"user", "True, though the station walk is long in the cold."}}),
        s({{"user", "I finally finished the novel from the book club list."},
           {"assistant", "Ahead of schedule! What did you think of the ending?"},
           {"user", "Abrupt, honestly. I hope the discussion changes my mind."},
           {"assistant", "Endings like that usually make for the best meetings."}}),
        s({{"user", "My gym routine is getting stale, same circuits every week."},
           {"assistant", "Swapping two sessions for swimming can reset things."},
           {"user", "The pool near work reopened, so that could work."}}),
        s({{"user", "I started journaling before bed like you suggested."},
           {"assistant", "A week in already? How does it feel?"},
           {"user", "Calmer evenings, though some entries are just two lines."},
           {"assistant", "Two honest lines beat a page of filler."}}),
        s({{"user", "The guitar chords lesson went better this week."},
           {"assistant", "Did the barre chords finally cooperate?"},
           {"user", "Almost. My fingers give up after twenty minutes."},
           {"assistant", "Short daily practice beats one long session."}}),
        s({{"user", "We drove out of the city to watch the meteor shower."},
           {"assistant", "Was the sky clear enough to catch the peak?"},
           {"user", "Perfectly clear. We counted thirty before midnight."}}),
        s({{"user", "The hallway paint is peeling near the ceiling."},
           {"assistant", "Sounds like moisture. Check the vent above the stairs."},
           {"user", "There is a vent there, and it does drip in summer."},
           {"assistant", "Fix the seal first, then repaint once the wall dries."}}),
        s({{"user", "My neighbor's dog has been walking me, not the other way."},
           {"assistant", "Pulling on the leash? A front-clip harness helps."},
           {"user", "I'll suggest that before my shoulder gives out."}}),
        s({{"user", "I'm trying to learn ten new words a day in Spanish."},
           {"assistant", "Spaced repetition will keep them from fading."},
           {"user", "The flashcard habit is the hard part."},
           {"assistant", "Attach it to your morning coffee and it will stick."}}),
        s({{"user", "The community garden plot sign-ups open on Monday."},
           {"assistant", "Will you go for the sunny corner plot again?"},
           {"user", "If nobody beats me to it at dawn."}}),
    };
}

/// Loads a pool file: a JSON array of sessions (indices and dates ignored).
inline std::vector<std::vector<Turn>> distractor_pool_from_file(const std::string& path) {
    Json j;
    try {
        j = Json::parse(read_text_file(path));
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(path + ": invalid JSON: " + e.what());
    }
    if (!j.is_array()) throw SchemaError(path + ": pool must be a JSON array of sessions");
    std::vector<std::vector<Turn>> pool;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = path + "[" + std::to_string(i) + "]";
        const Json& turns = require_field(j[i], "turns", where);
        std::vector<Turn> list;
        for (const auto& t : turns) {
            list.push_back({require_string(t, "role", where), require_string(t, "content", where)});
        }
        if (list.empty()) throw SchemaError(where + ": empty session");
        pool.push_back(std::move(list));
    }
    return pool;
}

// ---------------------------------------------------------------------------
// Pipeline steps
// ---------------------------------------------------------------------------

struct SampledTask {
    std::vector<const Product*> products;
    std::optional<Voucher> voucher;
    std::optional<Money> budget;
};

/// Step 1: category-stratified product sampling. Add-on tasks draw 2-3
/// products from distinct categories plus a voucher and a budget that keep
/// the gold bundle feasible by construction.
inline SampledTask sample_products(const Catalog& catalog, int task_bit, Rng& rng,
                                   int min_features = 2) {
    if (catalog.empty()) throw ArgumentError("sample_products: empty catalog");
    std::map<std::string, std::vector<const Product*>> by_category;
    for (const auto& p : catalog.all()) {
        if (static_cast<int>(p.features.size()) >= min_features) {
            by_category[p.category].push_back(&p);
        }
    }
    std::vector<std::string> categories;
    for (const auto& [cat, _] : by_category) categories.push_back(cat);

    SampledTask task;
    if (task_bit == 0) {
        const auto& cat = categories[rng.below(categories.size())];
        const auto& pool = by_category[cat];
        task.products.push_back(pool[rng.below(pool.size())]);
        return task;
    }

    const int n = static_cast<int>(rng.range(2, 3));
    if (static_cast<int>(categories.size()) < n) {
        throw ArgumentError("sample_products: not enough distinct categories for a bundle");
    }
    rng.shuffle(categories);
    Money total = Money::from_cents(0);
    for (int i = 0; i < n; ++i) {
        const auto& pool = by_category[categories[static_cast<std::size_t>(i)]];
        const Product* p = pool[rng.below(pool.size())];
        task.products.push_back(p);
        total = total + p->price;
    }

    Voucher v;
    if (rng.below(2) == 0) {
        v.kind = Voucher::Kind::flat_off_over_threshold;
        v.threshold = Money::percent_of(total, rng.range(60, 90) * 100);
        v.amount = Money::percent_of(total, rng.range(5, 20) * 100);
    } else {
        v.kind = Voucher::Kind::percent_off_capped;
        v.percent_bp = rng.range(5, 30) * 100;
        v.cap = Money::percent_of(total, rng.range(10, 50) * 100);
    }
    task.voucher = v;
    const Money effective = v.effective_total(total);
    task.budget = effective + Money::percent_of(effective, rng.range(0, 20) * 100);
    return task;
}

inline constexpr int kSynthRetryCap = 5;

/// Instruction leak rule: no wanted-feature *value* may appear.
inline bool instruction_leaks(const std::string& instruction,
                              const std::vector<std::string>& wanted_features) {
    const std::string norm = normalize_for_match(instruction);
    for (const auto& feat : wanted_features) {
        const auto colon = feat.find(':');
        const std::string value = trim(colon == std::string::npos ? feat : feat.substr(colon + 1));
        if (!value.empty() && contains_normalized(norm, value)) return true;
    }
    return false;
}

/// Step 2: instruction generation with validation. Single-product
/// instructions must name the category and leak no feature value; add-on
/// instructions must also carry the voucher text and budget amount.
/// Violations trigger regeneration up to the retry cap.
inline std::string generate_instruction(const std::vector<const Product*>& products, int task_bit,
                                        const std::optional<Voucher>& voucher,
                                        const std::optional<Money>& budget,
                                        const std::vector<std::string>& wanted_features,
                                        GeneratorBackend& backend, Rng& rng,
                                        int retry_cap = kSynthRetryCap) {
    for (int attempt = 0; attempt < retry_cap; ++attempt) {
        Json slots;
        slots["variant"] = static_cast<int>(rng.below(1000));
        std::string instruction;
        if (task_bit == 0) {
            slots["category"] = products.front()->category;
            slots["product_name"] = products.front()->name;
            instruction = backend.generate("instruction_single", slots);
        } else {
            Json cats = Json::array();
            Json names = Json::array();
            for (const auto* p : products) {
                cats.push_back(p->category);
                names.push_back(p->name);
            }
            slots["categories"] = cats;
            slots["product_names"] = names;
            slots["voucher"] = voucher->describe();
            slots["budget"] = budget->str();
            instruction = backend.generate("instruction_addon", slots);
        }
        instruction = trim(instruction);

        const std::string norm = normalize_for_match(instruction);
        bool ok = !instruction.empty() && !instruction_leaks(instruction, wanted_features);
        for (const auto* p : products) {
            if (!contains_normalized(norm, p->category)) ok = false;
        }
        if (task_bit == 1) {
            if (norm.find("voucher") == std::string::npos) ok = false;
            if (!contains_normalized(norm, budget->str())) ok = false;
        }
        if (ok) return instruction;
    }
    throw BackendError("generate_instruction: retry cap exhausted");
}

struct PreferenceDialogue {
    std::vector<std::string> wanted;
    std::vector<std::string> does_not_matter;
    std::vector<Turn> turns;
};

/// Step 3: preference-evidence dialogue with validation: JSON schema, strict
/// user/assistant alternation starting with the user, full coverage of every
/// wanted feature, and provenance (wanted and does-not-matter features all
/// come from the product).
inline PreferenceDialogue generate_preference_dialogue(const Product& product, int n_features,
                                                       GeneratorBackend& backend, Rng& rng,
                                                       int retry_cap = kSynthRetryCap) {
    if (static_cast<int>(product.features.size()) < n_features) {
        throw ArgumentError("generate_preference_dialogue: product has fewer than " +
                            std::to_string(n_features) + " features");
    }
    std::string last_error;
    for (int attempt = 0; attempt < retry_cap; ++attempt) {
        Json slots;
        slots["variant"] = static_cast<int>(rng.below(1000));
        slots["category"] = product.category;
        slots["product_name"] = product.name;
        slots["n_features"] = n_features;
        Json feats = Json::array();
        for (const auto& [k, v] : product.features) feats.push_back(Json::array({k, v}));
        slots["features"] = feats;

        const std::string raw = backend.generate("preference_dialogue", slots);
        Json j = Json::parse(raw, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("wanted_features") ||
            !j.contains("does_not_matter_features") || !j.contains("dialogue")) {
            last_error = "output does not match the dialogue JSON schema";
            continue;
        }
        PreferenceDialogue out;
        bool ok = true;
        for (const auto& f : j["wanted_features"]) {
            if (!f.is_string()) ok = false;
            else out.wanted.push_back(f.get<std::string>());
        }
        for (const auto& f : j["does_not_matter_features"]) {
            if (!f.is_string()) ok = false;
            else out.does_not_matter.push_back(f.get<std::string>());
        }
        if (!ok || out.wanted.empty() || !j["dialogue"].is_array() || j["dialogue"].empty()) {
            last_error = "missing wanted features or dialogue";
            continue;
        }
        std::string all_text;
        for (const auto& t : j["dialogue"]) {
            if (!t.is_object() || !t.contains("role") || !t.contains("content") ||
                !t["role"].is_string() || !t["content"].is_string()) {
                ok = false;
                break;
            }
            out.turns.push_back({t["role"].get<std::string>(), t["content"].get<std::string>()});
            all_text += out.turns.back().content;
            all_text.push_back('\n');
        }
        if (!ok) {
            last_error = "dialogue turns malformed";
            continue;
        }
        // roles strictly alternate starting with user
        for (std::size_t i = 0; i < out.turns.size(); ++i) {
            const std::string expected = i % 2 == 0 ? "user" : "assistant";
            if (out.turns[i].role != expected) ok = false;
        }
        if (!ok) {
            last_error = "roles must alternate starting with user";
            continue;
        }
        // every wanted feature confirmed somewhere in the dialogue
        const std::string norm = normalize_for_match(all_text);
        for (const auto& feat : out.wanted) {
            if (!contains_normalized(norm, feat)) ok = false;
        }
        if (!ok) {
            last_error = "dialogue does not confirm every wanted feature";
            continue;
        }
        // provenance: wanted and does-not-matter features belong to the product
        std::vector<std::string> product_feats;
        for (const auto& [k, v] : product.features) product_feats.push_back(k + ": " + v);
        auto from_product = [&](const std::string& f) {
            return std::find(product_feats.begin(), product_feats.end(), f) != product_feats.end();
        };
        for (const auto& f : out.wanted) {
            if (!from_product(f)) ok = false;
        }
        for (const auto& f : out.does_not_matter) {
            if (!from_product(f)) ok = false;
        }
        if (!ok) {
            last_error = "features not drawn from the product";
            continue;
        }
        return out;
    }
    throw BackendError("generate_preference_dialogue: retry cap exhausted (" + last_error + ")");
}

struct InterleaveResult {
    std::vector<Session> history;
    std::vector<int> gold_indices;
};

/// Step 4: needle-in-a-haystack interleaving. Gold sessions land on a
/// uniformly random slot subset (order preserved), total turns stay within
/// the target range, and dates increase monotonically.
inline InterleaveResult interleave_haystack(const std::vector<std::vector<Turn>>& preference_sessions,
                                            const std::vector<std::vector<Turn>>& distractor_pool,
                                            std::pair<int, int> target_turns, Rng& rng) {
    if (preference_sessions.empty()) throw ArgumentError("interleave_haystack: no gold sessions");
    if (distractor_pool.empty()) throw ArgumentError("interleave_haystack: empty distractor pool");
    const int min_turns = target_turns.first;
    const int max_turns = target_turns.second;
    int gold_turns = 0;
    for (const auto& s : preference_sessions) gold_turns += static_cast<int>(s.size());
    if (gold_turns > max_turns) {
        throw ArgumentError("interleave_haystack: gold sessions alone exceed the turn budget");
    }

    const int desired = static_cast<int>(rng.range(std::max(min_turns, gold_turns), max_turns));
    std::vector<std::size_t> order(distractor_pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<std::size_t> chosen;
    int total = gold_turns;
    for (const std::size_t idx : order) {
        if (total >= desired) break;
        const int size = static_cast<int>(distractor_pool[idx].size());
        if (total + size <= max_turns) {
            chosen.push_back(idx);
            total += size;
        }
    }
    if (total < min_turns) {
        throw ArgumentError("interleave_haystack: distractor pool too small to reach " +
                            std::to_string(min_turns) + " turns");
    }

    const std::size_t slots = preference_sessions.size() + chosen.size();
    std::vector<int> positions(slots);
    for (std::size_t i = 0; i < slots; ++i) positions[static_cast<std::size_t>(i)] = static_cast<int>(i);
    rng.shuffle(positions);
    std::vector<int> gold_positions(positions.begin(),
                                    positions.begin() + static_cast<std::ptrdiff_t>(preference_sessions.size()));
    std::sort(gold_positions.begin(), gold_positions.end());

    InterleaveResult out;
    out.history.resize(slots);
    Date date = Date{2023, 1, 2}.plus_days(static_cast<std::int64_t>(rng.below(300)));
    std::size_t next_gold = 0;
    std::size_t next_distractor = 0;
    for (std::size_t pos = 0; pos < slots; ++pos) {
        Session s;
        s.session_index = static_cast<int>(pos);
        s.date = date;
        date = date.plus_days(rng.range(1, 6));
        if (next_gold < gold_positions.size() &&
            static_cast<int>(pos) == gold_positions[next_gold]) {
            s.turns = preference_sessions[next_gold];
            out.gold_indices.push_back(static_cast<int>(pos));
            ++next_gold;
        } else {
            s.turns = distractor_pool[chosen[next_distractor++]];
        }
        out.history[pos] = std::move(s);
    }
    return out;
}

struct VerifyOptions {
    int mem_k = 10;      ///< memory-retrieval check depth
    int product_k = 50;  ///< product-retrieval check depth
};

struct VerifyReport {
    bool accepted = true;
    std::vector<std::string> failures;

    Json to_json() const {
        Json j;
        j["accepted"] = accepted;
        j["failures"] = failures;
        return j;
    }
};

/// Step 5: automatic resolvability checks. Each gold session must surface in
/// the top-k of mem_search for the instruction query, each gold product must
/// rank in the product_search top-50 for the instruction, add-on bundles
/// must stay budget-feasible, and the instruction must be leak-free.
inline VerifyReport verify_instance(const BenchmarkInstance& instance, const Catalog& catalog,
                                    const ProductIndex& index, const Embedder& embedder,
                                    VerifyOptions opts = {}) {
    VerifyReport report;
    auto fail = [&](const std::string& reason) {
        report.accepted = false;
        report.failures.push_back(reason);
    };

    try {
        instance.validate();
    } catch (const std::exception& e) {
        fail(std::string("structural: ") + e.what());
        return report;
    }

    // gold sessions retrievable
    try {
        const MemoryStore store = instance.memory_store();
        const MemoryIndex mem_index = MemoryIndex::build(store, embedder);
        const auto results = mem_search(mem_index, embedder, {instance.instruction},
                                        static_cast<std::size_t>(opts.mem_k));
        for (const int gold_idx : instance.gold.gold_session_indices) {
            bool found = false;
            for (const auto& hit : results.front()) {
                if (hit.session_index == gold_idx) found = true;
            }
            if (!found) {
                fail("gold session " + std::to_string(gold_idx) +
                     " not retrievable in mem_search top-" + std::to_string(opts.mem_k));
            }
        }
    } catch (const std::exception& e) {
        fail(std::string("memory check: ") + e.what());
    }

    // gold products retrievable
    const auto hits = index.search(instance.instruction, static_cast<std::size_t>(opts.product_k));
    for (const auto& pid : instance.gold.product_ids) {
        bool found = false;
        for (const auto& h : hits) {
            if (h.product_id == pid) found = true;
        }
        if (!found) {
            fail("gold product " + pid + " not retrievable in product_search top-" +
                 std::to_string(opts.product_k));
        }
        if (!catalog.find(pid)) fail("gold product " + pid + " missing from catalog");
    }

    // budget feasibility
    if (instance.task_bit == 1) {
        Money total = Money::from_cents(0);
        bool priced = true;
        for (const auto& pid : instance.gold.product_ids) {
            const Product* p = catalog.find(pid);
            if (!p) {
                priced = false;
                break;
            }
            total = total + p->price;
        }
        if (priced) {
            const Money effective = instance.gold.voucher
                                        ? instance.gold.voucher->effective_total(total)
                                        : total;
            if (!(effective <= *instance.gold.budget)) {
                fail("gold bundle not budget-feasible: effective total " + effective.str() +
                     " exceeds budget " + instance.gold.budget->str());
            }
        }
    }

    // leak freedom
    if (instruction_leaks(instance.instruction, instance.gold.all_wanted_features())) {
        fail("instruction leaks a wanted-feature value");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct SynthConfig {
    int single_count = 10;
    int addon_count = 10;
    double train_split = 0.8;
    std::uint64_t seed = 1;
    std::pair<int, int> target_turns{15, 50};
    int n_features_min = 2;
    int n_features_max = 6;
    int retry_cap = kSynthRetryCap;
    VerifyOptions verify;
};

struct DiscardRecord {
    std::string slot;
    std::string reason;
};

struct DatasetStats {
    int requested = 0;
    int emitted = 0;
    std::vector<int> turn_counts;
    std::vector<int> feature_counts;
    std::map<std::string, int> category_counts;
    std::vector<DiscardRecord> discarded;

    Json to_json() const {
        Json j;
        j["requested"] = requested;
        j["emitted"] = emitted;
        j["turn_counts"] = turn_counts;
        j["feature_counts"] = feature_counts;
        Json cats = Json::object();
        for (const auto& [k, v] : category_counts) cats[k] = v;
        j["category_counts"] = cats;
        Json disc = Json::array();
        for (const auto& d : discarded) {
            disc.push_back(Json{{"slot", d.slot}, {"reason", d.reason}});
        }
        j["discarded"] = disc;
        return j;
    }
};

struct DatasetResult {
    std::vector<BenchmarkInstance> train;
    std::vector<BenchmarkInstance> test;
    DatasetStats stats;
};

/// Builds one verified instance for (task_bit, slot index) or throws
/// BackendError after the retry cap.
inline BenchmarkInstance generate_instance(const Catalog& catalog, const ProductIndex& index,
                                           const Embedder& embedder, GeneratorBackend& backend,
                                           const std::vector<std::vector<Turn>>& distractors,
                                           int task_bit, std::uint64_t instance_seed,
                                           const SynthConfig& config) {
    std::string last_failure;
    for (int attempt = 0; attempt < config.retry_cap; ++attempt) {
        Rng rng(Rng::mix(instance_seed, static_cast<std::uint64_t>(attempt)));
        SampledTask task = sample_products(catalog, task_bit, rng, config.n_features_min);

        GoldAnnotation gold;
        gold.task_bit = task_bit;
        gold.bundle_size = static_cast<int>(task.products.size());
        gold.voucher = task.voucher;
        gold.budget = task.budget;
        std::vector<std::vector<Turn>> preference_sessions;
        for (const auto* p : task.products) {
            const int cap = std::min(config.n_features_max, static_cast<int>(p->features.size()));
            const int n_features = static_cast<int>(rng.range(config.n_features_min, cap));
            PreferenceDialogue d = generate_preference_dialogue(*p, n_features, backend, rng,
                                                                config.retry_cap);
            gold.product_ids.push_back(p->product_id);
            gold.wanted_features.emplace_back(p->product_id, d.wanted);
            for (const auto& f : d.does_not_matter) gold.does_not_matter_features.push_back(f);
            preference_sessions.push_back(std::move(d.turns));
        }

        BenchmarkInstance inst;
        inst.task_bit = task_bit;
        inst.instruction =
            generate_instruction(task.products, task_bit, task.voucher, task.budget,
                                 gold.all_wanted_features(), backend, rng, config.retry_cap);
        InterleaveResult haystack =
            interleave_haystack(preference_sessions, distractors, config.target_turns, rng);
        inst.history = std::move(haystack.history);
        gold.gold_session_indices = haystack.gold_indices;
        inst.gold = std::move(gold);

        const VerifyReport report = verify_instance(inst, catalog, index, embedder, config.verify);
        if (report.accepted) return inst;
        last_failure = report.failures.empty() ? "verification failed" : report.failures.front();
    }
    throw BackendError("generate_instance: retry cap exhausted (" + last_failure + ")");
}

/// Algorithm loop: per-slot seeds derive from the base seed, so reruns are
/// byte-identical; rejected builds are logged, never silently dropped.
inline DatasetResult generate_dataset(const Catalog& catalog, const ProductIndex& index,
                                      const Embedder& embedder, GeneratorBackend& backend,
                                      const SynthConfig& config,
                                      const std::vector<std::vector<Turn>>& distractors =
                                          default_distractor_pool()) {
    DatasetResult out;
    out.stats.requested = config.single_count + config.addon_count;

    std::vector<BenchmarkInstance> singles;
    std::vector<BenchmarkInstance> addons;
    for (int task_bit = 0; task_bit <= 1; ++task_bit) {
        const int count = task_bit == 0 ? config.single_count : config.addon_count;
        auto& bucket = task_bit == 0 ? singles : addons;
        for (int i = 0; i < count; ++i) {
            char id[32];
            std::snprintf(id, sizeof(id), "%s-%04d", task_bit == 0 ? "single" : "addon", i + 1);
            const std::uint64_t slot_seed =
                Rng::mix(config.seed, static_cast<std::uint64_t>(task_bit) * 1000003u +
                                          static_cast<std::uint64_t>(i));
            try {
                BenchmarkInstance inst = generate_instance(catalog, index, embedder, backend,
                                                           distractors, task_bit, slot_seed, config);
                inst.instance_id = id;
                out.stats.turn_counts.push_back(
                    static_cast<int>(MemoryStore::from_sessions(inst.history).total_turns()));
                out.stats.feature_counts.push_back(inst.gold.feature_count());
                for (const auto& pid : inst.gold.product_ids) {
                    if (const Product* p = catalog.find(pid)) {
                        ++out.stats.category_counts[p->category];
                    }
                }
                ++out.stats.emitted;
                bucket.push_back(std::move(inst));
            } catch (const BackendError& e) {
                out.stats.discarded.push_back({id, e.what()});
            }
        }
    }
    if (!out.stats.discarded.empty() && out.stats.emitted < out.stats.requested) {
        // partial datasets are still returned; callers decide whether to fail
    }

    auto split = [&](std::vector<BenchmarkInstance>& bucket) {
        const auto train_n = static_cast<std::size_t>(
            static_cast<double>(bucket.size()) * config.train_split + 1e-9);
        for (std::size_t i = 0; i < bucket.size(); ++i) {
            (i < train_n ? out.train : out.test).push_back(std::move(bucket[i]));
        }
    };
    split(singles);
    split(addons);
    return out;
}

} // namespace companion
