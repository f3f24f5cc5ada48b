#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "companion/json_util.hpp"

namespace companion {

/// Prompt texts are compiled in as defaults and also shipped under prompts/
/// so operators can swap them without rebuilding; a non-empty prompts_dir
/// overrides the built-ins file by file.
namespace prompt_text {

inline constexpr std::string_view kOutputFormatRules = R"(# Output Format

## For thinking and making tool calls
Format the output as follows:
- Reasoning process MUST be within <think></think> tags.
- Tool calls MUST be within <tool_call></tool_call> tags. Each line MUST be a valid JSON object with "name" and "arguments" fields.
- Strictly follow the template below (DO NOT FORGET THE </tool_call> TAG):
```plaintext
<think>...your reasoning process...

</think>
<tool_call>
{"name": "tool_name", "arguments": {"arg": "value"}}

</tool_call>
```
)";

inline constexpr std::string_view kStage1System = R"(# Instructions

## Task
Given a product search query, retrieve the user's relevant memories (dialogue history) and identify their purchase preferences from them.

You can complete the task by:
- Retrieve the most relevant memories (dialogue turns) using the "mem_search" tool.
- View the whole dialogue session using the "mem_view" tool.
- Summarize dialogue sessions by date range using the "mem_summarize_by_date" tool.

## Rules
In each turn you can either:
- Think and make one or more tool calls.
- Provide your final answer and terminate the conversation.
You cannot do both at the same time.

You MUST think step by step and make multi-turn tool calls before providing your final answer.

{output_format}
## For providing your final answer
Write concise content within <answer></answer> tags as follows:
- List the relevant parts of memories and identified preferences in human-readable format.
- Ask if the above information is sufficient and accurate.
- Strictly follow the template below:
```plaintext
<answer>...your concise content...

</answer>
```
{available_tools})";

inline constexpr std::string_view kStage2System = R"(# Instructions

## Task
Given the product search query and the user's purchase preferences, find products or product bundles that exactly match them.

You can complete the task by:
- Use the "product_search" tool to search for products. Do not recommend any products from your own knowledge base.
- Use the "product_view" tool to view the attributes and options of the products, and then check if they match the user's preferences.
- Obtain up-to-date or domain-specific knowledge from the Internet using the "web_search" tool, and then visit and summarize the webpages using the "web_visit" tool.

## Rules
In each turn you can either:
- Think and make one or more tool calls.
- Provide your final answer and terminate the conversation.
You cannot do both at the same time.

You MUST think step by step and make multi-turn tool calls before providing your final answer.

{output_format}
## For providing your final answer
Write an expert-level report within <answer></answer> tags as follows:
- Describe how the products or product bundles you found align with user's preferences.
- Enclose the best-matching recommendation in the **special format**: @REC::product_id@ for a single product, or @REC::product_id1,product_id2,...@ for a product bundle.
- The product_id in the **special format** MUST come from the "product_search" tool response.
- May discuss multiple products or bundles, but only use the **special format** once.
- Is formatted with clear, well-structured Markdown.
- Strictly follow the template below:
```plaintext
<answer>...your expert-level report...

</answer>
```
{available_tools})";

inline constexpr std::string_view kOneStageSystem = R"(# Instructions

## Task
Given a product search query, first retrieve the user's relevant memories (dialogue history) to identify their purchase preferences, then find products or product bundles that exactly match them.

You can complete the task by:
- Retrieve the most relevant memories (dialogue turns) using the "mem_search" tool.
- View the whole dialogue session using the "mem_view" tool.
- Summarize dialogue sessions by date range using the "mem_summarize_by_date" tool.
- Use the "product_search" tool to search for products. Do not recommend any products from your own knowledge base.
- Use the "product_view" tool to view the attributes and options of the products, and then check if they match the user's preferences.

## Rules
In each turn you can either:
- Think and make one or more tool calls.
- Provide your final answer and terminate the conversation.
You cannot do both at the same time.

You MUST think step by step and make multi-turn tool calls before providing your final answer.

{output_format}
## For providing your final answer
Write an expert-level report within <answer></answer> tags as follows:
- Describe the identified preferences and how the recommended products align with them.
- Enclose the best-matching recommendation in the **special format**: @REC::product_id@ for a single product, or @REC::product_id1,product_id2,...@ for a product bundle.
- Only use the **special format** once.
- Strictly follow the template below:
```plaintext
<answer>...your expert-level report...

</answer>
```
{available_tools})";

inline constexpr std::string_view kMemoryToolDocs = R"(- mem_search: {"queries": ["...", "..."], "k": 5} - retrieve the top-k most similar dialogue turns per query. "k" is optional.
- mem_view: {"session_indices": [0, 3]} - view whole dialogue sessions by index.
- mem_summarize_by_date: {"start_date": "YYYY-MM-DD", "end_date": "YYYY-MM-DD"} - summarize the sessions dated within the range.)";

inline constexpr std::string_view kProductToolDocs = R"(- product_search: {"query": "...", "shop_id": "...", "price": "...", "k": 50} - ranked product search. "shop_id", "price" and "k" are optional; "price" accepts "a-b", "<=x" or ">=x".
- product_view: {"product_ids": ["...", "..."]} - view full product records by id.
- web_search: {"query": "..."} - search the web.
- web_visit: {"url": "..."} - fetch and summarize a webpage.)";

/// Fixed and versioned so trajectories stay comparable across runs.
inline constexpr std::string_view kFormatNudge =
    "Format error: reply with <think>...</think> followed by a <tool_call>...</tool_call> block "
    "of JSON lines, or provide a final <answer>...</answer>. You cannot do both at the same time.";

inline constexpr std::string_view kJudgeStage1 = R"(You are a strict evaluator of preference-identification answers.

# Inputs
- user query: the product search request.
- reference: the required preference attributes ("name: value"), F in total{bundle_note}.
- hypothesis: the assistant's answer to be evaluated.

# Scoring
Return a JSON object with integer fields:
- "q": 1 if the hypothesis addresses the user query's product needs, else 0.
- "m": the number of reference attributes (0..F) that the hypothesis states, matching semantically.{c_field}

# Rules
- Match semantically: synonyms and paraphrases count when the meaning is the same.
- Do not award credit for generic statements that fail to confirm an attribute.
- Output the JSON object only, no extra text.

# User Query
{user_query}

# Reference
{reference}

# Hypothesis
{hypothesis}
)";

inline constexpr std::string_view kJudgeStage2 = R"(You are a strict evaluator of product recommendations.

# Inputs
- user query: the product search request.
- reference: the required preference attributes ("name: value"), F in total{bundle_note}.
- recommended products: full records of the products the assistant recommended.
- hypothesis: the assistant's final report.

# Scoring
Return a JSON object with integer fields:
- "p": 1 if the recommendation is machine-extractable and every id is a real product, else 0.
- "q": 1 if the recommended products are relevant to the user query, else 0.
- "m": the number of reference attributes (0..F) satisfied by the recommended products.{n_u_fields}

# Rules
- Compare features comprehensively: consider name, attributes, and options of the recommended product.
- Match features semantically (exact wording not required, meaning must align).
- Ignore attribute order and extra attributes in the recommended product.
- Default to 0 when uncertain.
- Output the JSON object only, no extra text.

# User Query
{user_query}

# Reference
{reference}

# Recommended Products
{recommended_products}

# Hypothesis
{hypothesis}
)";

inline constexpr std::string_view kEvalSingle = R"(You are a professional query-product matching evaluator.

# Task
Given a user query, wanted features, and a recommended product, answer "yes" ONLY if BOTH conditions are met:
1. The recommended product is relevant to the user query
2. The recommended product contains ALL wanted features

# Matching Rules
- Compare features comprehensively: consider name, attributes, and options of the recommended product
- Match features semantically (exact wording not required, meaning must align)
- Ignore attribute order and extra attributes in the recommended product
- Answer "no" if ANY wanted feature is missing or unclear

Default to "no" when uncertain.

# User Query
{user_query}

# User Wanted Features
{wanted_features}

# Recommended Product
{recommended_product}

Output "yes" or "no" without any other text.
)";

inline constexpr std::string_view kEvalAddon = R"(You are a professional query-product matching evaluator.

# Task
Given:
- user query: include multiple products
- wanted features: include features that correspond to each product in the user query
- recommended products
Answer "yes" ONLY if BOTH conditions are met:
1. The recommended products include ALL the products in the user query
2. For each product in the user query, the recommended product contains ALL the corresponding wanted features

# Matching Rules
- Compare features comprehensively: consider name, attributes, and options of the recommended product
- Match features semantically (exact wording not required, meaning must align)
- Ignore the product order in the user query and the recommended products
- Ignore the attribute order and extra attributes in the recommended product
- Answer "no" if ANY wanted feature is missing or unclear

Default to "no" when uncertain.

# User Query
{user_query}

# User Wanted Features
{wanted_features}

# Recommended Products
{recommended_products}

Output "yes" or "no" without any other text.
)";

inline constexpr std::string_view kUserSimLow = R"(# Task
Compare a hypothesis answer (generated by an AI assistant) against reference products, and output one label indicating issues.

# Inputs
- reference: one or more products. Each product includes a name and a set of required features.
- hypothesis: the assistant's answer to be evaluated.

# Definitions
- missing: The hypothesis fails to fully cover the reference (a product, a required feature, or only generic statements).
- wrong: The hypothesis introduces information not present in the reference (external products, unlisted features, contradictions).
- all matched: Every product and its required features are present and correctly matched.

# Rules
- Treat matching semantically: synonyms and paraphrases count if they clearly refer to the same product/feature.
- Ignore details not specified in the reference unless explicitly included as required features.
- If both missing and wrong apply, output "missing".
- Do not include explanations, reasoning, or any extra text.

# Reference
{reference}

# Hypothesis
{hypothesis}

# Output
Return exactly one of: "missing", "wrong", or "all matched".
)";

inline constexpr std::string_view kUserSimHigh = R"(# Task
Compare a hypothesis answer (generated by an AI assistant) against reference products, and output the missing or wrong feature names.

# Inputs
- reference: one or more products. Each product includes a name and a set of required features.
- hypothesis: the assistant's answer to be evaluated.

# Definitions
- missing: The hypothesis fails to fully cover the reference (a product, a required feature, or only generic statements).
- wrong: The hypothesis introduces information not present in the reference (external products, unlisted features, contradictions).

# Rules
- Treat matching semantically: synonyms and paraphrases count if they clearly refer to the same product/feature.
- Ignore details not specified in the reference unless explicitly included as required features.
- Only output the feature names, do not include the feature values.
- Do not include explanations, reasoning, or any extra text.

# Reference
{reference}

# Hypothesis
{hypothesis}

# Output
Output a valid JSON object with "missing" and "wrong" fields, each a JSON array of feature-name strings. Both arrays are empty when the hypothesis exactly matches the reference.
)";

inline constexpr std::string_view kDialogueGen = R"(You are a professional scriptwriter.

# Input
- product_name: the product being discussed.
- features: features of the product.

# Tasks
1. Choose {number_of_features} meaningful and easy-to-understand features from the feature list as wanted features and treat the rest as does-not-matter features.
2. Craft a realistic user-assistant dialogue in which the user confirms every wanted feature before the conversation ends, without buying the product now.

# Dialogue Rules
- The user proposes a life scenario where the product would be needed and never volunteers features; they respond to the assistant's questions.
- The assistant asks about one aspect at a time and only discusses features from the feature list.
- Roles strictly alternate starting with the user; output utterances only.

# Product Name
{product_name}

# Features
{features}

# Output
Return a valid JSON object with "wanted_features", "does_not_matter_features", and "dialogue" keys. "wanted_features" and "does_not_matter_features" are arrays of "name: value" strings; "dialogue" is an array of {"role", "content"} objects.
)";

inline constexpr std::string_view kInstructionSingle = R"(# Task
Write a query to search for a product on the e-commerce platform.

# Product Information
{product_name}

# Important Notes
- Only use the basic product category name (no more than 5 tokens) from the title.
- Don't mention specific product attributes.
- Don't repeat the product title in the query.

Generate the query without any other text:
)";

inline constexpr std::string_view kInstructionAddon = R"(# Task
Write a query to search for a product bundle (include multiple products) on the e-commerce platform.

# Product Information
{product_names}

# Deal Information
Voucher Details: {voucher}
Budget: ${budget}

# Important Notes
- The query MUST include the voucher details and budget.
- Clearly state the multiple products in the bundle and use "," or "and" to connect them.
- The query should be like this: "Product bundle includes: X, Y, and Z. Voucher ... Budget ...".
- Only use the basic product category name (no more than 5 tokens) from the title.
- Don't mention specific product attributes.
- Don't repeat the product title in the query.

Generate the query without any other text:
)";

} // namespace prompt_text

inline std::string replace_all(std::string text, std::string_view what, std::string_view with) {
    std::size_t pos = 0;
    while ((pos = text.find(what, pos)) != std::string::npos) {
        text.replace(pos, what.size(), with);
        pos += with.size();
    }
    return text;
}

enum class StageMode { stage1, stage2, one_stage };

inline std::string available_tools_section(StageMode mode) {
    std::string out = "\n# Available Tools\n";
    if (mode == StageMode::stage1 || mode == StageMode::one_stage) {
        out += prompt_text::kMemoryToolDocs;
        out.push_back('\n');
    }
    if (mode == StageMode::stage2 || mode == StageMode::one_stage) {
        out += prompt_text::kProductToolDocs;
        out.push_back('\n');
    }
    return out;
}

/// File names used for on-disk prompt overrides.
inline const char* prompt_file_name(StageMode mode) {
    switch (mode) {
        case StageMode::stage1: return "stage1_system.txt";
        case StageMode::stage2: return "stage2_system.txt";
        case StageMode::one_stage: return "one_stage_system.txt";
    }
    return "";
}

inline std::string system_prompt(StageMode mode, const std::string& prompts_dir = "") {
    std::string base;
    if (!prompts_dir.empty()) {
        const std::string path = prompts_dir + "/" + prompt_file_name(mode);
        if (std::filesystem::exists(path)) base = read_text_file(path);
    }
    if (base.empty()) {
        switch (mode) {
            case StageMode::stage1: base = std::string(prompt_text::kStage1System); break;
            case StageMode::stage2: base = std::string(prompt_text::kStage2System); break;
            case StageMode::one_stage: base = std::string(prompt_text::kOneStageSystem); break;
        }
    }
    base = replace_all(std::move(base), "{output_format}", prompt_text::kOutputFormatRules);
    base = replace_all(std::move(base), "{available_tools}", available_tools_section(mode));
    return base;
}

/// Stage-2 user message: the original instruction plus the confirmed
/// preferences text, verbatim.
inline std::string stage2_user_message(const std::string& instruction,
                                       const std::string& confirmed_preferences) {
    return instruction + "\n\nConfirmed preferences:\n" + confirmed_preferences;
}

} // namespace companion
