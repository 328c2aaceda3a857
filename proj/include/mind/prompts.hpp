#pragma once

// Positive / negative rationale-generation prompts. Both templates ask the
// generator for several solutions per call, each labelled and separated by
// the batch delimiter.

#include "mind/dataset.hpp"

#include <string>
#include <string_view>

namespace mind {

inline char option_letter(std::size_t index) { return static_cast<char>('A' + index); }

/// Question, options, caption and answer as one block for the {Task-related information} slot.
inline std::string render_task_info(const Sample& s) {
    std::string out = "Question: " + s.question + "\nOptions:";
    for (std::size_t i = 0; i < s.options.size(); ++i) {
        out += " (";
        out += option_letter(i);
        out += ") " + s.options[i];
    }
    out += "\nContext: " + s.caption;
    out += "\nAnswer: (";
    out += option_letter(s.answer_index);
    out += ") " + s.answer_text();
    return out;
}

namespace prompt_text {

inline constexpr std::string_view kPreamble =
    "You are an intelligent agent with both perception and reasoning abilities.";
inline constexpr std::string_view kSeparatorInstruction = "Use \"\\n\\n~~~\\n\\n\" to separate them.";
inline constexpr std::string_view kFormatClosing = "The output must be in the required format.";

// Slots: {task}, {solution}, {repeat}.
inline constexpr std::string_view kPositiveTemplate =
    "\"{task}\"\n"
    "You are an intelligent agent with both perception and reasoning abilities. "
    "Based on the given context, please make random content adjustments to \"{solution}\" "
    "within a range of 10% to 50% while ensuring that the semantics remain unchanged. "
    "Please output {repeat} different solutions. "
    "Each output format is \"Adjusted Solution:\". "
    "Use \"\\n\\n~~~\\n\\n\" to separate them. "
    "The output must be in the required format.";

inline constexpr std::string_view kNegativeTemplate =
    "\"{task}\"\n"
    "You are an intelligent agent with both perception and reasoning abilities. "
    "\"{solution}\" is the explanation for the above problem. "
    "Based on the given context, please make minor edits to \"{solution}\" to reverse its meaning "
    "and ensure the correct answer cannot be logically derived, while keeping most of the original "
    "words and structure intact. "
    "Please output {repeat} different solutions. "
    "Each output format is \"Negative Solution:\". "
    "Use \"\\n\\n~~~\\n\\n\" to separate them. "
    "The output must be in the required format.";

}  // namespace prompt_text

struct PromptSpec {
    std::string task_info;
    std::string solution;
    int repeat_number = 10;
    Polarity polarity = Polarity::positive;

    std::string render() const {
        if (repeat_number < 1) throw ValidationError("repeat_number must be >= 1");
        if (solution.empty()) throw ValidationError("solution must be nonempty");
        const std::string_view tmpl =
            polarity == Polarity::positive ? prompt_text::kPositiveTemplate : prompt_text::kNegativeTemplate;
        std::string out;
        out.reserve(tmpl.size() + task_info.size() + 2 * solution.size());
        for (std::size_t i = 0; i < tmpl.size();) {
            if (tmpl.substr(i).starts_with("{task}")) {
                out += task_info;
                i += 6;
            } else if (tmpl.substr(i).starts_with("{solution}")) {
                out += solution;
                i += 10;
            } else if (tmpl.substr(i).starts_with("{repeat}")) {
                out += std::to_string(repeat_number);
                i += 8;
            } else {
                out += tmpl[i++];
            }
        }
        return out;
    }
};

inline std::string build_positive_prompt(const Sample& sample, const std::string& solution, int repeat_number) {
    return PromptSpec{render_task_info(sample), solution, repeat_number, Polarity::positive}.render();
}

inline std::string build_negative_prompt(const Sample& sample, const std::string& solution, int repeat_number) {
    return PromptSpec{render_task_info(sample), solution, repeat_number, Polarity::negative}.render();
}

}  // namespace mind
