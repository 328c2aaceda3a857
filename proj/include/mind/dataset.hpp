#pragma once

// Domain types for multi-rationale datasets, line-delimited persistence of
// samples and rationale pools, and integrity validation.

#include "mind/common.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mind {

/// Separator between batch-generated rationales: LF LF ~ ~ ~ LF LF.
inline constexpr std::string_view kDelimiter = "\n\n~~~\n\n";
inline constexpr std::string_view kPositiveLabel = "Adjusted Solution:";
inline constexpr std::string_view kNegativeLabel = "Negative Solution:";

struct Sample {
    std::string id;
    std::string image_feature_ref;  // empty: no image
    std::string question;
    std::vector<std::string> options;
    std::string caption;
    std::size_t answer_index = 0;
    std::string rationale_gt;

    const std::string& answer_text() const { return options.at(answer_index); }
    bool operator==(const Sample&) const = default;
};

struct Provenance {
    std::string generator_id;
    std::string prompt_digest;
    Timestamp created_at{};
    bool operator==(const Provenance&) const = default;
};

struct Rationale {
    std::string text;
    Polarity polarity = Polarity::positive;
    std::string parent_id;
    Provenance provenance;
    bool operator==(const Rationale&) const = default;
};

/// A sample with its positive and negative rationale pools. R_gt stays on
/// `sample`; `positives` holds generated rationales only.
struct RadSample {
    Sample sample;
    std::vector<Rationale> positives;
    std::vector<Rationale> negatives;

    bool operator==(const RadSample&) const = default;
};

struct PoolFile {
    std::filesystem::path path;
    Polarity polarity = Polarity::positive;
    std::size_t record_count = 0;
};

/// Positive supervision pool used downstream: R_gt first, then generated positives.
inline std::vector<std::string> positive_texts(const RadSample& rs) {
    std::vector<std::string> out;
    out.reserve(rs.positives.size() + 1);
    out.push_back(rs.sample.rationale_gt);
    for (const auto& r : rs.positives) out.push_back(r.text);
    return out;
}

inline std::vector<std::string> negative_texts(const RadSample& rs) {
    std::vector<std::string> out;
    out.reserve(rs.negatives.size());
    for (const auto& r : rs.negatives) out.push_back(r.text);
    return out;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

/// First violated Rationale text invariant, if any.
inline std::optional<std::string> rationale_text_violation(std::string_view text) {
    if (text.empty()) return "EMPTY_TEXT";
    if (text.find(kDelimiter) != std::string_view::npos) return "DELIMITER_IN_TEXT";
    if (trim(text).size() != text.size()) return "UNTRIMMED_TEXT";
    if (text.starts_with(kPositiveLabel) || text.starts_with(kNegativeLabel)) return "LABEL_PREFIX";
    return std::nullopt;
}

// --- record encoding --------------------------------------------------------

inline nlohmann::ordered_json to_json(const Rationale& r) {
    nlohmann::ordered_json j;
    j["text"] = r.text;
    j["polarity"] = polarity_code(r.polarity);
    j["parent_id"] = r.parent_id;
    j["generator_id"] = r.provenance.generator_id;
    j["prompt_digest"] = r.provenance.prompt_digest;
    j["created_at"] = format_timestamp(r.provenance.created_at);
    return j;
}

inline nlohmann::ordered_json to_json(const Sample& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["image_feature_ref"] = s.image_feature_ref;
    j["question"] = s.question;
    j["options"] = s.options;
    j["caption"] = s.caption;
    j["answer_index"] = s.answer_index;
    j["rationale_gt"] = s.rationale_gt;
    return j;
}

namespace detail {

inline void require_exact_fields(const nlohmann::json& j, std::initializer_list<std::string_view> names) {
    if (!j.is_object()) throw std::runtime_error("record is not an object");
    if (j.size() != names.size()) throw std::runtime_error("record has unexpected field count");
    for (auto name : names)
        if (!j.contains(std::string(name))) throw std::runtime_error("missing field '" + std::string(name) + "'");
}

inline std::string get_string(const nlohmann::json& j, const char* name) {
    const auto& v = j.at(name);
    if (!v.is_string()) throw std::runtime_error(std::string("field '") + name + "' is not a string");
    return v.get<std::string>();
}

}  // namespace detail

inline Rationale rationale_from_json(const nlohmann::json& j) {
    detail::require_exact_fields(j, {"text", "polarity", "parent_id", "generator_id", "prompt_digest", "created_at"});
    Rationale r;
    r.text = detail::get_string(j, "text");
    r.polarity = parse_polarity(detail::get_string(j, "polarity"));
    r.parent_id = detail::get_string(j, "parent_id");
    r.provenance.generator_id = detail::get_string(j, "generator_id");
    r.provenance.prompt_digest = detail::get_string(j, "prompt_digest");
    r.provenance.created_at = parse_timestamp(detail::get_string(j, "created_at"));
    return r;
}

inline Sample sample_from_json(const nlohmann::json& j) {
    detail::require_exact_fields(
        j, {"id", "image_feature_ref", "question", "options", "caption", "answer_index", "rationale_gt"});
    Sample s;
    s.id = detail::get_string(j, "id");
    s.image_feature_ref = detail::get_string(j, "image_feature_ref");
    s.question = detail::get_string(j, "question");
    s.options = j.at("options").get<std::vector<std::string>>();
    s.caption = detail::get_string(j, "caption");
    if (!j.at("answer_index").is_number_unsigned()) throw std::runtime_error("answer_index is not unsigned");
    s.answer_index = j.at("answer_index").get<std::size_t>();
    s.rationale_gt = detail::get_string(j, "rationale_gt");
    return s;
}

// --- line-delimited files ---------------------------------------------------

namespace detail {

template <class T, class Decode>
std::vector<T> read_lines(const std::filesystem::path& path, Decode decode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        try {
            out.push_back(decode(nlohmann::json::parse(line)));
        } catch (const Error& e) {
            throw ParseError(lineno, e.what());
        } catch (const std::exception& e) {
            throw ParseError(lineno, e.what());
        }
    }
    if (in.bad()) throw IoError("read failure on " + path.string());
    return out;
}

inline void write_line(std::ofstream& out, const nlohmann::ordered_json& j, const std::filesystem::path& path) {
    // One write per record so a failure never leaves half a line behind a flushed buffer.
    const std::string line = j.dump() + '\n';
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!out) throw IoError("write failure on " + path.string());
}

inline std::size_t count_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return static_cast<std::size_t>(std::count(std::istreambuf_iterator<char>(in), {}, '\n'));
}

inline void check_pool_records(std::span<const Rationale> rationales, Polarity polarity) {
    for (std::size_t i = 0; i < rationales.size(); ++i) {
        const auto& r = rationales[i];
        if (auto v = rationale_text_violation(r.text)) throw ValidationError(i, *v);
        if (r.polarity != polarity) throw ValidationError(i, "POLARITY_MISMATCH");
        if (r.parent_id.empty()) throw ValidationError(i, "EMPTY_PARENT_ID");
    }
}

}  // namespace detail

/// Writes a pool file from scratch. Nothing is written if any record is invalid.
inline PoolFile write_pool(std::span<const Rationale> rationales, const std::filesystem::path& path,
                           Polarity polarity) {
    detail::check_pool_records(rationales, polarity);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& r : rationales) detail::write_line(out, to_json(r), path);
    out.flush();
    if (!out) throw IoError("flush failure on " + path.string());
    return {path, polarity, rationales.size()};
}

/// Appends whole records to an existing (or new) pool file.
inline PoolFile append_pool(std::span<const Rationale> rationales, const std::filesystem::path& path,
                            Polarity polarity) {
    detail::check_pool_records(rationales, polarity);
    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot open " + path.string() + " for appending");
        for (const auto& r : rationales) detail::write_line(out, to_json(r), path);
        out.flush();
        if (!out) throw IoError("flush failure on " + path.string());
    }
    return {path, polarity, detail::count_lines(path)};
}

inline std::vector<Rationale> read_pool(const std::filesystem::path& path) {
    return detail::read_lines<Rationale>(path, [](const nlohmann::json& j) { return rationale_from_json(j); });
}

inline std::vector<Sample> read_dataset(const std::filesystem::path& path) {
    return detail::read_lines<Sample>(path, [](const nlohmann::json& j) { return sample_from_json(j); });
}

inline void write_dataset(std::span<const Sample> samples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& s : samples) detail::write_line(out, to_json(s), path);
}

// --- float sidecar ----------------------------------------------------------
//
// A record is a little-endian uint32 element count followed by that many
// little-endian IEEE-754 binary32 values. A locator is "file" (record at byte
// 0) or "file@offset"; relative files resolve against the dataset directory.

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    return v;
}

}  // namespace detail

/// Appends one record and returns its byte offset.
inline std::uint64_t append_float_record(std::ofstream& out, std::span<const float> values) {
    const auto offset = static_cast<std::uint64_t>(out.tellp());
    detail::put_u32(out, static_cast<std::uint32_t>(values.size()));
    for (float f : values) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    if (!out) throw IoError("sidecar write failure");
    return offset;
}

inline std::vector<float> read_float_record(std::istream& in) {
    const std::uint32_t n = detail::get_u32(in);
    if (!in) throw IoError("truncated sidecar header");
    std::vector<float> values(n);
    for (auto& v : values) v = std::bit_cast<float>(detail::get_u32(in));
    if (!in) throw IoError("truncated sidecar payload");
    return values;
}

/// Resolves an image_feature_ref to a vector of `dim` floats; empty ref means all zeros.
inline std::vector<float> load_feature(const std::string& ref, const std::filesystem::path& base_dir,
                                       std::size_t dim) {
    if (ref.empty()) return std::vector<float>(dim, 0.0f);
    std::string file = ref;
    std::uint64_t offset = 0;
    if (auto at = ref.rfind('@'); at != std::string::npos) {
        file = ref.substr(0, at);
        offset = std::stoull(ref.substr(at + 1));
    }
    std::filesystem::path p = file;
    if (p.is_relative()) p = base_dir / p;
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open feature sidecar " + p.string());
    in.seekg(static_cast<std::streamoff>(offset));
    auto values = read_float_record(in);
    if (values.size() != dim)
        throw ValidationError("feature " + ref + " has dimension " + std::to_string(values.size()) + ", expected " +
                              std::to_string(dim));
    return values;
}

// --- validation -------------------------------------------------------------

struct Violation {
    std::string code;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    bool has(std::string_view code) const {
        return std::any_of(violations.begin(), violations.end(), [&](const auto& v) { return v.code == code; });
    }
};

inline void validate_sample_into(const Sample& s, std::vector<Violation>& out) {
    if (s.id.empty()) out.push_back({"EMPTY_ID", ""});
    if (s.options.size() < 2 || s.options.size() > 5)
        out.push_back({"OPTION_COUNT", std::to_string(s.options.size()) + " options"});
    if (s.answer_index >= s.options.size())
        out.push_back({"ANSWER_INDEX_OUT_OF_RANGE", std::to_string(s.answer_index)});
    if (s.question.empty()) out.push_back({"EMPTY_QUESTION", ""});
    if (s.rationale_gt.empty()) out.push_back({"EMPTY_RATIONALE_GT", ""});
    std::set<std::string> seen;
    for (const auto& o : s.options)
        if (!seen.insert(o).second) out.push_back({"DUPLICATE_OPTION", o});
}

inline ValidationReport validate_sample(const Sample& s) {
    ValidationReport r;
    validate_sample_into(s, r.violations);
    return r;
}

/// Checks every Sample, Rationale and RadSample invariant. R_gt belongs to the
/// positive side for duplicate and collision checks.
inline ValidationReport validate_rad_sample(const RadSample& rs) {
    ValidationReport report;
    auto& out = report.violations;
    validate_sample_into(rs.sample, out);

    auto check_list = [&](const std::vector<Rationale>& list, Polarity pol, std::string_view tag) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& r = list[i];
            const std::string where = std::string(tag) + "[" + std::to_string(i) + "]";
            if (auto v = rationale_text_violation(r.text)) out.push_back({*v, where});
            if (r.polarity != pol) out.push_back({"POLARITY_MISMATCH", where});
            if (r.parent_id != rs.sample.id) out.push_back({"PARENT_MISMATCH", where + " parent " + r.parent_id});
        }
    };
    check_list(rs.positives, Polarity::positive, "pos");
    check_list(rs.negatives, Polarity::negative, "neg");

    std::set<std::string> pos_seen{rs.sample.rationale_gt};
    for (const auto& r : rs.positives)
        if (!pos_seen.insert(r.text).second) out.push_back({"DUPLICATE_RATIONALE", "pos: " + r.text});
    std::set<std::string> neg_seen;
    for (const auto& r : rs.negatives)
        if (!neg_seen.insert(r.text).second) out.push_back({"DUPLICATE_RATIONALE", "neg: " + r.text});
    for (const auto& t : neg_seen)
        if (pos_seen.count(t)) out.push_back({"CROSS_POLARITY_COLLISION", t});
    return report;
}

/// Groups pool records under their parent samples, in dataset order.
inline std::vector<RadSample> join_pools(std::span<const Sample> samples, std::span<const Rationale> positives,
                                         std::span<const Rationale> negatives) {
    std::vector<RadSample> out;
    out.reserve(samples.size());
    std::map<std::string, std::size_t> index;
    for (const auto& s : samples) {
        if (!index.emplace(s.id, out.size()).second) throw ValidationError("duplicate sample id " + s.id);
        out.push_back({s, {}, {}});
    }
    auto route = [&](std::span<const Rationale> pool, bool pos) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
            auto it = index.find(pool[i].parent_id);
            if (it == index.end()) throw ValidationError(i, "ORPHAN_RATIONALE parent " + pool[i].parent_id);
            (pos ? out[it->second].positives : out[it->second].negatives).push_back(pool[i]);
        }
    };
    route(positives, true);
    route(negatives, false);
    return out;
}

struct DatasetStats {
    std::size_t samples = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    /// Mean rationales per sample counting R_gt: (p + q + 1) / 1.
    double expansion_factor = 0.0;
    std::size_t min_per_sample = 0;
    std::size_t max_per_sample = 0;
};

inline DatasetStats compute_stats(std::span<const RadSample> data) {
    DatasetStats st;
    st.samples = data.size();
    if (data.empty()) return st;
    st.min_per_sample = static_cast<std::size_t>(-1);
    for (const auto& rs : data) {
        st.positives += rs.positives.size();
        st.negatives += rs.negatives.size();
        const std::size_t per = rs.positives.size() + rs.negatives.size() + 1;
        st.min_per_sample = std::min(st.min_per_sample, per);
        st.max_per_sample = std::max(st.max_per_sample, per);
    }
    st.expansion_factor =
        static_cast<double>(st.positives + st.negatives + st.samples) / static_cast<double>(st.samples);
    return st;
}

}  // namespace mind
