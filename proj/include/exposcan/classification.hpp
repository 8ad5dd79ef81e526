#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exposcan/harvest.hpp"

namespace exposcan {

enum class ExposureCategory : std::uint8_t {
    FailedToConnect = 0,
    ConnectedNoData = 1,
    ConnectedEmpty = 2,
    SystemOrNonSensitive = 3,
    SensitiveData = 4,
    Compromised = 5,
};

inline constexpr std::size_t kCategoryCount = 6;

std::string_view category_name(ExposureCategory c);
std::optional<ExposureCategory> parse_category(std::string_view name);
inline int ordinal(ExposureCategory c) { return static_cast<int>(c); }

enum class SensitiveKind : std::uint8_t {
    Email,
    Phone,
    PaymentCard,
    PasswordField,
    CredentialToken,
    NationalId,
};

std::string_view sensitive_kind_name(SensitiveKind k);
std::optional<SensitiveKind> parse_sensitive_kind(std::string_view name);

enum class RuleWhere : std::uint8_t { Namespace, Sample, FieldName };

struct SensitiveHit {
    SensitiveKind kind = SensitiveKind::Email;
    std::string namespace_name;
    std::string excerpt; // redacted
    std::string detector;

    bool operator==(const SensitiveHit &) const = default;
};

enum class EvidenceKind : std::uint8_t { RansomNote, SensitiveHit, SystemOnly, EmptyProof, AuthRefusal };

std::string_view evidence_kind_name(EvidenceKind k);
std::optional<EvidenceKind> parse_evidence_kind(std::string_view name);

struct Evidence {
    EvidenceKind kind = EvidenceKind::RansomNote;
    std::string detail;
    std::optional<std::string> namespace_name;

    bool operator==(const Evidence &) const = default;
};

nlohmann::ordered_json to_json(const Evidence &e);
Evidence evidence_from_json(const nlohmann::json &j);

// A compiled pattern set, loaded from a JSON array of
// {"id", "kind", "pattern", "where"} objects.
class RuleSet {
public:
    enum class Family { Sensitive, Ransom };

    struct Rule {
        std::string id;
        std::string kind;
        std::string pattern;
        RuleWhere where = RuleWhere::Sample;
    };

    // Throws RuleError on malformed JSON, unknown kinds or bad patterns.
    static RuleSet parse(std::string_view json_text, Family family);
    static RuleSet load(const std::string &path, Family family);

    static const RuleSet &default_sensitive();
    static const RuleSet &default_ransom();

    [[nodiscard]] const std::vector<Rule> &rules() const { return rules_; }
    [[nodiscard]] Family family() const { return family_; }

    // Non-overlapping matches of rule `index` in `text`.
    [[nodiscard]] std::vector<std::string> matches(std::size_t index, std::string_view text) const;
    [[nodiscard]] bool matches_any(std::size_t index, std::string_view text) const;

    RuleSet(RuleSet &&) noexcept;
    RuleSet &operator=(RuleSet &&) noexcept;
    ~RuleSet();

private:
    RuleSet();
    struct Compiled;
    Family family_ = Family::Sensitive;
    std::vector<Rule> rules_;
    std::unique_ptr<Compiled> compiled_;
};

// Field names in a sample: JSON object keys ("name":) and the left side of
// `name = value` lines.
std::vector<std::string> extract_field_names(std::string_view sample);

// A field name split on : . _ - /
std::vector<std::string> field_segments(std::string_view name);

bool luhn_valid(std::string_view digits);

// Keeps the first and last two characters and masks the rest. Short
// values are masked fully. The result never equals the input.
std::string redact(std::string_view match);

std::vector<SensitiveHit> detect_sensitive(const Harvest &h,
    const RuleSet &rules = RuleSet::default_sensitive());

std::vector<Evidence> detect_compromise(const Harvest &h,
    const RuleSet &rules = RuleSet::default_ransom());

struct Classification {
    ExposureCategory category = ExposureCategory::FailedToConnect;
    std::vector<Evidence> evidence;
};

Classification classify(ConnStatus status, const Harvest &h, const std::vector<SensitiveHit> &sensitive,
    const std::vector<Evidence> &ransom);

} // namespace exposcan
