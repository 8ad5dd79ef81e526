#include <gtest/gtest.h>

#include <set>

#include "../support/classifier_oracle.hpp"
#include "exposcan/errors.hpp"

using namespace exposcan;

namespace {

Harvest with_sample(const std::string &ns, const std::string &sample)
{
    Harvest h;
    h.namespaces.push_back({ns, 1, {sample}});
    return h;
}

std::size_t count_kind(const std::vector<SensitiveHit> &hits, SensitiveKind k)
{
    return static_cast<std::size_t>(
        std::count_if(hits.begin(), hits.end(), [&](const SensitiveHit &h) { return h.kind == k; }));
}

bool reference_luhn(const std::string &digits)
{
    int sum = 0;
    bool dbl = false;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        int d = *it - '0';
        if (dbl) {
            d = d * 2 > 9 ? d * 2 - 9 : d * 2;
        }
        sum += d;
        dbl = !dbl;
    }
    return sum % 10 == 0;
}

} // namespace

TEST(Sensitive, EmailInContactLine)
{
    auto hits = detect_sensitive(with_sample("crm", "contact: alice@example.com"));
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].kind, SensitiveKind::Email);
    EXPECT_EQ(hits[0].namespace_name, "crm");
    EXPECT_EQ(hits[0].excerpt, "al*************om");
}

TEST(Sensitive, CardNeedsLuhn)
{
    auto good = detect_sensitive(with_sample("pay", "4111 1111 1111 1111"));
    EXPECT_EQ(count_kind(good, SensitiveKind::PaymentCard), 1u);
    auto bad = detect_sensitive(with_sample("pay", "4111 1111 1111 1112"));
    EXPECT_EQ(count_kind(bad, SensitiveKind::PaymentCard), 0u);
}

TEST(Sensitive, LuhnAgreesWithReference)
{
    gen::Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        std::string digits = rng.text(19, "0123456789");
        if (digits.size() < 2) {
            continue;
        }
        EXPECT_EQ(luhn_valid(digits), reference_luhn(digits)) << digits;
    }
    EXPECT_TRUE(luhn_valid("79927398713"));
    EXPECT_FALSE(luhn_valid("79927398710"));
}

TEST(Sensitive, FieldNames)
{
    auto hits = detect_sensitive(with_sample("users", R"({"login": "bob", "password": "hunter2", "api_key": "x"})"));
    EXPECT_EQ(count_kind(hits, SensitiveKind::PasswordField), 1u);
    EXPECT_EQ(count_kind(hits, SensitiveKind::CredentialToken), 1u);
    auto kv = detect_sensitive(with_sample("db0", "ssn = 123-45-6789"));
    EXPECT_GE(count_kind(kv, SensitiveKind::NationalId), 1u);
}

TEST(Sensitive, BenignSamplesProduceNothing)
{
    for (const char *s : {R"({"item": "lamp", "qty": 3})", "theme = dark", R"({"sku": "AB-12", "price": 12.5})",
             "2024-05-01 12:00:00 job finished"}) {
        EXPECT_TRUE(detect_sensitive(with_sample("inventory", s)).empty()) << s;
    }
}

TEST(Sensitive, PureFunction)
{
    auto h = with_sample("crm", R"({"email": "x.y@example.org", "phone": "+372 5123 4567"})");
    EXPECT_EQ(detect_sensitive(h), detect_sensitive(h));
    EXPECT_EQ(detect_compromise(h), detect_compromise(h));
}

TEST(Redaction, KeepsTwoCharactersEachEnd)
{
    EXPECT_EQ(redact("4111111111111111"), "41************11");
    EXPECT_EQ(redact("abcd"), "****");
    EXPECT_EQ(redact("****"), "[redacted:4]");
    gen::Rng rng(6);
    for (int i = 0; i < 2000; ++i) {
        std::string s = rng.text(40, gen::kPrintable);
        if (s.empty()) {
            continue;
        }
        EXPECT_NE(redact(s), s);
    }
}

TEST(Compromise, RansomNamespace)
{
    Harvest h;
    h.namespaces.push_back({"READ_ME_TO_RECOVER_YOUR_DATA", 1, {}});
    auto ev = detect_compromise(h);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].kind, EvidenceKind::RansomNote);
    EXPECT_EQ(ev[0].namespace_name, "READ_ME_TO_RECOVER_YOUR_DATA");
}

TEST(Compromise, BenignNamespaces)
{
    Harvest h;
    h.namespaces.push_back({"users", 1, {R"({"name": "x"})"}});
    h.namespaces.push_back({"orders", 1, {R"({"total": 3})"}});
    EXPECT_TRUE(detect_compromise(h).empty());
}

TEST(Compromise, BitcoinDemandInSample)
{
    auto ev = detect_compromise(with_sample("notes", "send 0.015 BTC to 1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa"));
    EXPECT_EQ(ev.size(), 1u);
    EXPECT_TRUE(detect_compromise(with_sample("notes", "wallet 1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa")).empty());
}

TEST(Rules, BadPatternFilesAreRejected)
{
    using F = RuleSet::Family;
    EXPECT_THROW(RuleSet::parse("not json", F::Sensitive), RuleError);
    EXPECT_THROW(RuleSet::parse(R"([{"id": "a", "kind": "ufo", "pattern": "x", "where": "sample"}])", F::Sensitive),
        RuleError);
    EXPECT_THROW(RuleSet::parse(R"([{"id": "a", "kind": "email", "pattern": "(", "where": "sample"}])", F::Sensitive),
        RuleError);
    EXPECT_THROW(RuleSet::parse(R"([{"id": "a", "kind": "email", "pattern": "x", "where": "moon"}])", F::Sensitive),
        RuleError);
    auto ok = RuleSet::parse(R"([{"id": "a", "kind": "email", "pattern": "x+", "where": "sample"}])", F::Sensitive);
    EXPECT_EQ(ok.rules().size(), 1u);
}

TEST(Rules, UserRulesReplaceDefaults)
{
    auto rules = RuleSet::parse(R"([{"id": "ee-code", "kind": "national_id", "pattern": "\\b[3-6]\\d{10}\\b",
        "where": "sample"}])", RuleSet::Family::Sensitive);
    auto hits = detect_sensitive(with_sample("people", "isikukood 38001085718"), rules);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].detector, "ee-code");
    EXPECT_TRUE(detect_sensitive(with_sample("people", "alice@example.com"), rules).empty());
}

TEST(Classify, PrecedenceExamples)
{
    Harvest none;
    EXPECT_EQ(classify(ConnStatus::Refused, none, {}, {}).category, ExposureCategory::FailedToConnect);
    EXPECT_EQ(classify(ConnStatus::TcpOnly, none, {}, {}).category, ExposureCategory::FailedToConnect);

    Harvest both = with_sample("READ_ME", "alice@example.com");
    auto c = classify(ConnStatus::ProtocolOk, both, detect_sensitive(both), detect_compromise(both));
    EXPECT_EQ(c.category, ExposureCategory::Compromised);

    Harvest blocked;
    blocked.auth_blocked = true;
    auto b = classify(ConnStatus::AuthRequired, blocked, {}, {});
    EXPECT_EQ(b.category, ExposureCategory::ConnectedNoData);
    ASSERT_EQ(b.evidence.size(), 1u);
    EXPECT_EQ(b.evidence[0].kind, EvidenceKind::AuthRefusal);

    Harvest empty;
    empty.empty = true;
    EXPECT_EQ(classify(ConnStatus::ProtocolOk, empty, {}, {}).category, ExposureCategory::ConnectedEmpty);
    EXPECT_EQ(classify(ConnStatus::ProtocolOk, none, {}, {}).category, ExposureCategory::ConnectedNoData);
    Harvest benign = with_sample("inventory", R"({"item": "lamp"})");
    EXPECT_EQ(classify(ConnStatus::ProtocolOk, benign, {}, {}).category, ExposureCategory::SystemOrNonSensitive);
}

TEST(Classify, GeneratedTupleProperties)
{
    gen::Rng rng(2024);
    std::set<int> seen;
    for (int i = 0; i < 10000; ++i) {
        auto c = gen::classifier_case(rng);
        auto problem = gen::check_classifier_case(c, rng);
        ASSERT_FALSE(problem) << *problem << " at case " << i << ": " << to_json(c.harvest).dump();
        seen.insert(ordinal(classify(c.status, c.harvest, detect_sensitive(c.harvest),
            detect_compromise(c.harvest)).category));
    }
    EXPECT_EQ(seen.size(), 6u);
}
