#include <doctest.h>

#include <algorithm>
#include <string>

#include "escrowsim/bytes.hpp"
#include "escrowsim/digest.hpp"
#include "escrowsim/error.hpp"
#include "escrowsim/scenario.hpp"
#include "escrowsim/trace.hpp"

using namespace escrowsim;
using namespace escrowsim::agents;

namespace {

ScenarioConfig tiny_config() {
    ScenarioConfig cfg;
    cfg.seed = 7;
    cfg.n_affiliates = 2;
    cfg.samples_per_affiliate = 1;
    cfg.victims_per_sample = 1;
    cfg.duration_blocks = 12;
    return cfg;
}

std::size_t count_actions(const trace::Trace& t, const std::string& name,
                          const std::string& outcome = "") {
    std::size_t n = 0;
    for (const auto& a : t.actions)
        if (a.action == name && (outcome.empty() || a.outcome == outcome)) ++n;
    return n;
}

std::size_t count_events(const trace::Trace& t, ledger::EventKind kind) {
    std::size_t n = 0;
    for (const auto& b : t.blocks)
        for (const auto& r : b.receipts)
            for (const auto& e : r.events)
                if (e.kind == kind) ++n;
    return n;
}

}  // namespace

TEST_CASE("a full campaign carries every victim to recovery") {
    Scenario s(tiny_config());
    s.run();
    REQUIRE(s.finished());

    const RunStats& st = s.stats();
    CHECK(st.victims_total == 2);
    CHECK(st.victims_recovered == 2);
    CHECK(st.victims_abandoned == 0);
    CHECK(st.blocks_mined == 12);
    CHECK(st.author_polls == 12);
    CHECK(st.author_active_polls >= 2);  // at least pk batch + sk/split batch
    CHECK(st.sim_duration_s > 0.0);

    for (const auto& v : s.victims()) CHECK(v.phase == VictimPhase::Recovered);
    for (const auto& a : s.affiliates()) {
        CHECK(a.registered);
        CHECK(a.samples.size() == 1);
    }
    CHECK(s.escrow_host().invariants_hold(s.contract_id()));
    // All ransoms were split: nothing is left parked in the contract.
    CHECK(s.chain().balance(s.contract_id()).is_zero());

    const trace::Trace& t = s.trace();
    CHECK(t.meta.config_digest == config_digest(tiny_config()));
    CHECK(t.blocks.size() == 12);
    CHECK(count_actions(t, "infected") == 2);
    CHECK(count_actions(t, "submit_payment") == 2);
    CHECK(count_actions(t, "payment_confirmed") == 2);
    CHECK(count_actions(t, "recovered") == 2);
    CHECK(count_actions(t, "abandoned") == 0);
    CHECK(count_events(t, ledger::EventKind::AffiliateRegistered) == 2);
    CHECK(count_events(t, ledger::EventKind::SampleKeyPublished) == 2);
    CHECK(count_events(t, ledger::EventKind::RansomPaid) == 2);
    CHECK(count_events(t, ledger::EventKind::RansomSplit) == 2);
    CHECK(count_events(t, ledger::EventKind::SampleSecretPublished) == 2);

    // Account records: a creation-time and an end-of-run snapshot per actor
    // (author, miner sink, contract, 2 affiliates, 2 victims).
    CHECK(t.accounts.size() == 2 * 7);

    // A run's trace survives serialization byte-for-byte.
    std::string ndjson = to_ndjson(t);
    CHECK(to_ndjson(trace::parse_ndjson_string(ndjson)) == ndjson);
}

TEST_CASE("identical configs replay identical traces; seeds matter") {
    ScenarioConfig cfg = tiny_config();
    std::string a = to_ndjson(run_scenario(cfg));
    std::string b = to_ndjson(run_scenario(cfg));
    CHECK(a == b);

    cfg.seed = 8;
    std::string c = to_ndjson(run_scenario(cfg));
    CHECK(a != c);
}

TEST_CASE("value is conserved and contract invariants hold at every block") {
    ScenarioConfig cfg = tiny_config();
    cfg.n_affiliates = 3;
    cfg.victims_per_sample = 2;
    cfg.pay_probability = 0.5;
    cfg.seed = 11;

    Scenario s(cfg);
    const Wei supply = s.chain().total_supply();
    while (!s.finished()) {
        s.step_block();
        CHECK(s.chain().total_supply() == supply);
        CHECK(s.escrow_host().invariants_hold(s.contract_id()));
    }

    // Every split pays out exactly the ransom, floored share to the affiliate.
    Wei share = cfg.ransom_amount.mul_div(cfg.affiliate_share_bp, 10000);
    for (const auto& b : s.trace().blocks)
        for (const auto& r : b.receipts)
            for (const auto& e : r.events)
                if (e.kind == ledger::EventKind::RansomSplit) {
                    auto wei_attr = [&](const char* name) {
                        ByteReader br(as_span(e.attributes.at(name)));
                        return Wei(br.u128be());
                    };
                    Wei aff = wei_attr("affiliate_amount");
                    Wei auth = wei_attr("author_amount");
                    CHECK(aff == share);
                    CHECK(aff + auth == cfg.ransom_amount);
                }
}

TEST_CASE("when nobody pays, no secret ever appears and victims are stranded") {
    ScenarioConfig cfg = tiny_config();
    cfg.pay_probability = 0.0;
    Scenario s(cfg);
    s.run();

    CHECK(s.stats().victims_recovered == 0);
    CHECK(s.stats().victims_abandoned == 2);
    for (const auto& v : s.victims()) CHECK(v.phase == VictimPhase::Abandoned);

    const trace::Trace& t = s.trace();
    CHECK(count_events(t, ledger::EventKind::RansomPaid) == 0);
    CHECK(count_events(t, ledger::EventKind::RansomSplit) == 0);
    CHECK(count_events(t, ledger::EventKind::SampleSecretPublished) == 0);
    CHECK(count_events(t, ledger::EventKind::SampleKeyPublished) == 2);  // pks still go up
    CHECK(count_actions(t, "recovered") == 0);
    CHECK(count_actions(t, "abandoned") == 2);
    CHECK(s.chain().balance(s.contract_id()).is_zero());
}

TEST_CASE("the author may split before publishing the secret") {
    ScenarioConfig cfg = tiny_config();
    cfg.split_before_sk = true;
    Scenario s(cfg);
    s.run();
    CHECK(s.stats().victims_recovered == 2);

    // Within each response batch the split lands before the secret upload.
    for (const auto& b : s.trace().blocks) {
        std::optional<std::size_t> split_at, sk_at;
        for (std::size_t i = 0; i < b.receipts.size(); ++i) {
            if (b.receipts[i].function == ledger::fn::split_ransom && !split_at) split_at = i;
            if (b.receipts[i].function == ledger::fn::set_sample_sk && !sk_at) sk_at = i;
        }
        if (split_at && sk_at) CHECK(*split_at < *sk_at);
    }
}

TEST_CASE("a short payment is rejected on-chain and retried at full amount") {
    ScenarioConfig cfg = tiny_config();
    cfg.n_affiliates = 1;
    cfg.fault_wrong_amount_first_payment = true;
    Scenario s(cfg);
    s.run();

    CHECK(s.stats().victims_recovered == 1);
    const trace::Trace& t = s.trace();
    CHECK(count_actions(t, "submit_payment") == 2);
    CHECK(count_actions(t, "payment_rejected") == 1);
    CHECK(count_actions(t, "payment_confirmed") == 1);

    // The rejection names the on-chain reason.
    bool saw_reason = false;
    for (const auto& a : t.actions)
        if (a.action == "payment_rejected")
            saw_reason = a.outcome == to_string(ledger::RevertReason::WrongAmount);
    CHECK(saw_reason);

    // Exactly one reverted pay receipt, and the contract kept nothing.
    std::size_t reverted_pays = 0;
    for (const auto& b : t.blocks)
        for (const auto& r : b.receipts)
            if (r.function == ledger::fn::pay_ransom && !r.ok) ++reverted_pays;
    CHECK(reverted_pays == 1);
    CHECK(s.chain().balance(s.contract_id()).is_zero());
}

TEST_CASE("losing the payment race: public secret rescues only in clear mode") {
    ScenarioConfig cfg = tiny_config();
    cfg.n_affiliates = 1;
    cfg.victims_per_sample = 2;  // both victims race for one sample

    SUBCASE("clear payloads: the loser recovers from the public secret") {
        Scenario s(cfg);
        s.run();
        CHECK(s.stats().victims_total == 2);
        CHECK(s.stats().victims_recovered == 2);
        CHECK(count_events(s.trace(), ledger::EventKind::RansomPaid) == 1);
        // One payment lost the race with reason AlreadyPaid.
        std::size_t already_paid = 0;
        for (const auto& a : s.trace().actions)
            if (a.action == "payment_rejected" &&
                a.outcome == to_string(ledger::RevertReason::AlreadyPaid))
                ++already_paid;
        CHECK(already_paid == 1);
    }

    SUBCASE("sealed payloads: only the payer can use the published secret") {
        cfg.encrypt_onchain_payloads = true;
        Scenario s(cfg);
        s.run();
        CHECK(s.stats().victims_recovered == 1);
        CHECK(s.stats().victims_abandoned == 1);

        // The published secret is marked opaque in the event stream.
        bool saw_encrypted = false;
        for (const auto& b : s.trace().blocks)
            for (const auto& r : b.receipts)
                for (const auto& e : r.events)
                    if (e.kind == ledger::EventKind::SampleSecretPublished) {
                        auto it = e.attributes.find("encrypted");
                        if (it != e.attributes.end()) saw_encrypted = it->second == Bytes{1};
                    }
        CHECK(saw_encrypted);
    }
}

TEST_CASE("scenario construction rejects invalid configs up front") {
    ScenarioConfig cfg = tiny_config();
    cfg.pay_probability = 1.5;
    CHECK_THROWS_WITH_AS(Scenario{cfg}, doctest::Contains("pay_probability"),
                         Error);
    cfg = tiny_config();
    cfg.duration_blocks = 0;
    CHECK_THROWS_AS(Scenario{cfg}, Error);
}

TEST_CASE("store churn keeps pinned pages reachable eventually") {
    // Background mirrors churn, but the author's node and pinning keep the
    // campaign able to finish; victims only ever see transient outages.
    ScenarioConfig cfg = tiny_config();
    cfg.churn = caststore::ChurnParams{200.0, 50.0};
    cfg.duration_blocks = 30;
    cfg.seed = 3;
    Scenario s(cfg);
    s.run();
    CHECK(s.stats().victims_recovered == 2);
}
