#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "escrowsim/caststore.hpp"
#include "escrowsim/clock.hpp"
#include "escrowsim/escrow.hpp"
#include "escrowsim/ledger.hpp"
#include "escrowsim/symcrypto.hpp"
#include "escrowsim/trace.hpp"

namespace escrowsim::agents {

/// Everything a run depends on. All randomness flows from `seed`; there is
/// no wall-clock or OS entropy anywhere.
struct ScenarioConfig {
    std::uint64_t seed = 42;
    std::uint32_t n_affiliates = 100;
    std::uint32_t samples_per_affiliate = 1;
    std::uint32_t victims_per_sample = 1;
    double pay_probability = 1.0;
    Wei ransom_amount = ether(1);
    std::uint32_t affiliate_share_bp = 3000;
    Wei gas_price = gwei(1);
    ledger::GasSchedule gas_schedule = ledger::GasSchedule::defaults();
    double block_mean_s = 13.0;
    std::optional<caststore::ChurnParams> churn;  // background store nodes
    std::uint32_t n_store_nodes = 2;
    std::uint32_t author_poll_blocks = 1;
    bool encrypt_onchain_payloads = false;
    std::uint32_t duration_blocks = 40;
    bool split_before_sk = false;

    // Test support, not part of the JSON schema: each victim's first payment
    // attempt is 1 wei short, exercising the WrongAmount retry path.
    bool fault_wrong_amount_first_payment = false;
};

struct ConfigIssue {
    std::string field;
    std::string message;
};

struct ConfigLoadResult {
    std::optional<ScenarioConfig> config;
    std::vector<ConfigIssue> errors;   // empty iff config is present
    std::vector<std::string> notices;  // e.g. defaulted gas_schedule
};

ConfigLoadResult parse_config_text(const std::string& text);
ConfigLoadResult load_config_file(const std::string& path);

/// Range/sanity checks on an already-built config (also applied by the
/// Scenario constructor, which throws ConfigInvalid on any issue).
std::vector<ConfigIssue> validate_config(const ScenarioConfig& cfg);

/// Canonical JSON for the effective config (sorted keys, compact); its
/// digest identifies a run in the manifest.
std::string canonical_config_json(const ScenarioConfig& cfg);
Hash32 config_digest(const ScenarioConfig& cfg);

enum class VictimPhase : std::uint8_t { Dormant, Infected, Paid, Recovered, Abandoned };

std::string_view to_string(VictimPhase p);

struct VictimState {
    Address address;
    caststore::NodeId node;
    std::size_t victim_index = 0;
    std::size_t sample_slot = 0;  // global sample index this victim is bound to
    VictimPhase phase = VictimPhase::Dormant;
    bool will_pay = false;  // one Bernoulli draw at infection

    symcrypto::SymKey key_temp{};
    symcrypto::SymCiphertext locked_asset;
    symcrypto::AsymCiphertext sealed_key;
    Bytes asset;  // ground truth, asserted equal on recovery

    std::optional<symcrypto::SecretKey> eph_sk;  // encrypted-delivery mode
    std::optional<symcrypto::PublicKey> eph_pk;

    std::optional<TxHash> pending_payment;
    bool wait_for_public_sk = false;  // payment lost the race (AlreadyPaid)
    std::uint32_t pay_attempts = 0;
    double next_retry_s = 0.0;
    double backoff_s = 60.0;
};

struct AffiliateState {
    Address address;
    caststore::NodeId node;
    std::size_t index = 0;
    bool registered = false;
    std::vector<SampleId> samples;
};

/// The author's C2 responder: reacts to contract events, does nothing at any
/// other time. Key material is re-derived from sample ids, never stored.
class AuthorResponder {
public:
    AuthorResponder(Address author, escrow::ContractId contract, Wei gas_price,
                    bool encrypt_onchain_payloads, bool split_before_sk)
        : author_(author),
          contract_(contract),
          gas_price_(gas_price),
          encrypt_(encrypt_onchain_payloads),
          split_before_sk_(split_before_sk) {}

    /// Builds the responses to a batch of new events: set_sample_pk for each
    /// key request, set_sample_sk + split_ransom for each payment. Nonces
    /// are assigned consecutively from first_nonce.
    std::vector<ledger::Transaction> respond(const std::vector<ledger::Event>& events,
                                             std::uint64_t first_nonce) const;

    std::optional<ledger::EventPos> cursor;

private:
    Address author_;
    escrow::ContractId contract_;
    Wei gas_price_;
    bool encrypt_;
    bool split_before_sk_;
};

struct RunStats {
    std::uint32_t victims_total = 0;
    std::uint32_t victims_recovered = 0;
    std::uint32_t victims_abandoned = 0;
    std::uint64_t author_polls = 0;
    std::uint64_t author_active_polls = 0;  // polls that issued at least one tx
    double author_busy_s = 0.0;             // nominal 1 s per active poll
    double sim_duration_s = 0.0;
    std::uint64_t blocks_mined = 0;
};

/// One simulated campaign: a discrete-event loop driving the author
/// responder, affiliates, and victims against the ledger, escrow, and
/// content store. Deterministic in its config; instances share nothing.
class Scenario {
public:
    explicit Scenario(ScenarioConfig cfg);
    ~Scenario();

    Scenario(const Scenario&) = delete;
    Scenario& operator=(const Scenario&) = delete;

    /// One loop iteration: author poll, affiliate and victim steps, then one
    /// mined block. After the final block the run is finalized.
    void step_block();
    void run();
    bool finished() const;

    const trace::Trace& trace() const;
    trace::Trace take_trace();
    const RunStats& stats() const;

    ledger::Ledger& chain();
    escrow::EscrowHost& escrow_host();
    caststore::ContentStore& store();
    ScenarioClock& clock();

    Address author_address() const;
    escrow::ContractId contract_id() const;
    caststore::NodeId author_node() const;
    ContentId registration_page() const;
    ContentId payment_page() const;
    const std::vector<VictimState>& victims() const;
    const std::vector<AffiliateState>& affiliates() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Runs a full scenario and returns its trace.
trace::Trace run_scenario(const ScenarioConfig& cfg);

}  // namespace escrowsim::agents
