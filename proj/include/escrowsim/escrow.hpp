#pragma once

#include <map>
#include <optional>
#include <vector>

#include "escrowsim/ledger.hpp"
#include "escrowsim/symcrypto.hpp"

namespace escrowsim::escrow {

using ledger::CallContext;
using ledger::CallResult;
using ledger::RevertReason;
using symcrypto::PublicKey;

using ContractId = Address;

/// Immutable after deployment.
struct EscrowConfig {
    Address author;  // the only address allowed to publish keys and split
    Wei ransom_amount;
    std::uint32_t affiliate_share_bp = 0;  // 0..10000
    bool encrypt_onchain_payloads = false;
};

struct AffiliateRecord {
    Address affiliate;
    std::vector<SampleId> sample_ids;  // in request order, unique
};

/// Per-sample lifecycle: pk -> paid -> (split, sk in either order); each
/// field transitions at most once.
struct KeyRecord {
    SampleId sample_id{};
    Address affiliate;
    std::optional<PublicKey> pk;
    std::optional<Bytes> sk_payload;  // 32-byte sk, or a sealed record when encrypted
    bool sk_encrypted = false;
    std::optional<Address> paid_by;
    Wei paid_amount;
    std::optional<PublicKey> recipient_pk;  // victim-supplied, encrypted mode only
    bool split_done = false;
};

struct EscrowState {
    EscrowConfig config;
    std::map<Address, AffiliateRecord> affiliates;
    std::vector<Address> affiliate_order;  // registration order
    std::map<SampleId, KeyRecord> keys;
    std::map<PublicKey, SampleId> pk_index;
    Wei escrow_balance;  // == sum of paid_amount over unsplit records
};

/// Read results carry the failure reason instead of throwing; reads are
/// routine polling operations for agents.
template <typename T>
struct ReadResult {
    std::optional<T> value;
    RevertReason reason = RevertReason::None;

    bool ok() const { return value.has_value(); }
    const T& operator*() const { return *value; }
    const T* operator->() const { return &*value; }

    static ReadResult okay(T v) { return ReadResult{std::move(v), RevertReason::None}; }
    static ReadResult fail(RevertReason r) { return ReadResult{std::nullopt, r}; }
};

struct StoredSecret {
    Bytes payload;
    bool encrypted = false;
};

/// Public view of one key record ("state is visible to anyone").
struct SampleView {
    SampleId sample_id{};
    Address affiliate;
    bool pk_set = false;
    bool paid = false;
    Wei paid_amount;
    bool split_done = false;
    bool sk_set = false;
};

/// The registration-and-payment contract as a deterministic state machine.
/// Hosts any number of independent contract instances; transactions reach it
/// through Ledger mining, reads are direct and free.
class EscrowHost : public ledger::ContractApi {
public:
    CallResult dispatch(const CallContext& ctx) override;

    /// Deterministic contract address for a deploy transaction, computable
    /// before the block is mined.
    static ContractId contract_address_for(const TxHash& deploy_tx);

    /// Argument encoders for the canonical contract-call layout.
    static Bytes encode_deploy_args(Wei ransom_amount, std::uint32_t affiliate_share_bp,
                                    bool encrypt_onchain_payloads);
    static Bytes encode_sample_arg(const SampleId& sample_id);
    static Bytes encode_set_pk_args(const SampleId& sample_id, const PublicKey& pk);
    static Bytes encode_pay_args(const SampleId& sample_id,
                                 const std::optional<PublicKey>& recipient_pk);
    static Bytes encode_set_sk_args(const SampleId& sample_id, const Bytes& payload);

    // Zero-gas reads.
    bool contract_exists(const ContractId& id) const { return contracts_.contains(id); }
    ReadResult<PublicKey> get_sample_pk(const ContractId& id, const SampleId& sample) const;
    ReadResult<StoredSecret> get_sample_sk(const ContractId& id, const SampleId& sample) const;
    ReadResult<SampleId> find_sample_by_pk(const ContractId& id, const PublicKey& pk) const;
    ReadResult<SampleView> sample_view(const ContractId& id, const SampleId& sample) const;
    bool is_registered(const ContractId& id, const Address& who) const;
    ReadResult<Wei> escrow_balance(const ContractId& id) const;
    const EscrowState* state(const ContractId& id) const;

    /// Escrow accounting invariant: balance equals the sum of unsplit paid
    /// amounts. Vacuously true for ids with no deployed instance. Used by
    /// tests after every block.
    bool invariants_hold(const ContractId& id) const;

private:
    CallResult do_deploy(const CallContext& ctx);
    CallResult do_register(EscrowState& st, const CallContext& ctx);
    CallResult do_request_key(EscrowState& st, const CallContext& ctx);
    CallResult do_set_pk(EscrowState& st, const CallContext& ctx);
    CallResult do_pay(EscrowState& st, const CallContext& ctx);
    CallResult do_split(EscrowState& st, const CallContext& ctx);
    CallResult do_set_sk(EscrowState& st, const CallContext& ctx);

    std::map<ContractId, EscrowState> contracts_;
};

}  // namespace escrowsim::escrow
