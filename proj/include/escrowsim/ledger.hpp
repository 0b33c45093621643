#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "escrowsim/bytes.hpp"
#include "escrowsim/clock.hpp"
#include "escrowsim/rng.hpp"
#include "escrowsim/wei.hpp"

namespace escrowsim::ledger {

enum class EventKind : std::uint8_t {
    AffiliateRegistered,
    SampleKeyRequested,
    SampleKeyPublished,
    RansomPaid,
    RansomSplit,
    SampleSecretPublished,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(std::string_view s);

/// Why a transaction reverted. Shared vocabulary between the ledger (funds,
/// dispatch) and the escrow state machine.
enum class RevertReason : std::uint8_t {
    None,
    InsufficientFunds,
    UnknownContract,
    UnknownFunction,
    ValueNotAccepted,
    BadArguments,
    BadShare,
    BadAmount,
    AlreadyRegistered,
    NotRegistered,
    NotAuthor,
    UnknownSample,
    PkAlreadySet,
    PkNotSet,
    WrongAmount,
    AlreadyPaid,
    NotPaid,
    AlreadySplit,
    SkAlreadySet,
    SkNotSet,
};

std::string_view to_string(RevertReason r);

/// Append-only, globally ordered by (block_number, intra-block index),
/// readable by every observer.
struct Event {
    std::uint64_t block_number = 0;
    std::uint32_t index = 0;  // position within the block's event list
    TxHash tx_hash{};
    EventKind kind{};
    std::map<std::string, Bytes> attributes;
};

struct EventPos {
    std::uint64_t block_number = 0;
    std::uint32_t index = 0;
    auto operator<=>(const EventPos&) const = default;
};

struct Transfer {
    Address to;
};

struct ContractCall {
    Address contract;  // zero address targets the deployment entry point
    std::string function;
    Bytes args;
};

struct Transaction {
    Address sender;
    std::uint64_t nonce = 0;
    std::variant<Transfer, ContractCall> target;
    Wei value;
    Wei gas_price;

    /// Canonical encoding (bit-exact; the source of TxHash):
    ///   sender (20 raw) | nonce u64be | target tag u8 (0 transfer, 1 call)
    ///   | transfer: to (20 raw)
    ///   | call: contract (20 raw), function (4-byte-be length + ascii),
    ///           args (4-byte-be length + bytes)
    ///   | value u128be (16) | gas_price u128be (16)
    Bytes encode() const;
    TxHash hash() const;
};

enum class TxStatus : std::uint8_t { Succeeded, Reverted };

struct Receipt {
    TxHash tx_hash{};
    TxStatus status = TxStatus::Reverted;
    RevertReason reason = RevertReason::None;
    std::uint64_t gas_used = 0;  // charged in both statuses
    std::vector<Event> events;   // empty when reverted
};

struct Block {
    std::uint64_t number = 0;
    double timestamp = 0.0;  // simulated seconds, strictly increasing
    Hash32 parent{};
    std::vector<Receipt> receipts;

    Hash32 hash() const;
};

/// Flat per-function gas amounts (no opcode metering); reads cost zero.
struct GasSchedule {
    std::uint64_t deploy = 0;
    std::uint64_t register_affiliate = 0;
    std::uint64_t request_key = 0;
    std::uint64_t set_pk = 0;
    std::uint64_t set_sk = 0;
    std::uint64_t pay = 0;
    std::uint64_t split = 0;

    /// The measured per-function costs of the reference contract.
    static GasSchedule defaults() {
        return GasSchedule{
            .deploy = 505822,
            .register_affiliate = 22796,
            .request_key = 22796,  // no measured row; mirrors registration
            .set_pk = 29881,
            .set_sk = 22144,
            .pay = 28326,
            .split = 37515,
        };
    }

    std::uint64_t for_function(std::string_view fn) const;
    bool all_positive() const {
        return deploy > 0 && register_affiliate > 0 && request_key > 0 && set_pk > 0 &&
               set_sk > 0 && pay > 0 && split > 0;
    }

    bool operator==(const GasSchedule&) const = default;
};

// Contract function names as they appear in transactions and gas lookups.
namespace fn {
inline constexpr std::string_view deploy = "deploy";
inline constexpr std::string_view register_affiliate = "register_affiliate";
inline constexpr std::string_view request_sample_key = "request_sample_key";
inline constexpr std::string_view set_sample_pk = "set_sample_pk";
inline constexpr std::string_view set_sample_sk = "set_sample_sk";
inline constexpr std::string_view pay_ransom = "pay_ransom";
inline constexpr std::string_view split_ransom = "split_ransom";
}  // namespace fn

/// One event the contract wants emitted if and only if the call succeeds.
struct PendingEvent {
    EventKind kind{};
    std::map<std::string, Bytes> attributes;
};

/// Payment out of the contract's ledger account (ransom split legs).
struct Payout {
    Address to;
    Wei amount;
};

struct CallContext {
    Address sender;
    TxHash tx_hash{};
    Address contract;
    std::string_view function;
    const Bytes& args;
    Wei value;
    std::uint64_t block_number = 0;
};

struct CallResult {
    bool ok = false;
    RevertReason reason = RevertReason::None;
    std::vector<PendingEvent> events;
    std::vector<Payout> payouts;
    std::optional<Address> created_contract;

    static CallResult revert(RevertReason r) {
        CallResult res;
        res.reason = r;
        return res;
    }
    static CallResult success() {
        CallResult res;
        res.ok = true;
        return res;
    }
};

/// The contract side of transaction application. Implemented by the escrow
/// module; the ledger stays ignorant of contract semantics.
class ContractApi {
public:
    virtual ~ContractApi() = default;
    virtual CallResult dispatch(const CallContext& ctx) = 0;
};

/// Minimal account-based ledger: queued transactions, block mining at a
/// configurable mean latency, flat gas metering, and an append-only event
/// log. Single-threaded; mutated only through submit_tx / mine_next_block.
class Ledger {
public:
    Ledger(GasSchedule schedule, double block_mean_s, Rng rng, ContractApi* contracts);

    /// Creates an account at the digest-derived address
    /// first20(digest("addr" || seed)) with the given balance and nonce 0.
    Address create_account(std::span<const std::uint8_t> seed, Wei initial_balance);
    Address create_account(std::string_view seed, Wei initial_balance);

    /// Queues a transaction for the next block. Nonces must be consecutive
    /// per sender across queued + applied transactions.
    TxHash submit_tx(const Transaction& tx);

    /// Applies every queued transaction in submission order, charges fees to
    /// the miner sink, and advances the clock by an exponential draw.
    const Block& mine_next_block(ScenarioClock& clock);

    /// All events strictly after `after` (from the start when absent),
    /// optionally restricted to the given kinds. Read-only, zero gas.
    std::vector<Event> events_since(std::optional<EventPos> after,
                                    const std::set<EventKind>* filter = nullptr) const;

    Wei balance(const Address& addr) const;
    bool account_exists(const Address& addr) const { return accounts_.contains(addr); }
    std::uint64_t next_nonce(const Address& addr) const;

    /// Invariant anchor: equals the sum of initial balances at every height.
    Wei total_supply() const;

    Address miner_sink() const { return miner_sink_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    std::size_t queued_count() const { return queue_.size(); }
    const std::vector<Event>& event_log() const { return events_; }

    const Transaction& transaction(const TxHash& h) const;
    const Receipt* receipt_for(const TxHash& h) const;

    static Address address_from_seed(std::span<const std::uint8_t> seed);

private:
    struct Account {
        Wei balance;
        std::uint64_t nonce = 0;  // next expected among applied txs
    };

    std::uint64_t scheduled_gas(const Transaction& tx) const;
    void move_balance(const Address& from, const Address& to, Wei amount);
    Receipt apply_tx(const Transaction& tx, std::uint64_t block_number);

    GasSchedule schedule_;
    double block_mean_s_;
    Rng rng_;
    ContractApi* contracts_;

    std::map<Address, Account> accounts_;
    std::map<Address, std::uint64_t> queued_per_sender_;
    std::deque<Transaction> queue_;
    std::vector<Block> blocks_;
    std::vector<Event> events_;
    std::map<TxHash, Transaction> txs_;
    std::map<TxHash, std::pair<std::uint64_t, std::size_t>> receipt_index_;  // hash -> (block, pos)
    Address miner_sink_;
};

}  // namespace escrowsim::ledger
