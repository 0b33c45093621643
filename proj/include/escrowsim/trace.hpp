#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "escrowsim/ledger.hpp"

namespace escrowsim::trace {

/// Scenario-wide parameters echoed into the trace so reports can be computed
/// from the file alone.
struct TraceMeta {
    std::string tool_version;
    std::uint64_t seed = 0;
    Hash32 config_digest{};
    Wei gas_price;
    Wei ransom_amount;
    std::uint32_t affiliate_share_bp = 0;
    bool encrypt_onchain_payloads = false;
    ledger::GasSchedule gas_schedule;
    Address miner_sink;  // chain config: where fees accrue
};

/// Balance snapshot for a named account: written at creation (the
/// conservation baseline) and again at run end (for delta accounting).
struct AccountRecord {
    double sim_time = 0.0;
    std::string actor;
    Address address;
    Wei balance;
};

/// One agent-visible action (tx submission, store operation, phase change).
struct ActionRecord {
    double sim_time = 0.0;
    std::string actor;
    std::string action;
    std::optional<TxHash> tx_hash;
    std::optional<ledger::EventKind> event_kind;
    std::string outcome;
    std::map<std::string, std::string> extra;  // content_id, sample_id, ... (hex)
};

struct EventRecord {
    ledger::EventKind kind{};
    std::map<std::string, Bytes> attributes;
};

struct ReceiptRecord {
    TxHash tx_hash{};
    Address sender;
    std::uint64_t nonce = 0;
    bool is_contract_call = false;
    Address to;  // transfer target or contract id
    std::string function;
    Bytes args;
    Wei value;
    Wei gas_price;
    std::uint64_t gas_used = 0;
    bool ok = false;
    std::string revert_reason;
    std::vector<EventRecord> events;
};

struct BlockRecord {
    std::uint64_t number = 0;
    double timestamp = 0.0;
    Hash32 parent{};
    std::vector<ReceiptRecord> receipts;
};

/// The append-only record of one scenario run; the sole input to forensics.
/// `order` preserves the original interleaving of the NDJSON stream.
struct Trace {
    TraceMeta meta;
    std::vector<AccountRecord> accounts;
    std::vector<ActionRecord> actions;
    std::vector<BlockRecord> blocks;

    enum class RecordType : std::uint8_t { Account, Action, Block };
    std::vector<std::pair<RecordType, std::size_t>> order;

    void add_account(AccountRecord r);
    void add_action(ActionRecord r);
    void add_block(BlockRecord r);
};

/// Serializes as NDJSON: one meta line, then records in original order.
/// Deterministic byte-for-byte for a given trace.
void write_ndjson(const Trace& t, std::ostream& out);
std::string to_ndjson(const Trace& t);

/// Parses a trace produced by write_ndjson. Throws Errc::MalformedTrace with
/// a 1-based line number on any defect, including truncation.
Trace parse_ndjson(std::istream& in);
Trace parse_ndjson_string(const std::string& text);
Trace load_ndjson_file(const std::string& path);

}  // namespace escrowsim::trace
