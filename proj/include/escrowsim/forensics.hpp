#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "escrowsim/bytes.hpp"
#include "escrowsim/ledger.hpp"
#include "escrowsim/trace.hpp"
#include "escrowsim/wei.hpp"

namespace escrowsim::forensics {

/// Roles are inferred purely structurally from who sent which call kind:
/// the deployer is the author, registration senders are affiliates, payment
/// senders are victims. No heuristics, no clustering.
enum class Role : std::uint8_t { Author, Affiliate, Victim, Contract, MinerSink, Other };

std::string_view to_string(Role r);

enum class EdgeKind : std::uint8_t { Transfer, Call, Payout, Fee };

std::string_view to_string(EdgeKind k);

/// One aggregated flow between two addresses. `label` is the called
/// function for Call edges, empty otherwise.
struct GraphEdge {
    Address from;
    Address to;
    EdgeKind kind = EdgeKind::Call;
    std::string label;
    Wei value{};
    std::uint64_t count = 0;
    std::vector<TxHash> txs;
};

/// Per-affiliate facts recovered from the public record alone.
struct AffiliateFacts {
    std::uint64_t registrations = 0;
    std::uint64_t samples = 0;   // key requests attributed to this affiliate
    std::uint64_t payments = 0;  // ransoms paid against those samples
    Wei earned{};                // sum of split payouts
};

/// Everything reconstructible from a trace: the address graph plus the
/// campaign tallies that the cost and revenue reports are computed from.
struct TransactionGraph {
    std::map<Address, Role> nodes;
    std::vector<GraphEdge> edges;  // aggregated by (from, to, kind, label)

    Address author{};
    std::optional<Address> contract;
    std::optional<Address> miner_sink;
    std::optional<TxHash> deploy_tx;

    std::uint64_t tx_count = 0;
    std::uint64_t registrations = 0;
    std::uint64_t key_requests = 0;
    std::uint64_t keys_published = 0;   // rho: one pk upload per distributed sample
    std::uint64_t secrets_published = 0;  // delta
    std::uint64_t payments = 0;
    std::uint64_t splits = 0;  // mu

    ledger::GasSchedule schedule;  // echoed from the trace meta
    /// Gas actually billed to the author for {deploy, set_pk, set_sk, split}
    /// calls, including reverted attempts. The cost report must match this
    /// exactly on clean traces.
    std::uint64_t author_gas_observed = 0;

    std::map<Address, AffiliateFacts> affiliate_facts;
    std::map<SampleId, Address> sample_to_affiliate;
    Wei author_earned{};
    Wei split_total{};

    /// First/last balance snapshots and per-sender fees, for the revenue
    /// cross-check against ledger deltas.
    std::map<Address, Wei> first_balance;
    std::map<Address, Wei> last_balance;
    std::map<Address, Wei> fees_paid;
};

struct CostLine {
    std::string actor;      // "Author", "Affiliate", "Victim"
    std::string operation;  // e.g. "Deployment", "Sample PK Upload"
    std::uint64_t count = 0;
    std::uint64_t gas_each = 0;
    std::uint64_t gas_total = 0;
};

/// The author's bill: deploy + set_pk·rho + set_sk·delta + split·mu, with
/// counterparty (affiliate/victim) gas reported as separate lines.
struct CostReport {
    std::uint64_t rho = 0;    // pk uploads
    std::uint64_t delta = 0;  // sk uploads
    std::uint64_t mu = 0;     // splits
    ledger::GasSchedule per_op_gas;
    std::uint64_t total_gas = 0;  // author-billed operations only
    Wei gas_price{};
    double fiat_rate = 0.0;  // currency per ether
    double total_fiat = 0.0;
    std::vector<CostLine> author_lines;
    std::vector<CostLine> counterparty_lines;
    std::uint64_t counterparty_gas = 0;
};

struct RevenueLine {
    Address affiliate{};
    std::uint64_t registrations = 0;
    std::uint64_t samples = 0;
    std::uint64_t payments = 0;
    Wei earned{};
};

struct RevenueReport {
    std::vector<RevenueLine> affiliates;  // sorted by address
    Wei author_earned{};
    Wei split_total{};  // == author_earned + sum of affiliate earnings
};

enum class FindingKind : std::uint8_t {
    NewAffiliate,     // AffiliateRegistered
    NewSample,        // SampleKeyRequested
    PaymentObserved,  // RansomPaid
    SecretReleased,   // SampleSecretPublished
};

std::string_view to_string(FindingKind k);

struct Finding {
    FindingKind kind = FindingKind::NewAffiliate;
    std::uint64_t block_number = 0;
    TxHash tx_hash{};
    std::string subject;  // affiliate address or sample id, hex
    std::string detail;
    bool payload_opaque = false;  // SecretReleased under encrypted delivery
};

/// Reconstructs the graph from a trace; the trace is the only input, so
/// anything the graph contains is derivable by any chain observer.
TransactionGraph build_graph(const trace::Trace& tr);

/// Requires a deployment in the graph (throws NoDeployment otherwise).
CostReport cost_report(const TransactionGraph& graph, Wei gas_price, double fiat_rate);

RevenueReport revenue_report(const TransactionGraph& graph);

std::vector<Finding> detect_milestones(const trace::Trace& tr);

/// Combined machine-readable report (graph summary, cost, revenue,
/// milestones) as a JSON document.
std::string report_json(const TransactionGraph& graph, const CostReport& cost,
                        const RevenueReport& revenue, const std::vector<Finding>& findings);

/// CSV exports. The cost table mirrors a conventional gas-cost table:
/// one row per schedule entry with Actor, Operation, Cost columns.
std::string cost_csv(const CostReport& report);
std::string revenue_csv(const RevenueReport& report);
std::string milestones_csv(const std::vector<Finding>& findings);

}  // namespace escrowsim::forensics
