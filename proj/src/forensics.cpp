#include "escrowsim/forensics.hpp"

#include <cstring>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "escrowsim/error.hpp"
#include "escrowsim/escrow.hpp"

namespace escrowsim::forensics {

using nlohmann::json;

std::string_view to_string(Role r) {
    switch (r) {
        case Role::Author: return "author";
        case Role::Affiliate: return "affiliate";
        case Role::Victim: return "victim";
        case Role::Contract: return "contract";
        case Role::MinerSink: return "miner-sink";
        case Role::Other: return "other";
    }
    return "other";
}

std::string_view to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Transfer: return "transfer";
        case EdgeKind::Call: return "call";
        case EdgeKind::Payout: return "payout";
        case EdgeKind::Fee: return "fee";
    }
    return "call";
}

std::string_view to_string(FindingKind k) {
    switch (k) {
        case FindingKind::NewAffiliate: return "new-affiliate";
        case FindingKind::NewSample: return "new-sample";
        case FindingKind::PaymentObserved: return "payment-observed";
        case FindingKind::SecretReleased: return "secret-released";
    }
    return "new-affiliate";
}

namespace {

std::optional<Address> attr_address(const std::map<std::string, Bytes>& attrs, const char* key) {
    auto it = attrs.find(key);
    if (it == attrs.end() || it->second.size() != 20) return std::nullopt;
    Address a;
    std::memcpy(a.bytes.data(), it->second.data(), a.bytes.size());
    return a;
}

std::optional<Hash32> attr_hash(const std::map<std::string, Bytes>& attrs, const char* key) {
    auto it = attrs.find(key);
    if (it == attrs.end() || it->second.size() != 32) return std::nullopt;
    Hash32 h;
    std::memcpy(h.data(), it->second.data(), h.size());
    return h;
}

std::optional<Wei> attr_wei(const std::map<std::string, Bytes>& attrs, const char* key) {
    auto it = attrs.find(key);
    if (it == attrs.end() || it->second.size() != 16) return std::nullopt;
    ByteReader r(as_span(it->second));
    return Wei(r.u128be());
}

bool attr_flag(const std::map<std::string, Bytes>& attrs, const char* key) {
    auto it = attrs.find(key);
    return it != attrs.end() && it->second.size() == 1 && it->second[0] == 1;
}

/// Aggregation key for graph edges.
using EdgeKey = std::tuple<Address, Address, std::uint8_t, std::string>;

struct EdgeAccumulator {
    std::map<EdgeKey, GraphEdge> edges;

    void add(const Address& from, const Address& to, EdgeKind kind, std::string label,
             Wei value, const TxHash* tx) {
        EdgeKey key{from, to, static_cast<std::uint8_t>(kind), label};
        auto [it, inserted] = edges.try_emplace(key);
        GraphEdge& e = it->second;
        if (inserted) {
            e.from = from;
            e.to = to;
            e.kind = kind;
            e.label = std::move(label);
        }
        e.value += value;
        e.count += 1;
        if (tx) e.txs.push_back(*tx);
    }

    std::vector<GraphEdge> take() {
        std::vector<GraphEdge> out;
        out.reserve(edges.size());
        for (auto& [k, e] : edges) out.push_back(std::move(e));
        return out;
    }
};

void assign_role(std::map<Address, Role>& nodes, const Address& addr, Role role) {
    // Lower enum value = stronger claim; never downgrade an assignment.
    auto [it, inserted] = nodes.try_emplace(addr, role);
    if (!inserted && static_cast<int>(role) < static_cast<int>(it->second)) it->second = role;
}

bool is_author_op(std::string_view fn) {
    return fn == ledger::fn::deploy || fn == ledger::fn::set_sample_pk ||
           fn == ledger::fn::set_sample_sk || fn == ledger::fn::split_ransom;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

json wei_json(Wei w) {
    return w.to_string();
}

}  // namespace

TransactionGraph build_graph(const trace::Trace& tr) {
    TransactionGraph g;
    g.schedule = tr.meta.gas_schedule;
    g.miner_sink = tr.meta.miner_sink;

    // Pass 1: the deployment identifies the author; the contract address
    // follows from the public derivation rule over the deploy tx hash.
    for (const auto& blk : tr.blocks) {
        for (const auto& r : blk.receipts) {
            if (r.is_contract_call && r.function == ledger::fn::deploy && r.ok) {
                g.author = r.sender;
                g.deploy_tx = r.tx_hash;
                g.contract = escrow::EscrowHost::contract_address_for(r.tx_hash);
                break;
            }
        }
        if (g.deploy_tx) break;
    }

    EdgeAccumulator acc;
    if (g.deploy_tx) {
        assign_role(g.nodes, g.author, Role::Author);
        assign_role(g.nodes, *g.contract, Role::Contract);
    }
    assign_role(g.nodes, tr.meta.miner_sink, Role::MinerSink);

    for (const auto& blk : tr.blocks) {
        for (const auto& r : blk.receipts) {
            ++g.tx_count;

            Wei fee = r.gas_price.times(r.gas_used);
            g.fees_paid[r.sender] += fee;
            if (!fee.is_zero())
                acc.add(r.sender, tr.meta.miner_sink, EdgeKind::Fee, "", fee, &r.tx_hash);

            if (!r.is_contract_call) {
                assign_role(g.nodes, r.sender, Role::Other);
                assign_role(g.nodes, r.to, Role::Other);
                acc.add(r.sender, r.to, EdgeKind::Transfer, "", r.ok ? r.value : Wei::zero(),
                        &r.tx_hash);
                continue;
            }

            // The deploy call targets the zero address; attribute its edge
            // to the contract it created.
            Address callee = r.to;
            if (r.function == ledger::fn::deploy && g.contract &&
                escrow::EscrowHost::contract_address_for(r.tx_hash) == *g.contract)
                callee = *g.contract;
            acc.add(r.sender, callee, EdgeKind::Call, r.function,
                    r.ok ? r.value : Wei::zero(), &r.tx_hash);

            // Structural roles: who sends which call kind, attempts
            // included (a rejected payment is still a victim acting).
            if (r.function == ledger::fn::register_affiliate ||
                r.function == ledger::fn::request_sample_key)
                assign_role(g.nodes, r.sender, Role::Affiliate);
            else if (r.function == ledger::fn::pay_ransom)
                assign_role(g.nodes, r.sender, Role::Victim);
            else
                assign_role(g.nodes, r.sender, Role::Other);

            if (g.deploy_tx && r.sender == g.author && is_author_op(r.function))
                g.author_gas_observed += r.gas_used;

            if (!r.ok) continue;

            for (const auto& ev : r.events) {
                switch (ev.kind) {
                    case ledger::EventKind::AffiliateRegistered: {
                        ++g.registrations;
                        if (auto a = attr_address(ev.attributes, "affiliate"))
                            ++g.affiliate_facts[*a].registrations;
                        break;
                    }
                    case ledger::EventKind::SampleKeyRequested: {
                        ++g.key_requests;
                        auto sid = attr_hash(ev.attributes, "sample_id");
                        auto a = attr_address(ev.attributes, "affiliate");
                        if (sid && a) {
                            g.sample_to_affiliate[*sid] = *a;
                            ++g.affiliate_facts[*a].samples;
                        }
                        break;
                    }
                    case ledger::EventKind::SampleKeyPublished:
                        ++g.keys_published;
                        break;
                    case ledger::EventKind::RansomPaid: {
                        ++g.payments;
                        auto sid = attr_hash(ev.attributes, "sample_id");
                        if (sid) {
                            auto owner = g.sample_to_affiliate.find(*sid);
                            if (owner != g.sample_to_affiliate.end())
                                ++g.affiliate_facts[owner->second].payments;
                        }
                        break;
                    }
                    case ledger::EventKind::RansomSplit: {
                        ++g.splits;
                        auto a = attr_address(ev.attributes, "affiliate");
                        auto affiliate_amount = attr_wei(ev.attributes, "affiliate_amount");
                        auto author_amount = attr_wei(ev.attributes, "author_amount");
                        if (a && affiliate_amount && author_amount && g.contract) {
                            g.affiliate_facts[*a].earned += *affiliate_amount;
                            g.author_earned += *author_amount;
                            g.split_total += *affiliate_amount + *author_amount;
                            acc.add(*g.contract, *a, EdgeKind::Payout, "split",
                                    *affiliate_amount, &r.tx_hash);
                            acc.add(*g.contract, g.author, EdgeKind::Payout, "split",
                                    *author_amount, &r.tx_hash);
                        }
                        break;
                    }
                    case ledger::EventKind::SampleSecretPublished:
                        ++g.secrets_published;
                        break;
                }
            }
        }
    }

    for (const auto& rec : tr.accounts) {
        g.first_balance.try_emplace(rec.address, rec.balance);
        g.last_balance[rec.address] = rec.balance;
    }

    g.edges = acc.take();
    return g;
}

CostReport cost_report(const TransactionGraph& graph, Wei gas_price, double fiat_rate) {
    if (!graph.deploy_tx)
        throw Error(Errc::NoDeployment, "trace contains no successful deployment");

    const ledger::GasSchedule& s = graph.schedule;
    CostReport rep;
    rep.rho = graph.keys_published;
    rep.delta = graph.secrets_published;
    rep.mu = graph.splits;
    rep.per_op_gas = s;
    rep.gas_price = gas_price;
    rep.fiat_rate = fiat_rate;

    rep.author_lines = {
        {"Author", "Deployment", 1, s.deploy, s.deploy},
        {"Author", "Sample PK Upload", rep.rho, s.set_pk, s.set_pk * rep.rho},
        {"Author", "Sample SK Upload", rep.delta, s.set_sk, s.set_sk * rep.delta},
        {"Author", "Ransom Split", rep.mu, s.split, s.split * rep.mu},
    };
    for (const CostLine& l : rep.author_lines) rep.total_gas += l.gas_total;

    rep.counterparty_lines = {
        {"Affiliate", "Affiliate Registration", graph.registrations, s.register_affiliate,
         s.register_affiliate * graph.registrations},
        {"Affiliate", "Sample Key Request", graph.key_requests, s.request_key,
         s.request_key * graph.key_requests},
        {"Victim", "Ransom Payment", graph.payments, s.pay, s.pay * graph.payments},
    };
    for (const CostLine& l : rep.counterparty_lines) rep.counterparty_gas += l.gas_total;

    // fiat = gas * price[wei] / 10^18 [ether] * rate[currency/ether]
    rep.total_fiat = static_cast<double>(rep.total_gas) *
                     (static_cast<double>(gas_price.value) / 1e18) * fiat_rate;
    return rep;
}

RevenueReport revenue_report(const TransactionGraph& graph) {
    RevenueReport rep;
    for (const auto& [addr, facts] : graph.affiliate_facts) {
        RevenueLine line;
        line.affiliate = addr;
        line.registrations = facts.registrations;
        line.samples = facts.samples;
        line.payments = facts.payments;
        line.earned = facts.earned;
        rep.affiliates.push_back(std::move(line));
    }
    rep.author_earned = graph.author_earned;
    rep.split_total = graph.split_total;
    return rep;
}

std::vector<Finding> detect_milestones(const trace::Trace& tr) {
    std::vector<Finding> out;
    for (const auto& blk : tr.blocks) {
        for (const auto& r : blk.receipts) {
            if (!r.ok) continue;
            for (const auto& ev : r.events) {
                Finding f;
                f.block_number = blk.number;
                f.tx_hash = r.tx_hash;
                switch (ev.kind) {
                    case ledger::EventKind::AffiliateRegistered: {
                        f.kind = FindingKind::NewAffiliate;
                        auto a = attr_address(ev.attributes, "affiliate");
                        f.subject = a ? a->hex() : "";
                        f.detail = "affiliate registered";
                        break;
                    }
                    case ledger::EventKind::SampleKeyRequested: {
                        f.kind = FindingKind::NewSample;
                        auto sid = attr_hash(ev.attributes, "sample_id");
                        auto a = attr_address(ev.attributes, "affiliate");
                        f.subject = sid ? hash_hex(*sid) : "";
                        f.detail = "sample key requested by " + (a ? a->hex() : "unknown");
                        break;
                    }
                    case ledger::EventKind::RansomPaid: {
                        f.kind = FindingKind::PaymentObserved;
                        auto sid = attr_hash(ev.attributes, "sample_id");
                        auto amount = attr_wei(ev.attributes, "amount");
                        auto payer = attr_address(ev.attributes, "payer");
                        f.subject = sid ? hash_hex(*sid) : "";
                        f.detail = "payment of " + (amount ? amount->to_string() : "?") +
                                   " wei from " + (payer ? payer->hex() : "unknown");
                        break;
                    }
                    case ledger::EventKind::SampleSecretPublished: {
                        f.kind = FindingKind::SecretReleased;
                        auto sid = attr_hash(ev.attributes, "sample_id");
                        f.subject = sid ? hash_hex(*sid) : "";
                        f.payload_opaque = attr_flag(ev.attributes, "encrypted");
                        auto payload = ev.attributes.find("payload");
                        std::size_t n =
                            payload == ev.attributes.end() ? 0 : payload->second.size();
                        f.detail = "secret payload of " + std::to_string(n) + " bytes" +
                                   (f.payload_opaque ? " (sealed to a recipient key)" : "");
                        break;
                    }
                    default:
                        continue;  // pk uploads and splits are not milestones
                }
                out.push_back(std::move(f));
            }
        }
    }
    return out;
}

std::string report_json(const TransactionGraph& graph, const CostReport& cost,
                        const RevenueReport& revenue, const std::vector<Finding>& findings) {
    json nodes = json::object();
    for (const auto& [addr, role] : graph.nodes) nodes[addr.hex()] = to_string(role);

    json edges = json::array();
    for (const auto& e : graph.edges) {
        edges.push_back(json{{"from", e.from.hex()},
                             {"to", e.to.hex()},
                             {"kind", to_string(e.kind)},
                             {"label", e.label},
                             {"value", wei_json(e.value)},
                             {"count", e.count}});
    }

    auto lines_json = [](const std::vector<CostLine>& lines) {
        json arr = json::array();
        for (const auto& l : lines)
            arr.push_back(json{{"actor", l.actor},
                               {"operation", l.operation},
                               {"count", l.count},
                               {"gas_each", l.gas_each},
                               {"gas_total", l.gas_total}});
        return arr;
    };

    json affiliates = json::array();
    for (const auto& a : revenue.affiliates)
        affiliates.push_back(json{{"affiliate", a.affiliate.hex()},
                                  {"registrations", a.registrations},
                                  {"samples", a.samples},
                                  {"payments", a.payments},
                                  {"earned", wei_json(a.earned)}});

    json milestones = json::array();
    for (const auto& f : findings)
        milestones.push_back(json{{"kind", to_string(f.kind)},
                                  {"block", f.block_number},
                                  {"tx", hash_hex(f.tx_hash)},
                                  {"subject", f.subject},
                                  {"detail", f.detail},
                                  {"payload_opaque", f.payload_opaque}});

    json doc{
        {"graph",
         {{"author", graph.author.hex()},
          {"contract", graph.contract ? json(graph.contract->hex()) : json()},
          {"miner_sink", graph.miner_sink ? json(graph.miner_sink->hex()) : json()},
          {"tx_count", graph.tx_count},
          {"registrations", graph.registrations},
          {"key_requests", graph.key_requests},
          {"keys_published", graph.keys_published},
          {"secrets_published", graph.secrets_published},
          {"payments", graph.payments},
          {"splits", graph.splits},
          {"author_gas_observed", graph.author_gas_observed},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}}},
        {"cost",
         {{"rho", cost.rho},
          {"delta", cost.delta},
          {"mu", cost.mu},
          {"total_gas", cost.total_gas},
          {"gas_price", wei_json(cost.gas_price)},
          {"fiat_rate", cost.fiat_rate},
          {"total_fiat", cost.total_fiat},
          {"author_lines", lines_json(cost.author_lines)},
          {"counterparty_lines", lines_json(cost.counterparty_lines)},
          {"counterparty_gas", cost.counterparty_gas}}},
        {"revenue",
         {{"affiliates", std::move(affiliates)},
          {"author_earned", wei_json(revenue.author_earned)},
          {"split_total", wei_json(revenue.split_total)}}},
        {"milestones", std::move(milestones)},
    };
    return doc.dump(2) + "\n";
}

std::string cost_csv(const CostReport& report) {
    std::ostringstream out;
    out << "Actor,Operation,Cost\n";
    for (const auto& l : report.author_lines)
        out << csv_field(l.actor) << ',' << csv_field(l.operation) << ',' << l.gas_each << '\n';
    for (const auto& l : report.counterparty_lines)
        out << csv_field(l.actor) << ',' << csv_field(l.operation) << ',' << l.gas_each << '\n';
    return out.str();
}

std::string revenue_csv(const RevenueReport& report) {
    std::ostringstream out;
    out << "Affiliate,Registrations,Samples,Payments,EarnedWei\n";
    for (const auto& a : report.affiliates)
        out << a.affiliate.hex() << ',' << a.registrations << ',' << a.samples << ','
            << a.payments << ',' << a.earned.to_string() << '\n';
    return out.str();
}

std::string milestones_csv(const std::vector<Finding>& findings) {
    std::ostringstream out;
    out << "Kind,Block,TxHash,Subject,Detail,PayloadOpaque\n";
    for (const auto& f : findings)
        out << to_string(f.kind) << ',' << f.block_number << ',' << hash_hex(f.tx_hash) << ','
            << csv_field(f.subject) << ',' << csv_field(f.detail) << ','
            << (f.payload_opaque ? "true" : "false") << '\n';
    return out.str();
}

}  // namespace escrowsim::forensics
