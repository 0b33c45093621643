#include "escrowsim/trace.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "escrowsim/digest.hpp"

namespace escrowsim::trace {

using nlohmann::json;

void Trace::add_account(AccountRecord r) {
    order.emplace_back(RecordType::Account, accounts.size());
    accounts.push_back(std::move(r));
}

void Trace::add_action(ActionRecord r) {
    order.emplace_back(RecordType::Action, actions.size());
    actions.push_back(std::move(r));
}

void Trace::add_block(BlockRecord r) {
    order.emplace_back(RecordType::Block, blocks.size());
    blocks.push_back(std::move(r));
}

namespace {

json schedule_to_json(const ledger::GasSchedule& g) {
    return json{
        {"deploy", g.deploy},   {"register", g.register_affiliate},
        {"request_key", g.request_key},
        {"set_pk", g.set_pk},   {"set_sk", g.set_sk},
        {"pay", g.pay},         {"split", g.split},
    };
}

ledger::GasSchedule schedule_from_json(const json& j) {
    ledger::GasSchedule g;
    g.deploy = j.at("deploy").get<std::uint64_t>();
    g.register_affiliate = j.at("register").get<std::uint64_t>();
    g.request_key = j.at("request_key").get<std::uint64_t>();
    g.set_pk = j.at("set_pk").get<std::uint64_t>();
    g.set_sk = j.at("set_sk").get<std::uint64_t>();
    g.pay = j.at("pay").get<std::uint64_t>();
    g.split = j.at("split").get<std::uint64_t>();
    return g;
}

json meta_to_json(const TraceMeta& m) {
    return json{
        {"record", "meta"},
        {"tool_version", m.tool_version},
        {"seed", m.seed},
        {"config_digest", hash_hex(m.config_digest)},
        {"gas_price", m.gas_price.to_string()},
        {"ransom_amount", m.ransom_amount.to_string()},
        {"affiliate_share_bp", m.affiliate_share_bp},
        {"encrypt_onchain_payloads", m.encrypt_onchain_payloads},
        {"gas_schedule", schedule_to_json(m.gas_schedule)},
        {"miner_sink", m.miner_sink.hex()},
    };
}

json account_to_json(const AccountRecord& r) {
    return json{
        {"record", "account"}, {"sim_time", r.sim_time},         {"actor", r.actor},
        {"address", r.address.hex()}, {"balance", r.balance.to_string()},
    };
}

json action_to_json(const ActionRecord& r) {
    json j{
        {"record", "action"},
        {"sim_time", r.sim_time},
        {"actor", r.actor},
        {"action", r.action},
        {"outcome", r.outcome},
    };
    if (r.tx_hash) j["tx_hash"] = hash_hex(*r.tx_hash);
    if (r.event_kind) j["event_kind"] = std::string(ledger::to_string(*r.event_kind));
    if (!r.extra.empty()) j["extra"] = r.extra;
    return j;
}

json receipt_to_json(const ReceiptRecord& r) {
    json events = json::array();
    for (const auto& ev : r.events) {
        json attrs = json::object();
        for (const auto& [k, v] : ev.attributes)
            attrs[k] = to_hex({v.data(), v.size()});
        events.push_back(json{{"kind", std::string(ledger::to_string(ev.kind))},
                              {"attributes", std::move(attrs)}});
    }
    return json{
        {"tx_hash", hash_hex(r.tx_hash)},
        {"sender", r.sender.hex()},
        {"nonce", r.nonce},
        {"call", r.is_contract_call},
        {"to", r.to.hex()},
        {"function", r.function},
        {"args", to_hex({r.args.data(), r.args.size()})},
        {"value", r.value.to_string()},
        {"gas_price", r.gas_price.to_string()},
        {"gas_used", r.gas_used},
        {"ok", r.ok},
        {"revert_reason", r.revert_reason},
        {"events", std::move(events)},
    };
}

json block_to_json(const BlockRecord& b) {
    json receipts = json::array();
    for (const auto& r : b.receipts) receipts.push_back(receipt_to_json(r));
    return json{
        {"record", "block"},       {"number", b.number},
        {"timestamp", b.timestamp}, {"parent", hash_hex(b.parent)},
        {"receipts", std::move(receipts)},
    };
}

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
    throw Error(Errc::MalformedTrace, "line " + std::to_string(line) + ": " + what);
}

Address address_from_json(const json& j) {
    Address a;
    a.bytes = array_from_hex<20>(j.get<std::string>());
    return a;
}

Hash32 hash_from_json(const json& j) {
    return array_from_hex<32>(j.get<std::string>());
}

TraceMeta meta_from_json(const json& j) {
    TraceMeta m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_digest = hash_from_json(j.at("config_digest"));
    m.gas_price = Wei::from_string(j.at("gas_price").get<std::string>());
    m.ransom_amount = Wei::from_string(j.at("ransom_amount").get<std::string>());
    m.affiliate_share_bp = j.at("affiliate_share_bp").get<std::uint32_t>();
    m.encrypt_onchain_payloads = j.at("encrypt_onchain_payloads").get<bool>();
    m.gas_schedule = schedule_from_json(j.at("gas_schedule"));
    m.miner_sink = address_from_json(j.at("miner_sink"));
    return m;
}

AccountRecord account_from_json(const json& j) {
    AccountRecord r;
    r.sim_time = j.at("sim_time").get<double>();
    r.actor = j.at("actor").get<std::string>();
    r.address = address_from_json(j.at("address"));
    r.balance = Wei::from_string(j.at("balance").get<std::string>());
    return r;
}

ActionRecord action_from_json(const json& j, std::size_t line) {
    ActionRecord r;
    r.sim_time = j.at("sim_time").get<double>();
    r.actor = j.at("actor").get<std::string>();
    r.action = j.at("action").get<std::string>();
    r.outcome = j.at("outcome").get<std::string>();
    if (j.contains("tx_hash")) r.tx_hash = hash_from_json(j.at("tx_hash"));
    if (j.contains("event_kind")) {
        auto k = ledger::event_kind_from_string(j.at("event_kind").get<std::string>());
        if (!k) malformed(line, "unknown event kind");
        r.event_kind = *k;
    }
    if (j.contains("extra"))
        r.extra = j.at("extra").get<std::map<std::string, std::string>>();
    return r;
}

ReceiptRecord receipt_from_json(const json& j, std::size_t line) {
    ReceiptRecord r;
    r.tx_hash = hash_from_json(j.at("tx_hash"));
    r.sender = address_from_json(j.at("sender"));
    r.nonce = j.at("nonce").get<std::uint64_t>();
    r.is_contract_call = j.at("call").get<bool>();
    r.to = address_from_json(j.at("to"));
    r.function = j.at("function").get<std::string>();
    r.args = from_hex(j.at("args").get<std::string>());
    r.value = Wei::from_string(j.at("value").get<std::string>());
    r.gas_price = Wei::from_string(j.at("gas_price").get<std::string>());
    r.gas_used = j.at("gas_used").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    r.revert_reason = j.at("revert_reason").get<std::string>();
    for (const auto& ev : j.at("events")) {
        EventRecord rec;
        auto k = ledger::event_kind_from_string(ev.at("kind").get<std::string>());
        if (!k) malformed(line, "unknown event kind");
        rec.kind = *k;
        for (const auto& [key, val] : ev.at("attributes").items())
            rec.attributes.emplace(key, from_hex(val.get<std::string>()));
        r.events.push_back(std::move(rec));
    }
    return r;
}

BlockRecord block_from_json(const json& j, std::size_t line) {
    BlockRecord b;
    b.number = j.at("number").get<std::uint64_t>();
    b.timestamp = j.at("timestamp").get<double>();
    b.parent = hash_from_json(j.at("parent"));
    for (const auto& r : j.at("receipts")) b.receipts.push_back(receipt_from_json(r, line));
    return b;
}

}  // namespace

void write_ndjson(const Trace& t, std::ostream& out) {
    out << meta_to_json(t.meta).dump() << '\n';
    for (const auto& [type, idx] : t.order) {
        switch (type) {
            case Trace::RecordType::Account: out << account_to_json(t.accounts[idx]).dump(); break;
            case Trace::RecordType::Action: out << action_to_json(t.actions[idx]).dump(); break;
            case Trace::RecordType::Block: out << block_to_json(t.blocks[idx]).dump(); break;
        }
        out << '\n';
    }
    // Terminal record so truncation at a line boundary is detectable.
    out << json{{"record", "end"},
                {"accounts", t.accounts.size()},
                {"actions", t.actions.size()},
                {"blocks", t.blocks.size()}}
               .dump()
        << '\n';
}

std::string to_ndjson(const Trace& t) {
    std::ostringstream out;
    write_ndjson(t, out);
    return out.str();
}

Trace parse_ndjson(std::istream& in) {
    Trace t;
    std::string line;
    std::size_t line_no = 0;
    bool have_meta = false;
    bool have_end = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) malformed(line_no, "empty line");
        if (have_end) malformed(line_no, "content after terminal record");

        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            malformed(line_no, std::string("invalid JSON: ") + e.what());
        }

        try {
            std::string record = j.at("record").get<std::string>();
            if (record == "meta") {
                if (have_meta) malformed(line_no, "duplicate meta record");
                if (line_no != 1) malformed(line_no, "meta record must come first");
                t.meta = meta_from_json(j);
                have_meta = true;
            } else if (!have_meta) {
                malformed(line_no, "trace must start with a meta record");
            } else if (record == "account") {
                t.add_account(account_from_json(j));
            } else if (record == "action") {
                t.add_action(action_from_json(j, line_no));
            } else if (record == "block") {
                t.add_block(block_from_json(j, line_no));
            } else if (record == "end") {
                if (j.at("accounts").get<std::size_t>() != t.accounts.size() ||
                    j.at("actions").get<std::size_t>() != t.actions.size() ||
                    j.at("blocks").get<std::size_t>() != t.blocks.size())
                    malformed(line_no, "terminal record counts do not match content");
                have_end = true;
            } else {
                malformed(line_no, "unknown record type: " + record);
            }
        } catch (const json::exception& e) {
            malformed(line_no, std::string("bad record: ") + e.what());
        } catch (const Error& e) {
            if (e.code() == Errc::MalformedTrace) throw;
            malformed(line_no, e.what());
        }
    }

    if (!have_meta) malformed(line_no + 1, "missing meta record");
    if (!have_end) malformed(line_no + 1, "missing terminal record (truncated trace)");
    return t;
}

Trace parse_ndjson_string(const std::string& text) {
    std::istringstream in(text);
    return parse_ndjson(in);
}

Trace load_ndjson_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open trace file: " + path);
    return parse_ndjson(in);
}

}  // namespace escrowsim::trace
