#include "escrowsim/scenario.hpp"

#include <algorithm>
#include <cstring>

#include <json.hpp>

#include "escrowsim/digest.hpp"
#include "escrowsim/version.hpp"

namespace escrowsim::agents {

using nlohmann::json;
using symcrypto::AsymCiphertext;
using symcrypto::PublicKey;
using symcrypto::SecretKey;
using symcrypto::SymKey;

namespace {

std::string page_text(const escrow::ContractId& contract, std::string_view kind) {
    return json{{"contract", contract.hex()}, {"kind", std::string(kind)}}.dump();
}

/// Pages carry the contract address; agents bootstrap from retrieved bytes,
/// never from shared in-memory state.
std::optional<Address> contract_from_page(const Bytes& bytes) {
    try {
        json doc = json::parse(bytes.begin(), bytes.end());
        Address a;
        a.bytes = array_from_hex<20>(doc.at("contract").get<std::string>());
        return a;
    } catch (...) {
        return std::nullopt;
    }
}

std::optional<Hash32> attr_hash(const ledger::Event& ev, const char* key) {
    auto it = ev.attributes.find(key);
    if (it == ev.attributes.end() || it->second.size() != 32) return std::nullopt;
    Hash32 h;
    std::memcpy(h.data(), it->second.data(), h.size());
    return h;
}

}  // namespace

std::vector<ledger::Transaction> AuthorResponder::respond(
    const std::vector<ledger::Event>& events, std::uint64_t first_nonce) const {
    std::vector<ledger::Transaction> txs;
    std::uint64_t nonce = first_nonce;
    auto make_call = [&](std::string_view fname, Bytes args) {
        ledger::Transaction tx;
        tx.sender = author_;
        tx.nonce = nonce++;
        tx.target = ledger::ContractCall{contract_, std::string(fname), std::move(args)};
        tx.value = Wei::zero();
        tx.gas_price = gas_price_;
        return tx;
    };

    for (const auto& ev : events) {
        if (ev.kind == ledger::EventKind::SampleKeyRequested) {
            auto sid = attr_hash(ev, "sample_id");
            if (!sid) continue;
            PublicKey pk = symcrypto::kdf_keypair(*sid).second;
            txs.push_back(make_call(ledger::fn::set_sample_pk,
                                    escrow::EscrowHost::encode_set_pk_args(*sid, pk)));
        } else if (ev.kind == ledger::EventKind::RansomPaid) {
            auto sid = attr_hash(ev, "sample_id");
            if (!sid) continue;
            // The keypair is re-derived from the sample id; the responder
            // keeps no key store.
            auto [sk, pk] = symcrypto::kdf_keypair(*sid);
            Bytes payload(sk.v.begin(), sk.v.end());
            if (encrypt_) {
                if (auto rpk_bytes = attr_hash(ev, "recipient_pk")) {
                    PublicKey rpk{*rpk_bytes};
                    payload = symcrypto::seal(rpk, std::move(payload)).encode();
                }
            }
            auto sk_tx = [&] {
                return make_call(ledger::fn::set_sample_sk,
                                 escrow::EscrowHost::encode_set_sk_args(*sid, payload));
            };
            auto split_tx = [&] {
                return make_call(ledger::fn::split_ransom,
                                 escrow::EscrowHost::encode_sample_arg(*sid));
            };
            if (split_before_sk_) {
                txs.push_back(split_tx());
                txs.push_back(sk_tx());
            } else {
                txs.push_back(sk_tx());
                txs.push_back(split_tx());
            }
        }
    }
    return txs;
}

struct Scenario::Impl {
    ScenarioConfig cfg;
    ScenarioClock clock;
    Rng rng_agents;
    escrow::EscrowHost escrow_host;
    ledger::Ledger chain;
    caststore::ContentStore store;
    trace::Trace tr;
    RunStats stats;

    Address author{};
    caststore::NodeId author_node{};
    escrow::ContractId contract{};
    ContentId reg_page{};
    ContentId pay_page{};
    ContentId builder{};
    std::optional<AuthorResponder> responder;

    std::vector<AffiliateState> affiliates;
    std::vector<VictimState> victims;
    std::vector<std::pair<SampleId, std::size_t>> samples;  // (sample id, affiliate index)

    std::uint64_t blocks_done = 0;
    bool finished = false;

    explicit Impl(ScenarioConfig c)
        : cfg(std::move(c)),
          rng_agents(derive_seed(cfg.seed, "agents")),
          chain(cfg.gas_schedule, cfg.block_mean_s, Rng(derive_seed(cfg.seed, "ledger")),
                &escrow_host),
          store(clock, Rng(derive_seed(cfg.seed, "store"))) {
        setup();
    }

    void log_action(std::string actor, std::string action, std::optional<TxHash> tx_hash,
                    std::string outcome, std::map<std::string, std::string> extra = {}) {
        trace::ActionRecord r;
        r.sim_time = clock.now();
        r.actor = std::move(actor);
        r.action = std::move(action);
        r.tx_hash = tx_hash;
        r.outcome = std::move(outcome);
        r.extra = std::move(extra);
        tr.add_action(std::move(r));
    }

    void record_account(std::string actor, const Address& addr, std::optional<Wei> balance = {}) {
        trace::AccountRecord r;
        r.sim_time = clock.now();
        r.actor = std::move(actor);
        r.address = addr;
        r.balance = balance ? *balance : chain.balance(addr);
        tr.add_account(std::move(r));
    }

    void setup() {
        tr.meta.tool_version = std::string(kToolVersion);
        tr.meta.seed = cfg.seed;
        tr.meta.config_digest = config_digest(cfg);
        tr.meta.gas_price = cfg.gas_price;
        tr.meta.ransom_amount = cfg.ransom_amount;
        tr.meta.affiliate_share_bp = cfg.affiliate_share_bp;
        tr.meta.encrypt_onchain_payloads = cfg.encrypt_onchain_payloads;
        tr.meta.gas_schedule = cfg.gas_schedule;
        tr.meta.miner_sink = chain.miner_sink();

        author = chain.create_account("author", ether(10));
        record_account("author", author);
        record_account("miner-sink", chain.miner_sink());

        caststore::ChurnParams churn = cfg.churn.value_or(caststore::ChurnParams::always_online());
        author_node = store.add_node("author-node", churn);

        affiliates.reserve(cfg.n_affiliates);
        for (std::uint32_t i = 0; i < cfg.n_affiliates; ++i) {
            AffiliateState a;
            a.index = i;
            std::string name = "affiliate-" + std::to_string(i);
            a.address = chain.create_account(name, ether(1));
            a.node = store.add_node(name + "-node", caststore::ChurnParams::always_online());
            record_account(name, a.address);
            affiliates.push_back(std::move(a));
        }

        std::size_t n_victims = static_cast<std::size_t>(cfg.n_affiliates) *
                                cfg.samples_per_affiliate * cfg.victims_per_sample;
        victims.reserve(n_victims);
        for (std::size_t k = 0; k < n_victims; ++k) {
            VictimState v;
            v.victim_index = k;
            v.sample_slot = k / cfg.victims_per_sample;
            std::string name = "victim-" + std::to_string(k);
            v.address = chain.create_account(name, cfg.ransom_amount + ether(1));
            v.node = store.add_node(name + "-node", caststore::ChurnParams::always_online());
            record_account(name, v.address);
            victims.push_back(std::move(v));
        }
        stats.victims_total = static_cast<std::uint32_t>(victims.size());

        std::vector<caststore::NodeId> mirrors;
        for (std::uint32_t i = 0; i < cfg.n_store_nodes; ++i)
            mirrors.push_back(store.add_node("store-node-" + std::to_string(i), churn));

        // Deployment: the contract address is derivable from the tx hash, so
        // the pages can embed it before the block is mined.
        ledger::Transaction dep;
        dep.sender = author;
        dep.nonce = chain.next_nonce(author);
        dep.target = ledger::ContractCall{
            Address{}, std::string(ledger::fn::deploy),
            escrow::EscrowHost::encode_deploy_args(cfg.ransom_amount, cfg.affiliate_share_bp,
                                                   cfg.encrypt_onchain_payloads)};
        dep.value = Wei::zero();
        dep.gas_price = cfg.gas_price;
        TxHash deploy_hash = chain.submit_tx(dep);
        contract = escrow::EscrowHost::contract_address_for(deploy_hash);
        log_action("author", "deploy_contract", deploy_hash, "ok",
                   {{"contract", contract.hex()}});
        record_account("contract", contract, Wei::zero());

        auto publish_object = [&](std::string_view kind_name, caststore::ContentKind kind) {
            Bytes bytes = to_bytes(page_text(contract, kind_name));
            ContentId id = store.publish(author_node, std::move(bytes), kind, /*pin=*/true);
            log_action("author", "publish_object", std::nullopt, "ok",
                       {{"content_id", hash_hex(id)}, {"kind", std::string(kind_name)}});
            return id;
        };
        reg_page = publish_object("registration", caststore::ContentKind::RegistrationPage);
        pay_page = publish_object("payment", caststore::ContentKind::PaymentPage);
        builder = publish_object("builder", caststore::ContentKind::Other);

        // Background mirrors fetch once at setup; afterwards availability
        // rides on their churn, not on the publisher's.
        for (std::size_t i = 0; i < mirrors.size(); ++i) {
            for (const ContentId& id : {reg_page, pay_page, builder}) {
                auto rr = store.retrieve(mirrors[i], id);
                log_action("store-node-" + std::to_string(i), "mirror_object", std::nullopt,
                           rr.ok() ? "ok" : "unavailable", {{"content_id", hash_hex(id)}});
            }
        }

        responder.emplace(author, contract, cfg.gas_price, cfg.encrypt_onchain_payloads,
                          cfg.split_before_sk);
    }

    void author_step() {
        if (blocks_done % cfg.author_poll_blocks != 0) return;
        ++stats.author_polls;
        std::vector<ledger::Event> events = chain.events_since(responder->cursor);
        if (!events.empty())
            responder->cursor =
                ledger::EventPos{events.back().block_number, events.back().index};
        std::vector<ledger::Transaction> txs = responder->respond(events, chain.next_nonce(author));
        if (txs.empty()) return;

        ++stats.author_active_polls;
        stats.author_busy_s += 1.0;  // nominal processing time per active poll
        log_action("author", "author_poll", std::nullopt, "ok",
                   {{"responses", std::to_string(txs.size())}});
        for (auto& tx : txs) {
            const auto& call = std::get<ledger::ContractCall>(tx.target);
            std::string action = call.function == ledger::fn::set_sample_pk ? "submit_set_pk"
                                 : call.function == ledger::fn::set_sample_sk
                                     ? "submit_set_sk"
                                     : "submit_split";
            TxHash h = chain.submit_tx(tx);
            log_action("author", action, h, "ok");
        }
    }

    void affiliate_steps() {
        for (auto& a : affiliates) {
            if (a.registered) continue;
            std::string actor = "affiliate-" + std::to_string(a.index);

            auto rr = store.retrieve(a.node, reg_page);
            if (!rr.ok()) {
                log_action(actor, "retrieve_registration_page", std::nullopt, "unavailable");
                continue;  // defer to the next block
            }
            auto target = contract_from_page(rr.bytes);
            if (!target) {
                log_action(actor, "retrieve_registration_page", std::nullopt, "malformed");
                continue;
            }
            log_action(actor, "retrieve_registration_page", std::nullopt, "ok",
                       {{"content_id", hash_hex(reg_page)}});

            if (!escrow_host.is_registered(*target, a.address)) {
                ledger::Transaction reg;
                reg.sender = a.address;
                reg.nonce = chain.next_nonce(a.address);
                reg.target = ledger::ContractCall{
                    *target, std::string(ledger::fn::register_affiliate), {}};
                reg.value = Wei::zero();
                reg.gas_price = cfg.gas_price;
                TxHash h = chain.submit_tx(reg);
                log_action(actor, "submit_register", h, "ok");
            }

            for (std::uint32_t s = 0; s < cfg.samples_per_affiliate; ++s) {
                ledger::Transaction req;
                req.sender = a.address;
                req.nonce = chain.next_nonce(a.address);
                req.target = ledger::ContractCall{
                    *target, std::string(ledger::fn::request_sample_key), {}};
                req.value = Wei::zero();
                req.gas_price = cfg.gas_price;
                // The request tx hash is the sample id, known before mining.
                TxHash sid = chain.submit_tx(req);
                log_action(actor, "submit_key_request", sid, "ok",
                           {{"sample_id", hash_hex(sid)}});
                a.samples.push_back(sid);
                samples.emplace_back(sid, a.index);

                Bytes desc = to_bytes(json{{"kind", "sample"},
                                           {"sample_id", hash_hex(sid)},
                                           {"contract", target->hex()}}
                                          .dump());
                ContentId did = store.publish(a.node, std::move(desc),
                                              caststore::ContentKind::SampleDescriptor,
                                              /*pin=*/true);
                log_action(actor, "publish_sample", std::nullopt, "ok",
                           {{"content_id", hash_hex(did)}, {"sample_id", hash_hex(sid)}});
            }
            a.registered = true;
        }
    }

    void victim_steps() {
        for (auto& v : victims) victim_step(v);
    }

    void victim_step(VictimState& v) {
        if (v.phase == VictimPhase::Recovered || v.phase == VictimPhase::Abandoned) return;
        std::string actor = "victim-" + std::to_string(v.victim_index);

        if (v.phase == VictimPhase::Dormant) {
            if (v.sample_slot >= samples.size()) return;
            const SampleId& sid = samples[v.sample_slot].first;
            auto pkr = escrow_host.get_sample_pk(contract, sid);
            if (!pkr.ok()) return;  // the sample carries pk; not built yet

            v.key_temp = SymKey{rng_agents.bytes32()};
            Hash32 asset_seed = tagged_digest("asset", {as_span(v.address)});
            v.asset = Bytes(asset_seed.begin(), asset_seed.end());
            v.locked_asset = symcrypto::lock(v.key_temp, v.asset);
            v.sealed_key =
                symcrypto::seal(*pkr, Bytes(v.key_temp.v.begin(), v.key_temp.v.end()));
            v.will_pay = rng_agents.bernoulli(cfg.pay_probability);
            if (cfg.encrypt_onchain_payloads) {
                v.eph_sk = SecretKey{rng_agents.bytes32()};
                v.eph_pk = symcrypto::public_key_of(*v.eph_sk);
            }
            v.phase = VictimPhase::Infected;
            log_action(actor, "infected", std::nullopt, "ok", {{"sample_id", hash_hex(sid)}});
            // fall through: an infected victim may already act this step
        }

        const SampleId& sid = samples[v.sample_slot].first;

        // Recovery check comes first: once the secret is public, even a
        // victim that lost the payment race (or never paid) can use it.
        if (try_recover(v, actor, sid)) return;

        if (!v.will_pay || v.wait_for_public_sk) return;

        if (v.pending_payment) {
            const ledger::Receipt* r = chain.receipt_for(*v.pending_payment);
            if (!r) return;  // still queued
            TxHash h = *v.pending_payment;
            v.pending_payment.reset();
            if (r->status == ledger::TxStatus::Succeeded) {
                v.phase = VictimPhase::Paid;
                log_action(actor, "payment_confirmed", h, "ok");
            } else {
                log_action(actor, "payment_rejected", h,
                           std::string(ledger::to_string(r->reason)));
                if (r->reason == ledger::RevertReason::AlreadyPaid)
                    v.wait_for_public_sk = true;  // someone else paid; wait
            }
            return;
        }
        if (v.phase == VictimPhase::Paid) return;  // paid, awaiting the secret

        if (clock.now() < v.next_retry_s) return;
        auto rr = store.retrieve(v.node, pay_page);
        if (!rr.ok()) {
            log_action(actor, "retrieve_payment_page", std::nullopt, "unavailable");
            v.next_retry_s = clock.now() + v.backoff_s;
            v.backoff_s = std::min(v.backoff_s * 2.0, 3600.0);
            return;
        }
        auto target = contract_from_page(rr.bytes);
        if (!target) return;
        log_action(actor, "retrieve_payment_page", std::nullopt, "ok",
                   {{"content_id", hash_hex(pay_page)}});

        Wei value = cfg.ransom_amount;
        if (cfg.fault_wrong_amount_first_payment && v.pay_attempts == 0)
            value = cfg.ransom_amount - Wei(1);

        ledger::Transaction pay;
        pay.sender = v.address;
        pay.nonce = chain.next_nonce(v.address);
        pay.target = ledger::ContractCall{
            *target, std::string(ledger::fn::pay_ransom),
            escrow::EscrowHost::encode_pay_args(
                sid, cfg.encrypt_onchain_payloads ? v.eph_pk : std::nullopt)};
        pay.value = value;
        pay.gas_price = cfg.gas_price;
        TxHash h = chain.submit_tx(pay);
        v.pending_payment = h;
        ++v.pay_attempts;
        log_action(actor, "submit_payment", h, "ok", {{"sample_id", hash_hex(sid)}});
    }

    bool try_recover(VictimState& v, const std::string& actor, const SampleId& sid) {
        auto skr = escrow_host.get_sample_sk(contract, sid);
        if (!skr.ok()) return false;

        std::optional<Bytes> sk_bytes;
        if (skr->encrypted) {
            try {
                auto ct = AsymCiphertext::decode(
                    std::span<const std::uint8_t>(skr->payload.data(), skr->payload.size()));
                if (v.eph_sk) sk_bytes = symcrypto::open(*v.eph_sk, ct);
            } catch (const Error&) {
                sk_bytes.reset();
            }
            if (!sk_bytes) return false;  // sealed for a different recipient
        } else {
            sk_bytes = skr->payload;
        }
        if (sk_bytes->size() != 32) return false;

        SecretKey sk;
        std::memcpy(sk.v.data(), sk_bytes->data(), sk.v.size());
        auto key_bytes = symcrypto::open(sk, v.sealed_key);
        if (!key_bytes || key_bytes->size() != 32)
            throw Error(Errc::IoError, "published secret failed to open the sealed key");
        SymKey kt;
        std::memcpy(kt.v.data(), key_bytes->data(), kt.v.size());
        auto asset = symcrypto::unlock(kt, v.locked_asset);
        if (!asset || *asset != v.asset)
            throw Error(Errc::IoError, "recovered key failed to unlock the asset");

        v.phase = VictimPhase::Recovered;
        ++stats.victims_recovered;
        log_action(actor, "recovered", std::nullopt, "ok", {{"sample_id", hash_hex(sid)}});
        return true;
    }

    void record_block(const ledger::Block& b) {
        trace::BlockRecord rec;
        rec.number = b.number;
        rec.timestamp = b.timestamp;
        rec.parent = b.parent;
        for (const auto& rcpt : b.receipts) {
            trace::ReceiptRecord rr;
            const ledger::Transaction& tx = chain.transaction(rcpt.tx_hash);
            rr.tx_hash = rcpt.tx_hash;
            rr.sender = tx.sender;
            rr.nonce = tx.nonce;
            if (const auto* t = std::get_if<ledger::Transfer>(&tx.target)) {
                rr.is_contract_call = false;
                rr.to = t->to;
            } else {
                const auto& call = std::get<ledger::ContractCall>(tx.target);
                rr.is_contract_call = true;
                rr.to = call.contract;
                rr.function = call.function;
                rr.args = call.args;
            }
            rr.value = tx.value;
            rr.gas_price = tx.gas_price;
            rr.gas_used = rcpt.gas_used;
            rr.ok = rcpt.status == ledger::TxStatus::Succeeded;
            if (!rr.ok) rr.revert_reason = std::string(ledger::to_string(rcpt.reason));
            for (const auto& ev : rcpt.events)
                rr.events.push_back(trace::EventRecord{ev.kind, ev.attributes});
            rec.receipts.push_back(std::move(rr));
        }
        tr.add_block(std::move(rec));
    }

    void finalize() {
        for (auto& v : victims) {
            if (v.phase == VictimPhase::Recovered) continue;
            v.phase = VictimPhase::Abandoned;
            ++stats.victims_abandoned;
            log_action("victim-" + std::to_string(v.victim_index), "abandoned", std::nullopt,
                       "ok");
        }
        stats.sim_duration_s = clock.now();

        record_account("author", author);
        record_account("miner-sink", chain.miner_sink());
        record_account("contract", contract);
        for (const auto& a : affiliates)
            record_account("affiliate-" + std::to_string(a.index), a.address);
        for (const auto& v : victims)
            record_account("victim-" + std::to_string(v.victim_index), v.address);
        finished = true;
    }

    void step_block() {
        if (finished) return;
        author_step();
        affiliate_steps();
        victim_steps();
        const ledger::Block& b = chain.mine_next_block(clock);
        record_block(b);
        ++blocks_done;
        stats.blocks_mined = blocks_done;
        if (blocks_done >= cfg.duration_blocks) finalize();
    }
};

Scenario::Scenario(ScenarioConfig cfg) {
    auto issues = validate_config(cfg);
    if (!issues.empty())
        throw Error(Errc::ConfigInvalid, issues.front().field + ": " + issues.front().message);
    impl_ = std::make_unique<Impl>(std::move(cfg));
}

Scenario::~Scenario() = default;

void Scenario::step_block() {
    impl_->step_block();
}

void Scenario::run() {
    while (!impl_->finished) impl_->step_block();
}

bool Scenario::finished() const {
    return impl_->finished;
}

const trace::Trace& Scenario::trace() const {
    return impl_->tr;
}

trace::Trace Scenario::take_trace() {
    run();
    return std::move(impl_->tr);
}

const RunStats& Scenario::stats() const {
    return impl_->stats;
}

ledger::Ledger& Scenario::chain() {
    return impl_->chain;
}

escrow::EscrowHost& Scenario::escrow_host() {
    return impl_->escrow_host;
}

caststore::ContentStore& Scenario::store() {
    return impl_->store;
}

ScenarioClock& Scenario::clock() {
    return impl_->clock;
}

Address Scenario::author_address() const {
    return impl_->author;
}

escrow::ContractId Scenario::contract_id() const {
    return impl_->contract;
}

caststore::NodeId Scenario::author_node() const {
    return impl_->author_node;
}

ContentId Scenario::registration_page() const {
    return impl_->reg_page;
}

ContentId Scenario::payment_page() const {
    return impl_->pay_page;
}

const std::vector<VictimState>& Scenario::victims() const {
    return impl_->victims;
}

const std::vector<AffiliateState>& Scenario::affiliates() const {
    return impl_->affiliates;
}

trace::Trace run_scenario(const ScenarioConfig& cfg) {
    Scenario s(cfg);
    s.run();
    return s.take_trace();
}

}  // namespace escrowsim::agents
