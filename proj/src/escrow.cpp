#include "escrowsim/escrow.hpp"

#include "escrowsim/digest.hpp"

namespace escrowsim::escrow {

namespace {

Bytes attr(const Address& a) {
    return Bytes(a.bytes.begin(), a.bytes.end());
}
Bytes attr(const Hash32& h) {
    return Bytes(h.begin(), h.end());
}
Bytes attr(Wei w) {
    ByteWriter bw;
    bw.u128be(w.value);
    return bw.take();
}

ledger::PendingEvent event(ledger::EventKind kind,
                           std::initializer_list<std::pair<const char*, Bytes>> attrs) {
    ledger::PendingEvent ev;
    ev.kind = kind;
    for (auto& [k, v] : attrs) ev.attributes.emplace(k, v);
    return ev;
}

}  // namespace

ContractId EscrowHost::contract_address_for(const TxHash& deploy_tx) {
    Hash32 h = tagged_digest("contract", {as_span(deploy_tx)});
    ContractId id;
    std::memcpy(id.bytes.data(), h.data(), id.bytes.size());
    return id;
}

Bytes EscrowHost::encode_deploy_args(Wei ransom_amount, std::uint32_t affiliate_share_bp,
                                     bool encrypt_onchain_payloads) {
    ByteWriter w;
    w.u128be(ransom_amount.value);
    w.u64be(affiliate_share_bp);
    w.u8(encrypt_onchain_payloads ? 1 : 0);
    return w.take();
}

Bytes EscrowHost::encode_sample_arg(const SampleId& sample_id) {
    ByteWriter w;
    w.raw(as_span(sample_id));
    return w.take();
}

Bytes EscrowHost::encode_set_pk_args(const SampleId& sample_id, const PublicKey& pk) {
    ByteWriter w;
    w.raw(as_span(sample_id));
    w.len_bytes(as_span(pk.v));
    return w.take();
}

Bytes EscrowHost::encode_pay_args(const SampleId& sample_id,
                                  const std::optional<PublicKey>& recipient_pk) {
    ByteWriter w;
    w.raw(as_span(sample_id));
    if (recipient_pk)
        w.len_bytes(as_span(recipient_pk->v));
    else
        w.len_bytes(std::span<const std::uint8_t>{});
    return w.take();
}

Bytes EscrowHost::encode_set_sk_args(const SampleId& sample_id, const Bytes& payload) {
    ByteWriter w;
    w.raw(as_span(sample_id));
    w.len_bytes(std::span<const std::uint8_t>(payload.data(), payload.size()));
    return w.take();
}

CallResult EscrowHost::dispatch(const CallContext& ctx) {
    // Only the payment entry point accepts value.
    if (ctx.function != ledger::fn::pay_ransom && !ctx.value.is_zero())
        return CallResult::revert(RevertReason::ValueNotAccepted);

    if (ctx.contract.is_zero()) {
        if (ctx.function != ledger::fn::deploy)
            return CallResult::revert(RevertReason::UnknownFunction);
        return do_deploy(ctx);
    }

    auto it = contracts_.find(ctx.contract);
    if (it == contracts_.end()) return CallResult::revert(RevertReason::UnknownContract);
    EscrowState& st = it->second;

    if (ctx.function == ledger::fn::register_affiliate) return do_register(st, ctx);
    if (ctx.function == ledger::fn::request_sample_key) return do_request_key(st, ctx);
    if (ctx.function == ledger::fn::set_sample_pk) return do_set_pk(st, ctx);
    if (ctx.function == ledger::fn::pay_ransom) return do_pay(st, ctx);
    if (ctx.function == ledger::fn::split_ransom) return do_split(st, ctx);
    if (ctx.function == ledger::fn::set_sample_sk) return do_set_sk(st, ctx);
    return CallResult::revert(RevertReason::UnknownFunction);
}

CallResult EscrowHost::do_deploy(const CallContext& ctx) {
    Wei ransom;
    std::uint64_t share = 0;
    std::uint8_t encrypt = 0;
    try {
        ByteReader r({ctx.args.data(), ctx.args.size()});
        ransom = Wei(r.u128be());
        share = r.u64be();
        encrypt = r.u8();
        r.expect_done();
    } catch (const Error&) {
        return CallResult::revert(RevertReason::BadArguments);
    }
    if (encrypt > 1) return CallResult::revert(RevertReason::BadArguments);
    if (share > 10000) return CallResult::revert(RevertReason::BadShare);
    if (ransom.is_zero()) return CallResult::revert(RevertReason::BadAmount);

    ContractId id = contract_address_for(ctx.tx_hash);
    EscrowState st;
    st.config = EscrowConfig{
        .author = ctx.sender,
        .ransom_amount = ransom,
        .affiliate_share_bp = static_cast<std::uint32_t>(share),
        .encrypt_onchain_payloads = encrypt == 1,
    };
    contracts_.emplace(id, std::move(st));

    CallResult ok = CallResult::success();
    ok.created_contract = id;
    return ok;
}

CallResult EscrowHost::do_register(EscrowState& st, const CallContext& ctx) {
    if (!ctx.args.empty()) return CallResult::revert(RevertReason::BadArguments);
    if (st.affiliates.contains(ctx.sender))
        return CallResult::revert(RevertReason::AlreadyRegistered);

    st.affiliates.emplace(ctx.sender, AffiliateRecord{ctx.sender, {}});
    st.affiliate_order.push_back(ctx.sender);

    CallResult ok = CallResult::success();
    ok.events.push_back(event(ledger::EventKind::AffiliateRegistered,
                              {{"affiliate", attr(ctx.sender)}}));
    return ok;
}

CallResult EscrowHost::do_request_key(EscrowState& st, const CallContext& ctx) {
    if (!ctx.args.empty()) return CallResult::revert(RevertReason::BadArguments);
    auto aff = st.affiliates.find(ctx.sender);
    if (aff == st.affiliates.end()) return CallResult::revert(RevertReason::NotRegistered);

    // The request tx hash doubles as the sample id and later as the KDF seed.
    SampleId sample_id = ctx.tx_hash;
    KeyRecord rec;
    rec.sample_id = sample_id;
    rec.affiliate = ctx.sender;
    st.keys.emplace(sample_id, std::move(rec));
    aff->second.sample_ids.push_back(sample_id);

    CallResult ok = CallResult::success();
    ok.events.push_back(event(ledger::EventKind::SampleKeyRequested,
                              {{"sample_id", attr(sample_id)}, {"affiliate", attr(ctx.sender)}}));
    return ok;
}

CallResult EscrowHost::do_set_pk(EscrowState& st, const CallContext& ctx) {
    if (ctx.sender != st.config.author) return CallResult::revert(RevertReason::NotAuthor);

    SampleId sample_id;
    Bytes pk_bytes;
    try {
        ByteReader r({ctx.args.data(), ctx.args.size()});
        sample_id = r.fixed<32>();
        pk_bytes = r.len_bytes();
        r.expect_done();
    } catch (const Error&) {
        return CallResult::revert(RevertReason::BadArguments);
    }
    if (pk_bytes.size() != 32) return CallResult::revert(RevertReason::BadArguments);

    auto it = st.keys.find(sample_id);
    if (it == st.keys.end()) return CallResult::revert(RevertReason::UnknownSample);
    if (it->second.pk) return CallResult::revert(RevertReason::PkAlreadySet);

    PublicKey pk;
    std::memcpy(pk.v.data(), pk_bytes.data(), pk.v.size());
    // One pk maps to one sample: the payment page resolves pk -> sample_id.
    if (st.pk_index.contains(pk)) return CallResult::revert(RevertReason::BadArguments);

    it->second.pk = pk;
    st.pk_index.emplace(pk, sample_id);

    CallResult ok = CallResult::success();
    ok.events.push_back(event(ledger::EventKind::SampleKeyPublished,
                              {{"sample_id", attr(sample_id)}, {"pk", attr(pk.v)}}));
    return ok;
}

CallResult EscrowHost::do_pay(EscrowState& st, const CallContext& ctx) {
    SampleId sample_id;
    Bytes pk_bytes;
    try {
        ByteReader r({ctx.args.data(), ctx.args.size()});
        sample_id = r.fixed<32>();
        pk_bytes = r.len_bytes();
        r.expect_done();
    } catch (const Error&) {
        return CallResult::revert(RevertReason::BadArguments);
    }
    // A return pk is required exactly when secrets are delivered encrypted.
    if (st.config.encrypt_onchain_payloads ? pk_bytes.size() != 32 : !pk_bytes.empty())
        return CallResult::revert(RevertReason::BadArguments);

    auto it = st.keys.find(sample_id);
    if (it == st.keys.end()) return CallResult::revert(RevertReason::UnknownSample);
    KeyRecord& rec = it->second;
    if (!rec.pk) return CallResult::revert(RevertReason::PkNotSet);
    if (ctx.value != st.config.ransom_amount) return CallResult::revert(RevertReason::WrongAmount);
    if (rec.paid_by) return CallResult::revert(RevertReason::AlreadyPaid);

    rec.paid_by = ctx.sender;
    rec.paid_amount = ctx.value;
    st.escrow_balance += ctx.value;

    CallResult ok = CallResult::success();
    ledger::PendingEvent ev = event(ledger::EventKind::RansomPaid,
                                    {{"sample_id", attr(sample_id)},
                                     {"amount", attr(ctx.value)},
                                     {"payer", attr(ctx.sender)}});
    if (st.config.encrypt_onchain_payloads) {
        PublicKey rpk;
        std::memcpy(rpk.v.data(), pk_bytes.data(), rpk.v.size());
        rec.recipient_pk = rpk;
        ev.attributes.emplace("recipient_pk", attr(rpk.v));
    }
    ok.events.push_back(std::move(ev));
    return ok;
}

CallResult EscrowHost::do_split(EscrowState& st, const CallContext& ctx) {
    if (ctx.sender != st.config.author) return CallResult::revert(RevertReason::NotAuthor);

    SampleId sample_id;
    try {
        ByteReader r({ctx.args.data(), ctx.args.size()});
        sample_id = r.fixed<32>();
        r.expect_done();
    } catch (const Error&) {
        return CallResult::revert(RevertReason::BadArguments);
    }

    auto it = st.keys.find(sample_id);
    if (it == st.keys.end()) return CallResult::revert(RevertReason::UnknownSample);
    KeyRecord& rec = it->second;
    if (!rec.paid_by) return CallResult::revert(RevertReason::NotPaid);
    if (rec.split_done) return CallResult::revert(RevertReason::AlreadySplit);

    Wei amount = rec.paid_amount;
    Wei affiliate_cut = amount.mul_div(st.config.affiliate_share_bp, 10000);
    Wei author_cut = amount - affiliate_cut;  // remainder: conservation is exact

    rec.split_done = true;
    st.escrow_balance -= amount;

    CallResult ok = CallResult::success();
    ok.payouts.push_back(ledger::Payout{rec.affiliate, affiliate_cut});
    ok.payouts.push_back(ledger::Payout{st.config.author, author_cut});
    ok.events.push_back(event(ledger::EventKind::RansomSplit,
                              {{"sample_id", attr(sample_id)},
                               {"affiliate", attr(rec.affiliate)},
                               {"affiliate_amount", attr(affiliate_cut)},
                               {"author_amount", attr(author_cut)}}));
    return ok;
}

CallResult EscrowHost::do_set_sk(EscrowState& st, const CallContext& ctx) {
    if (ctx.sender != st.config.author) return CallResult::revert(RevertReason::NotAuthor);

    SampleId sample_id;
    Bytes payload;
    try {
        ByteReader r({ctx.args.data(), ctx.args.size()});
        sample_id = r.fixed<32>();
        payload = r.len_bytes();
        r.expect_done();
    } catch (const Error&) {
        return CallResult::revert(RevertReason::BadArguments);
    }
    if (payload.empty()) return CallResult::revert(RevertReason::BadArguments);

    auto it = st.keys.find(sample_id);
    if (it == st.keys.end()) return CallResult::revert(RevertReason::UnknownSample);
    KeyRecord& rec = it->second;
    if (!rec.paid_by) return CallResult::revert(RevertReason::NotPaid);
    if (rec.sk_payload) return CallResult::revert(RevertReason::SkAlreadySet);

    rec.sk_payload = payload;
    rec.sk_encrypted = st.config.encrypt_onchain_payloads;

    CallResult ok = CallResult::success();
    ok.events.push_back(event(ledger::EventKind::SampleSecretPublished,
                              {{"sample_id", attr(sample_id)},
                               {"payload", payload},
                               {"encrypted", Bytes{rec.sk_encrypted ? std::uint8_t{1}
                                                                    : std::uint8_t{0}}}}));
    return ok;
}

ReadResult<PublicKey> EscrowHost::get_sample_pk(const ContractId& id,
                                                const SampleId& sample) const {
    const EscrowState* st = state(id);
    if (!st) return ReadResult<PublicKey>::fail(RevertReason::UnknownContract);
    auto it = st->keys.find(sample);
    if (it == st->keys.end()) return ReadResult<PublicKey>::fail(RevertReason::UnknownSample);
    if (!it->second.pk) return ReadResult<PublicKey>::fail(RevertReason::PkNotSet);
    return ReadResult<PublicKey>::okay(*it->second.pk);
}

ReadResult<StoredSecret> EscrowHost::get_sample_sk(const ContractId& id,
                                                   const SampleId& sample) const {
    const EscrowState* st = state(id);
    if (!st) return ReadResult<StoredSecret>::fail(RevertReason::UnknownContract);
    auto it = st->keys.find(sample);
    if (it == st->keys.end()) return ReadResult<StoredSecret>::fail(RevertReason::UnknownSample);
    if (!it->second.sk_payload) return ReadResult<StoredSecret>::fail(RevertReason::SkNotSet);
    return ReadResult<StoredSecret>::okay(
        StoredSecret{*it->second.sk_payload, it->second.sk_encrypted});
}

ReadResult<SampleId> EscrowHost::find_sample_by_pk(const ContractId& id,
                                                   const PublicKey& pk) const {
    const EscrowState* st = state(id);
    if (!st) return ReadResult<SampleId>::fail(RevertReason::UnknownContract);
    auto it = st->pk_index.find(pk);
    if (it == st->pk_index.end()) return ReadResult<SampleId>::fail(RevertReason::UnknownSample);
    return ReadResult<SampleId>::okay(it->second);
}

ReadResult<SampleView> EscrowHost::sample_view(const ContractId& id,
                                               const SampleId& sample) const {
    const EscrowState* st = state(id);
    if (!st) return ReadResult<SampleView>::fail(RevertReason::UnknownContract);
    auto it = st->keys.find(sample);
    if (it == st->keys.end()) return ReadResult<SampleView>::fail(RevertReason::UnknownSample);
    const KeyRecord& rec = it->second;
    return ReadResult<SampleView>::okay(SampleView{
        .sample_id = rec.sample_id,
        .affiliate = rec.affiliate,
        .pk_set = rec.pk.has_value(),
        .paid = rec.paid_by.has_value(),
        .paid_amount = rec.paid_amount,
        .split_done = rec.split_done,
        .sk_set = rec.sk_payload.has_value(),
    });
}

bool EscrowHost::is_registered(const ContractId& id, const Address& who) const {
    const EscrowState* st = state(id);
    return st && st->affiliates.contains(who);
}

ReadResult<Wei> EscrowHost::escrow_balance(const ContractId& id) const {
    const EscrowState* st = state(id);
    if (!st) return ReadResult<Wei>::fail(RevertReason::UnknownContract);
    return ReadResult<Wei>::okay(st->escrow_balance);
}

const EscrowState* EscrowHost::state(const ContractId& id) const {
    auto it = contracts_.find(id);
    return it == contracts_.end() ? nullptr : &it->second;
}

bool EscrowHost::invariants_hold(const ContractId& id) const {
    const EscrowState* st = state(id);
    if (!st) return true;  // nothing deployed, nothing to violate

    Wei unsplit;
    for (const auto& [sid, rec] : st->keys) {
        if (rec.sample_id != sid) return false;
        if (!st->affiliates.contains(rec.affiliate)) return false;
        // Lifecycle order: pk -> paid -> (split, sk in either order).
        if (rec.paid_by && !rec.pk) return false;
        if (rec.split_done && !rec.paid_by) return false;
        if (rec.sk_payload && !rec.paid_by) return false;
        if (rec.pk && (!st->pk_index.contains(*rec.pk) || st->pk_index.at(*rec.pk) != sid))
            return false;
        if (rec.paid_by && !rec.split_done) unsplit += rec.paid_amount;
    }
    for (const auto& [pk, sid] : st->pk_index) {
        auto it = st->keys.find(sid);
        if (it == st->keys.end() || !it->second.pk || *it->second.pk != pk) return false;
    }
    if (st->affiliate_order.size() != st->affiliates.size()) return false;
    for (const auto& [addr, rec] : st->affiliates) {
        std::set<SampleId> seen;
        for (const auto& sid : rec.sample_ids) {
            if (!seen.insert(sid).second) return false;
            auto it = st->keys.find(sid);
            if (it == st->keys.end() || it->second.affiliate != addr) return false;
        }
    }
    return st->escrow_balance == unsplit;
}

}  // namespace escrowsim::escrow
