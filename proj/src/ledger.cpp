#include "escrowsim/ledger.hpp"

#include <algorithm>

#include "escrowsim/digest.hpp"

namespace escrowsim::ledger {

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::AffiliateRegistered: return "AffiliateRegistered";
        case EventKind::SampleKeyRequested: return "SampleKeyRequested";
        case EventKind::SampleKeyPublished: return "SampleKeyPublished";
        case EventKind::RansomPaid: return "RansomPaid";
        case EventKind::RansomSplit: return "RansomSplit";
        case EventKind::SampleSecretPublished: return "SampleSecretPublished";
    }
    return "UnknownEvent";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
    static constexpr EventKind kAll[] = {
        EventKind::AffiliateRegistered, EventKind::SampleKeyRequested,
        EventKind::SampleKeyPublished,  EventKind::RansomPaid,
        EventKind::RansomSplit,         EventKind::SampleSecretPublished,
    };
    for (EventKind k : kAll)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::string_view to_string(RevertReason r) {
    switch (r) {
        case RevertReason::None: return "None";
        case RevertReason::InsufficientFunds: return "InsufficientFunds";
        case RevertReason::UnknownContract: return "UnknownContract";
        case RevertReason::UnknownFunction: return "UnknownFunction";
        case RevertReason::ValueNotAccepted: return "ValueNotAccepted";
        case RevertReason::BadArguments: return "BadArguments";
        case RevertReason::BadShare: return "BadShare";
        case RevertReason::BadAmount: return "BadAmount";
        case RevertReason::AlreadyRegistered: return "AlreadyRegistered";
        case RevertReason::NotRegistered: return "NotRegistered";
        case RevertReason::NotAuthor: return "NotAuthor";
        case RevertReason::UnknownSample: return "UnknownSample";
        case RevertReason::PkAlreadySet: return "PkAlreadySet";
        case RevertReason::PkNotSet: return "PkNotSet";
        case RevertReason::WrongAmount: return "WrongAmount";
        case RevertReason::AlreadyPaid: return "AlreadyPaid";
        case RevertReason::NotPaid: return "NotPaid";
        case RevertReason::AlreadySplit: return "AlreadySplit";
        case RevertReason::SkAlreadySet: return "SkAlreadySet";
        case RevertReason::SkNotSet: return "SkNotSet";
    }
    return "UnknownReason";
}

std::uint64_t GasSchedule::for_function(std::string_view f) const {
    if (f == fn::deploy) return deploy;
    if (f == fn::register_affiliate) return register_affiliate;
    if (f == fn::request_sample_key) return request_key;
    if (f == fn::set_sample_pk) return set_pk;
    if (f == fn::set_sample_sk) return set_sk;
    if (f == fn::pay_ransom) return pay;
    if (f == fn::split_ransom) return split;
    return 0;
}

Bytes Transaction::encode() const {
    ByteWriter w;
    w.raw({sender.bytes.data(), sender.bytes.size()});
    w.u64be(nonce);
    if (const auto* t = std::get_if<Transfer>(&target)) {
        w.u8(0);
        w.raw({t->to.bytes.data(), t->to.bytes.size()});
    } else {
        const auto& c = std::get<ContractCall>(target);
        w.u8(1);
        w.raw({c.contract.bytes.data(), c.contract.bytes.size()});
        w.len_bytes(std::string_view(c.function));
        w.len_bytes(std::span<const std::uint8_t>(c.args.data(), c.args.size()));
    }
    w.u128be(value.value);
    w.u128be(gas_price.value);
    return w.take();
}

TxHash Transaction::hash() const {
    Bytes enc = encode();
    return sha256(std::span<const std::uint8_t>(enc.data(), enc.size()));
}

Hash32 Block::hash() const {
    ByteWriter w;
    w.u64be(number);
    // Timestamps are doubles; hash their exact bit pattern.
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::uint64_t ts_bits;
    std::memcpy(&ts_bits, &timestamp, sizeof(ts_bits));
    w.u64be(ts_bits);
    w.raw({parent.data(), parent.size()});
    for (const auto& r : receipts) {
        w.raw({r.tx_hash.data(), r.tx_hash.size()});
        w.u8(r.status == TxStatus::Succeeded ? 1 : 0);
        w.u8(static_cast<std::uint8_t>(r.reason));
        w.u64be(r.gas_used);
        w.u64be(r.events.size());
    }
    Bytes enc = w.take();
    return tagged_digest("block", {std::span<const std::uint8_t>(enc.data(), enc.size())});
}

Ledger::Ledger(GasSchedule schedule, double block_mean_s, Rng rng, ContractApi* contracts)
    : schedule_(schedule), block_mean_s_(block_mean_s), rng_(rng), contracts_(contracts) {
    if (!(block_mean_s > 0))
        throw Error(Errc::ConfigInvalid, "block mean latency must be positive");
    if (!schedule_.all_positive())
        throw Error(Errc::ConfigInvalid, "gas schedule entries must be positive");
    miner_sink_ = address_from_seed(as_span(std::string_view("miner-sink")));
    accounts_[miner_sink_] = Account{Wei::zero(), 0};
}

Address Ledger::address_from_seed(std::span<const std::uint8_t> seed) {
    if (seed.empty()) throw Error(Errc::BadSeed, "empty account seed");
    Hash32 h = tagged_digest("addr", {seed});
    Address a;
    std::memcpy(a.bytes.data(), h.data(), a.bytes.size());
    return a;
}

Address Ledger::create_account(std::span<const std::uint8_t> seed, Wei initial_balance) {
    Address a = address_from_seed(seed);
    if (accounts_.contains(a))
        throw Error(Errc::DuplicateAddress, "account already exists: " + a.hex());
    accounts_[a] = Account{initial_balance, 0};
    return a;
}

Address Ledger::create_account(std::string_view seed, Wei initial_balance) {
    return create_account(as_span(seed), initial_balance);
}

TxHash Ledger::submit_tx(const Transaction& tx) {
    auto it = accounts_.find(tx.sender);
    if (it == accounts_.end())
        throw Error(Errc::UnknownSender, "unknown sender: " + tx.sender.hex());
    std::uint64_t expected = it->second.nonce + queued_per_sender_[tx.sender];
    if (tx.nonce != expected)
        throw Error(Errc::BadNonce, "expected nonce " + std::to_string(expected) + ", got " +
                                        std::to_string(tx.nonce));
    TxHash h = tx.hash();
    queue_.push_back(tx);
    ++queued_per_sender_[tx.sender];
    txs_.emplace(h, tx);
    return h;
}

std::uint64_t Ledger::scheduled_gas(const Transaction& tx) const {
    // Plain transfers are free: the schedule covers contract functions only.
    if (std::holds_alternative<Transfer>(tx.target)) return 0;
    return schedule_.for_function(std::get<ContractCall>(tx.target).function);
}

void Ledger::move_balance(const Address& from, const Address& to, Wei amount) {
    if (amount.is_zero()) return;
    Account& src = accounts_.at(from);
    src.balance -= amount;  // callers check sufficiency; Wei throws otherwise
    accounts_[to].balance += amount;
}

Receipt Ledger::apply_tx(const Transaction& tx, std::uint64_t block_number) {
    Receipt rcpt;
    rcpt.tx_hash = tx.hash();

    Account& sender = accounts_.at(tx.sender);
    sender.nonce += 1;  // consumed in both statuses

    rcpt.gas_used = scheduled_gas(tx);
    Wei fee = tx.gas_price.times(rcpt.gas_used);

    if (sender.balance < tx.value + fee) {
        // Charge whatever gas the sender can still cover; value stays put.
        Wei charge = std::min(fee, sender.balance);
        move_balance(tx.sender, miner_sink_, charge);
        rcpt.status = TxStatus::Reverted;
        rcpt.reason = RevertReason::InsufficientFunds;
        return rcpt;
    }

    move_balance(tx.sender, miner_sink_, fee);

    if (const auto* t = std::get_if<Transfer>(&tx.target)) {
        move_balance(tx.sender, t->to, tx.value);
        rcpt.status = TxStatus::Succeeded;
        return rcpt;
    }

    const auto& call = std::get<ContractCall>(tx.target);
    CallContext ctx{
        .sender = tx.sender,
        .tx_hash = rcpt.tx_hash,
        .contract = call.contract,
        .function = call.function,
        .args = call.args,
        .value = tx.value,
        .block_number = block_number,
    };
    CallResult result =
        contracts_ ? contracts_->dispatch(ctx) : CallResult::revert(RevertReason::UnknownContract);

    if (!result.ok) {
        rcpt.status = TxStatus::Reverted;
        rcpt.reason = result.reason;
        return rcpt;
    }

    Address contract_account = result.created_contract.value_or(call.contract);
    if (result.created_contract) accounts_[*result.created_contract];  // balance 0, nonce 0
    move_balance(tx.sender, contract_account, tx.value);
    for (const auto& p : result.payouts) move_balance(contract_account, p.to, p.amount);

    rcpt.status = TxStatus::Succeeded;
    for (auto& pe : result.events) {
        Event ev;
        ev.block_number = block_number;
        ev.tx_hash = rcpt.tx_hash;
        ev.kind = pe.kind;
        ev.attributes = std::move(pe.attributes);
        rcpt.events.push_back(std::move(ev));
    }
    return rcpt;
}

const Block& Ledger::mine_next_block(ScenarioClock& clock) {
    // Advance simulated time first so agent callbacks scheduled inside the
    // inter-block gap fire before the block's transactions apply.
    double dt = std::max(rng_.exponential(block_mean_s_), 1e-9);
    clock.run_until(clock.now() + dt);

    Block block;
    block.number = blocks_.size();
    block.timestamp = clock.now();
    block.parent = blocks_.empty() ? Hash32{} : blocks_.back().hash();

    std::uint32_t event_index = 0;
    while (!queue_.empty()) {
        Transaction tx = std::move(queue_.front());
        queue_.pop_front();
        --queued_per_sender_[tx.sender];
        Receipt rcpt = apply_tx(tx, block.number);
        for (auto& ev : rcpt.events) ev.index = event_index++;
        events_.insert(events_.end(), rcpt.events.begin(), rcpt.events.end());
        receipt_index_[rcpt.tx_hash] = {block.number, block.receipts.size()};
        block.receipts.push_back(std::move(rcpt));
    }

    blocks_.push_back(std::move(block));
    return blocks_.back();
}

std::vector<Event> Ledger::events_since(std::optional<EventPos> after,
                                        const std::set<EventKind>* filter) const {
    std::vector<Event> out;
    std::size_t start = 0;
    if (after) {
        if (blocks_.empty() || after->block_number > blocks_.back().number)
            throw Error(Errc::CursorBeyondHead, "cursor block " +
                                                    std::to_string(after->block_number) +
                                                    " beyond chain head");
        EventPos pos = *after;
        start = static_cast<std::size_t>(
            std::upper_bound(events_.begin(), events_.end(), pos,
                             [](const EventPos& p, const Event& e) {
                                 return p < EventPos{e.block_number, e.index};
                             }) -
            events_.begin());
    }
    for (std::size_t i = start; i < events_.size(); ++i) {
        if (filter && !filter->contains(events_[i].kind)) continue;
        out.push_back(events_[i]);
    }
    return out;
}

Wei Ledger::balance(const Address& addr) const {
    auto it = accounts_.find(addr);
    if (it == accounts_.end())
        throw Error(Errc::UnknownAddress, "unknown account: " + addr.hex());
    return it->second.balance;
}

std::uint64_t Ledger::next_nonce(const Address& addr) const {
    auto it = accounts_.find(addr);
    if (it == accounts_.end())
        throw Error(Errc::UnknownAddress, "unknown account: " + addr.hex());
    return it->second.nonce + (queued_per_sender_.contains(addr) ? queued_per_sender_.at(addr) : 0);
}

Wei Ledger::total_supply() const {
    Wei sum;
    for (const auto& [addr, acct] : accounts_) sum += acct.balance;
    return sum;
}

const Transaction& Ledger::transaction(const TxHash& h) const {
    auto it = txs_.find(h);
    if (it == txs_.end()) throw Error(Errc::UnknownAddress, "unknown transaction hash");
    return it->second;
}

const Receipt* Ledger::receipt_for(const TxHash& h) const {
    auto it = receipt_index_.find(h);
    if (it == receipt_index_.end()) return nullptr;
    return &blocks_[it->second.first].receipts[it->second.second];
}

}  // namespace escrowsim::ledger
