#include <doctest.h>

#include <string>

#include "escrowsim/digest.hpp"
#include "escrowsim/error.hpp"
#include "escrowsim/escrow.hpp"
#include "escrowsim/ledger.hpp"
#include "escrowsim/symcrypto.hpp"

using namespace escrowsim;
using namespace escrowsim::ledger;
using escrow::EscrowHost;

namespace {

struct Fixture {
    ScenarioClock clock;
    EscrowHost host;
    Ledger led{GasSchedule::defaults(), 13.0, Rng(3), &host};
    Address author = led.create_account("author", ether(100));
    Address aff = led.create_account("aff", ether(100));
    Address victim = led.create_account("victim", ether(100));
    Address stranger = led.create_account("stranger", ether(100));
    escrow::ContractId contract;

    const Receipt& exec(Address from, Address to, std::string_view f, Bytes args, Wei value) {
        Transaction tx;
        tx.sender = from;
        tx.nonce = led.next_nonce(from);
        tx.target = ContractCall{to, std::string(f), std::move(args)};
        tx.value = value;
        tx.gas_price = gwei(1);
        TxHash h = led.submit_tx(tx);
        led.mine_next_block(clock);
        const Receipt* r = led.receipt_for(h);
        REQUIRE(r != nullptr);
        REQUIRE(host.invariants_hold(contract));
        return *r;
    }

    void deploy(Wei ransom = ether(1), std::uint32_t share_bp = 3000, bool encrypt = false) {
        Transaction tx;
        tx.sender = author;
        tx.nonce = led.next_nonce(author);
        tx.target = ContractCall{Address{}, std::string(fn::deploy),
                                 EscrowHost::encode_deploy_args(ransom, share_bp, encrypt)};
        tx.value = Wei::zero();
        tx.gas_price = gwei(1);
        TxHash h = led.submit_tx(tx);
        contract = EscrowHost::contract_address_for(h);
        led.mine_next_block(clock);
        REQUIRE(led.receipt_for(h)->status == TxStatus::Succeeded);
    }

    SampleId request_sample() {
        if (!host.is_registered(contract, aff))
            REQUIRE(exec(aff, contract, fn::register_affiliate, {}, Wei::zero()).status ==
                    TxStatus::Succeeded);
        const Receipt& r = exec(aff, contract, fn::request_sample_key, {}, Wei::zero());
        REQUIRE(r.status == TxStatus::Succeeded);
        return r.tx_hash;  // the sample id is the request tx hash
    }

    symcrypto::PublicKey set_pk(const SampleId& sid) {
        auto pk = symcrypto::kdf_keypair(sid).second;
        REQUIRE(exec(author, contract, fn::set_sample_pk,
                     EscrowHost::encode_set_pk_args(sid, pk), Wei::zero())
                    .status == TxStatus::Succeeded);
        return pk;
    }
};

}  // namespace

TEST_CASE("deployment validates arguments and derives a stable contract id") {
    Fixture f;

    // Frozen: the contract id for the canonical deploy-transaction vector.
    Address alice = Ledger::address_from_seed(as_span(std::string_view("alice")));
    Transaction d;
    d.sender = alice;
    d.nonce = 0;
    d.target = ContractCall{Address{}, std::string(fn::deploy),
                            EscrowHost::encode_deploy_args(ether(1), 3000, false)};
    d.value = Wei::zero();
    d.gas_price = gwei(1);
    CHECK(EscrowHost::contract_address_for(d.hash()).hex() ==
          "bf0a500368b10c33d6e7441592f8db57b9210d77");

    // Invalid deployments revert with precise reasons.
    CHECK(f.exec(f.author, Address{}, fn::deploy,
                 EscrowHost::encode_deploy_args(ether(1), 10001, false), Wei::zero())
              .reason == RevertReason::BadShare);
    CHECK(f.exec(f.author, Address{}, fn::deploy,
                 EscrowHost::encode_deploy_args(Wei::zero(), 3000, false), Wei::zero())
              .reason == RevertReason::BadAmount);
    CHECK(f.exec(f.author, Address{}, fn::deploy, to_bytes("garbage"), Wei::zero()).reason ==
          RevertReason::BadArguments);
    CHECK(f.exec(f.author, Address{}, fn::deploy,
                 EscrowHost::encode_deploy_args(ether(1), 3000, false), Wei(1))
              .reason == RevertReason::ValueNotAccepted);

    // The encrypt flag byte must be 0 or 1.
    Bytes args = EscrowHost::encode_deploy_args(ether(1), 3000, false);
    args.back() = 2;
    CHECK(f.exec(f.author, Address{}, fn::deploy, args, Wei::zero()).reason ==
          RevertReason::BadArguments);

    // Only deploy is valid on the zero address; everything else on an
    // unknown contract is UnknownContract.
    CHECK(f.exec(f.author, Address{}, fn::register_affiliate, {}, Wei::zero()).reason ==
          RevertReason::UnknownFunction);
    Address ghost;
    ghost.bytes[0] = 0x77;
    CHECK(f.exec(f.aff, ghost, fn::register_affiliate, {}, Wei::zero()).reason ==
          RevertReason::UnknownContract);

    f.deploy();
    CHECK(f.host.contract_exists(f.contract));
    CHECK(f.exec(f.aff, f.contract, "no_such_function", {}, Wei::zero()).reason ==
          RevertReason::UnknownFunction);

    // Two deployments from different transactions coexist independently.
    escrow::ContractId first = f.contract;
    f.deploy(ether(2), 5000, true);
    CHECK(first != f.contract);
    CHECK(f.host.contract_exists(first));
    CHECK(f.host.state(f.contract)->config.encrypt_onchain_payloads);
    CHECK_FALSE(f.host.state(first)->config.encrypt_onchain_payloads);
}

TEST_CASE("registration is idempotent-rejecting and value-free") {
    Fixture f;
    f.deploy();

    CHECK(f.exec(f.aff, f.contract, fn::register_affiliate, {}, Wei(5)).reason ==
          RevertReason::ValueNotAccepted);
    CHECK(f.exec(f.aff, f.contract, fn::register_affiliate, to_bytes("x"), Wei::zero())
              .reason == RevertReason::BadArguments);

    const Receipt& ok = f.exec(f.aff, f.contract, fn::register_affiliate, {}, Wei::zero());
    CHECK(ok.status == TxStatus::Succeeded);
    REQUIRE(ok.events.size() == 1);
    CHECK(ok.events[0].kind == EventKind::AffiliateRegistered);
    CHECK(f.host.is_registered(f.contract, f.aff));

    CHECK(f.exec(f.aff, f.contract, fn::register_affiliate, {}, Wei::zero()).reason ==
          RevertReason::AlreadyRegistered);
}

TEST_CASE("sample key requests need registration and mint the request hash as id") {
    Fixture f;
    f.deploy();

    CHECK(f.exec(f.stranger, f.contract, fn::request_sample_key, {}, Wei::zero()).reason ==
          RevertReason::NotRegistered);

    SampleId sid = f.request_sample();
    auto view = f.host.sample_view(f.contract, sid);
    REQUIRE(view.ok());
    CHECK(view->affiliate == f.aff);
    CHECK_FALSE(view->pk_set);
    CHECK_FALSE(view->paid);

    // A second request from the same affiliate mints a distinct sample.
    const Receipt& r2 = f.exec(f.aff, f.contract, fn::request_sample_key, {}, Wei::zero());
    CHECK(r2.status == TxStatus::Succeeded);
    CHECK(r2.tx_hash != sid);
    CHECK(f.host.state(f.contract)->affiliates.at(f.aff).sample_ids.size() == 2);
}

TEST_CASE("only the author may publish keys; authorization is checked first") {
    Fixture f;
    f.deploy();
    SampleId sid = f.request_sample();
    auto pk = symcrypto::kdf_keypair(sid).second;

    // Non-author attempts revert NotAuthor even for unknown samples, so the
    // failure leaks nothing about which sample ids exist.
    SampleId bogus{};
    bogus[0] = 0xee;
    for (const SampleId& s : {sid, bogus}) {
        CHECK(f.exec(f.aff, f.contract, fn::set_sample_pk,
                     EscrowHost::encode_set_pk_args(s, pk), Wei::zero())
                  .reason == RevertReason::NotAuthor);
        CHECK(f.exec(f.stranger, f.contract, fn::set_sample_sk,
                     EscrowHost::encode_set_sk_args(s, to_bytes("sk")), Wei::zero())
                  .reason == RevertReason::NotAuthor);
        CHECK(f.exec(f.victim, f.contract, fn::split_ransom,
                     EscrowHost::encode_sample_arg(s), Wei::zero())
                  .reason == RevertReason::NotAuthor);
    }
    CHECK_FALSE(f.host.get_sample_pk(f.contract, sid).ok());

    // The author hits UnknownSample for a bogus id and succeeds on the real one.
    CHECK(f.exec(f.author, f.contract, fn::set_sample_pk,
                 EscrowHost::encode_set_pk_args(bogus, pk), Wei::zero())
              .reason == RevertReason::UnknownSample);
    const Receipt& ok = f.exec(f.author, f.contract, fn::set_sample_pk,
                               EscrowHost::encode_set_pk_args(sid, pk), Wei::zero());
    CHECK(ok.status == TxStatus::Succeeded);
    REQUIRE(ok.events.size() == 1);
    CHECK(ok.events[0].kind == EventKind::SampleKeyPublished);
    CHECK(*f.host.get_sample_pk(f.contract, sid) == pk);
    CHECK(*f.host.find_sample_by_pk(f.contract, pk) == sid);

    CHECK(f.exec(f.author, f.contract, fn::set_sample_pk,
                 EscrowHost::encode_set_pk_args(sid, pk), Wei::zero())
              .reason == RevertReason::PkAlreadySet);

    // A pk may map to at most one sample (the victim looks its sample up by
    // pk, so reuse would be ambiguous).
    SampleId sid2 = f.request_sample();
    CHECK(f.exec(f.author, f.contract, fn::set_sample_pk,
                 EscrowHost::encode_set_pk_args(sid2, pk), Wei::zero())
              .reason == RevertReason::BadArguments);

    // Malformed pk bytes (wrong length) are rejected.
    Bytes short_args = EscrowHost::encode_sample_arg(sid2);
    ByteWriter w;
    w.raw(as_span(short_args));
    w.len_bytes(to_bytes("tiny"));
    CHECK(f.exec(f.author, f.contract, fn::set_sample_pk, w.take(), Wei::zero()).reason ==
          RevertReason::BadArguments);
}

TEST_CASE("payment enforces the exact ransom and single payment per sample") {
    Fixture f;
    f.deploy(ether(1), 3000, false);
    SampleId sid = f.request_sample();

    // Payment before the pk exists is premature.
    CHECK(f.exec(f.victim, f.contract, fn::pay_ransom,
                 EscrowHost::encode_pay_args(sid, std::nullopt), ether(1))
              .reason == RevertReason::PkNotSet);
    f.set_pk(sid);

    SampleId bogus{};
    bogus[0] = 1;
    CHECK(f.exec(f.victim, f.contract, fn::pay_ransom,
                 EscrowHost::encode_pay_args(bogus, std::nullopt), ether(1))
              .reason == RevertReason::UnknownSample);

    // Off-by-anything amounts revert in both directions.
    CHECK(f.exec(f.victim, f.contract, fn::pay_ransom,
                 EscrowHost::encode_pay_args(sid, std::nullopt), ether(1) - Wei(1))
              .reason == RevertReason::WrongAmount);
    CHECK(f.exec(f.victim, f.contract, fn::pay_ransom,
                 EscrowHost::encode_pay_args(sid, std::nullopt), ether(1) + Wei(1))
              .reason == RevertReason::WrongAmount);

    // In clear mode a recipient pk must not be supplied.
    auto eph = symcrypto::kdf_keypair(bogus).second;
    CHECK(f.exec(f.victim, f.contract, fn::pay_ransom,
                 EscrowHost::encode_pay_args(sid, eph), ether(1))
              .reason == RevertReason::BadArguments);

    Wei victim_before = f.led.balance(f.victim);
    const Receipt& ok = f.exec(f.victim, f.contract, fn::pay_ransom,
                               EscrowHost::encode_pay_args(sid, std::nullopt), ether(1));
    CHECK(ok.status == TxStatus::Succeeded);
    REQUIRE(ok.events.size() == 1);
    CHECK(ok.events[0].kind == EventKind::RansomPaid);
    CHECK(*f.host.escrow_balance(f.contract) == ether(1));
    CHECK(f.led.balance(f.contract) == ether(1));
    CHECK(f.led.balance(f.victim) ==
          victim_before - ether(1) - gwei(1).times(GasSchedule::defaults().pay));

    CHECK(f.exec(f.stranger, f.contract, fn::pay_ransom,
                 EscrowHost::encode_pay_args(sid, std::nullopt), ether(1))
              .reason == RevertReason::AlreadyPaid);
}

TEST_CASE("encrypted mode requires the payer to supply a recipient pk") {
    Fixture f;
    f.deploy(ether(1), 3000, true);
    SampleId sid = f.request_sample();
    f.set_pk(sid);

    CHECK(f.exec(f.victim, f.contract, fn::pay_ransom,
                 EscrowHost::encode_pay_args(sid, std::nullopt), ether(1))
              .reason == RevertReason::BadArguments);

    symcrypto::SecretKey esk{Rng(77).bytes32()};
    auto epk = symcrypto::public_key_of(esk);
    const Receipt& ok = f.exec(f.victim, f.contract, fn::pay_ransom,
                               EscrowHost::encode_pay_args(sid, epk), ether(1));
    CHECK(ok.status == TxStatus::Succeeded);
    CHECK(ok.events[0].attributes.contains("recipient_pk"));

    // The published secret is recorded as encrypted payload.
    auto [sk, pk] = symcrypto::kdf_keypair(sid);
    Bytes sealed = symcrypto::seal(epk, Bytes(sk.v.begin(), sk.v.end())).encode();
    const Receipt& skr = f.exec(f.author, f.contract, fn::set_sample_sk,
                                EscrowHost::encode_set_sk_args(sid, sealed), Wei::zero());
    CHECK(skr.status == TxStatus::Succeeded);
    auto stored = f.host.get_sample_sk(f.contract, sid);
    REQUIRE(stored.ok());
    CHECK(stored->encrypted);
    CHECK(stored->payload == sealed);
    (void)pk;
}

TEST_CASE("the split pays exact floor shares and zeroes the escrowed ransom") {
    Fixture f;
    f.deploy(ether(1), 3333, false);
    SampleId sid = f.request_sample();
    f.set_pk(sid);

    CHECK(f.exec(f.author, f.contract, fn::split_ransom, EscrowHost::encode_sample_arg(sid),
                 Wei::zero())
              .reason == RevertReason::NotPaid);

    REQUIRE(f.exec(f.victim, f.contract, fn::pay_ransom,
                   EscrowHost::encode_pay_args(sid, std::nullopt), ether(1))
                .status == TxStatus::Succeeded);

    Wei aff_before = f.led.balance(f.aff);
    Wei author_before = f.led.balance(f.author);
    const Receipt& ok = f.exec(f.author, f.contract, fn::split_ransom,
                               EscrowHost::encode_sample_arg(sid), Wei::zero());
    CHECK(ok.status == TxStatus::Succeeded);
    REQUIRE(ok.events.size() == 1);
    CHECK(ok.events[0].kind == EventKind::RansomSplit);

    Wei aff_cut = ether(1).mul_div(3333, 10000);
    Wei author_cut = ether(1) - aff_cut;
    CHECK(aff_cut == Wei::from_string("333300000000000000"));
    CHECK(f.led.balance(f.aff) == aff_before + aff_cut);
    CHECK(f.led.balance(f.author) ==
          author_before + author_cut - gwei(1).times(GasSchedule::defaults().split));
    CHECK(f.led.balance(f.contract) == Wei::zero());
    CHECK(*f.host.escrow_balance(f.contract) == Wei::zero());

    CHECK(f.exec(f.author, f.contract, fn::split_ransom, EscrowHost::encode_sample_arg(sid),
                 Wei::zero())
              .reason == RevertReason::AlreadySplit);
}

TEST_CASE("split rounding: the author absorbs the remainder, nothing is lost") {
    Fixture f;
    f.deploy(Wei(7), 5000, false);  // 7 wei ransom, 50% share
    SampleId sid = f.request_sample();
    f.set_pk(sid);
    REQUIRE(f.exec(f.victim, f.contract, fn::pay_ransom,
                   EscrowHost::encode_pay_args(sid, std::nullopt), Wei(7))
                .status == TxStatus::Succeeded);

    Wei aff_before = f.led.balance(f.aff);
    Wei author_before = f.led.balance(f.author);
    f.exec(f.author, f.contract, fn::split_ransom, EscrowHost::encode_sample_arg(sid),
           Wei::zero());
    CHECK(f.led.balance(f.aff) == aff_before + Wei(3));  // floor(7 * 0.5)
    CHECK(f.led.balance(f.author) ==
          author_before + Wei(4) - gwei(1).times(GasSchedule::defaults().split));
    CHECK(f.led.balance(f.contract) == Wei::zero());
}

TEST_CASE("secret publication happens only after payment and only once") {
    Fixture f;
    f.deploy();
    SampleId sid = f.request_sample();
    f.set_pk(sid);

    Bytes payload(32, 0xab);
    CHECK(f.exec(f.author, f.contract, fn::set_sample_sk,
                 EscrowHost::encode_set_sk_args(sid, payload), Wei::zero())
              .reason == RevertReason::NotPaid);
    CHECK_FALSE(f.host.get_sample_sk(f.contract, sid).ok());
    CHECK(f.host.get_sample_sk(f.contract, sid).reason == RevertReason::SkNotSet);

    REQUIRE(f.exec(f.victim, f.contract, fn::pay_ransom,
                   EscrowHost::encode_pay_args(sid, std::nullopt), ether(1))
                .status == TxStatus::Succeeded);

    CHECK(f.exec(f.author, f.contract, fn::set_sample_sk,
                 EscrowHost::encode_set_sk_args(sid, {}), Wei::zero())
              .reason == RevertReason::BadArguments);  // empty payload

    const Receipt& ok = f.exec(f.author, f.contract, fn::set_sample_sk,
                               EscrowHost::encode_set_sk_args(sid, payload), Wei::zero());
    CHECK(ok.status == TxStatus::Succeeded);
    CHECK(ok.events[0].kind == EventKind::SampleSecretPublished);
    auto stored = f.host.get_sample_sk(f.contract, sid);
    REQUIRE(stored.ok());
    CHECK_FALSE(stored->encrypted);
    CHECK(stored->payload == payload);

    CHECK(f.exec(f.author, f.contract, fn::set_sample_sk,
                 EscrowHost::encode_set_sk_args(sid, payload), Wei::zero())
              .reason == RevertReason::SkAlreadySet);

    // The split is independent of secret publication and still works after.
    CHECK(f.exec(f.author, f.contract, fn::split_ransom, EscrowHost::encode_sample_arg(sid),
                 Wei::zero())
              .status == TxStatus::Succeeded);
}

TEST_CASE("reverted calls leave the contract state untouched") {
    Fixture f;
    f.deploy();
    SampleId sid = f.request_sample();
    f.set_pk(sid);

    const escrow::EscrowState* st = f.host.state(f.contract);
    REQUIRE(st != nullptr);
    auto keys_before = st->keys;
    auto affiliates_before = st->affiliates;
    Wei balance_before = st->escrow_balance;

    // A burst of invalid operations spanning every entry point.
    f.exec(f.stranger, f.contract, fn::register_affiliate, to_bytes("?"), Wei::zero());
    f.exec(f.stranger, f.contract, fn::request_sample_key, {}, Wei::zero());
    f.exec(f.stranger, f.contract, fn::set_sample_pk,
           EscrowHost::encode_set_pk_args(sid, symcrypto::kdf_keypair(sid).second),
           Wei::zero());
    f.exec(f.victim, f.contract, fn::pay_ransom, EscrowHost::encode_pay_args(sid, std::nullopt),
           Wei(123));
    f.exec(f.stranger, f.contract, fn::split_ransom, EscrowHost::encode_sample_arg(sid),
           Wei::zero());
    f.exec(f.stranger, f.contract, fn::set_sample_sk,
           EscrowHost::encode_set_sk_args(sid, to_bytes("zz")), Wei::zero());

    st = f.host.state(f.contract);
    CHECK(st->escrow_balance == balance_before);
    CHECK(st->keys.size() == keys_before.size());
    CHECK(st->affiliates.size() == affiliates_before.size());
    CHECK_FALSE(st->keys.at(sid).paid_by.has_value());
    CHECK_FALSE(st->keys.at(sid).sk_payload.has_value());
    CHECK(f.led.event_log().size() == 3);  // register + request + set_pk only
}

TEST_CASE("reads report precise failure reasons") {
    Fixture f;
    SampleId sid{};
    Address ghost;
    ghost.bytes[0] = 9;
    CHECK(f.host.get_sample_pk(ghost, sid).reason == RevertReason::UnknownContract);
    CHECK(f.host.escrow_balance(ghost).reason == RevertReason::UnknownContract);
    CHECK(f.host.state(ghost) == nullptr);

    f.deploy();
    CHECK(f.host.get_sample_pk(f.contract, sid).reason == RevertReason::UnknownSample);
    CHECK(f.host.sample_view(f.contract, sid).reason == RevertReason::UnknownSample);

    SampleId real = f.request_sample();
    CHECK(f.host.get_sample_pk(f.contract, real).reason == RevertReason::PkNotSet);
    symcrypto::PublicKey nobody{};
    CHECK(f.host.find_sample_by_pk(f.contract, nobody).reason == RevertReason::UnknownSample);
}
