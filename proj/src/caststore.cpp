#include "escrowsim/caststore.hpp"

#include <cmath>

#include "escrowsim/digest.hpp"

namespace escrowsim::caststore {

std::string_view to_string(ContentKind k) {
    switch (k) {
        case ContentKind::RegistrationPage: return "RegistrationPage";
        case ContentKind::PaymentPage: return "PaymentPage";
        case ContentKind::SampleDescriptor: return "SampleDescriptor";
        case ContentKind::Other: return "Other";
    }
    return "Other";
}

ContentStore::ContentStore(ScenarioClock& clock, Rng rng) : clock_(clock), rng_(rng) {}

NodeId ContentStore::add_node(std::span<const std::uint8_t> seed, ChurnParams churn) {
    if (seed.empty()) throw Error(Errc::BadSeed, "empty node seed");
    bool online_finite = std::isfinite(churn.mean_online_s);
    bool offline_finite = std::isfinite(churn.mean_offline_s);
    if (online_finite != offline_finite)
        throw Error(Errc::BadChurnParams, "churn means must both be finite or both infinite");
    if (churn.churns() && (churn.mean_online_s <= 0 || churn.mean_offline_s <= 0))
        throw Error(Errc::BadChurnParams, "churn means must be positive");

    // Salting with a counter keeps ids distinct even for duplicate seeds.
    ByteWriter w;
    w.u64be(node_counter_++);
    Bytes salt = w.take();
    Hash32 h = tagged_digest("node", {seed, {salt.data(), salt.size()}});
    NodeId id;
    std::memcpy(id.bytes.data(), h.data(), id.bytes.size());

    Node n;
    n.id = id;
    n.churn = churn;
    index_.emplace(id, nodes_.size());
    nodes_.push_back(std::move(n));
    schedule_transition(nodes_.size() - 1);
    return id;
}

NodeId ContentStore::add_node(std::string_view seed, ChurnParams churn) {
    return add_node(as_span(seed), churn);
}

void ContentStore::schedule_transition(std::size_t index) {
    Node& n = nodes_[index];
    if (!n.churn.churns()) return;
    double mean = n.online ? n.churn.mean_online_s : n.churn.mean_offline_s;
    double at = clock_.now() + rng_.exponential(mean);
    std::uint64_t epoch = n.churn_epoch;
    clock_.schedule(at, [this, index, epoch] {
        Node& node = nodes_[index];
        if (node.churn_epoch != epoch || !node.churn.churns()) return;
        node.online = !node.online;
        schedule_transition(index);
    });
}

ContentStore::Node& ContentStore::node_at(const NodeId& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(Errc::UnknownNode, "unknown node: " + id.hex());
    return nodes_[it->second];
}

const ContentStore::Node& ContentStore::node_at(const NodeId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(Errc::UnknownNode, "unknown node: " + id.hex());
    return nodes_[it->second];
}

void ContentStore::store_copy(Node& n, const ContentId& id, bool pin) {
    auto it = n.held.find(id);
    if (it != n.held.end()) {
        if (!it->second.pinned) {
            if (pin) {
                n.lru.erase(it->second.lru_pos);
                it->second.pinned = true;
            } else {
                n.lru.splice(n.lru.begin(), n.lru, it->second.lru_pos);  // touch
            }
        }
        return;
    }
    Held h;
    h.pinned = pin;
    if (!pin) {
        n.lru.push_front(id);
        h.lru_pos = n.lru.begin();
    }
    n.held.emplace(id, h);
    while (n.lru.size() > n.capacity) {
        n.held.erase(n.lru.back());
        n.lru.pop_back();
    }
}

ContentId ContentStore::publish(const NodeId& node, Bytes bytes, ContentKind kind, bool pin) {
    Node& n = node_at(node);
    if (!n.online) throw Error(Errc::NodeOffline, "publisher is offline");
    ContentId id = sha256(std::span<const std::uint8_t>(bytes.data(), bytes.size()));
    objects_.emplace(id, Object{std::move(bytes), kind});
    store_copy(n, id, pin);
    return id;
}

RetrieveResult ContentStore::retrieve(const NodeId& requester, const ContentId& id) {
    Node& req = node_at(requester);
    if (!req.online) return RetrieveResult{RetrieveResult::Status::RequesterOffline, {}, {}};
    if (req.blacklist.contains(id))
        return RetrieveResult{RetrieveResult::Status::Unavailable, {}, {}};

    auto obj = objects_.find(id);
    if (obj == objects_.end())
        return RetrieveResult{RetrieveResult::Status::Unavailable, {}, {}};

    bool found = req.held.contains(id);
    if (!found) {
        for (const Node& n : nodes_) {
            if (n.online && n.held.contains(id) && !n.blacklist.contains(id)) {
                found = true;
                break;
            }
        }
    }
    if (!found) return RetrieveResult{RetrieveResult::Status::Unavailable, {}, {}};

    // Content addressing: what is served must hash to what was asked for.
    if (sha256(std::span<const std::uint8_t>(obj->second.bytes.data(),
                                             obj->second.bytes.size())) != id)
        throw Error(Errc::IoError, "stored content does not match its id");

    store_copy(req, id, /*pin=*/false);  // retrieval-driven replication
    return RetrieveResult{RetrieveResult::Status::Ok, obj->second.bytes, obj->second.kind};
}

Availability ContentStore::availability(const ContentId& id) const {
    Availability a;
    for (const Node& n : nodes_) {
        if (!n.held.contains(id)) continue;
        ++a.holders;
        if (n.online) ++a.online_holders;
    }
    return a;
}

void ContentStore::set_blacklist(const NodeId& node, const ContentId& id, bool on) {
    Node& n = node_at(node);
    if (on)
        n.blacklist.insert(id);
    else
        n.blacklist.erase(id);
}

bool ContentStore::evict(const NodeId& node, const ContentId& id) {
    Node& n = node_at(node);
    auto it = n.held.find(id);
    if (it == n.held.end() || it->second.pinned) return false;
    n.lru.erase(it->second.lru_pos);
    n.held.erase(it);
    return true;
}

void ContentStore::set_capacity(const NodeId& node, std::size_t max_unpinned) {
    Node& n = node_at(node);
    n.capacity = max_unpinned;
    while (n.lru.size() > n.capacity) {
        n.held.erase(n.lru.back());
        n.lru.pop_back();
    }
}

void ContentStore::set_online(const NodeId& node, bool online) {
    Node& n = node_at(node);
    ++n.churn_epoch;  // cancel any pending scheduled transition
    n.online = online;
    auto it = index_.find(node);
    schedule_transition(it->second);
}

void ContentStore::disable_churn(const NodeId& node) {
    Node& n = node_at(node);
    ++n.churn_epoch;
    n.churn = ChurnParams::always_online();
}

bool ContentStore::is_online(const NodeId& node) const {
    return node_at(node).online;
}

std::size_t ContentStore::online_count() const {
    std::size_t c = 0;
    for (const Node& n : nodes_)
        if (n.online) ++c;
    return c;
}

}  // namespace escrowsim::caststore
