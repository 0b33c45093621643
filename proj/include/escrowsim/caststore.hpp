#pragma once

#include <cstdint>
#include <limits>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "escrowsim/bytes.hpp"
#include "escrowsim/clock.hpp"
#include "escrowsim/rng.hpp"

namespace escrowsim::caststore {

/// Alternating exponential online/offline durations. A non-finite
/// mean_offline_s disables churn entirely (the node stays online).
struct ChurnParams {
    double mean_online_s = std::numeric_limits<double>::infinity();
    double mean_offline_s = std::numeric_limits<double>::infinity();

    static ChurnParams always_online() { return ChurnParams{}; }
    bool churns() const {
        return std::isfinite(mean_online_s) && std::isfinite(mean_offline_s);
    }
};

struct NodeId {
    std::array<std::uint8_t, 20> bytes{};
    auto operator<=>(const NodeId&) const = default;
    std::string hex() const { return to_hex({bytes.data(), bytes.size()}); }
};

enum class ContentKind : std::uint8_t { RegistrationPage, PaymentPage, SampleDescriptor, Other };

std::string_view to_string(ContentKind k);

struct RetrieveResult {
    enum class Status { Ok, Unavailable, RequesterOffline };
    Status status = Status::Unavailable;
    Bytes bytes;
    ContentKind kind = ContentKind::Other;

    bool ok() const { return status == Status::Ok; }
};

struct Availability {
    std::size_t holders = 0;
    std::size_t online_holders = 0;
};

/// Content-addressed storage overlay with node churn, retrieval-driven
/// caching, pinning, and per-node blacklists. Retrieval is oracle lookup
/// over online holders; there is no routing or latency model.
class ContentStore {
public:
    ContentStore(ScenarioClock& clock, Rng rng);

    /// Creates a node (online) and schedules its churn transitions.
    NodeId add_node(std::span<const std::uint8_t> seed, ChurnParams churn);
    NodeId add_node(std::string_view seed, ChurnParams churn);

    /// Stores content on the node and returns its digest id. The publisher
    /// must be online.
    ContentId publish(const NodeId& node, Bytes bytes, ContentKind kind, bool pin);

    /// Succeeds iff some online node holds the id and does not blacklist it;
    /// the requester then caches an unpinned copy.
    RetrieveResult retrieve(const NodeId& requester, const ContentId& id);

    Availability availability(const ContentId& id) const;

    void set_blacklist(const NodeId& node, const ContentId& id, bool on);
    /// Drops an unpinned copy; pinned content is never evicted.
    bool evict(const NodeId& node, const ContentId& id);
    /// Caps the number of unpinned objects a node holds (LRU beyond it).
    void set_capacity(const NodeId& node, std::size_t max_unpinned);

    void set_online(const NodeId& node, bool online);
    /// Stops scheduling churn transitions for the node.
    void disable_churn(const NodeId& node);
    bool is_online(const NodeId& node) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t online_count() const;

private:
    struct Held {
        bool pinned = false;
        std::list<ContentId>::iterator lru_pos;  // valid only when !pinned
    };
    struct Node {
        NodeId id;
        bool online = true;
        ChurnParams churn;
        std::uint64_t churn_epoch = 0;  // invalidates stale scheduled transitions
        std::map<ContentId, Held> held;
        std::list<ContentId> lru;  // front = most recent
        std::size_t capacity = std::numeric_limits<std::size_t>::max();
        std::set<ContentId> blacklist;
    };
    struct Object {
        Bytes bytes;
        ContentKind kind;
    };

    Node& node_at(const NodeId& id);
    const Node& node_at(const NodeId& id) const;
    void store_copy(Node& n, const ContentId& id, bool pin);
    void schedule_transition(std::size_t index);

    ScenarioClock& clock_;
    Rng rng_;
    std::vector<Node> nodes_;
    std::map<NodeId, std::size_t> index_;
    std::map<ContentId, Object> objects_;
    std::uint64_t node_counter_ = 0;
};

}  // namespace escrowsim::caststore
