#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "escrowsim/digest.hpp"
#include "escrowsim/scenario.hpp"

namespace escrowsim::agents {

using nlohmann::json;

std::string_view to_string(VictimPhase p) {
    switch (p) {
        case VictimPhase::Dormant: return "Dormant";
        case VictimPhase::Infected: return "Infected";
        case VictimPhase::Paid: return "Paid";
        case VictimPhase::Recovered: return "Recovered";
        case VictimPhase::Abandoned: return "Abandoned";
    }
    return "Unknown";
}

namespace {

// Wei fields accept either a decimal string (full range) or a JSON integer.
bool read_wei(const json& v, Wei& out, std::string& err) {
    try {
        if (v.is_string()) {
            out = Wei::from_string(v.get<std::string>());
            return true;
        }
        if (v.is_number_unsigned()) {
            out = Wei(static_cast<u128>(v.get<std::uint64_t>()));
            return true;
        }
    } catch (const Error& e) {
        err = e.what();
        return false;
    }
    err = "expected a decimal string or unsigned integer";
    return false;
}

struct FieldReader {
    const json& doc;
    std::vector<ConfigIssue>& errors;

    // Strict typing: JSON numbers never silently wrap or truncate.
    template <typename T>
    void get(const char* name, T& out) {
        if (!doc.contains(name)) return;
        const json& v = doc.at(name);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) return void(errors.push_back({name, "expected boolean"}));
            out = v.get<bool>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned())
                return void(errors.push_back({name, "expected unsigned integer"}));
            std::uint64_t raw = v.get<std::uint64_t>();
            if (raw > std::numeric_limits<T>::max())
                return void(errors.push_back({name, "out of range"}));
            out = static_cast<T>(raw);
        } else {
            static_assert(std::is_floating_point_v<T>);
            if (!v.is_number()) return void(errors.push_back({name, "expected number"}));
            out = v.get<double>();
        }
    }

    void get_wei(const char* name, Wei& out) {
        if (!doc.contains(name)) return;
        std::string err;
        if (!read_wei(doc.at(name), out, err)) errors.push_back({name, err});
    }
};

void check_known_fields(const json& doc, const std::set<std::string>& known, const char* prefix,
                        std::vector<ConfigIssue>& errors) {
    for (const auto& [key, _] : doc.items()) {
        if (!known.contains(key))
            errors.push_back({std::string(prefix) + key, "unknown field"});
    }
}

}  // namespace

std::vector<ConfigIssue> validate_config(const ScenarioConfig& cfg) {
    std::vector<ConfigIssue> issues;
    auto bad = [&](const char* field, const char* msg) { issues.push_back({field, msg}); };

    if (!(cfg.pay_probability >= 0.0 && cfg.pay_probability <= 1.0))
        bad("pay_probability", "must be in [0, 1]");
    if (cfg.ransom_amount.is_zero()) bad("ransom_amount", "must be positive");
    if (cfg.affiliate_share_bp > 10000) bad("affiliate_share_bp", "must be at most 10000");
    if (!(std::isfinite(cfg.block_mean_s) && cfg.block_mean_s > 0))
        bad("block_mean_s", "must be a positive number");
    if (!cfg.gas_schedule.all_positive()) bad("gas_schedule", "all entries must be positive");
    if (cfg.churn) {
        if (!(std::isfinite(cfg.churn->mean_online_s) && cfg.churn->mean_online_s > 0))
            bad("churn.mean_online_s", "must be a positive number");
        if (!(std::isfinite(cfg.churn->mean_offline_s) && cfg.churn->mean_offline_s > 0))
            bad("churn.mean_offline_s", "must be a positive number");
    }
    if (cfg.author_poll_blocks == 0) bad("author_poll_blocks", "must be at least 1");
    if (cfg.duration_blocks == 0) bad("duration_blocks", "must be at least 1");
    return issues;
}

ConfigLoadResult parse_config_text(const std::string& text) {
    ConfigLoadResult res;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        res.errors.push_back({"", e.what()});  // message carries line/column
        return res;
    }
    if (!doc.is_object()) {
        res.errors.push_back({"", "config must be a JSON object"});
        return res;
    }

    static const std::set<std::string> kKnown = {
        "seed",           "n_affiliates",     "samples_per_affiliate",
        "victims_per_sample", "pay_probability", "ransom_amount",
        "affiliate_share_bp", "gas_price",    "gas_schedule",
        "block_mean_s",   "churn",            "n_store_nodes",
        "author_poll_blocks", "encrypt_onchain_payloads", "duration_blocks",
        "split_before_sk",
    };
    check_known_fields(doc, kKnown, "", res.errors);

    ScenarioConfig cfg;
    FieldReader r{doc, res.errors};
    r.get("seed", cfg.seed);
    r.get("n_affiliates", cfg.n_affiliates);
    r.get("samples_per_affiliate", cfg.samples_per_affiliate);
    r.get("victims_per_sample", cfg.victims_per_sample);
    r.get("pay_probability", cfg.pay_probability);
    r.get_wei("ransom_amount", cfg.ransom_amount);
    r.get("affiliate_share_bp", cfg.affiliate_share_bp);
    r.get_wei("gas_price", cfg.gas_price);
    r.get("block_mean_s", cfg.block_mean_s);
    r.get("n_store_nodes", cfg.n_store_nodes);
    r.get("author_poll_blocks", cfg.author_poll_blocks);
    r.get("encrypt_onchain_payloads", cfg.encrypt_onchain_payloads);
    r.get("duration_blocks", cfg.duration_blocks);
    r.get("split_before_sk", cfg.split_before_sk);

    if (doc.contains("gas_schedule")) {
        const json& g = doc.at("gas_schedule");
        if (!g.is_object()) {
            res.errors.push_back({"gas_schedule", "must be an object"});
        } else {
            static const std::set<std::string> kGasKnown = {
                "deploy", "register", "request_key", "set_pk", "set_sk", "pay", "split"};
            check_known_fields(g, kGasKnown, "gas_schedule.", res.errors);
            FieldReader gr{g, res.errors};
            gr.get("deploy", cfg.gas_schedule.deploy);
            gr.get("register", cfg.gas_schedule.register_affiliate);
            gr.get("request_key", cfg.gas_schedule.request_key);
            gr.get("set_pk", cfg.gas_schedule.set_pk);
            gr.get("set_sk", cfg.gas_schedule.set_sk);
            gr.get("pay", cfg.gas_schedule.pay);
            gr.get("split", cfg.gas_schedule.split);
        }
    } else {
        res.notices.push_back("gas_schedule not given; using built-in defaults");
    }

    if (doc.contains("churn") && !doc.at("churn").is_null()) {
        const json& c = doc.at("churn");
        if (!c.is_object()) {
            res.errors.push_back({"churn", "must be an object or null"});
        } else {
            static const std::set<std::string> kChurnKnown = {"mean_online_s", "mean_offline_s"};
            check_known_fields(c, kChurnKnown, "churn.", res.errors);
            caststore::ChurnParams churn;
            churn.mean_online_s = 0;
            churn.mean_offline_s = 0;
            FieldReader cr{c, res.errors};
            cr.get("mean_online_s", churn.mean_online_s);
            cr.get("mean_offline_s", churn.mean_offline_s);
            cfg.churn = churn;
        }
    }

    for (const auto& issue : validate_config(cfg)) res.errors.push_back(issue);
    if (res.errors.empty()) res.config = cfg;
    return res;
}

ConfigLoadResult load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigLoadResult res;
        res.errors.push_back({"", "cannot open config file: " + path});
        return res;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string canonical_config_json(const ScenarioConfig& cfg) {
    json doc{
        {"seed", cfg.seed},
        {"n_affiliates", cfg.n_affiliates},
        {"samples_per_affiliate", cfg.samples_per_affiliate},
        {"victims_per_sample", cfg.victims_per_sample},
        {"pay_probability", cfg.pay_probability},
        {"ransom_amount", cfg.ransom_amount.to_string()},
        {"affiliate_share_bp", cfg.affiliate_share_bp},
        {"gas_price", cfg.gas_price.to_string()},
        {"gas_schedule",
         json{{"deploy", cfg.gas_schedule.deploy},
              {"register", cfg.gas_schedule.register_affiliate},
              {"request_key", cfg.gas_schedule.request_key},
              {"set_pk", cfg.gas_schedule.set_pk},
              {"set_sk", cfg.gas_schedule.set_sk},
              {"pay", cfg.gas_schedule.pay},
              {"split", cfg.gas_schedule.split}}},
        {"block_mean_s", cfg.block_mean_s},
        {"n_store_nodes", cfg.n_store_nodes},
        {"author_poll_blocks", cfg.author_poll_blocks},
        {"encrypt_onchain_payloads", cfg.encrypt_onchain_payloads},
        {"duration_blocks", cfg.duration_blocks},
        {"split_before_sk", cfg.split_before_sk},
    };
    if (cfg.churn)
        doc["churn"] = json{{"mean_online_s", cfg.churn->mean_online_s},
                            {"mean_offline_s", cfg.churn->mean_offline_s}};
    else
        doc["churn"] = nullptr;
    return doc.dump();  // keys are stored sorted; dump is canonical
}

Hash32 config_digest(const ScenarioConfig& cfg) {
    return sha256(std::string_view(canonical_config_json(cfg)));
}

}  // namespace escrowsim::agents
