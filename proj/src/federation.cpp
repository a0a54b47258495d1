#include "fedsilo/federation.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sys/stat.h>

#include "json.hpp"

#include "fedsilo/comm.hpp"
#include "fedsilo/crypto.hpp"

namespace fedsilo {

bool FederationManifest::is_member(std::string_view identity) const {
    for (const auto& m : members)
        if (m.identity == identity) return true;
    return false;
}

const Member* FederationManifest::owner() const {
    for (const auto& m : members)
        if (m.role == Role::Owner) return &m;
    return nullptr;
}

const EndpointRecord* FederationManifest::find_endpoint(std::string_view endpoint_id) const {
    for (const auto& e : endpoints)
        if (e.endpoint_id == endpoint_id) return &e;
    return nullptr;
}

FederationManifest create_federation(const std::string& owner_identity,
                                     const std::string& email) {
    if (owner_identity.empty()) fail(Err::BadConfig, "owner identity must be nonempty");
    FederationManifest m;
    m.group_id = new_uuid();
    m.members.push_back({owner_identity, email, Role::Owner});

    std::random_device rd;
    for (std::size_t i = 0; i < m.signing_secret.size(); i += 4) {
        const std::uint32_t r = rd();
        for (std::size_t k = 0; k < 4; ++k) m.signing_secret[i + k] = std::uint8_t(r >> (8 * k));
    }
    return m;
}

void add_member(FederationManifest& manifest, const std::string& identity,
                const std::string& email) {
    if (identity.empty()) fail(Err::BadConfig, "member identity must be nonempty");
    if (manifest.is_member(identity))
        fail(Err::DuplicateMember, "'" + identity + "' is already a member");
    manifest.members.push_back({identity, email, Role::Member});
}

EndpointRecord register_endpoint(FederationManifest& manifest,
                                 const std::string& owner_identity,
                                 const std::string& dataloader_name,
                                 const std::string& address) {
    if (!manifest.is_member(owner_identity))
        fail(Err::NotAMember, "'" + owner_identity + "' is not a federation member");
    manifest.endpoints.push_back({new_uuid(), owner_identity, dataloader_name, address});
    return manifest.endpoints.back();
}

std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

namespace {

std::string canonical_claims_json(const TokenClaims& c) {
    // nlohmann orders object keys, which gives a canonical byte string
    const nlohmann::json j = {{"expiry", c.expiry},
                              {"group_id", c.group_id},
                              {"round", c.round},
                              {"sender", c.sender},
                              {"task_id", c.task_id}};
    return j.dump();
}

} // namespace

std::string sign_claims(const FederationManifest& manifest, const TokenClaims& claims) {
    return hmac_sha256_hex(manifest.signing_secret, canonical_claims_json(claims));
}

std::string issue_token(const FederationManifest& manifest, const std::string& sender,
                        const std::string& task_id, std::int64_t round,
                        std::int64_t ttl_seconds, std::optional<std::int64_t> now) {
    if (!manifest.is_member(sender))
        fail(Err::NotAMember, "token sender '" + sender + "' is not a member");
    TokenClaims claims;
    claims.group_id = manifest.group_id;
    claims.sender = sender;
    claims.task_id = task_id;
    claims.round = round;
    claims.expiry = now.value_or(unix_now()) + ttl_seconds;

    nlohmann::json token = {{"claims",
                             {{"expiry", claims.expiry},
                              {"group_id", claims.group_id},
                              {"round", claims.round},
                              {"sender", claims.sender},
                              {"task_id", claims.task_id}}},
                            {"sig", sign_claims(manifest, claims)}};
    return token.dump();
}

VerifyResult verify_token(const FederationManifest& manifest, const std::string& token,
                          const std::string& expected_task_id,
                          std::optional<std::int64_t> now_opt,
                          std::int64_t skew_tolerance_seconds) {
    VerifyResult out;
    TokenClaims claims;
    std::string sig;
    try {
        const auto j = nlohmann::json::parse(token);
        const auto& c = j.at("claims");
        claims.group_id = c.at("group_id").get<std::string>();
        claims.sender = c.at("sender").get<std::string>();
        claims.task_id = c.at("task_id").get<std::string>();
        claims.round = c.at("round").get<std::int64_t>();
        claims.expiry = c.at("expiry").get<std::int64_t>();
        sig = j.at("sig").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        out.reject_reason = "BadSignature";
        return out;
    }
    out.claims = claims;

    if (!constant_time_eq(sig, sign_claims(manifest, claims))) {
        out.reject_reason = "BadSignature";
        return out;
    }
    if (claims.group_id != manifest.group_id) {
        out.reject_reason = "WrongGroup";
        return out;
    }
    if (!manifest.is_member(claims.sender)) {
        out.reject_reason = "UnknownSender";
        return out;
    }
    if (claims.task_id != expected_task_id) {
        out.reject_reason = "TaskMismatch";
        return out;
    }
    const std::int64_t now = now_opt.value_or(unix_now());
    if (now >= claims.expiry + skew_tolerance_seconds) {
        out.reject_reason = "Expired";
        return out;
    }
    out.accepted = true;
    return out;
}

std::string default_secret_path(const std::string& manifest_path, const std::string& group_id) {
    const auto dir = std::filesystem::path(manifest_path).parent_path();
    return (dir / (group_id + ".secret")).string();
}

void save_manifest(const FederationManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["group_id"] = manifest.group_id;
    j["members"] = nlohmann::json::array();
    for (const auto& m : manifest.members) {
        j["members"].push_back({{"identity", m.identity},
                                {"email", m.email},
                                {"role", m.role == Role::Owner ? "owner" : "member"}});
    }
    j["endpoints"] = nlohmann::json::array();
    for (const auto& e : manifest.endpoints) {
        j["endpoints"].push_back({{"endpoint_id", e.endpoint_id},
                                  {"owner_identity", e.owner_identity},
                                  {"dataloader_name", e.dataloader_name},
                                  {"address", e.address}});
    }
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out) fail(Err::SourceUnreadable, "cannot write manifest '" + path + "'");
        out << j.dump(2) << "\n";
    }
    const std::string spath = default_secret_path(path, manifest.group_id);
    {
        std::ofstream out(spath, std::ios::trunc);
        if (!out) fail(Err::SourceUnreadable, "cannot write secret '" + spath + "'");
        out << to_hex(manifest.signing_secret) << "\n";
    }
    ::chmod(spath.c_str(), 0600);
}

FederationManifest load_manifest(const std::string& path, const std::string& secret_path) {
    std::ifstream in(path);
    if (!in) fail(Err::SourceUnreadable, "cannot open manifest '" + path + "'");
    FederationManifest m;
    try {
        nlohmann::json j;
        in >> j;
        m.group_id = j.at("group_id").get<std::string>();
        for (const auto& jm : j.at("members")) {
            m.members.push_back({jm.at("identity").get<std::string>(),
                                 jm.at("email").get<std::string>(),
                                 jm.at("role").get<std::string>() == "owner" ? Role::Owner
                                                                             : Role::Member});
        }
        for (const auto& je : j.at("endpoints")) {
            m.endpoints.push_back({je.at("endpoint_id").get<std::string>(),
                                   je.at("owner_identity").get<std::string>(),
                                   je.at("dataloader_name").get<std::string>(),
                                   je.at("address").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Err::BadConfig, std::string("manifest JSON: ") + e.what());
    }

    // roster invariants hold for hand-edited manifests too
    int owners = 0;
    std::set<std::string> identities;
    for (const auto& member : m.members) {
        if (member.role == Role::Owner) ++owners;
        if (!identities.insert(member.identity).second)
            fail(Err::BadConfig, "duplicate member '" + member.identity + "' in manifest");
    }
    if (owners != 1) fail(Err::BadConfig, "manifest must have exactly one owner");
    std::set<std::string> endpoint_ids;
    for (const auto& endpoint : m.endpoints) {
        if (!m.is_member(endpoint.owner_identity))
            fail(Err::BadConfig, "endpoint owner '" + endpoint.owner_identity +
                                     "' is not a member");
        if (!endpoint_ids.insert(endpoint.endpoint_id).second)
            fail(Err::BadConfig, "duplicate endpoint id in manifest");
    }

    const std::string spath =
        secret_path.empty() ? default_secret_path(path, m.group_id) : secret_path;
    std::ifstream sin(spath);
    if (!sin) fail(Err::SourceUnreadable, "cannot open secret '" + spath + "'");
    std::string hex;
    sin >> hex;
    if (hex.size() != 64) fail(Err::BadConfig, "secret must be 32 hex-encoded bytes");
    for (std::size_t i = 0; i < 32; ++i) {
        auto nibble = [&](char c) -> std::uint8_t {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            fail(Err::BadConfig, "secret is not hex");
        };
        m.signing_secret[i] = (nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]);
    }
    return m;
}

} // namespace fedsilo
