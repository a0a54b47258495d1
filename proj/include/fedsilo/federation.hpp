#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsilo/errors.hpp"

namespace fedsilo {

enum class Role { Owner, Member };

struct Member {
    std::string identity;
    std::string email;
    Role role = Role::Member;
};

struct EndpointRecord {
    std::string endpoint_id;
    std::string owner_identity;
    std::string dataloader_name;
    std::string address; // transport-specific, may be empty for dial-in endpoints
};

// The trust roster: group identity, members, registered endpoints, and the
// shared signing secret. The secret never appears in the manifest JSON or in
// run logs; it persists in a separate mode-0600 file.
struct FederationManifest {
    std::string group_id;
    std::vector<Member> members;
    std::vector<EndpointRecord> endpoints;
    std::array<std::uint8_t, 32> signing_secret{};

    bool is_member(std::string_view identity) const;
    const Member* owner() const;
    const EndpointRecord* find_endpoint(std::string_view endpoint_id) const;
};

FederationManifest create_federation(const std::string& owner_identity,
                                     const std::string& email);

void add_member(FederationManifest& manifest, const std::string& identity,
                const std::string& email);

EndpointRecord register_endpoint(FederationManifest& manifest,
                                 const std::string& owner_identity,
                                 const std::string& dataloader_name,
                                 const std::string& address);

struct TokenClaims {
    std::string group_id;
    std::string sender;
    std::string task_id;
    std::int64_t round = 0;
    std::int64_t expiry = 0; // unix seconds
};

std::int64_t unix_now();

// Token = JSON {claims, sig} where sig is hex HMAC-SHA256 over the
// canonical (key-sorted) claims JSON under the federation secret.
std::string issue_token(const FederationManifest& manifest, const std::string& sender,
                        const std::string& task_id, std::int64_t round,
                        std::int64_t ttl_seconds,
                        std::optional<std::int64_t> now = std::nullopt);

std::string sign_claims(const FederationManifest& manifest, const TokenClaims& claims);

struct VerifyResult {
    bool accepted = false;
    // BadSignature | WrongGroup | UnknownSender | TaskMismatch | Expired
    std::string reject_reason;
    TokenClaims claims;
};

// Accepts iff the signature verifies under the manifest secret, the group
// matches, the sender is a member, the task_id matches, and now < expiry
// (plus the configured skew tolerance).
VerifyResult verify_token(const FederationManifest& manifest, const std::string& token,
                          const std::string& expected_task_id,
                          std::optional<std::int64_t> now = std::nullopt,
                          std::int64_t skew_tolerance_seconds = 0);

// Manifest JSON (secret excluded) plus sibling `<group_id>.secret` file.
void save_manifest(const FederationManifest& manifest, const std::string& path);
FederationManifest load_manifest(const std::string& path,
                                 const std::string& secret_path = "");

std::string default_secret_path(const std::string& manifest_path,
                                const std::string& group_id);

} // namespace fedsilo
