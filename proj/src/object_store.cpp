#include "fedsilo/object_store.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "httplib.h"

namespace fs = std::filesystem;

namespace fedsilo {

void validate_store_key(const std::string& key) {
    if (key.empty() || key.size() > 1024) fail(Err::BadKey, "key length out of range");
    if (key.front() == '/') fail(Err::BadKey, "key must be relative");
    for (char c : key) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '/' || c == '_' || c == '.' || c == '-';
        if (!ok) fail(Err::BadKey, "key contains unsupported character");
    }
    if (key.find("..") != std::string::npos) fail(Err::BadKey, "key must not contain '..'");
}

void MemoryObjectStore::put(const std::string& key, std::span<const std::uint8_t> bytes) {
    validate_store_key(key);
    std::lock_guard lock(mu_);
    objects_[key].assign(bytes.begin(), bytes.end());
}

std::vector<std::uint8_t> MemoryObjectStore::get(const std::string& key) {
    validate_store_key(key);
    std::lock_guard lock(mu_);
    auto it = objects_.find(key);
    if (it == objects_.end()) fail(Err::ObjectMissing, "'" + key + "'");
    return it->second;
}

bool MemoryObjectStore::exists(const std::string& key) {
    validate_store_key(key);
    std::lock_guard lock(mu_);
    return objects_.count(key) > 0;
}

std::size_t MemoryObjectStore::object_count() {
    std::lock_guard lock(mu_);
    return objects_.size();
}

std::vector<std::string> MemoryObjectStore::keys() {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : objects_) out.push_back(k);
    return out;
}

FsObjectStore::FsObjectStore(std::string root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail(Err::StoreUnavailable, "cannot create store root '" + root_ + "'");
}

std::string FsObjectStore::path_for(const std::string& key) const {
    validate_store_key(key);
    return root_ + "/" + key;
}

void FsObjectStore::put(const std::string& key, std::span<const std::uint8_t> bytes) {
    const std::string path = path_for(key);
    std::error_code ec;
    fs::create_directories(fs::path(path).parent_path(), ec);
    if (ec) fail(Err::StoreUnavailable, "cannot create directories for '" + key + "'");

    // write-then-rename so concurrent readers never see a partial object
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Err::StoreUnavailable, "cannot open '" + tmp + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(Err::StoreUnavailable, "short write to '" + tmp + "'");
    }
    fs::rename(tmp, path, ec);
    if (ec) fail(Err::StoreUnavailable, "cannot finalize '" + key + "'");
}

std::vector<std::uint8_t> FsObjectStore::get(const std::string& key) {
    const std::string path = path_for(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Err::ObjectMissing, "'" + key + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

bool FsObjectStore::exists(const std::string& key) {
    return fs::exists(path_for(key));
}

struct HttpObjectStore::Impl {
    httplib::Client client;
    std::string prefix;
    std::string access_key;
    std::string secret;

    explicit Impl(const std::string& base) : client(extract_origin(base)) {
        const auto slash = base.find('/', base.find("//") + 2);
        if (slash != std::string::npos) prefix = base.substr(slash);
        if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        if (const char* k = std::getenv("FEDSILO_S3_KEY")) access_key = k;
        if (const char* s = std::getenv("FEDSILO_S3_SECRET")) secret = s;
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
    }

    static std::string extract_origin(const std::string& base) {
        const auto scheme_end = base.find("//");
        if (scheme_end == std::string::npos)
            fail(Err::StoreUnavailable, "bad store url '" + base + "'");
        const auto slash = base.find('/', scheme_end + 2);
        return slash == std::string::npos ? base : base.substr(0, slash);
    }

    httplib::Headers headers() const {
        httplib::Headers h;
        if (!access_key.empty()) {
            h.emplace("x-fedsilo-key", access_key);
            h.emplace("x-fedsilo-secret", secret);
        }
        return h;
    }

    std::string path_for(const std::string& key) const { return prefix + "/" + key; }
};

HttpObjectStore::HttpObjectStore(const std::string& base_url)
    : impl_(std::make_unique<Impl>(base_url)) {}

HttpObjectStore::~HttpObjectStore() = default;

void HttpObjectStore::put(const std::string& key, std::span<const std::uint8_t> bytes) {
    validate_store_key(key);
    auto res = impl_->client.Put(impl_->path_for(key), impl_->headers(),
                                 reinterpret_cast<const char*>(bytes.data()), bytes.size(),
                                 "application/octet-stream");
    if (!res) fail(Err::StoreUnavailable, "PUT '" + key + "': no response");
    if (res->status / 100 != 2)
        fail(Err::StoreUnavailable, "PUT '" + key + "': HTTP " + std::to_string(res->status));
}

std::vector<std::uint8_t> HttpObjectStore::get(const std::string& key) {
    validate_store_key(key);
    auto res = impl_->client.Get(impl_->path_for(key), impl_->headers());
    if (!res) fail(Err::StoreUnavailable, "GET '" + key + "': no response");
    if (res->status == 404) fail(Err::ObjectMissing, "'" + key + "'");
    if (res->status / 100 != 2)
        fail(Err::StoreUnavailable, "GET '" + key + "': HTTP " + std::to_string(res->status));
    return {res->body.begin(), res->body.end()};
}

bool HttpObjectStore::exists(const std::string& key) {
    validate_store_key(key);
    auto res = impl_->client.Head(impl_->path_for(key), impl_->headers());
    if (!res) fail(Err::StoreUnavailable, "HEAD '" + key + "': no response");
    return res->status / 100 == 2;
}

std::shared_ptr<ObjectStore> open_store(const std::string& spec) {
    if (spec == "mem:" || spec == "mem") return std::make_shared<MemoryObjectStore>();
    if (spec.rfind("fs:", 0) == 0) return std::make_shared<FsObjectStore>(spec.substr(3));
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0)
        return std::make_shared<HttpObjectStore>(spec);
    fail(Err::BadConfig, "unknown store spec '" + spec + "'");
}

} // namespace fedsilo
