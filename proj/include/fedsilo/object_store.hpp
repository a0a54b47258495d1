#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "fedsilo/errors.hpp"

namespace fedsilo {

// Blob store abstraction over the parameter-exchange backend. Keys are
// opaque strings up to 1024 bytes; implementations must allow concurrent
// access to distinct keys.
class ObjectStore {
public:
    virtual ~ObjectStore() = default;
    virtual void put(const std::string& key, std::span<const std::uint8_t> bytes) = 0;
    virtual std::vector<std::uint8_t> get(const std::string& key) = 0;
    virtual bool exists(const std::string& key) = 0;
};

void validate_store_key(const std::string& key);

class MemoryObjectStore final : public ObjectStore {
public:
    void put(const std::string& key, std::span<const std::uint8_t> bytes) override;
    std::vector<std::uint8_t> get(const std::string& key) override;
    bool exists(const std::string& key) override;

    std::size_t object_count();
    std::vector<std::string> keys();

private:
    std::mutex mu_;
    std::map<std::string, std::vector<std::uint8_t>> objects_;
};

// Default backend: one file per key under a root directory.
class FsObjectStore final : public ObjectStore {
public:
    explicit FsObjectStore(std::string root);
    void put(const std::string& key, std::span<const std::uint8_t> bytes) override;
    std::vector<std::uint8_t> get(const std::string& key) override;
    bool exists(const std::string& key) override;

    const std::string& root() const { return root_; }

private:
    std::string path_for(const std::string& key) const;
    std::string root_;
};

// S3-compatible backend speaking plain HTTP PUT/GET with path-style keys.
// Credentials, when set, come from FEDSILO_S3_KEY / FEDSILO_S3_SECRET and are
// sent as request headers.
class HttpObjectStore final : public ObjectStore {
public:
    explicit HttpObjectStore(const std::string& base_url);
    ~HttpObjectStore() override;
    void put(const std::string& key, std::span<const std::uint8_t> bytes) override;
    std::vector<std::uint8_t> get(const std::string& key) override;
    bool exists(const std::string& key) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// "mem:", "fs:<root>", or "http://host:port[/prefix]"
std::shared_ptr<ObjectStore> open_store(const std::string& spec);

} // namespace fedsilo
