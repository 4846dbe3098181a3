#pragma once

#include <functional>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

namespace runlens {

/// Canonical cache key: run, candidate, operation and the parameters in key order.
inline std::string cache_key(const std::string& run_id, const std::string& candidate_id, const std::string& op,
                             const std::map<std::string, std::string>& params) {
    std::string key = run_id + '\x1f' + candidate_id + '\x1f' + op;
    for (const auto& [k, v] : params) key += '\x1f' + k + '=' + v;
    return key;
}

/// Byte-bounded LRU of response bodies with per-key single flight: concurrent requests for a
/// missing key wait for one computation. Failures are not cached.
class AnalysisCache {
public:
    using Body = std::shared_ptr<const std::string>;

    explicit AnalysisCache(std::size_t capacity_bytes) : capacity_(capacity_bytes) {}

    Body get_or_compute(const std::string& key, const std::function<std::string()>& compute, bool* hit = nullptr) {
        std::shared_future<Body> pending;
        std::promise<Body> promise;
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(key); it != entries_.end()) {
                lru_.splice(lru_.begin(), lru_, it->second.position);
                ++hits_;
                if (hit) *hit = true;
                return it->second.body;
            }
            if (auto it = inflight_.find(key); it != inflight_.end()) {
                pending = it->second;
                ++hits_;
            } else {
                inflight_.emplace(key, promise.get_future().share());
                ++misses_;
            }
        }
        if (pending.valid()) {
            if (hit) *hit = true;
            return pending.get();
        }
        if (hit) *hit = false;
        Body body;
        try {
            body = std::make_shared<const std::string>(compute());
        } catch (...) {
            std::lock_guard lock(mutex_);
            promise.set_exception(std::current_exception());
            inflight_.erase(key);
            throw;
        }
        std::lock_guard lock(mutex_);
        promise.set_value(body);
        inflight_.erase(key);
        insert(key, body);
        return body;
    }

    std::size_t hits() const {
        std::lock_guard lock(mutex_);
        return hits_;
    }
    std::size_t misses() const {
        std::lock_guard lock(mutex_);
        return misses_;
    }
    std::size_t bytes() const {
        std::lock_guard lock(mutex_);
        return bytes_;
    }
    std::size_t entries() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    struct Entry {
        Body body;
        std::list<std::string>::iterator position;
    };

    void insert(const std::string& key, const Body& body) {
        const auto size = body->size() + key.size();
        if (size > capacity_) return;
        lru_.push_front(key);
        entries_[key] = {body, lru_.begin()};
        bytes_ += size;
        while (bytes_ > capacity_ && !lru_.empty()) {
            const auto& victim = lru_.back();
            auto it = entries_.find(victim);
            bytes_ -= it->second.body->size() + victim.size();
            entries_.erase(it);
            lru_.pop_back();
        }
    }

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<std::string> lru_;
    std::unordered_map<std::string, Entry> entries_;
    std::unordered_map<std::string, std::shared_future<Body>> inflight_;
    std::size_t bytes_ = 0;
    std::size_t hits_ = 0, misses_ = 0;
};

}  // namespace runlens
