#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

namespace goalgauge {

// Content-addressed response store: memory first, then one file per key under
// the cache directory when one is configured. Values are opaque strings; a
// hit returns exactly the bytes that were stored.
class ResponseCache {
 public:
  ResponseCache(bool enabled, std::string directory);

  bool enabled() const { return enabled_; }
  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& value);

 private:
  std::string path_for(const std::string& key) const;

  bool enabled_;
  std::string directory_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::string> memory_;
};

}  // namespace goalgauge
