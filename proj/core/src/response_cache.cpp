#include "goalgauge/response_cache.hpp"

#include "goalgauge/io.hpp"

namespace goalgauge {

ResponseCache::ResponseCache(bool enabled, std::string directory)
    : enabled_(enabled), directory_(std::move(directory)) {
  if (enabled_ && !directory_.empty()) ensure_directory(directory_);
}

std::string ResponseCache::path_for(const std::string& key) const {
  return directory_ + "/" + key + ".json";
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  if (!enabled_) return std::nullopt;
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = memory_.find(key);
  if (it != memory_.end()) return it->second;
  if (!directory_.empty() && file_exists(path_for(key))) {
    std::string value = read_text_file(path_for(key));
    memory_[key] = value;
    return value;
  }
  return std::nullopt;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
  if (!enabled_) return;
  std::lock_guard<std::mutex> lock(mutex_);
  memory_[key] = value;
  if (!directory_.empty()) write_text_file_atomic(path_for(key), value);
}

}  // namespace goalgauge
