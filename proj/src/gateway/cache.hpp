#pragma once

#include <mutex>
#include <string>

namespace valign {

// One file per content hash under cache_dir, holding the raw structured
// reply. Concurrent readers are fine; writes go through a temp file + rename
// and are serialized per cache instance.
class ReplyCache {
 public:
  explicit ReplyCache(std::string dir);

  bool read(const std::string& key, std::string& out) const;
  void write(const std::string& key, const std::string& raw);

  const std::string& dir() const { return dir_; }

 private:
  std::string path_for(const std::string& key) const;
  std::string dir_;
  mutable std::mutex write_mutex_;
};

}  // namespace valign
