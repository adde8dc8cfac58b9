#include "gateway/cache.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace valign {

namespace fs = std::filesystem;

ReplyCache::ReplyCache(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create cache dir " + dir_ + ": " + ec.message());
}

std::string ReplyCache::path_for(const std::string& key) const {
  return dir_ + "/" + key + ".reply";
}

bool ReplyCache::read(const std::string& key, std::string& out) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

void ReplyCache::write(const std::string& key, const std::string& raw) {
  std::lock_guard<std::mutex> lock(write_mutex_);
  std::string final_path = path_for(key);
  std::string tmp_path = final_path + ".tmp";
  {
    std::ofstream outf(tmp_path, std::ios::binary | std::ios::trunc);
    if (!outf) throw Error(ErrorCode::io, "cannot write cache file " + tmp_path);
    outf << raw;
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) throw Error(ErrorCode::io, "cache rename failed: " + ec.message());
}

}  // namespace valign
