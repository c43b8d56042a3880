#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "meltpool/bench.hpp"
#include "meltpool/error.hpp"

namespace meltpool {

namespace fs = std::filesystem;

std::filesystem::path default_cache_dir() {
  if (const char* dir = std::getenv("MELTPOOL_CACHE_DIR"); dir && *dir) return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "meltpool";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "meltpool";
  return fs::temp_directory_path() / "meltpool-cache";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw FetchError("sha256: digest computation failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

namespace {

/// Exclusive advisory lock held for the lifetime of the object.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw FetchError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw FetchError("cannot lock " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FetchError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".part." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FetchError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FetchError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

nlohmann::json load_registry(const fs::path& path) {
  if (!fs::exists(path)) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FetchError("corrupt cache registry " + path.string() + ": " + e.what());
  }
}

std::string download(const std::string& url, int timeout_seconds) {
  static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) throw FetchError("unsupported URL: " + url);
  httplib::Client client(m[1].str());
  client.set_follow_location(true);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  const std::string target = m[2].matched ? m[2].str() : "/";
  auto res = client.Get(target);
  if (!res) {
    throw FetchError("offline: cannot reach " + url + " (" + httplib::to_string(res.error()) +
                     ") and no cached copy exists");
  }
  if (res->status != 200) {
    throw FetchError("download of " + url + " failed with HTTP status " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace

std::filesystem::path fetch_reference_data(const std::string& url, const FetchOptions& options) {
  const fs::path dir = options.cache_dir.value_or(default_cache_dir());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FetchError("cannot create cache directory " + dir.string() + ": " + ec.message());

  const std::string key = sha256_hex(url).substr(0, 32);
  const fs::path file = dir / (key + ".dat");
  const fs::path registry_path = dir / "registry.json";
  FileLock entry_lock(dir / (key + ".lock"));

  std::optional<std::string> recorded;
  {
    FileLock registry_lock(dir / "registry.lock");
    const nlohmann::json registry = load_registry(registry_path);
    if (auto it = registry.find(url); it != registry.end()) recorded = it->at("sha256").get<std::string>();
  }
  if (options.expected_sha256 && recorded && *options.expected_sha256 != *recorded) {
    throw FetchError("hash mismatch for " + url + ": expected " + *options.expected_sha256 +
                     ", registry records " + *recorded);
  }
  const std::optional<std::string> expected = options.expected_sha256 ? options.expected_sha256 : recorded;

  if (recorded && fs::exists(file)) {
    const std::string actual = sha256_hex(read_file(file));
    if (actual != *recorded) {
      throw FetchError("hash mismatch for cached " + url + ": registry records " + *recorded +
                       ", file has " + actual + " (" + file.string() + ")");
    }
    return file;
  }

  if (options.offline) throw FetchError("offline: " + url + " is not in the cache at " + dir.string());
  const std::string body = download(url, options.timeout_seconds);
  const std::string digest = sha256_hex(body);
  if (expected && digest != *expected) {
    throw FetchError("hash mismatch for " + url + ": expected " + *expected + ", downloaded " + digest);
  }
  write_atomic(file, body);
  {
    FileLock registry_lock(dir / "registry.lock");
    nlohmann::json registry = load_registry(registry_path);
    registry[url] = {{"sha256", digest}, {"file", file.filename().string()}, {"bytes", body.size()}};
    write_atomic(registry_path, registry.dump(2));
  }
  return file;
}

}  // namespace meltpool
