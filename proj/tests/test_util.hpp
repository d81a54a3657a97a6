#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "wsd/numkit.hpp"

namespace testutil {

inline wsd::Vector random_vector(wsd::Rng& rng, std::size_t n, double scale = 1.0) {
  wsd::Vector v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

inline wsd::Matrix random_matrix(wsd::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  wsd::Matrix m(r, c);
  for (double& x : m.data()) x = rng.uniform(-scale, scale);
  return m;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string data_path(const std::string& rel) { return std::string(WSD_TEST_DATA) + "/" + rel; }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("wsd_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
