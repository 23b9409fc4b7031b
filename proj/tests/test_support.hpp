#pragma once

// Shared fixtures for the test suites: bundled data locations and a
// self-cleaning temporary directory.

#include <unistd.h>

#include <filesystem>
#include <string>

#include "sohkit/parameters.hpp"

namespace testsup {

inline std::filesystem::path data_dir() { return std::filesystem::path(SOHKIT_DATA_DIR); }

inline std::string params_path() { return (data_dir() / "params" / "lgm50.json").string(); }

inline const sohkit::ParameterSet& default_params() {
  static const sohkit::ParameterSet p = sohkit::load_parameter_set(params_path());
  return p;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("sohkit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testsup
