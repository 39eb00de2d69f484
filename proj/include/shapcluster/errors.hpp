#pragma once

#include <stdexcept>
#include <string>

namespace shapcluster {

// Error categories map 1:1 onto CLI exit codes (config=2, data=3, numeric=4).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace shapcluster
