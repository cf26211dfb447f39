#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tshift/corpus.hpp"

namespace fixture {

inline tshift::Document doc(std::string text, int label, const std::string& ts = "2014-01-15T12:00:00Z") {
    tshift::Document d;
    d.text = std::move(text);
    d.label = label;
    d.timestamp = *tshift::parse_timestamp(ts);
    return d;
}

/// A fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("tshift_test_" + name + "_" +
                                                      std::to_string(std::random_device{}()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixture
