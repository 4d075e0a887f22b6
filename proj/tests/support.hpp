#pragma once

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "vitoria/broker/context_broker.hpp"
#include "vitoria/error.hpp"
#include "vitoria/time.hpp"

namespace vitoria::testing {

inline Date ymd(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

inline Timestamp ts(int y, unsigned m, unsigned d, int h = 0, int mi = 0, int s = 0) {
    return at(ymd(y, m, d), h, mi, s);
}

inline broker::ContextEntity entity(std::string id, std::string type,
                                    std::initializer_list<std::pair<std::string, Json>> attrs, Timestamp t) {
    broker::ContextEntity e{std::move(id), std::move(type), {}};
    for (const auto& [k, v] : attrs) e.attributes[k] = {v, t, Json::object()};
    return e;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace vitoria::testing

#define CHECK_CODE(expr, expected_code)                                 \
    do {                                                                \
        bool thrown_ = false;                                           \
        try {                                                           \
            (void)(expr);                                               \
        } catch (const ::vitoria::Error& e_) {                          \
            thrown_ = true;                                             \
            CHECK_MESSAGE(e_.code() == (expected_code), e_.what());     \
        }                                                               \
        CHECK_MESSAGE(thrown_, "expected an error from " #expr);        \
    } while (0)
