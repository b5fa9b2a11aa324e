#include "ludor/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ludor {

namespace {
std::atomic<bool> g_warnings_enabled{true};
std::atomic<std::uint64_t> g_warning_count{0};
std::mutex g_warn_mutex;
}  // namespace

void warn(const std::string& message) {
    ++g_warning_count;
    if (!g_warnings_enabled.load()) {
        return;
    }
    std::lock_guard<std::mutex> lock(g_warn_mutex);
    std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

std::uint64_t warning_count() { return g_warning_count.load(); }

}  // namespace ludor
