#include "tofu/log.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <ctime>

namespace tofu {

static std::atomic<int64_t> g_warnings{0};

static void vlog(const char* level, const char* fmt, va_list ap) {
  char stamp[32];
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
  std::fprintf(stderr, "%s %s ", stamp, level);
  std::vfprintf(stderr, fmt, ap);
  std::fputc('\n', stderr);
}

void log_info(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  vlog("INFO", fmt, ap);
  va_end(ap);
}

void log_warn(const char* fmt, ...) {
  g_warnings.fetch_add(1);
  va_list ap;
  va_start(ap, fmt);
  vlog("WARN", fmt, ap);
  va_end(ap);
}

int64_t warning_count() { return g_warnings.load(); }
void reset_warning_count() { g_warnings.store(0); }

}  // namespace tofu
