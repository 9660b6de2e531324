#include "mfc/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace mfc::parallel {

namespace {
std::atomic<int> g_threads{0};
}

void set_threads(int n) {
  if (n < 0) throw ConfigError("thread count must be >= 0, got " + std::to_string(n));
  g_threads = n;
}

int threads() { return g_threads; }

int configure_from_env() {
  const char* raw = std::getenv("MFC_THREADS");
  if (raw == nullptr || *raw == '\0') return threads();
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (*end != '\0' || n < 0 || n > 1024)
    throw ConfigError(std::string("MFC_THREADS must be a non-negative integer, got '") + raw + "'");
  set_threads(static_cast<int>(n));
  return threads();
}

std::vector<RowRange> partition(Index rows) {
  const int n = threads();
  if (n <= 1 || rows < 2) return {RowRange{0, rows}};
  const Index chunks = std::min<Index>(n, rows);
  std::vector<RowRange> out;
  out.reserve(static_cast<std::size_t>(chunks));
  const Index base = rows / chunks;
  const Index extra = rows % chunks;
  Index begin = 0;
  for (Index c = 0; c < chunks; ++c) {
    const Index len = base + (c < extra ? 1 : 0);
    out.push_back({begin, begin + len});
    begin += len;
  }
  return out;
}

void for_rows(Index rows, const std::function<void(RowRange)>& fn) {
  const auto chunks = partition(rows);
  if (chunks.size() == 1) {
    fn(chunks.front());
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(chunks.size());
  for (const auto& c : chunks) workers.emplace_back(fn, c);
  for (auto& w : workers) w.join();
}

Matrix column_sum(const Matrix& m) {
  return reduce_rows<Matrix>(m.rows(), [&](RowRange r) -> Matrix {
    return m.middleRows(r.begin, r.size()).colwise().sum();
  });
}

}  // namespace mfc::parallel
