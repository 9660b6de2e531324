#ifndef MFC_PARALLEL_HPP
#define MFC_PARALLEL_HPP

#include "mfc/common.hpp"

#include <functional>
#include <thread>
#include <vector>

namespace mfc::parallel {

// 0 selects the canonical single-threaded mode, which is bit-reproducible.
// Any positive value splits particle loops into that many fixed row chunks;
// reductions are merged in chunk order so results stay deterministic for a
// given thread count.
void set_threads(int threads);
int threads();

// Reads MFC_THREADS from the environment. Unset or empty leaves the mode
// unchanged. Returns the active thread count.
int configure_from_env();

struct RowRange {
  Index begin;
  Index end;
  Index size() const { return end - begin; }
};

std::vector<RowRange> partition(Index rows);

// Runs fn over every chunk; chunks may execute concurrently.
void for_rows(Index rows, const std::function<void(RowRange)>& fn);

// Sums per-chunk partial results in chunk order.
template <typename Result, typename Fn>
Result reduce_rows(Index rows, Fn&& partial) {
  const auto chunks = partition(rows);
  if (chunks.size() == 1) return partial(chunks.front());
  std::vector<Result> parts(chunks.size());
  std::vector<std::thread> workers;
  workers.reserve(chunks.size());
  for (std::size_t c = 0; c < chunks.size(); ++c)
    workers.emplace_back([&, c] { parts[c] = partial(chunks[c]); });
  for (auto& w : workers) w.join();
  Result total = parts.front();
  for (std::size_t c = 1; c < parts.size(); ++c) total += parts[c];
  return total;
}

// Column sums of a particle-major matrix (rows = particles).
Matrix column_sum(const Matrix& m);

/// RAII override of the thread count, restores the previous value.
class ScopedThreads {
 public:
  explicit ScopedThreads(int n) : previous_(threads()) { set_threads(n); }
  ~ScopedThreads() { set_threads(previous_); }
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  int previous_;
};

}  // namespace mfc::parallel

#endif  // MFC_PARALLEL_HPP
