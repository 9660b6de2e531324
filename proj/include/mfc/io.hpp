#ifndef MFC_IO_HPP
#define MFC_IO_HPP

#include "mfc/core.hpp"
#include "mfc/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace mfc::io {

// Shortest decimal text that reads back to the same double, independent of
// the C and C++ locales.
std::string format_real(Real x);

// RFC 4180 field quoting: fields holding a comma, quote or line break are
// wrapped in quotes with inner quotes doubled.
std::string csv_field(std::string_view s);

/// Streams an RFC 4180 table (CRLF line ends) to a temporary file and moves
/// it into place on close().
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& add(Real x);
  CsvWriter& add(long long x);
  CsvWriter& add(int x) { return add(static_cast<long long>(x)); }
  CsvWriter& add(long x) { return add(static_cast<long long>(x)); }
  CsvWriter& add(std::string_view s);
  void end_row();
  void close();

 private:
  void sep();

  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
  bool closed_ = false;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
Real parse_real(const std::string& s);

// Writes through a sibling temporary file and a rename, so readers never see
// a partial file.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);
void write_json_atomic(const std::filesystem::path& path, const Json& j);

// Creates the directory (and parents). Throws IoError when it cannot.
void ensure_directory(const std::filesystem::path& dir);

/// Particle positions by step, as written by `simulate`.
struct TrajectoryData {
  std::vector<int> steps;
  std::vector<Matrix> states;  // one N x d block per step
};

// Columns step, particle, x0, x1, ...; rows grouped by step.
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<int>& steps,
                          const std::vector<Matrix>& states);
TrajectoryData read_trajectory_csv(const std::filesystem::path& path);

/// Per-step histograms of the first coordinate.
struct Heatmap {
  std::vector<int> steps;
  Vector centers;  // bin centres
  Matrix mass;     // steps x bins, rows sum to one
};

// Equal-width bins over [0, 2pi) on the torus; over the data range widened
// by 5% on each side otherwise.
Heatmap build_heatmap(const TrajectoryData& data, int bins, bool torus);

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& h);

}  // namespace mfc::io

#endif  // MFC_IO_HPP
