#include "mfc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace mfc::io {

namespace fs = std::filesystem;

std::string format_real(Real x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, end);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

fs::path temp_sibling(const fs::path& path) {
  fs::path tmp = path;
  tmp += ".tmp";
  return tmp;
}

}  // namespace

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : path_(path), tmp_(temp_sibling(path)), columns_(header.size()) {
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& h : header) add(std::string_view(h));
  end_row();
}

CsvWriter::~CsvWriter() {
  if (!closed_) {
    out_.close();
    std::error_code ec;
    fs::remove(tmp_, ec);
  }
}

void CsvWriter::sep() {
  if (in_row_ >= columns_) throw IoError("too many fields in a row of '" + path_.string() + "'");
  if (in_row_ > 0) out_ << ',';
  ++in_row_;
}

CsvWriter& CsvWriter::add(Real x) {
  sep();
  out_ << format_real(x);
  return *this;
}

CsvWriter& CsvWriter::add(long long x) {
  sep();
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  out_.write(buf, end - buf);
  return *this;
}

CsvWriter& CsvWriter::add(std::string_view s) {
  sep();
  out_ << csv_field(s);
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_)
    throw IoError("row with " + std::to_string(in_row_) + " of " + std::to_string(columns_) +
                  " fields in '" + path_.string() + "'");
  out_ << "\r\n";
  in_row_ = 0;
}

void CsvWriter::close() {
  if (closed_) return;
  if (in_row_ != 0) end_row();
  out_.close();
  if (!out_) throw IoError("failed writing '" + path_.string() + "'");
  std::error_code ec;
  fs::rename(tmp_, path_, ec);
  if (ec) throw IoError("cannot move '" + tmp_.string() + "' into place: " + ec.message());
  closed_ = true;
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string fieldbuf;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          fieldbuf += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fieldbuf += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(fieldbuf));
      fieldbuf.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !fieldbuf.empty()) {
        record.push_back(std::move(fieldbuf));
        records.push_back(std::move(record));
      }
      record.clear();
      fieldbuf.clear();
      any = false;
    } else {
      fieldbuf += c;
      any = true;
    }
  }
  if (quoted) throw IoError("unterminated quoted field in '" + path.string() + "'");
  if (any || !fieldbuf.empty()) {
    record.push_back(std::move(fieldbuf));
    records.push_back(std::move(record));
  }
  if (records.empty()) throw IoError("'" + path.string() + "' has no header row");

  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw IoError("row " + std::to_string(r) + " of '" + path.string() + "' has " +
                    std::to_string(records[r].size()) + " fields, expected " +
                    std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

Real parse_real(const std::string& s) {
  Real x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [end, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || end != last) throw IoError("not a number: '" + s + "'");
  return x;
}

void write_text_atomic(const fs::path& path, std::string_view content) {
  const fs::path tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

void write_json_atomic(const fs::path& path, const Json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_trajectory_csv(const fs::path& path, const std::vector<int>& steps,
                          const std::vector<Matrix>& states) {
  if (steps.size() != states.size()) throw ArgumentError("steps and state blocks differ in count");
  const Index d = states.empty() ? 1 : states.front().cols();
  std::vector<std::string> header{"step", "particle"};
  for (Index k = 0; k < d; ++k) header.push_back("x" + std::to_string(k));
  CsvWriter w(path, header);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const Matrix& x = states[s];
    for (Index i = 0; i < x.rows(); ++i) {
      w.add(steps[s]).add(static_cast<long long>(i));
      for (Index k = 0; k < d; ++k) w.add(x(i, k));
      w.end_row();
    }
  }
  w.close();
}

TrajectoryData read_trajectory_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t cs = t.column("step");
  std::vector<std::size_t> xs;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c].size() > 1 && t.header[c][0] == 'x') xs.push_back(c);
  if (xs.empty()) throw IoError("'" + path.string() + "' has no state columns");

  std::map<int, std::vector<std::vector<Real>>> by_step;
  for (const auto& row : t.rows) {
    const Real sv = parse_real(row[cs]);
    std::vector<Real> x;
    for (std::size_t c : xs) x.push_back(parse_real(row[c]));
    by_step[static_cast<int>(sv)].push_back(std::move(x));
  }
  TrajectoryData data;
  for (auto& [step, rows] : by_step) {
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(xs.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < xs.size(); ++k)
        m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    data.steps.push_back(step);
    data.states.push_back(std::move(m));
  }
  if (data.steps.empty()) throw IoError("'" + path.string() + "' holds no particles");
  return data;
}

Heatmap build_heatmap(const TrajectoryData& data, int bins, bool torus) {
  if (bins < 2) throw ArgumentError("heatmap needs at least 2 bins");
  if (data.steps.empty()) throw ArgumentError("heatmap of an empty trajectory");
  Real lo = 0.0;
  Real hi = kTwoPi;
  if (!torus) {
    lo = std::numeric_limits<Real>::infinity();
    hi = -lo;
    for (const auto& x : data.states) {
      if (x.rows() == 0) continue;
      lo = std::min(lo, x.col(0).minCoeff());
      hi = std::max(hi, x.col(0).maxCoeff());
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw ArgumentError("non-finite trajectory data");
    const Real span = hi - lo;
    const Real pad = span > 0.0 ? 0.05 * span : 0.5;
    lo -= pad;
    hi += pad;
  }
  const Real width = (hi - lo) / bins;

  Heatmap h;
  h.steps = data.steps;
  h.centers = Vector::LinSpaced(bins, lo + 0.5 * width, hi - 0.5 * width);
  h.mass = Matrix::Zero(static_cast<Index>(data.steps.size()), bins);
  for (std::size_t s = 0; s < data.states.size(); ++s) {
    const Matrix& x = data.states[s];
    if (x.rows() == 0) throw ArgumentError("heatmap step without particles");
    std::vector<long> count(static_cast<std::size_t>(bins), 0);
    for (Index i = 0; i < x.rows(); ++i) {
      const Real v = torus ? wrap_angle(x(i, 0)) : x(i, 0);
      auto b = static_cast<long>(std::floor((v - lo) / width));
      b = std::clamp(b, 0L, static_cast<long>(bins - 1));
      ++count[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b)
      h.mass(static_cast<Index>(s), b) =
          static_cast<Real>(count[static_cast<std::size_t>(b)]) / static_cast<Real>(x.rows());
  }
  return h;
}

void write_heatmap_csv(const fs::path& path, const Heatmap& h) {
  CsvWriter w(path, {"step", "bin_center", "mass"});
  for (std::size_t s = 0; s < h.steps.size(); ++s)
    for (Index b = 0; b < h.centers.size(); ++b)
      w.add(h.steps[s]).add(h.centers(b)).add(h.mass(static_cast<Index>(s), b)).end_row();
  w.close();
}

}  // namespace mfc::io
