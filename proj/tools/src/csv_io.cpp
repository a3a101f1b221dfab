#include "csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "funfactor/error.hpp"

namespace funfactor::cli {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

TextFile::TextFile(const std::string& path) : f_(std::fopen(path.c_str(), "wb")), path_(path) {
  if (!f_) throw Error(ErrorKind::IOError, "cannot write '" + path + "'");
}

TextFile::~TextFile() {
  if (f_) std::fclose(f_);
}

void TextFile::write(const std::string& s) {
  if (std::fwrite(s.data(), 1, s.size(), f_) != s.size()) throw Error(ErrorKind::IOError, "write failed on '" + path_ + "'");
}

void TextFile::close() {
  if (f_ && std::fclose(f_) != 0) {
    f_ = nullptr;
    throw Error(ErrorKind::IOError, "close failed on '" + path_ + "'");
  }
  f_ = nullptr;
}

void write_text(const std::string& path, const std::string& content) {
  TextFile f(path);
  f.write(content);
  f.close();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_long_csv(const LongitudinalDataset& data, const std::string& path) {
  std::vector<std::string> names(static_cast<std::size_t>(data.p));
  for (int j = 0; j < data.p; ++j)
    names[static_cast<std::size_t>(j)] = static_cast<int>(data.variable_names.size()) == data.p
                                             ? data.variable_names[static_cast<std::size_t>(j)]
                                             : std::to_string(j + 1);
  for (const auto& s : data.subjects)
    if (s.subject_id.find_first_of(",\n\r") != std::string::npos)
      throw Error(ErrorKind::InvalidArgument, "subject id '" + s.subject_id + "' contains a separator");
  TextFile out(path);
  std::string buf = "subject_id,time,variable,value\n";
  for (const auto& s : data.subjects) {
    for (Eigen::Index r = 0; r < s.times.size(); ++r) {
      const std::string prefix = s.subject_id + "," + format_double(s.times[r]) + ",";
      for (int j = 0; j < data.p; ++j) {
        buf += prefix;
        buf += names[static_cast<std::size_t>(j)];
        buf += ',';
        buf += format_double(s.values(r, j));
        buf += '\n';
      }
      if (buf.size() > (1u << 20)) {
        out.write(buf);
        buf.clear();
      }
    }
  }
  out.write(buf);
  out.close();
}

namespace {

struct Entry {
  double t;
  int var;
  double value;
  long seq;
  int occurrence;
};

[[noreturn]] void bad_row(const std::string& path, long line, const std::string& what) {
  throw Error(ErrorKind::InvalidArgument, path + ":" + std::to_string(line) + ": " + what);
}

double parse_number(std::string_view field, const std::string& path, long line, const char* name) {
  double x = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, x);
  if (ec != std::errc() || ptr != end) bad_row(path, line, std::string("cannot parse ") + name + " '" + std::string(field) + "'");
  return x;
}

}  // namespace

LongitudinalDataset read_long_csv(const std::string& path) {
  const std::string text = read_text(path);
  std::unordered_map<std::string, int> subject_index, var_index;
  std::vector<std::string> subject_ids, var_names;
  std::vector<std::vector<Entry>> entries;

  std::size_t pos = 0;
  long line = 0, seq = 0;
  bool header = true;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view row(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty()) continue;
    if (header) {
      if (row != "subject_id,time,variable,value")
        bad_row(path, line, "expected header 'subject_id,time,variable,value'");
      header = false;
      continue;
    }
    std::string_view f[4];
    std::size_t start = 0;
    for (int k = 0; k < 4; ++k) {
      const auto comma = k < 3 ? row.find(',', start) : std::string_view::npos;
      if (k < 3 && comma == std::string_view::npos) bad_row(path, line, "expected 4 fields");
      f[k] = row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      start = comma + 1;
    }
    if (f[3].find(',') != std::string_view::npos) bad_row(path, line, "expected 4 fields");
    if (f[0].empty() || f[2].empty()) bad_row(path, line, "empty subject or variable");
    const double t = parse_number(f[1], path, line, "time");
    const double v = parse_number(f[3], path, line, "value");

    auto [sit, snew] = subject_index.try_emplace(std::string(f[0]), static_cast<int>(subject_ids.size()));
    if (snew) {
      subject_ids.emplace_back(f[0]);
      entries.emplace_back();
    }
    auto [vit, vnew] = var_index.try_emplace(std::string(f[2]), static_cast<int>(var_names.size()));
    if (vnew) var_names.emplace_back(f[2]);
    entries[static_cast<std::size_t>(sit->second)].push_back(Entry{t, vit->second, v, seq++, 0});
  }
  if (header) bad_row(path, line, "missing header");

  LongitudinalDataset data;
  data.p = static_cast<int>(var_names.size());
  data.variable_names = var_names;
  data.subjects.resize(subject_ids.size());
  for (std::size_t s = 0; s < subject_ids.size(); ++s) {
    auto& es = entries[s];
    // Entries arrive in file order, so a stable sort on (t, var) keeps the
    // occurrence order within each group.
    std::stable_sort(es.begin(), es.end(), [](const Entry& a, const Entry& b) {
      return a.t != b.t ? a.t < b.t : a.var < b.var;
    });
    for (std::size_t k = 0; k < es.size(); ++k)
      es[k].occurrence = k > 0 && es[k].t == es[k - 1].t && es[k].var == es[k - 1].var ? es[k - 1].occurrence + 1 : 0;
    std::stable_sort(es.begin(), es.end(), [](const Entry& a, const Entry& b) {
      return a.t != b.t ? a.t < b.t : a.occurrence < b.occurrence;
    });
    // Rows are (t, occurrence) groups, ordered by their first line in the file.
    std::vector<std::pair<long, std::size_t>> rows;  // (first seq, first entry)
    for (std::size_t k = 0; k < es.size(); ++k) {
      if (k == 0 || es[k].t != es[k - 1].t || es[k].occurrence != es[k - 1].occurrence) rows.emplace_back(es[k].seq, k);
      else rows.back().first = std::min(rows.back().first, es[k].seq);
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].first < rows[b].first; });

    auto& subj = data.subjects[s];
    subj.subject_id = subject_ids[s];
    const auto n = static_cast<Eigen::Index>(rows.size());
    subj.times.resize(n);
    subj.values = Eigen::MatrixXd::Constant(n, data.p, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> filled(static_cast<std::size_t>(n * data.p), 0);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto g = order[static_cast<std::size_t>(r)];
      const auto begin = rows[g].second;
      const auto end = g + 1 < rows.size() ? rows[g + 1].second : es.size();
      subj.times[r] = es[begin].t;
      for (auto k = begin; k < end; ++k) {
        subj.values(r, es[k].var) = es[k].value;
        filled[static_cast<std::size_t>(r * data.p + es[k].var)] = 1;
      }
      for (int j = 0; j < data.p; ++j)
        if (!filled[static_cast<std::size_t>(r * data.p + j)])
          throw Error(ErrorKind::DimensionMismatch, path + ": subject '" + subj.subject_id + "' at time " +
                                                        format_double(subj.times[r]) + " has no value for variable '" +
                                                        var_names[static_cast<std::size_t>(j)] + "'");
    }
  }
  return data;
}

}  // namespace funfactor::cli
