#pragma once

#include <cstdio>
#include <string>

#include "funfactor/dataset.hpp"

namespace funfactor::cli {

/// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double x);

/// Buffered text file; throws IOError when it cannot be opened or written.
class TextFile {
 public:
  explicit TextFile(const std::string& path);
  ~TextFile();
  TextFile(const TextFile&) = delete;
  TextFile& operator=(const TextFile&) = delete;

  void write(const std::string& s);
  void close();

 private:
  std::FILE* f_ = nullptr;
  std::string path_;
};

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

/// Long format: header `subject_id,time,variable,value`, one row per
/// (subject, time, variable). Variables are named by `variable_names` when
/// present, else 1..p.
void write_long_csv(const LongitudinalDataset& data, const std::string& path);

/// Subjects and variables keep their order of first appearance. Rows of a
/// subject sharing a time are told apart by occurrence: the k-th value of a
/// (subject, time, variable) belongs to the k-th observation at that time.
LongitudinalDataset read_long_csv(const std::string& path);

}  // namespace funfactor::cli
