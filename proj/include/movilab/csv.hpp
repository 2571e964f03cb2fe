#pragma once

#include <string>
#include <vector>

namespace movilab {

// 17 significant digits: doubles survive a write/parse round trip bit for bit.
std::string format_double(double x);

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::string path_;
  std::string buf_;
  bool closed_ = false;
};

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvFile read_csv(const std::string& path);

double parse_double(const std::string& cell);
int parse_int(const std::string& cell);

}  // namespace movilab
