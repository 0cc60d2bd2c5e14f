#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace tripod {

// CSV writer with a fixed header, 12-significant-digit values, LF endings.
// Content goes to a sibling temp file and moves into place on close(); a
// writer destroyed without close() removes the temp file instead, so readers
// never observe a partial file.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  void close();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t columns_;
  bool open_ = false;
};

// One value in the CSV serialization (12 significant digits).
std::string csv_number(double x);

}  // namespace tripod
