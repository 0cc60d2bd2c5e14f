#include "tripod/io.hpp"

#include <cstdio>
#include <system_error>

#include "tripod/errors.hpp"

namespace tripod {

std::string csv_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header)
    : path_(path), tmp_(path), columns_(header.size()) {
  if (header.empty()) throw SimulationError("CSV needs at least one column");
  tmp_ += ".tmp";
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw SimulationError("cannot open for writing: " + tmp_.string());
  open_ = true;
  for (std::size_t i = 0; i < header.size(); ++i)
    out_ << (i ? "," : "") << header[i];
  out_ << "\n";
}

CsvWriter::~CsvWriter() {
  if (open_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

void CsvWriter::row(const std::vector<double>& values) {
  if (!open_) throw SimulationError("CSV writer already closed");
  if (values.size() != columns_)
    throw SimulationError("CSV row width does not match the header");
  for (std::size_t i = 0; i < values.size(); ++i)
    out_ << (i ? "," : "") << csv_number(values[i]);
  out_ << "\n";
}

void CsvWriter::close() {
  if (!open_) return;
  out_.flush();
  if (!out_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
    open_ = false;
    throw SimulationError("failed writing: " + tmp_.string());
  }
  out_.close();
  std::error_code ec;
  std::filesystem::rename(tmp_, path_, ec);
  if (ec) {
    std::filesystem::remove(tmp_, ec);
    open_ = false;
    throw SimulationError("cannot move " + tmp_.string() + " into place");
  }
  open_ = false;
}

}  // namespace tripod
