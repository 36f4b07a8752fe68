#include <array>
#include <charconv>
#include <cmath>

#include "schedsim/experiment.hpp"

namespace schedsim::cli {

std::string format_double(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  std::array<char, 32> buffer{};
  const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return {buffer.data(), result.ptr};
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) {
    throw std::runtime_error("cannot write " + path.string());
  }
  for (const auto& name : header) {
    cell(name);
  }
  end_row();
}

void CsvWriter::separator() {
  if (current_ > 0) {
    out_ << ',';
  }
  ++current_;
}

CsvWriter& CsvWriter::cell(double value) {
  separator();
  out_ << format_double(value);
  return *this;
}

CsvWriter& CsvWriter::cell(std::int64_t value) {
  separator();
  out_ << value;
  return *this;
}

CsvWriter& CsvWriter::cell(std::string_view text) {
  separator();
  if (text.find_first_of(",\"\n") == std::string_view::npos) {
    out_ << text;
    return *this;
  }
  out_ << '"';
  for (char c : text) {
    if (c == '"') {
      out_ << '"';
    }
    out_ << c;
  }
  out_ << '"';
  return *this;
}

CsvWriter& CsvWriter::empty() {
  separator();
  return *this;
}

void CsvWriter::end_row() {
  if (current_ != columns_) {
    throw std::logic_error("CSV row has the wrong number of cells");
  }
  out_ << '\n';
  current_ = 0;
}

}  // namespace schedsim::cli
