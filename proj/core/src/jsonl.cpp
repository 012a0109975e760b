#include "hoptrace/jsonl.hpp"

#include <sstream>

#include "hoptrace/error.hpp"

namespace hoptrace {

void for_each_line(const std::string& path,
                   const std::function<void(std::string_view, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line, n);
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  for_each_line(path, [&](std::string_view line, std::size_t) { out.emplace_back(line); });
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

LineWriter::LineWriter(const std::string& path, bool truncate)
    : out_(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app)) {
  if (!out_) throw Error(ErrorCode::kIoError, "cannot write " + path);
}

void LineWriter::append(std::string_view line) {
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
  out_.flush();
}

}  // namespace hoptrace
