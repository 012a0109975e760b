#pragma once

#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace hoptrace {

/// Calls `fn(line, line_number)` for every non-blank line of a file.
void for_each_line(const std::string& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Append-only line sink. Each `append` writes one complete line under a lock
/// and flushes, so concurrent producers never interleave partial records.
class LineWriter {
 public:
  LineWriter(const std::string& path, bool truncate);

  void append(std::string_view line);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace hoptrace
