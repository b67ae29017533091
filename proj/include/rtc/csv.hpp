#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace rtc {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

class CsvWriter {
public:
    /// Creates parent directories; throws IoError naming the path on failure.
    CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(std::string_view v);
    void end_row();
    /// Flushes and throws IoError if any write failed.
    void close();

private:
    void open_with_header(const std::vector<std::string_view>& header);

    std::filesystem::path path_;
    std::ofstream out_;
    bool first_ = true;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by name; throws ParseError if missing.
    std::size_t column(std::string_view name) const;
};

/// Plain comma-separated reader (no quoting). Throws IoError / ParseError.
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

} // namespace rtc
