#include "rtc/csv.hpp"

#include "rtc/errors.hpp"

#include <array>
#include <charconv>
#include <sstream>

namespace rtc {

std::string format_number(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

void CsvWriter::open_with_header(const std::vector<std::string_view>& header) {
    std::error_code ec;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
    out_.open(path_, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!out_) throw IoError("cannot open for writing: " + path_.string());
    for (auto h : header) cell(h);
    end_row();
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
    : path_(path) {
    open_with_header(std::vector<std::string_view>(header));
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
    open_with_header(std::vector<std::string_view>(header.begin(), header.end()));
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_number(v))); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::string_view(std::to_string(v))); }

CsvWriter& CsvWriter::cell(std::string_view v) {
    if (!first_) out_.put(',');
    out_.write(v.data(), static_cast<std::streamsize>(v.size()));
    first_ = false;
    return *this;
}

void CsvWriter::end_row() {
    out_.put('\n');
    first_ = true;
}

void CsvWriter::close() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
    out_.close();
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ParseError("csv: missing column '" + std::string(name) + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());

    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };

    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("csv: empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw ParseError("csv: " + path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " cells");
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParseError("not a number for " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return v;
}

long long parse_int(std::string_view text, std::string_view what) {
    long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParseError("not an integer for " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return v;
}

} // namespace rtc
