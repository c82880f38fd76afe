#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace phasemap {

// Shortest form is not used on purpose: every numeric CSV cell carries 17
// significant digits so reruns are byte-identical and values round-trip.
std::string format_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path, bool append = false);
    void row(const std::vector<std::string>& cells);
    void flush() { os_.flush(); }

private:
    std::ofstream os_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// 64-bit FNV-1a, hex encoded. Used for config and manifest hashes.
std::string fnv1a_hex(std::string_view bytes);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace phasemap
