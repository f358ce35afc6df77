#ifndef POPSYNTH_CSV_H_
#define POPSYNTH_CSV_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace popsynth {

// A header plus rectangular rows of string cells. RFC 4180 quoting on both
// read and write; the header row is mandatory.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

// Throws DataError on ragged rows, unterminated quotes, empty input or
// duplicate header names.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string format_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Writes to a sibling temp file and renames it into place. Parent
// directories are created.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

// Strict full-string parse; nullopt when the text is not a number.
std::optional<double> parse_double(std::string_view text);

}  // namespace popsynth

#endif  // POPSYNTH_CSV_H_
