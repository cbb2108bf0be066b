#pragma once

#include <string>
#include <vector>

namespace goalgauge {

std::string read_text_file(const std::string& path);

// Writes via a sibling temp file and renames into place, so readers never
// observe a half-written artifact.
void write_text_file_atomic(const std::string& path,
                            const std::string& content);

void ensure_directory(const std::string& path);

bool file_exists(const std::string& path);

// Splits on '\n'; a trailing newline does not produce an empty final line.
std::vector<std::string> split_lines(const std::string& text);

std::string csv_escape(const std::string& field);

// Shortest round-trip decimal form, locale-independent; "nan"/"inf" never
// appear in artifacts (callers encode those as null).
std::string format_double(double value);

std::string join(const std::vector<std::string>& parts,
                 const std::string& separator);

}  // namespace goalgauge
