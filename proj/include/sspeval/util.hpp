#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ssp::util {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

// Whitespace-delimited token count; the word-count definition used for
// slice filtering.
int count_words(std::string_view s);

// Occurrences of a non-empty needle, non-overlapping.
int count_occurrences(std::string_view haystack, std::string_view needle);

// Reads a whole file; throws ParseError when the file cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Minimal CSV: handles quoted fields with doubled quotes and CRLF line ends.
// Returns one vector of fields per non-empty line, header included.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
std::string csv_escape(std::string_view field);

// FNV-1a 64-bit, used as the journal provenance stamp.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Fixed-point formatting helpers ("%.*f", C locale semantics).
std::string fixed(double v, int precision);

// Mean and population standard deviation (divides by n, not n-1).
struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
    int n = 0;
};
MeanSd mean_population_sd(const std::vector<double>& values);

// splitmix64 step, used to mix seeds with key hashes for per-target RNG
// streams and to draw bounded values without distribution-object quirks.
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic draw in [0, n) from a splitmix64 stream, rejection sampled.
std::uint64_t bounded_draw(std::uint64_t& state, std::uint64_t n);

}  // namespace ssp::util
