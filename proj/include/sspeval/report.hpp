#pragma once

#include <string>
#include <vector>

namespace ssp::report {

// "0.603 (0.13)" cell style used across the metric tables.
std::string mean_sd_cell(double mean, double sd, int mean_prec = 3, int sd_prec = 2);

std::string bold(const std::string& cell);
std::string underline(const std::string& cell);

struct Table {
    std::string title;
    std::vector<std::string> columns;
    // A row with a single cell renders as a full-width section divider.
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> footers;
};

// Markdown with the provenance stamp under the title. Pipes inside cells
// are escaped.
std::string to_markdown(const Table& table, const std::string& provenance);

// CSV: provenance and footers become '#' comment lines; section rows keep
// only their label in the first field.
std::string to_csv(const Table& table, const std::string& provenance);

}  // namespace ssp::report
