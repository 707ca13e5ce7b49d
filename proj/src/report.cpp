#include "sspeval/report.hpp"

#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"

namespace ssp::report {

std::string mean_sd_cell(double mean, double sd, int mean_prec, int sd_prec) {
    return util::fixed(mean, mean_prec) + " (" + util::fixed(sd, sd_prec) + ")";
}

std::string bold(const std::string& cell) { return "**" + cell + "**"; }
std::string underline(const std::string& cell) { return "<u>" + cell + "</u>"; }

namespace {

std::string escape_pipes(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '|') out += "\\|";
        else out.push_back(c);
    }
    return out;
}

void check_widths(const Table& table) {
    for (const auto& row : table.rows) {
        if (row.size() != 1 && row.size() != table.columns.size()) {
            throw ValidationError("table row has " + std::to_string(row.size()) +
                                  " cells, expected 1 or " + std::to_string(table.columns.size()));
        }
    }
}

}  // namespace

std::string to_markdown(const Table& table, const std::string& provenance) {
    check_widths(table);
    std::string out;
    if (!table.title.empty()) out += "## " + table.title + "\n\n";
    if (!provenance.empty()) out += "journal: " + provenance + "\n\n";

    out += "|";
    for (const auto& col : table.columns) out += " " + escape_pipes(col) + " |";
    out += "\n|";
    for (std::size_t i = 0; i < table.columns.size(); ++i) out += " --- |";
    out += "\n";

    for (const auto& row : table.rows) {
        out += "|";
        if (row.size() == 1) {
            out += " *" + escape_pipes(row[0]) + "* |";
            for (std::size_t i = 1; i < table.columns.size(); ++i) out += "  |";
        } else {
            for (const auto& cell : row) out += " " + escape_pipes(cell) + " |";
        }
        out += "\n";
    }
    for (const auto& f : table.footers) out += "\n*" + f + "*\n";
    return out;
}

namespace {

// Markers are markdown dressing; CSV carries plain values.
std::string strip_markers(const std::string& cell) {
    std::string s = cell;
    if (s.size() >= 4 && s.compare(0, 2, "**") == 0 && s.compare(s.size() - 2, 2, "**") == 0) {
        s = s.substr(2, s.size() - 4);
    }
    if (s.size() >= 7 && s.compare(0, 3, "<u>") == 0 && s.compare(s.size() - 4, 4, "</u>") == 0) {
        s = s.substr(3, s.size() - 7);
    }
    return s;
}

}  // namespace

std::string to_csv(const Table& table, const std::string& provenance) {
    check_widths(table);
    std::string out;
    if (!provenance.empty()) out += "# journal " + provenance + "\n";

    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out += ",";
        out += util::csv_escape(table.columns[i]);
    }
    out += "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
            if (i) out += ",";
            if (i < row.size()) out += util::csv_escape(strip_markers(row[i]));
        }
        out += "\n";
    }
    for (const auto& f : table.footers) out += "# " + f + "\n";
    return out;
}

}  // namespace ssp::report
