#include "vstack/common.hpp"

#include <cstdio>
#include <fstream>

namespace vstack {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<double> read_series_csv(const std::filesystem::path& path, int expected_len) {
    std::ifstream in(path);
    if (!in) throw InputError(path.string(), "cannot open series file");
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string(), "empty series file");
    auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "slot" || header[1] != "value")
        throw InputError(path.string(), "expected header 'slot,value'");

    std::vector<double> values;
    int expected_slot = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 2)
            throw InputError(path.string(), "row " + std::to_string(expected_slot + 1) +
                                                ": expected 2 columns");
        int slot = 0;
        double value = 0.0;
        try {
            slot = std::stoi(cells[0]);
            value = std::stod(cells[1]);
        } catch (const std::exception&) {
            throw InputError(path.string(),
                             "row " + std::to_string(expected_slot + 1) + ": not numeric");
        }
        if (slot != expected_slot)
            throw InputError(path.string(), "slot " + std::to_string(slot) +
                                                ": slots must run 0..H-1 in order");
        values.push_back(value);
        ++expected_slot;
    }
    if (expected_len >= 0 && static_cast<int>(values.size()) != expected_len)
        throw InputError(path.string(),
                         "length " + std::to_string(values.size()) + " does not match horizon " +
                             std::to_string(expected_len));
    return values;
}

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace vstack
