#pragma once

// Two-column numeric text tables: one "x value" pair per line, '#' starts a
// comment, blank lines ignored. x must be strictly increasing and uniformly
// spaced (relative tolerance 1e-6 of the step).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qpin/error.hpp"
#include "qpin/grid.hpp"

namespace qpin {

struct Table {
    UniformGrid grid;
    std::vector<double> values;
};

inline Table read_table(std::istream& in, const std::string& source = "<stream>") {
    std::vector<double> xs, ys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        double x, y;
        if (!(row >> x)) {
            std::string rest;
            std::istringstream probe(line);
            if (probe >> rest) {
                throw ConfigError(source + ":" + std::to_string(line_no) + ": not a number");
            }
            continue;
        }
        if (!(row >> y)) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected two columns");
        }
        std::string extra;
        if (row >> extra) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": trailing data");
        }
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": non-finite value");
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    if (xs.size() < 2) throw ConfigError(source + ": need at least two rows");
    const double h = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    if (!(h > 0.0)) throw ConfigError(source + ": x must be strictly increasing");
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double d = xs[i] - xs[i - 1];
        if (!(d > 0.0)) throw ConfigError(source + ": x must be strictly increasing");
        if (std::abs(d - h) > 1e-6 * h) throw ConfigError(source + ": x spacing is not uniform");
    }
    return {UniformGrid(xs.front(), xs.back(), xs.size()), std::move(ys)};
}

inline Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return read_table(in, path);
}

inline void write_table(std::ostream& out, const UniformGrid& grid, const std::vector<double>& values) {
    char buf[64];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", grid.at(i), values.at(i));
        out << buf;
    }
}

}  // namespace qpin
