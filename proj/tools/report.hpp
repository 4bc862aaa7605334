#pragma once

// Deterministic report output: ordered JSON with 17-digit floats, plain CSV,
// and write-once file output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

namespace qpin::report {

using Json = nlohmann::ordered_json;

inline std::string number(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void write_string(std::ostream& out, const std::string& s) {
    // nlohmann's dump handles escaping; strings are short
    out << Json(s).dump();
}

inline void write(std::ostream& out, const Json& j, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out << "{}";
                return;
            }
            out << "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out << ",\n";
                first = false;
                out << pad;
                write_string(out, it.key());
                out << ": ";
                write(out, it.value(), indent, depth + 1);
            }
            out << "\n" << close << "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out << "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
            out << (flat ? "[" : "[\n");
            bool first = true;
            for (const auto& e : j) {
                if (!first) out << (flat ? ", " : ",\n");
                first = false;
                if (!flat) out << pad;
                write(out, e, indent, depth + 1);
            }
            if (flat) {
                out << "]";
            } else {
                out << "\n" << close << "]";
            }
            return;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            out << (std::isfinite(v) ? number(v) : "null");
            return;
        }
        default:
            out << j.dump();
    }
}

}  // namespace detail

/// JSON text with fixed field order and floats printed to 17 significant digits.
inline std::string to_json(const Json& j) {
    std::ostringstream out;
    detail::write(out, j, 2, 0);
    out << "\n";
    return out.str();
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : columns_(header.size()) { row(header); }

    Csv& row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ << ',';
            text_ << cells[i];
        }
        text_ << '\n';
        return *this;
    }

    Csv& comment(const std::string& line) {
        text_ << "# " << line << '\n';
        return *this;
    }

    std::size_t columns() const noexcept { return columns_; }
    std::string str() const { return text_.str(); }

private:
    std::size_t columns_;
    std::ostringstream text_;
};

/// Writes to stdout when path is empty or "-", otherwise via a temporary file renamed into place.
inline void emit(const std::string& content, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << content << std::flush;
        return;
    }
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.close();
        if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot move report into " + target.string() + ": " + ec.message());
    }
}

}  // namespace qpin::report
