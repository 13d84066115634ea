#pragma once

// Paired multivariate samples {(X_i, Y_i)} and their CSV form:
// header x1,...,xd,y1,...,yd, one row per pair, '.' decimal, UTF-8.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpd {

struct PairedSample {
    int d = 0;
    std::vector<double> xs;  // row-major n x d
    std::vector<double> ys;  // row-major n x d

    std::size_t size() const { return d == 0 ? 0 : xs.size() / d; }

    std::span<const double> x(std::size_t i) const { return {xs.data() + i * d, static_cast<std::size_t>(d)}; }
    std::span<const double> y(std::size_t i) const { return {ys.data() + i * d, static_cast<std::size_t>(d)}; }

    void push_back(std::span<const double> xi, std::span<const double> yi) {
        xs.insert(xs.end(), xi.begin(), xi.end());
        ys.insert(ys.end(), yi.begin(), yi.end());
    }

    void validate() const {
        if (d < 1) throw std::invalid_argument("sample: dimension must be >= 1");
        if (xs.size() != ys.size()) throw std::invalid_argument("sample: xs/ys row counts differ");
        if (xs.empty()) throw std::invalid_argument("empty sample");
        if (xs.size() % d != 0) throw std::invalid_argument("sample: ragged rows");
        for (double v : xs)
            if (!std::isfinite(v)) throw std::invalid_argument("sample: non-finite entry in xs");
        for (double v : ys)
            if (!std::isfinite(v)) throw std::invalid_argument("sample: non-finite entry in ys");
    }

    /// FNV-1a over the raw doubles; identifies the sample in reports.
    std::string digest() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const std::vector<double>& v) {
            for (double x : v) {
                std::uint64_t bits;
                static_assert(sizeof(bits) == sizeof(x));
                std::memcpy(&bits, &x, sizeof(bits));
                for (int b = 0; b < 8; ++b) {
                    h ^= (bits >> (8 * b)) & 0xFFu;
                    h *= 1099511628211ull;
                }
            }
        };
        mix(xs);
        mix(ys);
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_csv_number(const std::string& field, std::size_t row, std::size_t col) {
    const char* b = field.data();
    const char* e = b + field.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
    double v = 0.0;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v))
        throw std::invalid_argument("malformed csv: row " + std::to_string(row) + ", column " +
                                    std::to_string(col) + ": cannot parse '" + field + "'");
    return v;
}

}  // namespace detail

inline PairedSample read_pairs_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty sample");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header.size() % 2 != 0)
        throw std::invalid_argument("malformed csv: header must be x1,...,xd,y1,...,yd");
    const int d = static_cast<int>(header.size() / 2);
    for (int j = 0; j < d; ++j) {
        if (header[j] != "x" + std::to_string(j + 1) || header[d + j] != "y" + std::to_string(j + 1))
            throw std::invalid_argument("malformed csv: header must be x1,...,xd,y1,...,yd");
    }
    PairedSample s;
    s.d = d;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw std::invalid_argument("malformed csv: row " + std::to_string(row) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(header.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const double v = detail::parse_csv_number(fields[c], row, c + 1);
            (c < static_cast<std::size_t>(d) ? s.xs : s.ys).push_back(v);
        }
    }
    if (s.xs.empty()) throw std::invalid_argument("empty sample");
    return s;
}

inline void write_pairs_csv(std::ostream& out, const PairedSample& s) {
    for (int j = 0; j < s.d; ++j) out << "x" << (j + 1) << ",";
    for (int j = 0; j < s.d; ++j) out << "y" << (j + 1) << (j + 1 < s.d ? "," : "\n");
    out.precision(17);
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int j = 0; j < s.d; ++j) out << s.xs[i * s.d + j] << ",";
        for (int j = 0; j < s.d; ++j) out << s.ys[i * s.d + j] << (j + 1 < s.d ? "," : "\n");
    }
}

}  // namespace mpd
