#pragma once

// Flat key-value configs, CSV tables and atomic file output.

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "flatband/errors.hpp"
#include "flatband/kernel.hpp"
#include "flatband/wannier.hpp"

namespace flatband {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace detail

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double x) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc{}) throw IoError("cannot format number");
    return std::string(buf.data(), ptr);
}

/// Fixed number of significant digits (general format).
inline std::string format_double(double x, int significant) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, significant);
    if (ec != std::errc{}) throw IoError("cannot format number");
    return std::string(buf.data(), ptr);
}

/// Parsed `key = value` file. Values stay as text until a typed getter reads them; every read key
/// is recorded so callers can reject leftovers.
class Config {
public:
    Config() = default;
    explicit Config(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    static Config parse(const std::string& text) {
        std::map<std::string, std::string> values;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigInvalid("line " + std::to_string(lineno) + ": expected 'key = value'");
            }
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigInvalid("line " + std::to_string(lineno) + ": empty key");
            if (values.count(key)) throw ConfigInvalid("duplicate key '" + key + "'");
            values[key] = value;
        }
        return Config(std::move(values));
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read config " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::string text(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigInvalid("missing required key '" + key + "'");
        return it->second;
    }

    double number(const std::string& key) const { return to_number(key, text(key)); }
    int integer(const std::string& key) const { return to_integer(key, text(key)); }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : split(text(key))) out.push_back(to_number(key, item));
        if (out.empty()) throw ConfigInvalid("key '" + key + "' needs at least one value");
        return out;
    }

    std::vector<std::string> list(const std::string& key) const { return split(text(key)); }

    std::string text_or(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }
    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
    int integer_or(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }
    std::vector<double> numbers_or(const std::string& key, std::vector<double> fallback) const {
        return has(key) ? numbers(key) : fallback;
    }

    bool boolean_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = text(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigInvalid("key '" + key + "': expected true or false, got '" + v + "'");
    }

    /// Throws ConfigInvalid naming the first key not in `allowed`.
    void reject_unknown(const std::set<std::string>& allowed) const {
        for (const auto& [k, v] : values_) {
            if (!allowed.count(k)) throw ConfigInvalid("unknown key '" + k + "'");
        }
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

private:
    static std::vector<std::string> split(const std::string& s) {
        std::vector<std::string> out;
        std::istringstream in(s);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = detail::trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    static double to_number(const std::string& key, const std::string& s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ConfigInvalid("key '" + key + "': '" + s + "' is not a number");
        }
        return v;
    }

    static int to_integer(const std::string& key, const std::string& s) {
        int v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ConfigInvalid("key '" + key + "': '" + s + "' is not an integer");
        }
        return v;
    }

    std::map<std::string, std::string> values_;
};

using CsvCell = std::variant<std::string, double, long long>;

/// In-memory CSV table: `#` comment lines, one header, rows of text/number cells.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void comment(const std::string& key, const std::string& value) { comments_.push_back(key + " = " + value); }
    void comment(const std::string& key, double value) { comment(key, format_double(value)); }

    void add_row(std::vector<CsvCell> row) {
        if (row.size() != header_.size()) throw IoError("CSV row width does not match the header");
        rows_.push_back(std::move(row));
    }

    /// Digits for floating cells; 0 means shortest round-trip.
    void set_precision(int significant) { precision_ = significant; }

    std::size_t rows() const noexcept { return rows_.size(); }

    std::string str() const {
        std::string out;
        for (const auto& c : comments_) out += "# " + c + "\n";
        out += join(header_) + "\n";
        for (const auto& row : rows_) {
            std::vector<std::string> cells;
            for (const auto& cell : row) cells.push_back(render(cell));
            out += join(cells) + "\n";
        }
        return out;
    }

private:
    std::string render(const CsvCell& c) const {
        if (auto d = std::get_if<double>(&c)) return precision_ > 0 ? format_double(*d, precision_) : format_double(*d);
        if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
        return std::get<std::string>(c);
    }

    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
        return out;
    }

    std::vector<std::string> header_;
    std::vector<std::string> comments_;
    std::vector<std::vector<CsvCell>> rows_;
    int precision_ = 0;
};

/// Writes to `<path>.tmp` in the same directory, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

/// Columns (sublattice, r, value), 17 significant digits.
inline CsvTable wannier_csv(const WannierTable& table) {
    CsvTable csv({"sublattice", "r", "value"});
    csv.comment("lattice", to_string(table.lattice_kind()));
    csv.comment("r_max", std::to_string(table.r_max()));
    if (table.lieb_a()) csv.comment("a", *table.lieb_a());
    csv.set_precision(17);
    for (Sublattice s : table.sublattices())
        for (int r = -table.r_max(); r <= table.r_max(); ++r) csv.add_row({std::string(to_string(s)), (long long)r, table.at(s, r)});
    return csv;
}

/// Columns (l, gamma_l_over_gamma_A) for 0 <= l <= cutoff.
inline CsvTable kernel_csv(const DissipationKernel& kernel) {
    CsvTable csv({"l", "gamma_l_over_gamma_A"});
    csv.comment("lattice", to_string(kernel.lattice()));
    csv.comment("kappa", kernel.kappa());
    csv.comment("cutoff", std::to_string(kernel.cutoff()));
    if (kernel.lieb_a()) csv.comment("a", *kernel.lieb_a());
    for (int l = 0; l <= kernel.cutoff(); ++l) csv.add_row({(long long)l, kernel.relative_rate(l)});
    return csv;
}

} // namespace flatband
