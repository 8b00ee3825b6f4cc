#include "ice/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ice/errors.hpp"

namespace ice::csv {

std::string format(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("csv: failed to format double");
    return std::string(buf, ptr);
}

std::string format_int(std::int64_t v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_uint(std::uint64_t v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ContractViolation("csv: not a number: '" + std::string(s) + "'");
    return v;
}

std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ContractViolation("csv: not an integer: '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_uint(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ContractViolation("csv: not an unsigned integer: '" + std::string(s) + "'");
    return v;
}

void write(const std::filesystem::path& file, const Table& table) {
    std::ofstream out(file);
    if (!out) throw ContractViolation("csv: cannot open for writing: " + file.string());
    for (const auto& c : table.comments) out << "# " << c << "\n";
    for (std::size_t j = 0; j < table.header.size(); ++j)
        out << table.header[j] << (j + 1 < table.header.size() ? "," : "");
    out << "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw ContractViolation("csv: row width does not match header");
        for (std::size_t j = 0; j < row.size(); ++j)
            out << row[j] << (j + 1 < row.size() ? "," : "");
        out << "\n";
    }
    if (!out) throw NumericError("csv: write failed: " + file.string());
}

static std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

Table read(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ContractViolation("csv: cannot open: " + file.string());
    Table table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::size_t start = line.size() > 1 && line[1] == ' ' ? 2 : 1;
            table.comments.push_back(line.substr(start));
            continue;
        }
        if (!have_header) {
            table.header = split_line(line);
            have_header = true;
        } else {
            auto cells = split_line(line);
            if (cells.size() != table.header.size())
                throw ContractViolation("csv: ragged row in " + file.string());
            table.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw ContractViolation("csv: missing header in " + file.string());
    return table;
}

void write_matrix(const std::filesystem::path& file, const std::vector<std::string>& header,
                  const Eigen::MatrixXd& m, const std::vector<std::string>& comments) {
    if (static_cast<Eigen::Index>(header.size()) != m.cols())
        throw ContractViolation("csv: header width does not match matrix");
    Table table;
    table.comments = comments;
    table.header = header;
    table.rows.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format(m(i, j)));
        table.rows.push_back(std::move(row));
    }
    write(file, table);
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& file) {
    Table table = read(file);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = parse_double(table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    return m;
}

}  // namespace ice::csv
