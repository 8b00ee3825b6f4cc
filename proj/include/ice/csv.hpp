#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ice::csv {

// Shortest decimal that round-trips to the same double. Keeps serialized
// problems and reports bit-faithful when read back.
std::string format(double v);
std::string format_int(std::int64_t v);
std::string format_uint(std::uint64_t v);

double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::uint64_t parse_uint(std::string_view s);

struct Table {
    std::vector<std::string> comments;  // verbatim lines written as "# ..."
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write(const std::filesystem::path& file, const Table& table);
Table read(const std::filesystem::path& file);

// Matrix convenience wrappers; one header column per matrix column.
void write_matrix(const std::filesystem::path& file, const std::vector<std::string>& header,
                  const Eigen::MatrixXd& m, const std::vector<std::string>& comments = {});
Eigen::MatrixXd read_matrix(const std::filesystem::path& file);

}  // namespace ice::csv
