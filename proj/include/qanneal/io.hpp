#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "qanneal/dynamics.hpp"
#include "qanneal/errors.hpp"

namespace qanneal {

// 17 significant digits: enough for exact double round-trips, so re-reading
// a CSV reproduces the original bits.
inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return std::string(buffer);
}

inline void ensure_parent_dir(const std::filesystem::path& path) {
  std::error_code ec;
  const std::filesystem::path parent = path.parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent, ec);
    if (ec) {
      throw IoError("cannot create directory " + parent.string() + ": " +
                    ec.message());
    }
  }
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return buffer.str();
}

// nlohmann::json's default object is key-sorted, which we rely on for
// byte-identical output; dump with 2-space indentation plus final newline.
inline std::string dump_json(const nlohmann::json& j) {
  return j.dump(2) + "\n";
}

inline nlohmann::json parse_json(const std::string& text,
                                 const std::string& what) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid JSON in " + what);
  return j;
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  write_text_file(path, dump_json(j));
}

inline void append_jsonl_line(const std::filesystem::path& path,
                              const nlohmann::json& j) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open " + path.string() + " for append");
  out << j.dump() << "\n";
  out.flush();
  if (!out) throw IoError("append failed for " + path.string());
}

// Strict JSONL reader: any malformed line is an I/O error (a partially
// written sweep record must not be silently dropped).
inline std::vector<nlohmann::json> read_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<nlohmann::json> records;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw IoError("corrupt JSONL record at " + path.string() + ":" +
                    std::to_string(line_number));
    }
    records.push_back(std::move(j));
  }
  if (in.bad()) throw IoError("read failed for " + path.string());
  return records;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_double_field(const std::string& field,
                                 const std::string& where) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(field, &consumed);
    while (consumed < field.size() &&
           std::isspace(static_cast<unsigned char>(field[consumed]))) {
      ++consumed;
    }
    if (consumed != field.size()) {
      throw IoError("trailing characters in numeric field '" + field +
                    "' in " + where);
    }
    return value;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception&) {
    throw IoError("cannot parse '" + field + "' as a number in " + where);
  }
}

}  // namespace detail

// Numeric CSV matrix: rows of comma-separated values; blank lines and lines
// starting with '#' are skipped; all rows must have equal length.
inline Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& field : fields) {
      row.push_back(detail::parse_double_field(
          field, path.string() + ":" + std::to_string(line_number)));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged row at " + path.string() + ":" +
                    std::to_string(line_number));
    }
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("read failed for " + path.string());
  if (rows.empty()) throw IoError("no numeric rows in " + path.string());
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      matrix(i, j) = rows[static_cast<std::size_t>(i)]
                         [static_cast<std::size_t>(j)];
    }
  }
  return matrix;
}

// Reads back a protocol CSV produced by the optimize command.  The grid is
// carried in a '# grid horizon=... n_steps=...' comment; data rows provide
// the u column (third field).
inline Protocol read_protocol_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  double horizon = -1.0;
  long n_steps = -1;
  std::vector<double> u_values;
  std::string line;
  int line_number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_number);
    if (line[0] == '#') {
      std::istringstream stream(line.substr(1));
      std::string token;
      while (stream >> token) {
        if (token.rfind("horizon=", 0) == 0) {
          horizon = detail::parse_double_field(token.substr(8), where);
        } else if (token.rfind("n_steps=", 0) == 0) {
          n_steps = static_cast<long>(
              detail::parse_double_field(token.substr(8), where));
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line.rfind("step,", 0) != 0) {
        throw IoError("expected protocol header at " + where);
      }
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() < 3) throw IoError("short protocol row at " + where);
    u_values.push_back(detail::parse_double_field(fields[2], where));
  }
  if (in.bad()) throw IoError("read failed for " + path.string());
  if (!(horizon > 0.0) || n_steps < 1) {
    throw IoError("protocol file " + path.string() +
                  " lacks a '# grid horizon=... n_steps=...' comment");
  }
  if (static_cast<long>(u_values.size()) != n_steps) {
    throw IoError("protocol file " + path.string() + " has " +
                  std::to_string(u_values.size()) + " rows but n_steps=" +
                  std::to_string(n_steps));
  }
  const TimeGrid grid(horizon, static_cast<int>(n_steps));
  Eigen::VectorXd values(n_steps);
  for (long k = 0; k < n_steps; ++k) {
    values(k) = u_values[static_cast<std::size_t>(k)];
  }
  return Protocol(grid, values);
}

}  // namespace qanneal
