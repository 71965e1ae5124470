#pragma once

// CSV and JSON output. CSV doubles are printed with 17 significant digits
// so a file round-trips bit-exactly; missing values are written as NA.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lmt/error.hpp"

namespace lmt::io {

using Cell = std::variant<std::monostate, double, long, std::string>;

inline Cell opt(const std::optional<double>& v) { return v ? Cell(*v) : Cell(std::monostate{}); }

inline std::string format_cell(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return "NA";
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  if (const auto* l = std::get_if<long>(&c)) return std::to_string(*l);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : out_(path), width_(header.size()) {
    if (!out_) throw Error("cannot write " + path.string());
    write_line(std::vector<Cell>(header.begin(), header.end()));
  }

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != width_) throw PreconditionError("csv row width does not match the header");
    write_line(cells);
  }

 private:
  void write_line(const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_cell(cells[i]);
    }
    out_ << '\n';
  }
  std::ofstream out_;
  std::size_t width_;
};

// Run summary: settings hash, named golden numbers, wall time.
class RunSummary {
 public:
  RunSummary(std::string command, std::string settings_hash)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["settings_hash"] = std::move(settings_hash);
    doc_["golden"] = nlohmann::json::object();
  }

  void golden(const std::string& name, double value) { doc_["golden"][name] = value; }
  void note(const std::string& name, const nlohmann::json& value) { doc_[name] = value; }
  nlohmann::json& doc() { return doc_; }

  void write(const std::filesystem::path& path) {
    doc_["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << doc_.dump(2) << '\n';
  }

 private:
  nlohmann::json doc_;
  std::chrono::steady_clock::time_point start_;
};

struct GoldenMismatch {
  std::string name;
  double expected;
  double actual;
};

// Compares the "golden" block of two summaries. A tolerance entry is
// relative unless the name is listed in `absolute`.
inline std::vector<GoldenMismatch> compare_golden(const nlohmann::json& expected, const nlohmann::json& actual,
                                                  const std::map<std::string, double>& tolerance,
                                                  double default_tolerance = 1e-9,
                                                  const std::vector<std::string>& absolute = {}) {
  std::vector<GoldenMismatch> out;
  if (expected.value("settings_hash", "") != actual.value("settings_hash", ""))
    out.push_back({"settings_hash", 0.0, 1.0});
  const auto& e = expected.at("golden");
  const auto& a = actual.at("golden");
  for (auto it = e.begin(); it != e.end(); ++it) {
    const double ev = it.value().get<double>();
    if (!a.contains(it.key())) {
      out.push_back({it.key(), ev, std::nan("")});
      continue;
    }
    const double av = a.at(it.key()).get<double>();
    const auto tol_it = tolerance.find(it.key());
    const double tol = tol_it == tolerance.end() ? default_tolerance : tol_it->second;
    const bool abs_mode = std::find(absolute.begin(), absolute.end(), it.key()) != absolute.end();
    const double scale = abs_mode ? 1.0 : std::max(std::abs(ev), 1e-300);
    if (!(std::abs(av - ev) <= tol * scale)) out.push_back({it.key(), ev, av});
  }
  return out;
}

}  // namespace lmt::io
