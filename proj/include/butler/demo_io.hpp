#pragma once

// Demonstration CSV files. One header row `t,q0,...,q{D-1}`, one row per
// sample; the label lives in the file name `<label>__<index>.csv` and a
// `demos.json` sidecar in the directory records label, dimension and source.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "butler/error.hpp"
#include "butler/trajectory.hpp"

namespace butler {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw FormatError("not a number: '" + std::string(text) + "'");
  return v;
}

inline std::string demo_file_name(const std::string& label, std::size_t index) {
  return label + "__" + std::to_string(index) + ".csv";
}

/// Splits `<label>__<index>.csv`; returns false when the name does not match.
inline bool parse_demo_file_name(const std::string& name, std::string& label, std::size_t& index) {
  if (name.size() < 4 || name.substr(name.size() - 4) != ".csv") return false;
  const std::string stem = name.substr(0, name.size() - 4);
  const auto sep = stem.rfind("__");
  if (sep == std::string::npos || sep == 0) return false;
  const std::string idx = stem.substr(sep + 2);
  if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return false;
  label = stem.substr(0, sep);
  index = std::stoul(idx);
  return true;
}

inline void write_demo_csv(std::ostream& os, const Demonstration& demo) {
  os << 't';
  for (Eigen::Index j = 0; j < demo.dim(); ++j) os << ",q" << j;
  os << '\n';
  for (const auto& s : demo.samples()) {
    os << format_double(s.t);
    for (Eigen::Index j = 0; j < s.q.size(); ++j) os << ',' << format_double(s.q[j]);
    os << '\n';
  }
}

inline void write_demo_csv(const std::filesystem::path& path, const Demonstration& demo) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_demo_csv(os, demo);
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

inline Demonstration read_demo_csv(std::istream& is, const std::string& label,
                                   DemoSource source = DemoSource::recorded) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty demonstration file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "t") throw FormatError("header must start with 't,q0'");
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "q" + std::to_string(j - 1))
      throw FormatError("unexpected header column '" + header[j] + "'");
  }
  const auto dim = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<TimedSample> samples;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      vals.push_back(parse_double(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<Eigen::Index>(vals.size()) != dim + 1)
      throw FormatError("row " + std::to_string(row) + " has " + std::to_string(vals.size()) +
                        " columns, expected " + std::to_string(dim + 1));
    TimedSample s;
    s.t = vals[0];
    s.q = Eigen::Map<const Eigen::VectorXd>(vals.data() + 1, dim);
    samples.push_back(std::move(s));
  }
  try {
    return Demonstration(label, std::move(samples), source);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid demonstration: ") + e.what());
  }
}

inline Demonstration read_demo_csv(const std::filesystem::path& path,
                                   DemoSource source = DemoSource::recorded) {
  std::string label;
  std::size_t index = 0;
  if (!parse_demo_file_name(path.filename().string(), label, index))
    throw FormatError("file name '" + path.filename().string() + "' is not <label>__<index>.csv");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_demo_csv(is, label, source);
}

inline constexpr const char* kDemoSidecarName = "demos.json";

/// Writes demos as `<label>__<i>.csv` plus the sidecar. All demos must share
/// label, dimension and source.
inline void write_demo_directory(const std::filesystem::path& dir,
                                 std::span<const Demonstration> demos) {
  if (demos.empty()) throw InvalidArgument("no demonstrations to write");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  const auto& first = demos.front();
  for (std::size_t i = 0; i < demos.size(); ++i) {
    if (demos[i].label() != first.label()) throw MixedLabels("directory holds one movement label");
    if (demos[i].dim() != first.dim()) throw MixedDimensions("directory holds one joint dimension");
    write_demo_csv(dir / demo_file_name(demos[i].label(), i), demos[i]);
  }
  nlohmann::json side = {{"label", first.label()},
                         {"dimension", first.dim()},
                         {"source", to_string(first.source())},
                         {"count", demos.size()}};
  std::ofstream os(dir / kDemoSidecarName);
  if (!os) throw IoError("cannot write sidecar in '" + dir.string() + "'");
  os << side.dump(2) << '\n';
}

/// Loads every `<label>__<index>.csv` in a directory, ordered by index. The
/// sidecar, when present, is checked against the files.
inline std::vector<Demonstration> read_demo_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  DemoSource source = DemoSource::recorded;
  std::string side_label;
  long long side_dim = -1;
  const auto side_path = dir / kDemoSidecarName;
  if (std::filesystem::exists(side_path)) {
    std::ifstream is(side_path);
    nlohmann::json side;
    try {
      is >> side;
      side_label = side.at("label").get<std::string>();
      side_dim = side.at("dimension").get<long long>();
      source = demo_source_from_string(side.at("source").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad demos.json: ") + e.what());
    }
  }
  std::map<std::size_t, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string label;
    std::size_t index = 0;
    if (parse_demo_file_name(entry.path().filename().string(), label, index)) {
      if (!side_label.empty() && label != side_label)
        throw MixedLabels("file '" + entry.path().filename().string() + "' does not match label '" +
                          side_label + "'");
      if (!files.emplace(index, entry.path()).second)
        throw FormatError("duplicate demonstration index " + std::to_string(index));
    }
  }
  std::vector<Demonstration> out;
  out.reserve(files.size());
  for (const auto& [index, path] : files) {
    out.push_back(read_demo_csv(path, source));
    if (side_dim >= 0 && out.back().dim() != side_dim)
      throw MixedDimensions("'" + path.filename().string() + "' does not match sidecar dimension");
  }
  return out;
}

}  // namespace butler
