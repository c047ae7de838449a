#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "loewner/drivers.hpp"
#include "loewner/grid.hpp"
#include "loewner/trace.hpp"

namespace loewner {

using Json = nlohmann::json;

// Full-precision decimal text; byte-stable across runs.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Driver CSV: optional '#' metadata lines, then header `t,u`, LF endings,
// '.' decimal, full double precision.
inline std::string driver_csv(const DriverPath& u,
                              const std::vector<std::string>& meta = {}) {
  std::string s;
  for (const auto& m : meta) s += "# " + m + "\n";
  s += "t,u\n";
  for (int i = 0; i <= u.grid.steps; ++i)
    s += fmt(u.grid.t(i)) + "," + fmt(u.values[i]) + "\n";
  return s;
}

inline DriverPath read_driver_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::vector<double> t, u;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("t,u", 0) != 0)
        throw std::runtime_error(path.string() + ": expected header t,u");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path.string() + ": bad row");
    t.push_back(std::stod(line.substr(0, comma)));
    u.push_back(std::stod(line.substr(comma + 1)));
  }
  if (t.size() < 2) throw std::runtime_error(path.string() + ": too few rows");
  DriverPath d;
  d.grid = TimeGrid::make(t.back(), static_cast<int>(t.size()) - 1);
  d.values = std::move(u);
  d.validate();
  return d;
}

// Trace CSV: t,re,im,converged,level,gap.
inline std::string trace_csv(const Trace& tr, const std::vector<std::string>& meta = {}) {
  std::string s;
  for (const auto& m : meta) s += "# " + m + "\n";
  s += "t,re,im,converged,level,gap\n";
  for (int i = 0; i <= tr.grid.steps; ++i) {
    const auto& p = tr.points[static_cast<std::size_t>(i)];
    s += fmt(tr.grid.t(i)) + "," + fmt(p.gamma.real()) + "," + fmt(p.gamma.imag()) + "," +
         (p.converged ? "1" : "0") + "," + std::to_string(p.level) + "," + fmt(p.gap) + "\n";
  }
  return s;
}

}  // namespace loewner
