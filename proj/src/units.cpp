#include "edgeprune/units.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "edgeprune/error.hpp"

namespace edgeprune {

namespace {

std::pair<double, std::string> split_number(const std::string& text, const char* what) {
  std::size_t start = 0;
  while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + text.size(), value);
  if (ec != std::errc{}) {
    throw ConfigError(std::string("cannot parse ") + what + " '" + text + "'");
  }
  std::string unit(ptr, text.data() + text.size());
  std::erase_if(unit, [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (unit.empty()) {
    throw ConfigError(std::string(what) + " '" + text + "' needs an explicit unit");
  }
  return {value, unit};
}

}  // namespace

double parse_rate(const std::string& text) {
  const auto [value, unit] = split_number(text, "rate");
  double factor = 0.0;
  if (unit == "bps") factor = 1.0 / 8.0;
  else if (unit == "kbps" || unit == "Kbps") factor = 1e3 / 8.0;
  else if (unit == "Mbps") factor = 1e6 / 8.0;
  else if (unit == "Gbps") factor = 1e9 / 8.0;
  else if (unit == "B/s") factor = 1.0;
  else if (unit == "kB/s" || unit == "KB/s") factor = 1e3;
  else if (unit == "MB/s") factor = 1e6;
  else if (unit == "GB/s") factor = 1e9;
  else throw ConfigError("unknown rate unit '" + unit + "' in '" + text + "'");
  const double rate = value * factor;
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ConfigError("rate '" + text + "' must be positive");
  }
  return rate;
}

double parse_duration(const std::string& text) {
  const auto [value, unit] = split_number(text, "duration");
  double factor = 0.0;
  if (unit == "s") factor = 1.0;
  else if (unit == "ms") factor = 1e-3;
  else if (unit == "us") factor = 1e-6;
  else throw ConfigError("unknown duration unit '" + unit + "' in '" + text + "'");
  if (!(value >= 0.0)) throw ConfigError("duration '" + text + "' must be non-negative");
  return value * factor;
}

std::string format_rate(double bytes_per_second) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), to_mbps(bytes_per_second));
  std::string mbps = std::string(buf, end) + "Mbps";
  if (parse_rate(mbps) == bytes_per_second) return mbps;
  auto [end2, ec2] = std::to_chars(buf, buf + sizeof(buf), bytes_per_second, std::chars_format::fixed);
  return std::string(buf, end2) + "B/s";
}

double to_mbps(double bytes_per_second) { return bytes_per_second * 8.0 / 1e6; }

}  // namespace edgeprune
