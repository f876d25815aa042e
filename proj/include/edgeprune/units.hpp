#pragma once

#include <string>

namespace edgeprune {

/// Parses a rate with an explicit unit into bytes per second. Accepted units:
/// bps, kbps, Mbps, Gbps (bits, decimal prefixes) and B/s, kB/s, MB/s, GB/s.
/// "1.1Mbps" and "137.5kB/s" both give 137500.
double parse_rate(const std::string& text);

/// Parses a duration with unit s, ms or us into seconds.
double parse_duration(const std::string& text);

/// Shortest round-trip text in B/s, accepted by parse_rate.
std::string format_rate(double bytes_per_second);

/// Bytes per second as megabits per second.
double to_mbps(double bytes_per_second);

}  // namespace edgeprune
