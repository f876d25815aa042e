#include "edgeprune/profile.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "edgeprune/error.hpp"

namespace edgeprune {

std::string to_string(ProfileMethod method) {
  return method == ProfileMethod::WallClock ? "wallclock" : "analytic";
}

ProfileMethod parse_profile_method(const std::string& text) {
  if (text == "wallclock") return ProfileMethod::WallClock;
  if (text == "analytic") return ProfileMethod::Analytic;
  throw InvalidInput("unknown profile method '" + text + "' (expected wallclock or analytic)");
}

void ModelProfile::accumulate() {
  cumulative.resize(layers.size());
  double running = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    running += layers[i].latency_s;
    cumulative[i] = running;
  }
  total = running;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IngestionError("profile: cannot parse " + what + " '" + s + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IngestionError("profile: cannot parse " + what + " '" + s + "'");
  }
  return v;
}

constexpr const char* kColumns =
    "index\tname\tkind\telements\tbytes\tt_s\tf_s\tflops\tencoded_bytes\tencode_s\tdecode_s";

}  // namespace

std::string format_profile(const ModelProfile& p) {
  std::ostringstream out;
  out << "# record_id=" << p.record_id << '\n';
  out << "# method=" << to_string(p.method) << '\n';
  out << "# timer=" << p.timer_digest << '\n';
  out << "# bytes_per_element=" << p.bytes_per_element << '\n';
  out << "# classes=" << p.classes << '\n';
  out << "# input_elements=" << p.input_elements << '\n';
  out << "# input_bytes=" << p.input_bytes << '\n';
  out << "# input_encoded_bytes=" << p.input_encoded_bytes << '\n';
  out << "# input_encode_s=" << fmt(p.input_encode_s) << '\n';
  out << "# input_decode_s=" << fmt(p.input_decode_s) << '\n';
  out << "# total_s=" << fmt(p.total) << '\n';
  out << kColumns << '\n';
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const LayerProfile& l = p.layers[i];
    out << l.index << '\t' << l.name << '\t' << l.kind << '\t' << l.elements << '\t' << l.bytes << '\t'
        << fmt(l.latency_s) << '\t' << fmt(p.cumulative.at(i)) << '\t' << l.flops << '\t'
        << l.encoded_bytes << '\t' << fmt(l.encode_s) << '\t' << fmt(l.decode_s) << '\n';
  }
  return out.str();
}

ModelProfile parse_profile(const std::string& text) {
  ModelProfile p;
  std::map<std::string, std::string> header;
  std::istringstream in(text);
  std::string line;
  bool saw_columns = false;
  std::vector<double> cumulative;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos || line.size() < 2) continue;
      header[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!saw_columns) {
      if (line != kColumns) throw IngestionError("profile: unexpected column header");
      saw_columns = true;
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, '\t')) cells.push_back(cell);
    if (cells.size() != 11) throw IngestionError("profile: row has " + std::to_string(cells.size()) + " cells");
    LayerProfile l;
    l.index = parse_uint(cells[0], "index");
    l.name = cells[1];
    l.kind = cells[2];
    l.elements = parse_uint(cells[3], "elements");
    l.bytes = parse_uint(cells[4], "bytes");
    l.latency_s = parse_double(cells[5], "t_s");
    cumulative.push_back(parse_double(cells[6], "f_s"));
    l.flops = parse_uint(cells[7], "flops");
    l.encoded_bytes = parse_uint(cells[8], "encoded_bytes");
    l.encode_s = parse_double(cells[9], "encode_s");
    l.decode_s = parse_double(cells[10], "decode_s");
    p.layers.push_back(std::move(l));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw IngestionError("profile: missing header field " + key);
    return it->second;
  };
  p.record_id = std::stoi(get("record_id"));
  p.method = parse_profile_method(get("method"));
  p.timer_digest = get("timer");
  p.bytes_per_element = parse_uint(get("bytes_per_element"), "bytes_per_element");
  p.classes = parse_uint(get("classes"), "classes");
  p.input_elements = parse_uint(get("input_elements"), "input_elements");
  p.input_bytes = parse_uint(get("input_bytes"), "input_bytes");
  p.input_encoded_bytes = parse_uint(get("input_encoded_bytes"), "input_encoded_bytes");
  p.input_encode_s = parse_double(get("input_encode_s"), "input_encode_s");
  p.input_decode_s = parse_double(get("input_decode_s"), "input_decode_s");
  p.cumulative = std::move(cumulative);
  p.total = parse_double(get("total_s"), "total_s");
  return p;
}

void write_profile(const ModelProfile& profile, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw ProfilingError("cannot write profile " + file.string());
  out << format_profile(profile);
}

ModelProfile read_profile(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestionError("cannot open profile " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_profile(buffer.str());
}

}  // namespace edgeprune
