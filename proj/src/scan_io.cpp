#include "icet/scan_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace icet {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& field, std::size_t line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error("scan csv line " + std::to_string(line_no) + ": bad number '" +
                             field + "'");
  }
  return v;
}

}  // namespace

void write_scan_csv(std::ostream& os, const Scan& scan,
                    const std::map<std::string, std::string>& metadata) {
  os << "# frame_tag: " << to_string(scan.frame_tag()) << '\n';
  for (const auto& [k, v] : metadata) {
    if (k == "frame_tag") continue;
    os << "# " << k << ": " << v << '\n';
  }
  os << std::setprecision(17);
  for (const auto& p : scan) os << p.x() << ',' << p.y() << '\n';
}

ScanFile read_scan_csv(std::istream& is) {
  ScanFile out;
  FrameTag tag = FrameTag::reference;
  std::vector<Point2> pts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string body = trim(std::string_view(t).substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(std::string_view(body).substr(0, colon));
      const std::string value = trim(std::string_view(body).substr(colon + 1));
      if (key == "frame_tag") tag = frame_tag_from_string(value);
      out.metadata[key] = value;
      continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("scan csv line " + std::to_string(line_no) + ": expected x,y");
    }
    pts.emplace_back(parse_double(trim(std::string_view(t).substr(0, comma)), line_no),
                     parse_double(trim(std::string_view(t).substr(comma + 1)), line_no));
  }
  out.scan = Scan(std::move(pts), tag);
  return out;
}

void save_scan(const std::string& path, const Scan& scan,
               const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_scan_csv(os, scan, metadata);
}

ScanFile load_scan(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_scan_csv(is);
}

}  // namespace icet
