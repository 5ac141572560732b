#pragma once

#include "icet/geometry.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace icet {

/// Scan text format: optional leading `#` comment lines (`# frame_tag: new`,
/// `# key: value` metadata), then one `x,y` pair per line. Values are written
/// with 17 significant digits so a write/read cycle is bit-exact.
struct ScanFile {
  Scan scan;
  std::map<std::string, std::string> metadata;
};

void write_scan_csv(std::ostream& os, const Scan& scan,
                    const std::map<std::string, std::string>& metadata = {});
ScanFile read_scan_csv(std::istream& is);

void save_scan(const std::string& path, const Scan& scan,
               const std::map<std::string, std::string>& metadata = {});
ScanFile load_scan(const std::string& path);

}  // namespace icet
