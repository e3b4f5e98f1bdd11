#include <fstream>
#include <set>
#include <sstream>

#include "mgnet/dataset.hpp"
#include "mgnet/errors.hpp"
#include "mgnet/volume_io.hpp"

namespace mgnet {
namespace {

constexpr const char* kManifestHeader = "subject_id,scan_id,label,path";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

void Manifest::validate() const {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records) {
    if (r.subject_id.empty()) throw ArgumentError("manifest record with empty subject_id");
    if (r.label != 0 && r.label != 1) {
      throw ArgumentError("subject " + r.subject_id + ": label must be 0 or 1");
    }
    if (!seen.emplace(r.subject_id, r.scan_id).second) {
      throw ArgumentError("duplicate scan " + r.subject_id + "/" + r.scan_id);
    }
  }
  subject_labels();
}

std::map<std::string, int> Manifest::subject_labels() const {
  std::map<std::string, int> labels;
  for (const auto& r : records) {
    auto [it, inserted] = labels.emplace(r.subject_id, r.label);
    if (!inserted && it->second != r.label) {
      throw ArgumentError("subject " + r.subject_id + " has scans with different labels");
    }
  }
  return labels;
}

Manifest read_manifest(const std::filesystem::path& path, bool probe_geometry) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw FormatError(path.string() + ": empty manifest");
  strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kManifestHeader) {
    throw FormatError(path.string() + ": manifest header must be `" + kManifestHeader + "`");
  }
  const std::filesystem::path base = path.parent_path();
  Manifest m;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 4) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    VolumeRecord r;
    r.subject_id = fields[0];
    r.scan_id = fields[1];
    if (fields[2] == "0") {
      r.label = 0;
    } else if (fields[2] == "1") {
      r.label = 1;
    } else {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    }
    r.volume_path = fields[3];
    if (r.volume_path.is_relative()) r.volume_path = base / r.volume_path;
    m.records.push_back(std::move(r));
  }
  try {
    m.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (probe_geometry) {
    for (const auto& r : m.records) {
      const Shape s = read_volume_shape(r.volume_path);
      if (m.geometry.empty()) {
        m.geometry = s;
      } else if (s != m.geometry) {
        throw DataError(r.volume_path.string() + ": geometry " + shape_str(s) +
                        " differs from manifest geometry " + shape_str(m.geometry));
      }
    }
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const std::filesystem::path base = path.parent_path();
  os << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    std::filesystem::path p = r.volume_path;
    if (!base.empty()) {
      const auto rel = p.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    os << r.subject_id << ',' << r.scan_id << ',' << r.label << ',' << p.generic_string() << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace mgnet
