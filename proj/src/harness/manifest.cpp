#include "dvk/harness/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dvk/error.hpp"

namespace dvk::harness {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

constexpr std::string_view kDifficult = "difficult:";

}  // namespace

std::vector<int> DatasetManifest::split_indices(const std::string& name) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == name) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  const std::filesystem::path p(e.path);
  return p.is_absolute() || root.empty() ? p : root / p;
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root) {
  DatasetManifest m;
  m.root = root;
  struct Raw {
    std::string path, split;
    std::vector<std::pair<std::string, bool>> labels;
    int line;
  };
  std::vector<Raw> raw;
  bool explicit_classes = false;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.rfind("@classes", 0) == 0) {
      if (explicit_classes || !raw.empty()) {
        throw DataError("manifest line " + std::to_string(number) + ": @classes must come first and only once");
      }
      explicit_classes = true;
      for (const std::string& c : split(trim(t.substr(8)), ',')) {
        const std::string name = trim(c);
        if (name.empty()) throw DataError("manifest line " + std::to_string(number) + ": empty class name");
        if (std::find(m.classes.begin(), m.classes.end(), name) != m.classes.end()) {
          throw DataError("manifest line " + std::to_string(number) + ": duplicate class '" + name + "'");
        }
        m.classes.push_back(name);
      }
      continue;
    }
    const std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 3) {
      throw DataError("manifest line " + std::to_string(number) + ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    Raw r{trim(fields[0]), trim(fields[1]), {}, number};
    if (r.path.empty()) throw DataError("manifest line " + std::to_string(number) + ": empty path");
    if (r.split != "train" && r.split != "val" && r.split != "test") {
      throw DataError("manifest line " + std::to_string(number) + ": unknown split '" + r.split + "'");
    }
    for (const std::string& l : split(trim(fields[2]), ',')) {
      std::string name = trim(l);
      bool difficult = false;
      if (name.rfind(kDifficult, 0) == 0) {
        difficult = true;
        name = trim(name.substr(kDifficult.size()));
      }
      if (name.empty()) throw DataError("manifest line " + std::to_string(number) + ": empty label");
      r.labels.emplace_back(name, difficult);
    }
    if (r.labels.empty()) throw DataError("manifest line " + std::to_string(number) + ": no labels");
    raw.push_back(std::move(r));
  }
  if (raw.empty()) throw DataError("manifest: no entries");

  if (!explicit_classes) {
    std::set<std::string> names;
    for (const Raw& r : raw) {
      for (const auto& l : r.labels) names.insert(l.first);
    }
    m.classes.assign(names.begin(), names.end());
  }
  std::map<std::string, int> class_index;
  for (std::size_t c = 0; c < m.classes.size(); ++c) class_index[m.classes[c]] = static_cast<int>(c);

  std::map<std::string, const Raw*> seen;
  for (const Raw& r : raw) {
    const auto [it, inserted] = seen.emplace(r.path, &r);
    if (!inserted) {
      const Raw& first = *it->second;
      if (first.split != r.split) {
        throw DataError("manifest: '" + r.path + "' appears in split '" + first.split + "' (line " +
                        std::to_string(first.line) + ") and split '" + r.split + "' (line " +
                        std::to_string(r.line) + ")");
      }
      throw DataError("manifest: duplicate path '" + r.path + "' on lines " + std::to_string(first.line) + " and " +
                      std::to_string(r.line));
    }
    ManifestEntry e;
    e.path = r.path;
    e.split = r.split;
    e.line = r.line;
    for (const auto& [name, difficult] : r.labels) {
      const auto c = class_index.find(name);
      if (c == class_index.end()) {
        throw DataError("manifest line " + std::to_string(r.line) + ": unknown label '" + name + "'");
      }
      (difficult ? e.difficult : e.labels).push_back(c->second);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

}  // namespace dvk::harness
