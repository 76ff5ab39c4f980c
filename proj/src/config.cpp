#include "isiw/config.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "isiw/core.hpp"

namespace isiw {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string &key, const std::string &s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size())
      return v;
  } catch (const std::exception &) {
  }
  throw DomainError("config: '" + key + "' expects a number, got '" + s + "'");
}

} // namespace

KeyValueConfig KeyValueConfig::parse(std::istream &in) {
  KeyValueConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw DomainError("config line " + std::to_string(line_no) + ": empty key");
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DomainError("cannot open config " + path);
  return parse(in);
}

void KeyValueConfig::set(const std::string &key, const std::string &value) {
  values_[key] = value;
}

bool KeyValueConfig::has(const std::string &key) const {
  return values_.count(key) > 0;
}

const std::string *KeyValueConfig::find(const std::string &key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KeyValueConfig::get_string(const std::string &key,
                                       const std::string &fallback) const {
  const std::string *v = find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string &key, double fallback) const {
  const std::string *v = find(key);
  return v ? to_double(key, *v) : fallback;
}

long KeyValueConfig::get_int(const std::string &key, long fallback) const {
  const std::string *v = find(key);
  if (!v)
    return fallback;
  const double d = to_double(key, *v);
  const long i = static_cast<long>(d);
  if (static_cast<double>(i) != d)
    throw DomainError("config: '" + key + "' expects an integer");
  return i;
}

std::vector<std::string>
KeyValueConfig::get_list(const std::string &key,
                         const std::vector<std::string> &fallback) const {
  const std::string *v = find(key);
  if (!v)
    return fallback;
  std::vector<std::string> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

std::vector<double>
KeyValueConfig::get_double_list(const std::string &key,
                                const std::vector<double> &fallback) const {
  if (!has(key))
    return fallback;
  std::vector<double> out;
  for (const auto &s : get_list(key, {}))
    out.push_back(to_double(key, s));
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto &[k, v] : values_)
    if (!used_.count(k))
      out.push_back(k);
  return out;
}

} // namespace isiw
