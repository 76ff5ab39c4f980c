#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace isiw {

/// Flat key=value configuration. '#' starts a comment, blank lines are
/// ignored and list values are comma separated. Later keys override earlier
/// ones. Every lookup marks its key as used so unknown keys can be reported.
class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream &in);
  static KeyValueConfig load(const std::string &path);

  void set(const std::string &key, const std::string &value);
  bool has(const std::string &key) const;

  std::string get_string(const std::string &key, const std::string &fallback) const;
  double get_double(const std::string &key, double fallback) const;
  long get_int(const std::string &key, long fallback) const;
  std::vector<std::string> get_list(const std::string &key,
                                    const std::vector<std::string> &fallback) const;
  std::vector<double> get_double_list(const std::string &key,
                                      const std::vector<double> &fallback) const;

  /// Keys present in the file that no lookup has touched.
  std::vector<std::string> unused_keys() const;

private:
  const std::string *find(const std::string &key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

} // namespace isiw
