#include "rnmt/run_config.h"

#include <map>
#include <sstream>

#include "rnmt/error.h"
#include "rnmt/kv.h"

namespace rnmt {

void RunConfig::set(const std::string& key, const std::string& value) {
  if (model.set(key, value) || train.set(key, value)) return;
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::load(const std::filesystem::path& path) {
  for (const auto& [k, v] : kv::parse_file(path)) set(k, v);
}

void RunConfig::apply(const std::string& assignment) {
  const auto [k, v] = kv::parse_assignment(assignment);
  set(k, v);
}

std::string RunConfig::resolved() const {
  auto all = model.to_kv();
  all.merge(train.to_kv());
  std::ostringstream os;
  for (const auto& [k, v] : all) os << k << " = " << v << '\n';
  return os.str();
}

}  // namespace rnmt
