#include "m2oe2/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace m2oe2::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return n;
}

fs::path resolve(const fs::path& base, const std::string& v) {
  fs::path p(v);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const fs::path& base_dir,
                           const std::string& source) {
  RunConfig rc;
  rc.source = source;
  const auto model_keys = ModelConfig{}.to_map();
  const auto train_keys = TrainConfig{}.to_map();
  std::map<std::string, std::string> model_kv, train_kv;
  std::map<std::string, std::size_t> seen;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": empty key or value");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      throw ConfigError(where + ": '" + key + "' already set on line " + std::to_string(it->second));

    try {
      if (key == "data.csv") {
        rc.csv = resolve(base_dir, value);
      } else if (key == "data.schema") {
        rc.schema = resolve(base_dir, value);
      } else if (key == "data.week_len") {
        rc.week_len = parse_size(key, value);
      } else if (key == "data.origin_stride") {
        rc.origin_stride = parse_size(key, value);
        if (rc.origin_stride == 0) throw ConfigError(key + " must be positive");
      } else if (key == "out") {
        rc.out = resolve(base_dir, value);
      } else if (key.rfind("model.", 0) == 0 && model_keys.count(key.substr(6))) {
        ModelConfig::from_map({{key.substr(6), value}});  // per-line value check
        model_kv[key.substr(6)] = value;
        rc.explicit_model_keys.insert(key.substr(6));
      } else if (key.rfind("train.", 0) == 0 && train_keys.count(key.substr(6))) {
        TrainConfig::from_map({{key.substr(6), value}});
        train_kv[key.substr(6)] = value;
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      if (std::string_view(e.what()).rfind(where, 0) == 0) throw;
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (rc.csv.empty()) throw ConfigError(source + ": data.csv is required");
  if (rc.schema.empty()) throw ConfigError(source + ": data.schema is required");
  if (!fs::exists(rc.csv)) throw ConfigError("dataset not found: " + rc.csv.string());
  if (!fs::exists(rc.schema)) throw ConfigError("schema not found: " + rc.schema.string());
  rc.model = ModelConfig::from_map(model_kv);
  rc.train = TrainConfig::from_map(train_kv);
  rc.train.validate();
  return rc;
}

RunConfig RunConfig::read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), fs::absolute(path).parent_path(), path.string());
}

void RunConfig::bind(const data::TimeSeriesDataset& ds) {
  auto derive = [&](const char* key, std::size_t& field, std::size_t value) {
    if (explicit_model_keys.count(key) && field != value)
      throw ConfigError("model." + std::string(key) + " = " + std::to_string(field) +
                        " disagrees with the dataset, which gives " + std::to_string(value));
    field = value;
  };
  derive("load_width", model.load_width, ds.load_columns.size());
  derive("num_experts", model.num_experts, ds.external_columns.size());
  derive("external_width", model.external_width, 1);
  if (!explicit_model_keys.count("top_m")) model.top_m = std::min(model.top_m, model.num_experts);
  model.validate();
}

std::size_t RunConfig::week_length(const data::TimeSeriesDataset& ds) const {
  return week_len ? week_len : ds.week_len();
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  os << "data.csv = " << fs::absolute(csv).string() << '\n'
     << "data.schema = " << fs::absolute(schema).string() << '\n';
  if (week_len) os << "data.week_len = " << week_len << '\n';
  os << "data.origin_stride = " << origin_stride << '\n'
     << "out = " << fs::absolute(out).string() << '\n';
  for (const auto& [k, v] : model.to_map()) os << "model." << k << " = " << v << '\n';
  for (const auto& [k, v] : train.to_map()) os << "train." << k << " = " << v << '\n';
  return os.str();
}

}  // namespace m2oe2::cli
