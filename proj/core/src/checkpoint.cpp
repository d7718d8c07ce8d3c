#include "m2oe2/train/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace m2oe2::train {

namespace {

constexpr std::string_view kMagic = "m2oe2-checkpoint 1";

class CheckpointError : public ConfigError {
 public:
  CheckpointError(std::size_t line, const std::string& what)
      : ConfigError("checkpoint line " + std::to_string(line) + ": " + what) {}
};

}  // namespace

std::string to_text(const Checkpoint& ckpt) {
  std::string out(kMagic);
  out += "\nlabel " + ckpt.label + "\n";
  for (const auto& [k, v] : ckpt.config.to_map()) out += "config " + k + " " + v + "\n";
  out += "stats_fingerprint " + ckpt.stats.fingerprint() + "\n";
  const std::string stats = ckpt.stats.to_csv();
  std::size_t stats_lines = 0;
  for (char c : stats) stats_lines += c == '\n';
  out += "stats " + std::to_string(stats_lines) + "\n" + stats;
  for (const auto& p : ckpt.params) {
    out += "param " + p.name + " " + std::string(diff::to_string(p.group)) + " " +
           std::to_string(p.value.rank());
    for (std::size_t d : p.value.shape()) out += " " + std::to_string(d);
    out += "\n";
    bool first = true;
    for (double v : p.value.values()) {
      if (!first) out += ' ';
      out += format_double(v);
      first = false;
    }
    out += "\n";
  }
  out += "end\n";
  return out;
}

Checkpoint checkpoint_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t no = 0;
  auto next = [&](bool required = true) {
    const bool ok = static_cast<bool>(std::getline(in, line));
    ++no;
    if (!ok && required) throw CheckpointError(no, "unexpected end of file");
    return ok;
  };

  next();
  if (line != kMagic) throw CheckpointError(no, "not an m2oe2 checkpoint");
  Checkpoint ck;
  std::map<std::string, std::string> cfg;
  std::string fingerprint;
  bool ended = false;
  while (next(false)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "label") {
      ck.label = line.size() > 6 ? line.substr(6) : "";
    } else if (tag == "config") {
      std::string k, v;
      if (!(ls >> k >> v)) throw CheckpointError(no, "malformed config entry");
      cfg[k] = v;
    } else if (tag == "stats_fingerprint") {
      ls >> fingerprint;
    } else if (tag == "stats") {
      std::size_t n = 0;
      ls >> n;
      std::string csv;
      for (std::size_t i = 0; i < n; ++i) {
        next();
        csv += line + "\n";
      }
      ck.stats = data::NormStats::from_csv(csv);
    } else if (tag == "param") {
      std::string name, group;
      std::size_t rank = 0;
      if (!(ls >> name >> group >> rank)) throw CheckpointError(no, "malformed param header");
      diff::Shape shape(rank);
      for (auto& d : shape)
        if (!(ls >> d)) throw CheckpointError(no, "missing extent for " + name);
      auto g = diff::parse_param_group(group);
      if (!g) throw CheckpointError(no, "unknown parameter group '" + group + "'");
      next();
      std::vector<double> values;
      values.reserve(diff::element_count(shape));
      std::istringstream vs(line);
      std::string tok;
      while (vs >> tok) values.push_back(parse_double(tok));
      if (values.size() != diff::element_count(shape))
        throw CheckpointError(no, name + " has " + std::to_string(values.size()) +
                                      " values, shape " + diff::to_string(shape) + " needs " +
                                      std::to_string(diff::element_count(shape)));
      ck.params.add(name, *g, diff::Tensor(shape, std::move(values)));
    } else {
      throw CheckpointError(no, "unknown record '" + tag + "'");
    }
  }
  if (!ended) throw CheckpointError(no, "missing end marker (truncated file?)");
  ck.config = ModelConfig::from_map(cfg);
  if (fingerprint != ck.stats.fingerprint())
    throw CheckpointError(no, "stats fingerprint " + fingerprint + " does not match stored stats " +
                                  ck.stats.fingerprint());
  Model check(ck.config, ck.params);  // validates names and shapes
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << to_text(ckpt);
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return checkpoint_from_text(ss.str());
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace m2oe2::train
