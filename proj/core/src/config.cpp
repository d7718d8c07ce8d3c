#include "m2oe2/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace m2oe2 {

std::string_view to_string(HeadKind h) {
  switch (h) {
    case HeadKind::deterministic: return "deterministic";
    case HeadKind::gaussian: return "gaussian";
    case HeadKind::variational: return "variational";
  }
  return "unknown";
}

HeadKind parse_head(std::string_view s) {
  for (auto h : {HeadKind::deterministic, HeadKind::gaussian, HeadKind::variational})
    if (to_string(h) == s) return h;
  throw ConfigError("unknown head '" + std::string(s) +
                    "' (expected deterministic, gaussian or variational)");
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("not a number: '" + std::string(s) + "'");
  return v;
}

namespace {

std::size_t parse_count(const std::map<std::string, std::string>& kv, const std::string& key,
                        std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

double parse_real(const std::map<std::string, std::string>& kv, const std::string& key,
                  double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return parse_double(it->second);
  } catch (const ConfigError&) {
    throw ConfigError(key + ": expected a number, got '" + it->second + "'");
  }
}

bool parse_bool(const std::map<std::string, std::string>& kv, const std::string& key,
                bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + it->second + "'");
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(load_width, "load_width");
  positive(input_width, "input_width");
  positive(hidden_width, "hidden_width");
  positive(latent_width, "latent_width");
  positive(layers, "layers");
  positive(horizon, "horizon");
  positive(external_width, "external_width");
  positive(expert_hidden, "expert_hidden");
  if (experts_enabled) {
    positive(num_experts, "num_experts");
    if (top_m < 1 || top_m > num_experts)
      throw ConfigError("model.top_m must satisfy 1 <= m <= num_experts");
    if (theta_size() < 2)
      throw ConfigError("model.load_width * model.input_width must be at least 2 for layer norm");
  }
  if (mc_samples < 2) throw ConfigError("model.mc_samples must be at least 2");
  if (!(ln_eps >= 0.0)) throw ConfigError("model.ln_eps must be non-negative");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {
      {"load_width", std::to_string(load_width)},
      {"input_width", std::to_string(input_width)},
      {"hidden_width", std::to_string(hidden_width)},
      {"latent_width", std::to_string(latent_width)},
      {"layers", std::to_string(layers)},
      {"horizon", std::to_string(horizon)},
      {"num_experts", std::to_string(num_experts)},
      {"top_m", std::to_string(top_m)},
      {"external_width", std::to_string(external_width)},
      {"expert_hidden", std::to_string(expert_hidden)},
      {"mc_samples", std::to_string(mc_samples)},
      {"head", std::string(to_string(head))},
      {"experts", experts_enabled ? "true" : "false"},
      {"ln_eps", format_double(ln_eps)},
  };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  c.load_width = parse_count(kv, "load_width", c.load_width);
  c.input_width = parse_count(kv, "input_width", c.input_width);
  c.hidden_width = parse_count(kv, "hidden_width", c.hidden_width);
  c.latent_width = parse_count(kv, "latent_width", c.latent_width);
  c.layers = parse_count(kv, "layers", c.layers);
  c.horizon = parse_count(kv, "horizon", c.horizon);
  c.num_experts = parse_count(kv, "num_experts", c.num_experts);
  c.top_m = parse_count(kv, "top_m", c.top_m);
  c.external_width = parse_count(kv, "external_width", c.external_width);
  c.expert_hidden = parse_count(kv, "expert_hidden", c.expert_hidden);
  c.mc_samples = parse_count(kv, "mc_samples", c.mc_samples);
  if (auto it = kv.find("head"); it != kv.end()) c.head = parse_head(it->second);
  c.experts_enabled = parse_bool(kv, "experts", c.experts_enabled);
  c.ln_eps = parse_real(kv, "ln_eps", c.ln_eps);
  return c;
}

std::string ModelConfig::fingerprint() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_map()) os << k << '=' << v << '\n';
  return fnv1a_hex(os.str());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(kl_weight >= 0.0)) throw ConfigError("train.kl_weight must be non-negative");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"lr", format_double(learning_rate)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"kl_weight", format_double(kl_weight)},
      {"seed", std::to_string(seed)},
      {"clip_norm", format_double(clip_norm)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
  };
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  c.learning_rate = parse_real(kv, "lr", c.learning_rate);
  c.epochs = parse_count(kv, "epochs", c.epochs);
  c.batch_size = parse_count(kv, "batch_size", c.batch_size);
  c.kl_weight = parse_real(kv, "kl_weight", c.kl_weight);
  c.seed = parse_count(kv, "seed", c.seed);
  c.clip_norm = parse_real(kv, "clip_norm", c.clip_norm);
  c.checkpoint_every = parse_count(kv, "checkpoint_every", c.checkpoint_every);
  return c;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace m2oe2
