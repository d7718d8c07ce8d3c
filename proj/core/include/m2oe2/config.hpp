#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace m2oe2 {

/// Raised for invalid configuration, schema, or user input. The CLI maps it
/// to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HeadKind { deterministic, gaussian, variational };

std::string_view to_string(HeadKind h);
HeadKind parse_head(std::string_view s);

/// Architecture of one forecaster. Field comments give the usual symbol.
struct ModelConfig {
  std::size_t load_width = 1;       // d_x
  std::size_t input_width = 40;     // d_x', width of the modulated input
  std::size_t hidden_width = 64;    // d_h
  std::size_t latent_width = 32;    // d_z
  std::size_t layers = 4;           // stacked GRU layers
  std::size_t horizon = 3;          // K
  std::size_t num_experts = 3;      // M, one per external source
  std::size_t top_m = 2;            // m
  std::size_t external_width = 1;   // d_w, scalars fed to each expert
  std::size_t expert_hidden = 40;   // hidden units of each expert
  std::size_t mc_samples = 100;     // J
  HeadKind head = HeadKind::variational;
  bool experts_enabled = true;      // false = plain GRU with static theta_0
  double ln_eps = 1e-5;

  std::size_t theta_size() const { return load_width * input_width; }
  std::size_t output_width() const { return horizon * load_width; }

  void validate() const;
  /// Canonical key=value rendering; the fingerprint hashes this text.
  std::map<std::string, std::string> to_map() const;
  static ModelConfig from_map(const std::map<std::string, std::string>& kv);
  std::string fingerprint() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  double kl_weight = 0.01;          // lambda
  std::uint64_t seed = 0;
  double clip_norm = 5.0;           // <= 0 disables clipping
  std::size_t checkpoint_every = 0; // epochs; 0 = only best and final

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
};

/// 64-bit FNV-1a of a string, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

}  // namespace m2oe2
