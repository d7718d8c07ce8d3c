#include "m2oe2/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "m2oe2/diff/ops.hpp"
#include "m2oe2/rng.hpp"

namespace m2oe2 {

using diff::ParamGroup;
using diff::Shape;

namespace {

enum class Init { uniform, zeros, constant };

struct ParamSpec {
  std::string name;
  ParamGroup group;
  Shape shape;
  Init init;
  double scale;  // half-width for uniform, value for constant
};

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  std::vector<ParamSpec> specs;
  const std::size_t H = c.hidden_width;
  const double gru_scale = 1.0 / std::sqrt(static_cast<double>(H));
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in = l == 0 ? c.input_width : H;
    const std::string p = "gru." + std::to_string(l) + ".";
    specs.push_back({p + "w_x", ParamGroup::base, {in, 3 * H}, Init::uniform, gru_scale});
    specs.push_back({p + "w_h", ParamGroup::base, {H, 3 * H}, Init::uniform, gru_scale});
    specs.push_back({p + "b", ParamGroup::base, {3 * H}, Init::uniform, gru_scale});
  }

  const std::size_t out = c.output_width();
  auto linear = [&](const std::string& name, std::size_t fan_in, std::size_t fan_out) {
    specs.push_back({name + ".w", ParamGroup::heads, {fan_in, fan_out}, Init::uniform,
                     1.0 / std::sqrt(static_cast<double>(fan_in))});
    specs.push_back({name + ".b", ParamGroup::heads, {fan_out}, Init::zeros, 0.0});
  };
  switch (c.head) {
    case HeadKind::deterministic:
      linear("head", H, out);
      break;
    case HeadKind::gaussian:
      linear("head.mean", H, out);
      linear("head.log_var", H, out);
      break;
    case HeadKind::variational: {
      const double sx = 1.0 / std::sqrt(static_cast<double>(c.input_width + H));
      for (const char* part : {"enc.mean", "enc.log_var"}) {
        const std::string p = part;
        specs.push_back({p + ".w_x", ParamGroup::heads, {c.input_width, c.latent_width},
                         Init::uniform, sx});
        specs.push_back({p + ".w_h", ParamGroup::heads, {H, c.latent_width}, Init::uniform, sx});
        specs.push_back({p + ".b", ParamGroup::heads, {c.latent_width}, Init::zeros, 0.0});
      }
      linear("dec.mean", c.latent_width, out);
      linear("dec.log_var", c.latent_width, out);
      break;
    }
  }

  const double theta_scale = 1.0 / std::sqrt(static_cast<double>(c.input_width));
  specs.push_back(
      {"theta0", ParamGroup::theta0, {c.load_width, c.input_width}, Init::uniform, theta_scale});

  if (c.experts_enabled) {
    const std::size_t P = c.theta_size();
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(c.external_width));
    for (std::size_t j = 0; j < c.num_experts; ++j) {
      const std::string p = "expert." + std::to_string(j) + ".";
      specs.push_back({p + "w1", ParamGroup::experts, {c.external_width, c.expert_hidden},
                       Init::uniform, w1_scale});
      specs.push_back({p + "b1", ParamGroup::experts, {c.expert_hidden}, Init::uniform, w1_scale});
      specs.push_back(
          {p + "w2", ParamGroup::experts, {c.expert_hidden, P}, Init::uniform, 0.1 * theta_scale});
      specs.push_back({p + "b2", ParamGroup::experts, {P}, Init::zeros, 0.0});
      specs.push_back({p + "ln_gain", ParamGroup::experts, {P}, Init::constant, 0.1 * theta_scale});
      specs.push_back({p + "ln_bias", ParamGroup::experts, {P}, Init::zeros, 0.0});
    }
    specs.push_back({"gate.w", ParamGroup::gate, {H, c.num_experts}, Init::uniform,
                     1.0 / std::sqrt(static_cast<double>(H))});
    specs.push_back({"gate.b", ParamGroup::gate, {c.num_experts}, Init::zeros, 0.0});
  }
  return specs;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> expected_parameters(const ModelConfig& c) {
  std::vector<std::pair<std::string, Shape>> out;
  for (auto& s : param_specs(c)) out.emplace_back(s.name, s.shape);
  return out;
}

ParamSet Model::init_params(const ModelConfig& c, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::init);
  ParamSet ps;
  for (const auto& s : param_specs(c)) {
    Tensor t(s.shape, 0.0);
    if (s.init == Init::uniform) {
      std::uniform_real_distribution<double> u(-s.scale, s.scale);
      for (double& v : t.values()) v = u(rng);
    } else if (s.init == Init::constant) {
      t.fill(s.scale);
    }
    ps.add(s.name, s.group, std::move(t));
  }
  return ps;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  params_ = init_params(config_, seed);
}

Model::Model(ModelConfig config, ParamSet params) : config_(config), params_(std::move(params)) {
  config_.validate();
  check_params();
}

void Model::check_params() const {
  const auto specs = param_specs(config_);
  if (specs.size() != params_.size())
    throw ConfigError("parameter set has " + std::to_string(params_.size()) +
                      " tensors, model config expects " + std::to_string(specs.size()));
  for (const auto& s : specs) {
    if (!params_.contains(s.name)) throw ConfigError("missing parameter " + s.name);
    const auto& p = params_[params_.index_of(s.name)];
    if (p.value.shape() != s.shape)
      throw ConfigError("parameter " + s.name + " has shape " + diff::to_string(p.value.shape()) +
                        ", expected " + diff::to_string(s.shape));
  }
}

Model::Bound Model::bind(Graph& g, const ParamSet& params) const {
  const auto& c = config_;
  Bound b;
  auto P = [&](const std::string& n) { return g.param(params, n); };
  b.gru.input_width = c.input_width;
  b.gru.hidden_width = c.hidden_width;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "gru." + std::to_string(l) + ".";
    b.gru.layers.push_back({P(p + "w_x"), P(p + "w_h"), P(p + "b")});
  }
  switch (c.head) {
    case HeadKind::deterministic:
      b.det = {P("head.w"), P("head.b")};
      break;
    case HeadKind::gaussian:
      b.gauss = {P("head.mean.w"), P("head.mean.b"), P("head.log_var.w"), P("head.log_var.b")};
      break;
    case HeadKind::variational:
      b.enc = {P("enc.mean.w_x"),    P("enc.mean.w_h"),    P("enc.mean.b"),
               P("enc.log_var.w_x"), P("enc.log_var.w_h"), P("enc.log_var.b")};
      b.dec = {P("dec.mean.w"), P("dec.mean.b"), P("dec.log_var.w"), P("dec.log_var.b")};
      break;
  }
  b.theta0 = diff::reshape(P("theta0"), {1, c.theta_size()});
  if (c.experts_enabled) {
    for (std::size_t j = 0; j < c.num_experts; ++j) {
      const std::string p = "expert." + std::to_string(j) + ".";
      b.experts.push_back({P(p + "w1"), P(p + "b1"), P(p + "w2"), P(p + "b2"), P(p + "ln_gain"),
                           P(p + "ln_bias")});
    }
    b.gate = {P("gate.w"), P("gate.b"), c.top_m};
  }
  return b;
}

HeadOutputs Model::forward(Graph& g, const Bound& p, const BatchInput& in,
                           std::vector<GateStep>* trace) const {
  const auto& c = config_;
  const std::size_t B = in.batch, T = in.steps;
  if (B == 0 || T == 0) throw std::invalid_argument("forward: empty batch or context");
  if (in.loads.rows() != T * B || in.loads.cols() != c.load_width)
    throw diff::ShapeError("forward loads", in.loads.shape(), Shape{T * B, c.load_width});

  std::vector<Var> expert_all;
  if (c.experts_enabled) {
    const std::size_t dw = c.external_width;
    if (in.externals.rows() != T * B || in.externals.cols() != c.num_experts * dw)
      throw diff::ShapeError("forward externals", in.externals.shape(),
                             Shape{T * B, c.num_experts * dw});
    Var ext = g.constant(in.externals);
    for (std::size_t j = 0; j < c.num_experts; ++j) {
      Var w = c.num_experts == 1 ? ext : diff::slice(ext, 1, j * dw, (j + 1) * dw);
      expert_all.push_back(moe::expert_forward(p.experts[j], w, c.ln_eps));
    }
  }

  std::vector<Var> h(c.layers, g.constant(Tensor({B, c.hidden_width}, 0.0)));
  const bool variational = c.head == HeadKind::variational;
  const auto loads = in.loads.values();
  Var last_input;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor x_t({B, c.load_width});
    std::copy(loads.begin() + static_cast<std::ptrdiff_t>(t * B * c.load_width),
              loads.begin() + static_cast<std::ptrdiff_t>((t + 1) * B * c.load_width),
              x_t.values().begin());
    Var x = g.constant(std::move(x_t));

    Var theta = p.theta0;
    if (c.experts_enabled) {
      moe::GateOutput go = moe::gate(p.gate, h.back());
      std::vector<Var> e_t;
      e_t.reserve(expert_all.size());
      for (const Var& e : expert_all)
        e_t.push_back(T == 1 ? e : diff::slice(e, 0, t * B, (t + 1) * B));
      theta = moe::compose_theta(go.weights, e_t, p.theta0);
      if (trace) trace->push_back({go.logits, go.weights.value(), go.mask});
    }
    Var x_mod = moe::modulate_input(theta, x, c.load_width, c.input_width);
    if (variational && t + 1 == T) {
      last_input = x_mod;
      break;
    }
    h = seq::gru_step(p.gru, x_mod, h);
  }

  HeadOutputs out;
  switch (c.head) {
    case HeadKind::deterministic:
      out.point = seq::deterministic_head(p.det, h.back());
      break;
    case HeadKind::gaussian:
      out.gaussian = seq::gaussian_head(p.gauss, h.back());
      break;
    case HeadKind::variational:
      out.latent = seq::encode_latent(p.enc, last_input, h.back());
      break;
  }
  return out;
}

Model Model::base_counterpart() const {
  ModelConfig c = config_;
  c.experts_enabled = false;
  ParamSet ps;
  for (const auto& p : params_)
    if (p.group != ParamGroup::experts && p.group != ParamGroup::gate)
      ps.add(p.name, p.group, p.value);
  return Model(c, std::move(ps));
}

void Model::silence_experts() {
  for (auto& p : params_)
    if (p.group == ParamGroup::experts &&
        (p.name.ends_with(".ln_gain") || p.name.ends_with(".ln_bias")))
      p.value.fill(0.0);
}

}  // namespace m2oe2
