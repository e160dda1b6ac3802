#include "ccqt/nn/model.hpp"

#include <cmath>
#include <random>

#include "ccqt/errors.hpp"

namespace ccqt::nn {

namespace {

std::size_t halve_up(std::size_t n) { return (n + 1) / 2; }

ComplexTensor random_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  const std::size_t n = numel(shape);
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = normal(rng);
    im[i] = normal(rng);
  }
  auto t = ComplexTensor::from_planes(std::move(shape), std::move(re), std::move(im));
  t.set_requires_grad(true);
  return t;
}

ComplexTensor zero_param(Shape shape) {
  auto t = ComplexTensor::zeros(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

std::vector<std::int64_t> to_i64(const std::vector<std::size_t>& v) {
  return {v.begin(), v.end()};
}

std::vector<std::size_t> to_size(const std::vector<std::int64_t>& v, const std::string& key) {
  std::vector<std::size_t> out;
  for (auto x : v) {
    if (x <= 0) throw ConfigError(key + ": entries must be positive");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

void copy_values(const ComplexTensor& src, ComplexTensor& dst, const std::string& name) {
  if (src.shape() != dst.shape())
    throw ShapeError("state entry '" + name + "' has shape " + shape_string(src.shape()) +
                     ", model expects " + shape_string(dst.shape()));
  std::copy(src.real().begin(), src.real().end(), dst.real_mut().begin());
  std::copy(src.imag().begin(), src.imag().end(), dst.imag_mut().begin());
}

}  // namespace

void ModelConfig::validate() const {
  if (conv_channels.size() != 4)
    throw ConfigError("model.conv_channels must list exactly 4 counts");
  if (linear_widths.size() != 3)
    throw ConfigError("model.linear_widths must list exactly 3 counts");
  if (linear_widths.back() != 2)
    throw ConfigError("model.linear_widths must end in 2 (two classes)");
  for (auto c : conv_channels)
    if (c == 0) throw ConfigError("model.conv_channels entries must be positive");
  for (auto w : linear_widths)
    if (w == 0) throw ConfigError("model.linear_widths entries must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw ConfigError("model.dropout must lie in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0))
    throw ConfigError("model.bn_momentum must lie in (0, 1]");
  if (!(bn_eps > 0.0)) throw ConfigError("model.bn_eps must be positive");
  if (!(log_alpha_init > 0.0)) throw ConfigError("model.log_alpha_init must be positive");
  if (!(log_epsilon > 0.0)) throw ConfigError("model.log_epsilon must be positive");
  if (!std::isfinite(log_c_init)) throw ConfigError("model.log_c_init must be finite");
}

void ModelConfig::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "conv_channels", format_int_list(to_i64(conv_channels)));
  kv.set(prefix + "linear_widths", format_int_list(to_i64(linear_widths)));
  kv.set(prefix + "dropout", format_double(dropout_p));
  kv.set(prefix + "bn_momentum", format_double(bn_momentum));
  kv.set(prefix + "bn_eps", format_double(bn_eps));
  kv.set(prefix + "activate_last_linear", activate_last_linear ? "true" : "false");
  kv.set(prefix + "pooling", pooling == TimePooling::kMean ? "mean" : "magmax");
  kv.set(prefix + "log_alpha_init", format_double(log_alpha_init));
  kv.set(prefix + "log_c_init", format_double(log_c_init));
  kv.set(prefix + "log_epsilon", format_double(log_epsilon));
}

ModelConfig ModelConfig::from_kv(const KeyValues& kv, const std::string& prefix) {
  ModelConfig c;
  c.conv_channels = to_size(kv.get_int_list(prefix + "conv_channels"), prefix + "conv_channels");
  c.linear_widths = to_size(kv.get_int_list(prefix + "linear_widths"), prefix + "linear_widths");
  c.dropout_p = kv.get_double(prefix + "dropout");
  c.bn_momentum = kv.get_double(prefix + "bn_momentum");
  c.bn_eps = kv.get_double(prefix + "bn_eps");
  c.activate_last_linear = kv.get_bool(prefix + "activate_last_linear");
  const auto& pool = kv.get(prefix + "pooling");
  if (pool == "mean")
    c.pooling = TimePooling::kMean;
  else if (pool == "magmax")
    c.pooling = TimePooling::kMagnitudeMax;
  else
    throw ConfigError(prefix + "pooling must be 'mean' or 'magmax', got '" + pool + "'");
  c.log_alpha_init = kv.get_double(prefix + "log_alpha_init");
  c.log_c_init = kv.get_double(prefix + "log_c_init");
  c.log_epsilon = kv.get_double(prefix + "log_epsilon");
  return c;
}

Model::Model(ModelConfig config, dsp::CqtConfig features, std::uint64_t seed)
    : config_(std::move(config)), features_(features) {
  config_.validate();
  features_.validate();
  log_ = dsp::LogCompressParams::make(config_.log_alpha_init, config_.log_c_init,
                                      config_.log_epsilon);
  const std::size_t k = ModelConfig::kKernel;
  std::size_t cin = 1, bins = features_.n_bins;
  for (std::size_t i = 0; i < 4; ++i) {
    auto rng = make_rng(seed, {1, i});
    const std::size_t cout = config_.conv_channels[i];
    convs_.push_back({random_weight({cout, cin, k, k}, cin * k * k, rng), zero_param({cout})});
    norms_.push_back(BatchNormState::make(cout, config_.bn_momentum, config_.bn_eps));
    cin = cout;
    bins = halve_up(bins);
  }
  folded_bins_ = bins;
  std::size_t width = cin * bins;
  for (std::size_t i = 0; i < 3; ++i) {
    auto rng = make_rng(seed, {2, i});
    const std::size_t out = config_.linear_widths[i];
    linears_.push_back({random_weight({out, width}, width, rng), zero_param({out})});
    width = out;
  }
}

ForwardResult Model::forward(const ComplexTensor& spec_batch, Mode mode, Rng* dropout_rng,
                             bool update_bn_stats) {
  if (spec_batch.rank() != 4 || spec_batch.dim(1) != 1)
    throw ShapeError("model input must be (B, 1, F, T), got " +
                     shape_string(spec_batch.shape()));
  if (spec_batch.dim(2) != features_.n_bins)
    throw ShapeError("model expects " + std::to_string(features_.n_bins) +
                     " frequency bins, got " + std::to_string(spec_batch.dim(2)));
  if (spec_batch.dim(2) < min_spatial() || spec_batch.dim(3) < min_spatial())
    throw ShapeError("model input " + shape_string(spec_batch.shape()) +
                     " is too small; F and T must be at least " +
                     std::to_string(min_spatial()));
  if (mode == Mode::kTrain && config_.dropout_p > 0.0 && dropout_rng == nullptr)
    throw StateError("training-mode forward needs a dropout generator");

  ComplexTensor h = dsp::log_compress(spec_batch, log_);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = complex_conv2d(h, convs_[i].weight, convs_[i].bias, ModelConfig::kStride,
                       ModelConfig::kPadding);
    h = crelu(h);
    h = complex_batchnorm(h, norms_[i], mode, update_bn_stats);
  }
  h = fold_frequency(h);
  Rng unused;
  Rng& drop = dropout_rng ? *dropout_rng : unused;
  for (std::size_t i = 0; i < linears_.size(); ++i) {
    h = linear_positionwise(h, linears_[i].weight, linears_[i].bias);
    if (i + 1 < linears_.size() || config_.activate_last_linear) {
      h = crelu(h);
      h = complex_dropout(h, config_.dropout_p, mode, drop);
    }
  }
  ForwardResult r;
  r.logits = config_.pooling == TimePooling::kMean ? time_mean(h) : time_magmax(h);
  r.scores = magnitude_softmax(r.logits);
  return r;
}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"log_compress.alpha", log_.alpha});
  out.push_back({"log_compress.c", log_.c});
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const auto n = std::to_string(i + 1);
    out.push_back({"conv" + n + ".weight", convs_[i].weight});
    out.push_back({"conv" + n + ".bias", convs_[i].bias});
    out.push_back({"bn" + n + ".gamma", norms_[i].gamma});
    out.push_back({"bn" + n + ".beta", norms_[i].beta});
  }
  for (std::size_t i = 0; i < linears_.size(); ++i) {
    const auto n = std::to_string(i + 1);
    out.push_back({"linear" + n + ".weight", linears_[i].weight});
    out.push_back({"linear" + n + ".bias", linears_[i].bias});
  }
  return out;
}

std::vector<NamedTensor> Model::state() const {
  auto out = parameters();
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    const auto n = std::to_string(i + 1);
    const auto& s = norms_[i];
    out.push_back({"bn" + n + ".running_mean",
                   ComplexTensor::from_complex({s.channels()}, s.running_mean)});
    out.push_back({"bn" + n + ".running_var",
                   ComplexTensor::from_real({s.channels()}, s.running_var)});
  }
  return out;
}

void Model::load_state(const std::vector<NamedTensor>& tensors, bool bn_stats_present) {
  auto find = [&](const std::string& name) -> const ComplexTensor& {
    for (const auto& t : tensors)
      if (t.name == name) return t.tensor;
    throw StateError("state is missing tensor '" + name + "'");
  };
  for (auto& p : parameters()) copy_values(find(p.name), p.tensor, p.name);
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    const auto n = std::to_string(i + 1);
    auto& s = norms_[i];
    const auto& mean = find("bn" + n + ".running_mean");
    const auto& var = find("bn" + n + ".running_var");
    if (mean.size() != s.channels() || var.size() != s.channels())
      throw ShapeError("running statistics of bn" + n + " have the wrong length");
    for (std::size_t c = 0; c < s.channels(); ++c) {
      s.running_mean[c] = mean.at(c);
      s.running_var[c] = var.real()[c];
    }
    s.has_stats = bn_stats_present;
  }
}

Model Model::clone() const {
  Model m;
  m.config_ = config_;
  m.features_ = features_;
  m.folded_bins_ = folded_bins_;
  auto copy_param = [](const ComplexTensor& t) {
    auto c = t.detach();
    c.set_requires_grad(t.requires_grad());
    return c;
  };
  m.log_ = log_;
  m.log_.alpha = copy_param(log_.alpha);
  m.log_.c = copy_param(log_.c);
  for (const auto& l : convs_) m.convs_.push_back({copy_param(l.weight), copy_param(l.bias)});
  for (const auto& s : norms_) {
    auto c = s;
    c.gamma = copy_param(s.gamma);
    c.beta = copy_param(s.beta);
    m.norms_.push_back(std::move(c));
  }
  for (const auto& l : linears_)
    m.linears_.push_back({copy_param(l.weight), copy_param(l.bias)});
  return m;
}

void Model::clamp_constrained() {
  auto a = log_.alpha.real_mut();
  if (a[0] < kMinAlpha) a[0] = kMinAlpha;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.size();
  return n;
}

std::size_t Model::min_spatial() const { return std::size_t{1} << convs_.size(); }

bool Model::has_bn_stats() const {
  for (const auto& s : norms_)
    if (!s.has_stats) return false;
  return true;
}

}  // namespace ccqt::nn
