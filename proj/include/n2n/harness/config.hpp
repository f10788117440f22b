#pragma once

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"
#include "n2n/corrupt/spec.hpp"
#include "n2n/harness/dataset.hpp"
#include "n2n/loss/losses.hpp"
#include "n2n/nn/unet.hpp"

namespace n2n::harness {

using Json = nlohmann::json;

enum class TargetMode { clean, noisy };
enum class Task { denoise, mri };
enum class Precision { single, dual };

struct ExperimentConfig {
  Task task = Task::denoise;
  std::string dataset = "synthetic";
  int crop = 64;
  int channels = 3;
  std::size_t pool_size = 0;  // 0 = fresh latent every draw; otherwise a finite set of latents
  double width_scale = 0.25;
  int depth = 3;
  corrupt::CorruptionSpec input_corruption = corrupt::CorruptionSpec::gaussian(25.0);
  corrupt::CorruptionSpec target_corruption = corrupt::CorruptionSpec::gaussian(25.0);
  loss::LossSpec loss;
  bool anneal_gamma = true;
  TargetMode target_mode = TargetMode::noisy;
  long total_steps = 2000;
  int minibatch = 4;
  double learning_rate = 0.001;
  std::uint64_t seed = 1;
  std::string output_dir;
  Precision precision = Precision::single;
  int validation_images = 16;
  double validation_interval = 0.02;  // fraction of total_steps
  double mri_sample_fraction = 0.1;

  nn::NetworkSpec network_spec() const { return nn::NetworkSpec::unet(channels, channels, width_scale, depth); }

  void validate() const {
    if (crop <= 0) throw ConfigError("crop must be positive");
    if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
    if (!(width_scale > 0.0)) throw ConfigError("network.width_scale must be positive");
    if (depth < 1) throw ConfigError("network.depth must be at least 1");
    if (crop % (1 << depth) != 0) throw ConfigError("crop must be a multiple of 2^depth");
    if (total_steps < 0) throw ConfigError("total_steps must be non-negative");
    if (minibatch <= 0) throw ConfigError("minibatch must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (validation_images <= 0) throw ConfigError("validation.images must be positive");
    if (!(validation_interval > 0.0 && validation_interval <= 1.0)) throw ConfigError("validation.interval must lie in (0,1]");
    if (!(mri_sample_fraction > 0.0 && mri_sample_fraction <= 1.0)) throw ConfigError("mri.sample_fraction must lie in (0,1]");
    input_corruption.validate();
    target_corruption.validate();
    loss.validate();
    if (task == Task::mri && channels != 1) throw ConfigError("mri task requires channels = 1");
    if (task == Task::mri && dataset == "synthetic") throw ConfigError("mri task uses the phantom dataset or gray PNGs");
    if (loss.kind == loss::LossKind::relative_mse) throw ConfigError("relative_mse is an evaluation metric only");
    if (loss.kind == loss::LossKind::l2_masked && task == Task::denoise &&
        target_corruption.kind != corrupt::CorruptionKind::bernoulli_mask && target_mode == TargetMode::noisy)
      throw ConfigError("l2_masked needs a bernoulli_mask target corruption");
  }
};

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

inline corrupt::Range range_from_json(const Json& j, const std::string& key) {
  if (j.is_number()) return corrupt::Range::fixed(j.get<double>());
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError("'" + key + "' must be a number or a [lo, hi] pair");
}

inline Json range_to_json(const corrupt::Range& r) {
  if (r.lo == r.hi) return r.lo;
  return Json::array({r.lo, r.hi});
}

template <class V>
V get(const Json& j, const std::string& key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const Json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline corrupt::CorruptionSpec corruption_from_json(const Json& j) {
  detail::reject_unknown(j, {"kind", "sigma", "bandwidth", "lambda", "p", "coverage", "seed"}, "corruption spec");
  corrupt::CorruptionSpec s;
  s.kind = corrupt::corruption_kind_from_string(detail::get<std::string>(j, "kind", "none"));
  if (j.contains("sigma")) s.sigma = detail::range_from_json(j["sigma"], "sigma");
  if (j.contains("lambda")) s.lambda = detail::range_from_json(j["lambda"], "lambda");
  if (j.contains("p")) s.p = detail::range_from_json(j["p"], "p");
  if (j.contains("coverage")) s.coverage = detail::range_from_json(j["coverage"], "coverage");
  s.bandwidth = detail::get<double>(j, "bandwidth", 0.0);
  s.seed = detail::get<std::uint64_t>(j, "seed", 0);
  s.validate();
  return s;
}

inline Json corruption_to_json(const corrupt::CorruptionSpec& s) {
  Json j = {{"kind", corrupt::to_string(s.kind)}, {"seed", s.seed}};
  switch (s.kind) {
    case corrupt::CorruptionKind::gaussian: j["sigma"] = detail::range_to_json(s.sigma); break;
    case corrupt::CorruptionKind::brown_gaussian:
      j["sigma"] = detail::range_to_json(s.sigma);
      j["bandwidth"] = s.bandwidth;
      break;
    case corrupt::CorruptionKind::poisson: j["lambda"] = detail::range_to_json(s.lambda); break;
    case corrupt::CorruptionKind::bernoulli_mask:
    case corrupt::CorruptionKind::impulse: j["p"] = detail::range_to_json(s.p); break;
    case corrupt::CorruptionKind::text_overlay: j["coverage"] = detail::range_to_json(s.coverage); break;
    case corrupt::CorruptionKind::none: break;
  }
  return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
  detail::reject_unknown(j, {"task", "dataset", "network", "input_corruption", "target_corruption", "loss", "target_mode",
                             "total_steps", "minibatch", "learning_rate", "seed", "output_dir", "precision", "validation",
                             "mri"},
                         "config");
  ExperimentConfig c;
  const std::string task = detail::get<std::string>(j, "task", "denoise");
  if (task == "denoise") c.task = Task::denoise;
  else if (task == "mri") c.task = Task::mri;
  else throw ConfigError("unknown task '" + task + "'");
  if (c.task == Task::mri) {
    c.channels = 1;
    c.dataset = kPhantomTag;
  }
  if (j.contains("dataset")) {
    const Json& d = j["dataset"];
    detail::reject_unknown(d, {"path", "crop", "channels", "pool_size"}, "dataset");
    c.dataset = detail::get<std::string>(d, "path", c.dataset);
    c.crop = detail::get<int>(d, "crop", c.crop);
    c.channels = detail::get<int>(d, "channels", c.channels);
    c.pool_size = detail::get<std::size_t>(d, "pool_size", c.pool_size);
  }
  if (j.contains("network")) {
    const Json& n = j["network"];
    detail::reject_unknown(n, {"width_scale", "depth"}, "network");
    c.width_scale = detail::get<double>(n, "width_scale", c.width_scale);
    c.depth = detail::get<int>(n, "depth", c.depth);
  }
  if (j.contains("input_corruption")) c.input_corruption = corruption_from_json(j["input_corruption"]);
  if (j.contains("target_corruption")) c.target_corruption = corruption_from_json(j["target_corruption"]);
  if (j.contains("loss")) {
    const Json& l = j["loss"];
    detail::reject_unknown(l, {"kind", "gamma", "epsilon", "anneal"}, "loss");
    c.loss.kind = loss::loss_kind_from_string(detail::get<std::string>(l, "kind", "l2"));
    c.loss.gamma = detail::get<double>(l, "gamma", c.loss.gamma);
    c.loss.epsilon = detail::get<double>(l, "epsilon", c.loss.epsilon);
    c.anneal_gamma = detail::get<bool>(l, "anneal", c.anneal_gamma);
  }
  const std::string mode = detail::get<std::string>(j, "target_mode", "noisy");
  if (mode == "clean") c.target_mode = TargetMode::clean;
  else if (mode == "noisy") c.target_mode = TargetMode::noisy;
  else throw ConfigError("target_mode must be 'clean' or 'noisy'");
  c.total_steps = detail::get<long>(j, "total_steps", c.total_steps);
  c.minibatch = detail::get<int>(j, "minibatch", c.minibatch);
  c.learning_rate = detail::get<double>(j, "learning_rate", c.learning_rate);
  c.seed = detail::get<std::uint64_t>(j, "seed", c.seed);
  c.output_dir = detail::get<std::string>(j, "output_dir", c.output_dir);
  const std::string prec = detail::get<std::string>(j, "precision", "float");
  if (prec == "float") c.precision = Precision::single;
  else if (prec == "double") c.precision = Precision::dual;
  else throw ConfigError("precision must be 'float' or 'double'");
  if (j.contains("validation")) {
    const Json& v = j["validation"];
    detail::reject_unknown(v, {"images", "interval"}, "validation");
    c.validation_images = detail::get<int>(v, "images", c.validation_images);
    c.validation_interval = detail::get<double>(v, "interval", c.validation_interval);
  }
  if (j.contains("mri")) {
    const Json& m = j["mri"];
    detail::reject_unknown(m, {"sample_fraction"}, "mri");
    c.mri_sample_fraction = detail::get<double>(m, "sample_fraction", c.mri_sample_fraction);
  }
  c.validate();
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  return {{"task", c.task == Task::mri ? "mri" : "denoise"},
          {"dataset", {{"path", c.dataset}, {"crop", c.crop}, {"channels", c.channels}, {"pool_size", c.pool_size}}},
          {"network", {{"width_scale", c.width_scale}, {"depth", c.depth}}},
          {"input_corruption", corruption_to_json(c.input_corruption)},
          {"target_corruption", corruption_to_json(c.target_corruption)},
          {"loss", {{"kind", loss::to_string(c.loss.kind)}, {"gamma", c.loss.gamma}, {"epsilon", c.loss.epsilon},
                    {"anneal", c.anneal_gamma}}},
          {"target_mode", c.target_mode == TargetMode::clean ? "clean" : "noisy"},
          {"total_steps", c.total_steps},
          {"minibatch", c.minibatch},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"precision", c.precision == Precision::single ? "float" : "double"},
          {"validation", {{"images", c.validation_images}, {"interval", c.validation_interval}}},
          {"mri", {{"sample_fraction", c.mri_sample_fraction}}}};
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  Json j;
  try {
    is >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace n2n::harness
