#pragma once

#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "n2n/harness/checkpoint.hpp"
#include "n2n/harness/config.hpp"
#include "n2n/harness/dataset.hpp"
#include "n2n/harness/report.hpp"
#include "n2n/loss/metrics.hpp"
#include "n2n/mri/spectral.hpp"
#include "n2n/nn/adam.hpp"

namespace n2n::harness {

/// Network inputs and outputs live in [-0.5, 0.5]; images and losses in [0, 1].
inline constexpr double kNetworkOffset = 0.5;

template <class T>
struct TrainingBatch {
  Array<T> input;
  Array<T> target;
  std::optional<Array<T>> target_mask;
  std::vector<mri::SpectralSample> input_samples;  // mri task: acquisition of each input
};

/// Produces the minibatch of a given step. Implementations must be pure in `step` so that
/// batches can be generated out of order by a producer pool.
template <class T>
class PairProvider {
 public:
  virtual ~PairProvider() = default;
  virtual TrainingBatch<T> batch(long step) const = 0;
};

/// Offset for validation latent indices so they never coincide with training latents.
inline constexpr std::uint64_t kValidationIndexBase = 1ULL << 62;

inline corrupt::CorruptionSpec seeded(corrupt::CorruptionSpec spec, std::uint64_t seed) {
  spec.seed = mix64(seed) + spec.seed;
  return spec;
}

/// Latents from an ImageSource (fresh each draw or a finite pool), corrupted per step.
template <class T>
class StreamPairProvider final : public PairProvider<T> {
 public:
  StreamPairProvider(ExperimentConfig cfg, std::shared_ptr<const ImageSource> src)
      : cfg_(std::move(cfg)), src_(std::move(src)), in_spec_(seeded(cfg_.input_corruption, cfg_.seed)),
        tg_spec_(seeded(cfg_.target_corruption, cfg_.seed)) {
    if (cfg_.task == Task::mri)
      lambda_ = mri::solve_lambda(src_->crop_size(), src_->crop_size(), cfg_.mri_sample_fraction);
  }

  std::uint64_t latent_index(long step, int b) const {
    if (cfg_.pool_size == 0) return static_cast<std::uint64_t>(step) * cfg_.minibatch + b;
    Rng rng = make_stream(cfg_.seed, static_cast<std::uint64_t>(step) * cfg_.minibatch + b, StreamRole::aux);
    return std::uniform_int_distribution<std::uint64_t>(0, cfg_.pool_size - 1)(rng);
  }

  TrainingBatch<T> batch(long step) const override {
    std::vector<Array<double>> clean;
    for (int b = 0; b < cfg_.minibatch; ++b) clean.push_back(src_->crop(latent_index(step, b)));
    if (cfg_.task == Task::mri) return mri_batch(step, clean);
    const Array<double> latents = stack_batch(clean);
    corrupt::CorruptedPair<double> pair = corrupt::sample_pair(latents, in_spec_, tg_spec_, static_cast<std::uint64_t>(step));
    TrainingBatch<T> out;
    out.input = pair.input.template cast<T>();
    if (cfg_.target_mode == TargetMode::clean) {
      out.target = latents.template cast<T>();
    } else {
      out.target = pair.target.template cast<T>();
      if (pair.target_mask) out.target_mask = pair.target_mask->template cast<T>();
    }
    return out;
  }

  double lambda() const { return lambda_; }

 private:
  TrainingBatch<T> mri_batch(long step, const std::vector<Array<double>>& clean) const {
    std::vector<Array<double>> inputs, targets;
    TrainingBatch<T> out;
    for (int b = 0; b < cfg_.minibatch; ++b) {
      const std::uint64_t draw = static_cast<std::uint64_t>(step) * cfg_.minibatch + b;
      Rng in_rng = make_stream(in_spec_.seed, draw, StreamRole::input);
      mri::Undersampled in = mri::undersampled_image(clean[b], lambda_, in_rng);
      inputs.push_back(std::move(in.image));
      out.input_samples.push_back(std::move(in.sample));
      if (cfg_.target_mode == TargetMode::clean) {
        targets.push_back(clean[b]);
      } else {
        Rng tg_rng = make_stream(tg_spec_.seed, draw, StreamRole::target);
        targets.push_back(mri::undersampled_image(clean[b], lambda_, tg_rng).image);
      }
    }
    out.input = stack_batch(inputs).template cast<T>();
    out.target = stack_batch(targets).template cast<T>();
    return out;
  }

  ExperimentConfig cfg_;
  std::shared_ptr<const ImageSource> src_;
  corrupt::CorruptionSpec in_spec_, tg_spec_;
  double lambda_ = 0.0;
};

template <class T>
struct ValidationSet {
  Array<T> clean;
  Array<T> input;
  std::vector<mri::SpectralSample> input_samples;  // mri task: acquired values are restored at inference
};

/// Fixed held-out latents with one fixed input corruption each.
template <class T>
ValidationSet<T> make_validation_set(const ExperimentConfig& cfg, const ImageSource& src) {
  std::vector<Array<double>> clean, input;
  std::vector<mri::SpectralSample> samples;
  const corrupt::CorruptionSpec spec = seeded(cfg.input_corruption, cfg.seed);
  const double lambda =
      cfg.task == Task::mri ? mri::solve_lambda(src.crop_size(), src.crop_size(), cfg.mri_sample_fraction) : 0.0;
  for (int i = 0; i < cfg.validation_images; ++i) {
    clean.push_back(src.crop(kValidationIndexBase + i));
    if (cfg.task == Task::mri) {
      Rng rng = make_stream(spec.seed, static_cast<std::uint64_t>(i), StreamRole::validation);
      mri::Undersampled u = mri::undersampled_image(clean.back(), lambda, rng);
      input.push_back(std::move(u.image));
      samples.push_back(std::move(u.sample));
    } else {
      input.push_back(corrupt::apply_draw(spec, clean.back(), static_cast<std::uint64_t>(i), StreamRole::validation).image);
    }
  }
  return {stack_batch(clean).template cast<T>(), stack_batch(input).template cast<T>(), std::move(samples)};
}

/// Network prediction in image range [0,1] (not clipped), without building a graph.
template <class T>
Array<T> predict(const nn::NetworkSpec& spec, const nn::NetworkState<T>& state, const Array<T>& input, int chunk = 4) {
  if (spec.layers.size() == 1) return input;  // parameter-free pass-through
  nn::NetworkState<T> frozen;
  for (const auto& p : state.parameters) frozen.parameters.push_back(p.detach());
  std::vector<Array<T>> outs;
  for (int b0 = 0; b0 < input.batch(); b0 += chunk) {
    std::vector<Array<T>> items;
    for (int b = b0; b < std::min(input.batch(), b0 + chunk); ++b) items.push_back(slice_batch(input, b));
    Array<T> x = stack_batch(items);
    for (auto& v : x.values()) v -= static_cast<T>(kNetworkOffset);
    Array<T> y = nn::forward(spec, frozen, Tensor<T>(std::move(x))).value();
    for (int b = 0; b < y.batch(); ++b) {
      Array<T> one = slice_batch(y, b);
      for (auto& v : one.values()) v += static_cast<T>(kNetworkOffset);
      outs.push_back(std::move(one));
    }
  }
  return stack_batch(outs);
}

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace detail

/// Mean and std of per-image PSNR of f(input) against the clean references, plus the same
/// statistics for the corrupted inputs. Both are clipped to [0,1] before comparison.
template <class T>
PsnrStats evaluate(const nn::NetworkSpec& spec, const nn::NetworkState<T>& state, const ValidationSet<T>& val) {
  Array<T> pred = predict(spec, state, val.input);
  if (!val.input_samples.empty()) {
    std::vector<mri::SpectralSample> measured;
    for (const auto& smp : val.input_samples) measured.push_back(mri::unweighted(smp));
    pred = mri::spectral_replace(Tensor<T>(std::move(pred)), measured).value();
  }
  std::vector<double> net, base;
  for (int b = 0; b < val.clean.batch(); ++b) {
    const Array<T> ref = slice_batch(val.clean, b);
    net.push_back(loss::psnr(loss::clip01(slice_batch(pred, b)), ref));
    base.push_back(loss::psnr(loss::clip01(slice_batch(val.input, b)), ref));
  }
  PsnrStats st;
  std::tie(st.mean, st.stddev) = detail::mean_std(net);
  std::tie(st.baseline_mean, st.baseline_stddev) = detail::mean_std(base);
  st.count = net.size();
  return st;
}

template <class T>
struct TrainResult {
  nn::NetworkState<T> state;
  ExperimentReport report;
};

/// Producer-pool size from N2N_THREADS (unset or 0: generate batches inline).
inline int producer_threads() {
  const char* env = std::getenv("N2N_THREADS");
  if (!env) return 0;
  const int n = std::atoi(env);
  return std::max(0, n);
}

/// Generic loop: batch -> forward -> loss -> backward -> ADAM with the ramped learning rate.
template <class T>
TrainResult<T> train(const ExperimentConfig& cfg, const PairProvider<T>& provider, const ValidationSet<T>& val) {
  cfg.validate();
  const nn::NetworkSpec spec = cfg.network_spec();
  Rng init_rng = make_stream(cfg.seed, 0, StreamRole::init);
  TrainResult<T> res{nn::build_network<T>(spec, init_rng), {}};
  CsvSink sink;
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    sink = CsvSink((std::filesystem::path(cfg.output_dir) / "report.csv").string());
  }
  auto log_row = [&](const ReportRow& r) {
    res.report.rows.push_back(r);
    sink.write(r);
  };
  if (cfg.total_steps == 0) return res;

  const long interval = std::max<long>(1, std::lround(cfg.validation_interval * static_cast<double>(cfg.total_steps)));
  ReportRow first;
  first.step = 0;
  first.psnr = evaluate(spec, res.state, val).mean;
  log_row(first);

  const int threads = producer_threads();
  std::deque<std::future<TrainingBatch<T>>> queue;
  long queued = 0;
  auto next_batch = [&](long step) {
    if (threads == 0) return provider.batch(step);
    while (queued < cfg.total_steps && static_cast<int>(queue.size()) < threads)
      queue.push_back(std::async(std::launch::async, [&provider, s = queued++] { return provider.batch(s); }));
    TrainingBatch<T> b = queue.front().get();
    queue.pop_front();
    return b;
  };

  for (long step = 0; step < cfg.total_steps; ++step) {
    const TrainingBatch<T> batch = next_batch(step);
    const double lr = nn::lr_schedule(step, cfg.total_steps, cfg.learning_rate);
    const double gamma = cfg.loss.kind == loss::LossKind::l0_annealed
                             ? (cfg.anneal_gamma ? loss::anneal_gamma(step, cfg.total_steps) : cfg.loss.gamma)
                             : NAN;
    Array<T> x = batch.input;
    for (auto& v : x.values()) v -= static_cast<T>(kNetworkOffset);
    const Tensor<T> pred = add_scalar(nn::forward(spec, res.state, Tensor<T>(std::move(x))), static_cast<T>(kNetworkOffset));
    const Tensor<T> l = cfg.task == Task::mri
                            ? mri::mri_loss(pred, batch.input_samples, batch.target)
                            : loss::evaluate_loss(cfg.loss, pred, batch.target,
                                                  batch.target_mask ? &*batch.target_mask : nullptr, gamma);
    const double lv = static_cast<double>(l.value()[0]);
    if (!std::isfinite(lv))
      throw NumericalError("non-finite loss at step " + std::to_string(step + 1) + "; config: " + config_to_json(cfg).dump());
    backward(l);
    nn::adam_step(res.state, lr);

    ReportRow row{step + 1, lv, lr, gamma, NAN};
    if ((step + 1) % interval == 0 || step + 1 == cfg.total_steps) {
      row.psnr = evaluate(spec, res.state, val).mean;
      if (!cfg.output_dir.empty())
        save_checkpoint((std::filesystem::path(cfg.output_dir) / "checkpoint.n2nc").string(), res.state);
    }
    log_row(row);
  }
  res.report.final_stats = evaluate(spec, res.state, val);
  return res;
}

/// Builds the dataset, pair provider and validation set described by `cfg` and trains.
template <class T>
TrainResult<T> train(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto src = make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  const StreamPairProvider<T> provider(cfg, src);
  return train<T>(cfg, provider, make_validation_set<T>(cfg, *src));
}

}  // namespace n2n::harness
