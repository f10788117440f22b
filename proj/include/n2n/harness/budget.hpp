#pragma once

#include <string>
#include <vector>

#include "n2n/harness/train.hpp"

namespace n2n::harness {

/// How the re-used captures of Case 2 are paired.
enum class BudgetPairing {
  noisy_pairs,    // input realization a, target realization b != a: M(M-1) pairs per latent
  clean_average,  // input realization a, target the average of the other M-1: M pairs per latent
};

/// A capture budget in capture units (one noisy image = 1 CU). The traditional allocation
/// spends clean_cost_cu captures on each clean reference, so m = clean_cost_cu + 1.
struct CaptureBudgetPlan {
  int budget_cu = 400;
  int n = 20;  // clean latents
  int m = 20;  // realizations per latent
  int clean_cost_cu = 19;
  BudgetPairing pairing = BudgetPairing::noisy_pairs;

  static CaptureBudgetPlan traditional(int budget_cu, int clean_cost_cu = 19) {
    CaptureBudgetPlan p;
    p.budget_cu = budget_cu;
    p.clean_cost_cu = clean_cost_cu;
    p.m = clean_cost_cu + 1;
    p.n = budget_cu / p.m;
    p.validate();
    return p;
  }

  void validate() const {
    if (n <= 0 || m <= 0) throw ConfigError("capture budget: N and M must be positive");
    if (n * m != budget_cu) throw ConfigError("capture budget: N*M = " + std::to_string(n * m) + " does not equal budget " +
                                              std::to_string(budget_cu));
    if (m < 2) throw ConfigError("capture budget: noisy targets need M >= 2");
    if (m != clean_cost_cu + 1) throw ConfigError("capture budget: M must equal clean_cost_cu + 1");
    if (budget_cu % 2 != 0) throw ConfigError("capture budget: Case 3 needs an even budget");
  }
};

/// Full-size reference allocation (Cases 1/2: N=100, M=20; Case 3: N=1000, M=2).
inline constexpr int kReferenceBudgetCU = 2000;

/// Finite set of captured noisy realizations and the training pairs formed from them.
template <class T>
class CapturePairProvider final : public PairProvider<T> {
 public:
  struct Pair {
    int latent;
    int input;
    int target;  // realization index, or -1 for the average of all realizations except `input`
  };

  CapturePairProvider(const ExperimentConfig& cfg, const ImageSource& src, int n, int m, std::vector<Pair> pairs)
      : cfg_(cfg), m_(m), pairs_(std::move(pairs)) {
    const corrupt::CorruptionSpec noise = seeded(cfg.input_corruption, cfg.seed);
    for (int i = 0; i < n; ++i) {
      const Array<double> clean = src.crop(static_cast<std::uint64_t>(i));
      Array<double> sum(clean.shape());
      for (int j = 0; j < m; ++j) {
        Array<double> r = corrupt::apply_draw(noise, clean, static_cast<std::uint64_t>(i) * m + j, StreamRole::input).image;
        sum += r;
        captures_.push_back(r.template cast<T>());
      }
      sums_.push_back(std::move(sum));
    }
  }

  std::size_t pair_count() const { return pairs_.size(); }

  TrainingBatch<T> batch(long step) const override {
    std::vector<Array<T>> in, tg;
    for (int b = 0; b < cfg_.minibatch; ++b) {
      Rng rng = make_stream(cfg_.seed, static_cast<std::uint64_t>(step) * cfg_.minibatch + b, StreamRole::aux);
      const Pair& p = pairs_[std::uniform_int_distribution<std::size_t>(0, pairs_.size() - 1)(rng)];
      in.push_back(captures_[static_cast<std::size_t>(p.latent) * m_ + p.input]);
      if (p.target >= 0) {
        tg.push_back(captures_[static_cast<std::size_t>(p.latent) * m_ + p.target]);
      } else {
        const Array<T>& own = captures_[static_cast<std::size_t>(p.latent) * m_ + p.input];
        Array<T> avg(own.shape());
        const Array<double>& s = sums_[p.latent];
        for (std::size_t k = 0; k < avg.size(); ++k) avg[k] = static_cast<T>((s[k] - own[k]) / (m_ - 1));
        tg.push_back(std::move(avg));
      }
    }
    return {stack_batch(in), stack_batch(tg), std::nullopt, {}};
  }

 private:
  ExperimentConfig cfg_;
  int m_;
  std::vector<Pair> pairs_;
  std::vector<Array<T>> captures_;
  std::vector<Array<double>> sums_;
};

struct BudgetCase {
  std::string name;
  int n = 0;
  int m = 0;
  std::size_t pairs = 0;
  ExperimentReport report;
};

struct BudgetReport {
  std::vector<BudgetCase> cases;  // Case 1, Case 2, Case 3
};

/// Runs the three allocations of one capture budget with otherwise identical training:
/// Case 1 fixed (noisy, clean-average) pairs; Case 2 the same captures re-paired;
/// Case 3 budget/2 latents with two noisy realizations each.
template <class T>
BudgetReport capture_budget(const CaptureBudgetPlan& plan, const ExperimentConfig& base) {
  plan.validate();
  ExperimentConfig cfg = base;
  cfg.target_mode = TargetMode::noisy;
  cfg.validate();
  using Pair = typename CapturePairProvider<T>::Pair;
  const auto src = make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  const ValidationSet<T> val = make_validation_set<T>(cfg, *src);

  std::vector<Pair> case1, case2, case3;
  for (int i = 0; i < plan.n; ++i) {
    case1.push_back({i, 0, -1});
    for (int a = 0; a < plan.m; ++a) {
      if (plan.pairing == BudgetPairing::clean_average) {
        case2.push_back({i, a, -1});
        continue;
      }
      for (int b = 0; b < plan.m; ++b)
        if (a != b) case2.push_back({i, a, b});
    }
  }
  const int n3 = plan.budget_cu / 2;
  for (int i = 0; i < n3; ++i) {
    case3.push_back({i, 0, 1});
    case3.push_back({i, 1, 0});
  }

  BudgetReport out;
  auto run = [&](std::string name, int n, int m, std::vector<Pair> pairs) {
    const CapturePairProvider<T> provider(cfg, *src, n, m, std::move(pairs));
    BudgetCase c{std::move(name), n, m, provider.pair_count(), {}};
    c.report = train<T>(cfg, provider, val).report;
    out.cases.push_back(std::move(c));
  };
  run("case1", plan.n, plan.m, std::move(case1));
  run("case2", plan.n, plan.m, std::move(case2));
  run("case3", n3, 2, std::move(case3));
  return out;
}

}  // namespace n2n::harness
