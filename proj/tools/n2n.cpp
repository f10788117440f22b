#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "n2n/estimators/estimators.hpp"
#include "n2n/harness/budget.hpp"
#include "n2n/harness/gradsuite.hpp"
#include "n2n/harness/train.hpp"

using namespace n2n;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool with_config = true) {
  if (with_config) sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--seed", c.seed, "random seed")->each([&c](const std::string&) { c.seed_set = true; });
  sub->add_option("--out", c.out, "output file or directory");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool is_raw(const std::string& path) { return fs::path(path).extension() == ".n2nf"; }

Array<double> read_image(const std::string& path, int channels) {
  return is_raw(path) ? io::read_raw(path) : io::read_png(path, channels);
}

void write_image(const std::string& path, const Array<double>& img) {
  if (is_raw(path)) io::write_raw(path, img);
  else io::write_png(path, img);
}

harness::ExperimentConfig experiment(const Common& c) {
  harness::ExperimentConfig cfg = harness::load_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

// ---- corrupt

struct CorruptArgs {
  std::string kind = "gaussian";
  std::string sigma, lambda, p, coverage;  // a value or "lo,hi"
  double bandwidth = 0.0;
  int channels = 3;
  std::string input, output;
};

std::vector<double> parse_list(const std::string& s);

corrupt::Range range_arg(const std::string& text, const char* name) {
  if (text.empty()) return {};
  const std::vector<double> v = parse_list(text);
  if (v.size() == 1) return corrupt::Range::fixed(v[0]);
  if (v.size() == 2) return {v[0], v[1]};
  throw ConfigError(std::string("--") + name + " takes one value or a lo,hi pair");
}

int run_corrupt(const Common& c, const CorruptArgs& a) {
  corrupt::CorruptionSpec spec;
  if (!c.config.empty()) {
    std::ifstream is(c.config);
    if (!is) throw ConfigError("cannot open config '" + c.config + "'");
    harness::Json j;
    try {
      is >> j;
    } catch (const harness::Json::exception& e) {
      throw ConfigError(std::string("corruption config is not valid JSON: ") + e.what());
    }
    spec = harness::corruption_from_json(j);
  } else {
    spec.kind = corrupt::corruption_kind_from_string(a.kind);
    spec.sigma = range_arg(a.sigma, "sigma");
    spec.lambda = range_arg(a.lambda, "lambda");
    spec.p = range_arg(a.p, "p");
    spec.coverage = range_arg(a.coverage, "coverage");
    spec.bandwidth = a.bandwidth;
  }
  if (c.seed_set) spec.seed = c.seed;
  spec.validate();
  const Array<double> clean = read_image(a.input, a.channels);
  const Array<double> noisy = corrupt::apply_draw(spec, clean, 0, StreamRole::input).image;
  const std::string dst = a.output.empty() ? c.out : a.output;
  if (dst.empty()) throw ConfigError("corrupt: no output path");
  write_image(dst, noisy);
  const Array<double> written = read_image(dst, a.channels);
  double mad = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) mad += std::abs(written[i] - clean[i]);
  std::cout << "mean_abs_diff " << num(mad / static_cast<double>(clean.size())) << "\n";
  return 0;
}

// ---- train / eval

template <class T>
int train_as(const harness::ExperimentConfig& cfg) {
  const auto r = harness::train<T>(cfg);
  const auto& st = r.report.final_stats;
  std::cout << "steps " << cfg.total_steps << "\n";
  if (st.count) {
    std::cout << "psnr " << num(st.mean) << " +- " << num(st.stddev) << "\n";
    std::cout << "baseline_psnr " << num(st.baseline_mean) << " +- " << num(st.baseline_stddev) << "\n";
  }
  if (!cfg.output_dir.empty()) {
    std::ofstream(fs::path(cfg.output_dir) / "config.json") << harness::config_to_json(cfg).dump(2) << "\n";
    std::cout << "report " << (fs::path(cfg.output_dir) / "report.csv").string() << "\n";
  }
  return 0;
}

int run_train(const Common& c) {
  const harness::ExperimentConfig cfg = experiment(c);
  return cfg.precision == harness::Precision::dual ? train_as<double>(cfg) : train_as<float>(cfg);
}

int run_eval(const Common& c, std::string checkpoint, const std::string& input) {
  harness::ExperimentConfig cfg = harness::load_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  if (checkpoint.empty()) checkpoint = (fs::path(cfg.output_dir) / "checkpoint.n2nc").string();
  const nn::NetworkSpec spec = cfg.network_spec();
  const auto state = harness::load_checkpoint<float>(checkpoint, spec);
  if (!input.empty()) {
    if (c.out.empty()) throw ConfigError("eval --input needs --out");
    const Array<float> img = read_image(input, cfg.channels).cast<float>();
    const int mult = 1 << cfg.depth;
    if (img.height() % mult || img.width() % mult)
      throw ConfigError("image dimensions must be multiples of " + std::to_string(mult));
    write_image(c.out, harness::predict(spec, state, img).cast<double>());
    std::cout << "wrote " << c.out << "\n";
    return 0;
  }
  const auto src = harness::make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  const auto val = harness::make_validation_set<float>(cfg, *src);
  const auto st = harness::evaluate(spec, state, val);
  std::cout << "psnr " << num(st.mean) << " +- " << num(st.stddev) << "\n";
  std::cout << "baseline_psnr " << num(st.baseline_mean) << " +- " << num(st.baseline_stddev) << "\n";
  std::cout << "images " << st.count << "\n";
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    const Array<float> pred = harness::predict(spec, state, val.input);
    for (int b = 0; b < val.clean.batch(); ++b) {
      const std::string stem = (fs::path(c.out) / ("val" + std::to_string(b))).string();
      io::write_png(stem + "_input.png", slice_batch(val.input, b));
      io::write_png(stem + "_output.png", slice_batch(pred, b));
      io::write_png(stem + "_clean.png", slice_batch(val.clean, b));
    }
  }
  return 0;
}

// ---- budget

int run_budget(const Common& c, int budget, int clean_cost, const std::string& pairing) {
  const harness::ExperimentConfig cfg = experiment(c);
  harness::CaptureBudgetPlan plan = harness::CaptureBudgetPlan::traditional(budget, clean_cost);
  if (pairing == "clean-average") plan.pairing = harness::BudgetPairing::clean_average;
  else if (pairing != "noisy") throw ConfigError("--pairing must be 'noisy' or 'clean-average'");
  harness::ExperimentConfig run_cfg = cfg;
  run_cfg.output_dir.clear();
  const auto r = harness::capture_budget<float>(plan, run_cfg);
  std::cout << "case,n,m,pairs,psnr\n";
  for (const auto& k : r.cases) {
    std::cout << k.name << "," << k.n << "," << k.m << "," << k.pairs << "," << num(k.report.final_stats.mean) << "\n";
    if (!cfg.output_dir.empty()) {
      fs::create_directories(cfg.output_dir);
      std::ofstream os(fs::path(cfg.output_dir) / (k.name + ".csv"));
      k.report.write_csv(os);
    }
  }
  return 0;
}

// ---- mri-sim

int run_mri_sim(const Common& c, int size, double fraction, const std::string& input) {
  if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("--fraction must lie in (0,1]");
  Rng rng(c.seed_set ? c.seed : 1);
  Array<double> clean;
  if (!input.empty()) {
    clean = read_image(input, 1);
  } else {
    if (size <= 0 || (size & (size - 1))) throw ConfigError("--size must be a power of two");
    clean = mri::shepp_logan(size);
  }
  const int h = clean.height(), w = clean.width();
  if (!mri::is_power_of_two(h) || !mri::is_power_of_two(w)) throw ConfigError("image dimensions must be powers of two");
  const double lambda = mri::solve_lambda(h, w, fraction);
  const mri::Undersampled u = mri::undersampled_image(clean, lambda, rng);
  std::cout << "lambda " << num(lambda) << "\n";
  std::cout << "retained_fraction " << num(u.sample.retained_fraction()) << "\n";
  std::cout << "ifft_psnr " << num(loss::psnr(loss::clip01(u.image), clean)) << "\n";
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    Array<double> mask({1, 1, h, w});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) mask.at(0, 0, (y + h / 2) % h, (x + w / 2) % w) = u.sample.selected(y, x) ? 1.0 : 0.0;
    io::write_png((fs::path(c.out) / "clean.png").string(), clean);
    io::write_png((fs::path(c.out) / "undersampled.png").string(), u.image);
    io::write_png((fs::path(c.out) / "mask.png").string(), mask);
    io::write_raw((fs::path(c.out) / "undersampled.n2nf").string(), u.image);
  }
  return 0;
}

// ---- oracle

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + item + "'");
    }
  }
  return out;
}

// "w:mean:std;w:mean:std"
est::GaussianMixture parse_mixture(const std::string& s) {
  est::GaussianMixture m;
  std::stringstream ss(s);
  std::string comp;
  double total = 0.0;
  while (std::getline(ss, comp, ';')) {
    std::string t = comp;
    std::replace(t.begin(), t.end(), ':', ',');
    const auto v = parse_list(t);
    if (v.size() != 3 || v[0] <= 0.0 || v[2] <= 0.0) throw ConfigError("mixture component '" + comp + "' must be w:mean:std");
    m.components.push_back({v[0], v[1], v[2]});
    total += v[0];
  }
  if (m.components.empty()) throw ConfigError("empty mixture");
  for (auto& k : m.components) k.weight /= total;
  return m;
}

int run_oracle(const Common& c, const std::string& loss_name, double gamma, const std::string& samples,
               const std::string& mixture, int draws, bool hilbert) {
  if (!mixture.empty()) {
    const est::GaussianMixture m = parse_mixture(mixture);
    if (hilbert) {
      std::cout << num(est::hilbert_zero(m.grid())) << "\n";
      return 0;
    }
    Rng rng(c.seed_set ? c.seed : 1);
    std::vector<double> v(static_cast<std::size_t>(std::max(1, draws)));
    for (auto& x : v) x = m.sample(rng);
    std::cout << num(est::point_estimate(est::SampleSet(v), loss::LossSpec{loss::loss_kind_from_string(loss_name), gamma}))
              << "\n";
    return 0;
  }
  if (samples.empty()) throw ConfigError("oracle needs --samples or --mixture");
  const est::SampleSet set(parse_list(samples));
  std::cout << num(est::point_estimate(set, loss::LossSpec{loss::loss_kind_from_string(loss_name), gamma})) << "\n";
  return 0;
}

// ---- gradcheck

int run_gradcheck(const Common& c) {
  const auto entries = harness::run_gradient_suite(c.seed_set ? c.seed : 1);
  bool ok = true;
  for (const auto& e : entries) {
    std::printf("%-28s %.3e  (tol %.0e)  %s\n", e.name.c_str(), e.error, e.tolerance, e.passed() ? "ok" : "FAIL");
    ok = ok && e.passed();
  }
  if (!ok) throw NumericalError("gradient check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise2Noise numerical laboratory"};
  app.require_subcommand(1);
  Common common;

  auto* corrupt_cmd = app.add_subcommand("corrupt", "apply a corruption to an image (PNG or .n2nf)");
  CorruptArgs ca;
  add_common(corrupt_cmd, common);
  corrupt_cmd->add_option("--kind", ca.kind, "none|gaussian|brown_gaussian|poisson|bernoulli_mask|text_overlay|impulse");
  corrupt_cmd->add_option("--sigma", ca.sigma, "noise std on the 0-255 scale (or lo,hi)");
  corrupt_cmd->add_option("--bandwidth", ca.bandwidth, "brown noise filter std in pixels");
  corrupt_cmd->add_option("--lambda", ca.lambda, "Poisson magnitude (or lo,hi)");
  corrupt_cmd->add_option("--p", ca.p, "mask / impulse probability (or lo,hi)");
  corrupt_cmd->add_option("--coverage", ca.coverage, "text coverage (or lo,hi)");
  corrupt_cmd->add_option("--channels", ca.channels, "1 or 3")->check(CLI::IsMember({1, 3}));
  corrupt_cmd->add_option("input", ca.input, "input image")->required();
  corrupt_cmd->add_option("output", ca.output, "output image");

  auto* train_cmd = app.add_subcommand("train", "train a denoiser from a JSON config");
  add_common(train_cmd, common);
  train_cmd->get_option("--config")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the validation set or one image");
  std::string checkpoint, eval_input;
  add_common(eval_cmd, common);
  eval_cmd->get_option("--config")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file (default <output_dir>/checkpoint.n2nc)");
  eval_cmd->add_option("--input", eval_input, "denoise this image and write it to --out");

  auto* budget_cmd = app.add_subcommand("budget", "capture-budget comparison of the three allocations");
  int budget = 400, clean_cost = 19;
  std::string pairing = "noisy";
  add_common(budget_cmd, common);
  budget_cmd->get_option("--config")->required();
  budget_cmd->add_option("--budget", budget, "total capture units");
  budget_cmd->add_option("--clean-cost", clean_cost, "capture units per clean reference");
  budget_cmd->add_option("--pairing", pairing, "case 2 pairing: noisy|clean-average");

  auto* mri_cmd = app.add_subcommand("mri-sim", "simulate Russian-roulette k-space undersampling");
  int mri_size = 64;
  double fraction = 0.1;
  std::string mri_input;
  add_common(mri_cmd, common, false);
  mri_cmd->add_option("--size", mri_size, "phantom size (power of two)");
  mri_cmd->add_option("--fraction", fraction, "expected retained fraction of frequencies");
  mri_cmd->add_option("--input", mri_input, "grayscale image instead of the phantom");

  auto* oracle_cmd = app.add_subcommand("oracle", "point estimate of a sample set under a loss");
  std::string loss_name = "l2", samples, mixture;
  double gamma = 2.0;
  int draws = 100000;
  bool hilbert = false;
  add_common(oracle_cmd, common, false);
  oracle_cmd->add_option("--loss", loss_name, "l2|l1|l0_annealed");
  oracle_cmd->add_option("--gamma", gamma, "L0 exponent");
  oracle_cmd->add_option("--samples", samples, "comma-separated values");
  oracle_cmd->add_option("--mixture", mixture, "Gaussian mixture w:mean:std;...");
  oracle_cmd->add_option("--draws", draws, "samples drawn from --mixture");
  oracle_cmd->add_flag("--hilbert", hilbert, "print the Hilbert-zero point of --mixture");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  add_common(grad_cmd, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*corrupt_cmd) return run_corrupt(common, ca);
    if (*train_cmd) return run_train(common);
    if (*eval_cmd) return run_eval(common, checkpoint, eval_input);
    if (*budget_cmd) return run_budget(common, budget, clean_cost, pairing);
    if (*mri_cmd) return run_mri_sim(common, mri_size, fraction, mri_input);
    if (*oracle_cmd) return run_oracle(common, loss_name, gamma, samples, mixture, draws, hilbert);
    if (*grad_cmd) return run_gradcheck(common);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
