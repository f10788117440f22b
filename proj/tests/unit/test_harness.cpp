#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "n2n/core/gradcheck.hpp"
#include "n2n/harness/budget.hpp"
#include "n2n/harness/train.hpp"
#include "n2n/nn/tabular.hpp"

using namespace n2n;
using namespace n2n::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("n2n_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny(long steps) {
  ExperimentConfig c;
  c.crop = 16;
  c.width_scale = 0.125;
  c.depth = 2;
  c.total_steps = steps;
  c.validation_images = 4;
  c.validation_interval = 0.1;
  return c;
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c = config_from_json(Json::object());
  EXPECT_EQ(c.minibatch, 4);
  EXPECT_EQ(c.learning_rate, 0.001);
  EXPECT_EQ(c.target_mode, TargetMode::noisy);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"minibach": 4})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"network": {"width": 1}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"input_corruption": {"kind": "gaussian", "sigmaa": 3}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"loss": {"kind": "l3"}})")), ConfigError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"minibatch": "four"})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"minibatch": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"dataset": {"crop": 60}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"target_mode": "both"})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"loss": {"kind": "relative_mse"}})")), ConfigError);
}

TEST(Config, RoundTrip) {
  const Json j = Json::parse(R"({
    "dataset": {"crop": 32, "pool_size": 10},
    "network": {"width_scale": 0.5, "depth": 2},
    "input_corruption": {"kind": "poisson", "lambda": [5, 50]},
    "target_corruption": {"kind": "impulse", "p": 0.3},
    "loss": {"kind": "l0_annealed"},
    "total_steps": 17, "seed": 9})");
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.input_corruption.lambda.lo, 5.0);
  EXPECT_EQ(c.input_corruption.lambda.hi, 50.0);
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
}

TEST(Config, MissingOrMalformedFile) {
  EXPECT_THROW(load_config("/nonexistent/missing.json"), ConfigError);
  const fs::path d = scratch("badjson");
  std::ofstream(d / "c.json") << "{ not json";
  EXPECT_THROW(load_config((d / "c.json").string()), ConfigError);
}

TEST(Report, HeaderAndRows) {
  ExperimentReport r;
  r.rows.push_back({0, NAN, NAN, NAN, 12.5});
  r.rows.push_back({1, 0.25, 0.001, NAN, NAN});
  EXPECT_EQ(r.csv(), "step,loss,lr,gamma,psnr\n0,,,,12.5\n1,0.25,0.001,,\n");
  EXPECT_EQ(format_field(INFINITY), "inf");
  EXPECT_EQ(r.checkpoints().size(), 1u);
  EXPECT_EQ(r.mean_loss(0, 1), 0.25);
}

TEST(RawIo, RoundTripAndLayout) {
  const fs::path d = scratch("raw");
  auto img = test::random_array({1, 3, 2, 5}, 1, 0.0, 10.0);
  io::write_raw((d / "x.n2nf").string(), img);
  std::ifstream is(d / "x.n2nf", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), {});
  ASSERT_EQ(bytes.size(), 16u + 4u * 30u);
  EXPECT_EQ(bytes.substr(0, 4), "N2NF");
  EXPECT_EQ(bytes.substr(4, 12), std::string("\x02\0\0\0\x05\0\0\0\x03\0\0\0", 12));
  float first;
  std::memcpy(&first, bytes.data() + 16 + 4, 4);  // (y=0, x=0, c=1)
  EXPECT_EQ(first, static_cast<float>(img.at(0, 1, 0, 0)));
  auto back = io::read_raw((d / "x.n2nf").string());
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(img[i])));
}

TEST(RawIo, BadMagic) {
  const fs::path d = scratch("rawbad");
  std::ofstream(d / "x.n2nf") << "N2NX0000";
  EXPECT_THROW(io::read_raw((d / "x.n2nf").string()), std::runtime_error);
}

TEST(Png, RoundTripQuantization) {
  const fs::path d = scratch("png");
  for (int ch : {1, 3}) {
    auto img = test::random_array({1, ch, 7, 9}, 2, 0.0, 1.0);
    io::write_png((d / "x.png").string(), img);
    auto back = io::read_png((d / "x.png").string(), ch);
    ASSERT_EQ(back.shape(), img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back[i] - img[i]), 0.5 / 255 + 1e-12);
  }
  Array<double> over({1, 1, 1, 2});
  over[0] = -1.0;
  over[1] = 2.0;
  io::write_png((d / "c.png").string(), over);
  auto c = io::read_png((d / "c.png").string(), 1);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_EQ(c[1], 1.0);
}

TEST(Checkpoint, RoundTripAndMismatch) {
  const fs::path d = scratch("ckpt");
  const auto spec = nn::NetworkSpec::unet(3, 3, 0.125, 2);
  Rng rng(3);
  auto st = nn::build_network<float>(spec, rng);
  st.step = 42;
  save_checkpoint((d / "a.n2nc").string(), st);
  auto back = load_checkpoint<float>((d / "a.n2nc").string(), spec);
  EXPECT_EQ(back.step, 42);
  ASSERT_EQ(back.parameters.size(), st.parameters.size());
  for (std::size_t i = 0; i < st.parameters.size(); ++i)
    for (std::size_t j = 0; j < st.parameters[i].size(); ++j)
      ASSERT_EQ(back.parameters[i].value()[j], st.parameters[i].value()[j]);
  EXPECT_THROW(load_checkpoint<float>((d / "a.n2nc").string(), nn::NetworkSpec::unet(3, 3, 0.25, 2)), ConfigError);
}

TEST(Dataset, SyntheticDeterministicAndInRange) {
  Rng a(4), b(4);
  auto sa = load_dataset(kSyntheticTag, 32, a), sb = load_dataset(kSyntheticTag, 32, b);
  for (int i = 0; i < 5; ++i) {
    auto x = sa.next(), y = sb.next();
    ASSERT_EQ(x.shape(), (Shape{1, 3, 32, 32}));
    double lo = 1.0, hi = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      ASSERT_EQ(x[k], y[k]);
      lo = std::min(lo, x[k]);
      hi = std::max(hi, x[k]);
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 1.0);
    EXPECT_GT(hi - lo, 0.05);
  }
}

TEST(Dataset, PngDirectorySkipsBadFiles) {
  const fs::path d = scratch("pngdir");
  io::write_png((d / "big.png").string(), test::random_array({1, 3, 40, 40}, 5, 0.0, 1.0));
  io::write_png((d / "small.png").string(), test::random_array({1, 3, 8, 8}, 6, 0.0, 1.0));
  std::ofstream(d / "broken.png") << "not a png";
  std::ostringstream log;
  PngDirectorySource src(d.string(), 32, 3, 7, log);
  EXPECT_EQ(src.image_count(), 1u);
  EXPECT_NE(log.str().find("small.png"), std::string::npos);
  EXPECT_NE(log.str().find("broken.png"), std::string::npos);
  auto c = src.crop(0);
  EXPECT_EQ(c.shape(), (Shape{1, 3, 32, 32}));
  const fs::path empty = scratch("pngempty");
  std::ostringstream quiet;
  EXPECT_THROW(PngDirectorySource(empty.string(), 32, 3, 7, quiet), ConfigError);
  EXPECT_THROW(make_source("/nonexistent/dir", 32, 3, 7, quiet), ConfigError);
}

TEST(Train, ZeroStepsGivesInitialNetworkAndNoRows) {
  auto cfg = tiny(0);
  auto r = train<float>(cfg);
  EXPECT_TRUE(r.report.rows.empty());
  Rng init = make_stream(cfg.seed, 0, StreamRole::init);
  auto fresh = nn::build_network<float>(cfg.network_spec(), init);
  EXPECT_EQ(r.state.parameters[0].value()[0], fresh.parameters[0].value()[0]);
}

TEST(Evaluate, IdentityOnCleanInputsIsInfinite) {
  auto cfg = tiny(1);
  cfg.input_corruption = corrupt::CorruptionSpec::gaussian(0.0);
  auto src = make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  auto val = make_validation_set<double>(cfg, *src);
  const auto id = nn::NetworkSpec::identity(3);
  auto st = evaluate(id, nn::NetworkState<double>{}, val);
  EXPECT_EQ(st.mean, INFINITY);
  EXPECT_EQ(st.baseline_mean, INFINITY);
  EXPECT_EQ(st.count, 4u);
}

TEST(Evaluate, BaselineColumnIsInputPsnr) {
  auto cfg = tiny(1);
  auto src = make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  auto val = make_validation_set<double>(cfg, *src);
  auto st = evaluate(nn::NetworkSpec::identity(3), nn::NetworkState<double>{}, val);
  EXPECT_DOUBLE_EQ(st.mean, st.baseline_mean);
  EXPECT_GT(st.baseline_mean, 18.0);
  EXPECT_LT(st.baseline_mean, 25.0);
}

TEST(Train, CleanIdentityTaskImprovesMonotonically) {
  auto cfg = tiny(200);
  cfg.input_corruption = corrupt::CorruptionSpec::gaussian(0.0);
  cfg.target_corruption = corrupt::CorruptionSpec::gaussian(0.0);
  cfg.validation_interval = 0.05;
  auto r = train<float>(cfg);
  EXPECT_EQ(r.report.rows.size(), 201u);
  for (std::size_t i = 1; i < r.report.rows.size(); ++i) EXPECT_EQ(r.report.rows[i].step, r.report.rows[i - 1].step + 1);
  const auto cp = r.report.checkpoints();
  ASSERT_EQ(cp.size(), 21u);
  int drops = 0;
  for (std::size_t i = 1; i < cp.size(); ++i) drops += cp[i].psnr < cp[i - 1].psnr;
  EXPECT_EQ(drops, 0);
  EXPECT_GT(cp.back().psnr, cp.front().psnr + 3.0);
}

TEST(Train, ReproducibleCsvAcrossThreadCounts) {
  auto cfg = tiny(20);
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p / "report.csv");
    return std::string((std::istreambuf_iterator<char>(is)), {});
  };
  cfg.output_dir = a.string();
  ::setenv("N2N_THREADS", "0", 1);
  train<float>(cfg);
  cfg.output_dir = b.string();
  ::setenv("N2N_THREADS", "3", 1);
  train<float>(cfg);
  ::unsetenv("N2N_THREADS");
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(a).rfind("step,loss,lr,gamma,psnr\n", 0), 0u);
  EXPECT_TRUE(fs::exists(a / "checkpoint.n2nc"));
}

TEST(Train, NanLossAbortsWithConfigSnapshot) {
  struct Poisoned final : PairProvider<float> {
    TrainingBatch<float> batch(long) const override {
      Array<float> x({1, 3, 16, 16}, 0.5f);
      Array<float> t = x;
      t[0] = NAN;
      return {x, t, std::nullopt, {}};
    }
  };
  auto cfg = tiny(5);
  auto src = make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  try {
    train<float>(cfg, Poisoned{}, make_validation_set<float>(cfg, *src));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("\"total_steps\":5"), std::string::npos);
  }
}

TEST(Train, CleanTargetModeUsesLatents) {
  auto cfg = tiny(1);
  cfg.target_mode = TargetMode::clean;
  auto src = make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  StreamPairProvider<double> p(cfg, src);
  auto b = p.batch(3);
  auto again = p.batch(3);
  EXPECT_EQ(b.input[10], again.input[10]);
  EXPECT_EQ(b.target[10], src->crop(12)[10]);
  EXPECT_NE(b.input[10], b.target[10]);
}

TEST(Budget, PlanValidation) {
  auto p = CaptureBudgetPlan::traditional(400);
  EXPECT_EQ(p.n, 20);
  EXPECT_EQ(p.m, 20);
  p.n = 19;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(CaptureBudgetPlan::traditional(410), ConfigError);
  CaptureBudgetPlan one{20, 20, 1, 0};
  EXPECT_THROW(one.validate(), ConfigError);
  EXPECT_EQ(kReferenceBudgetCU, 100 * 20);
  EXPECT_EQ(100 * 20 * 19, 38000);
}

TEST(Budget, CasesUseTheWholeBudget) {
  auto cfg = tiny(2);
  auto plan = CaptureBudgetPlan::traditional(12, 2);
  auto r = capture_budget<float>(plan, cfg);
  ASSERT_EQ(r.cases.size(), 3u);
  EXPECT_EQ(r.cases[0].n * r.cases[0].m, 12);
  EXPECT_EQ(r.cases[0].pairs, 4u);
  EXPECT_EQ(r.cases[1].pairs, 4u * 3 * 2);
  EXPECT_EQ(r.cases[2].n, 6);
  EXPECT_EQ(r.cases[2].pairs, 12u);
  plan.pairing = BudgetPairing::clean_average;
  EXPECT_EQ(capture_budget<float>(plan, cfg).cases[1].pairs, 12u);
}

TEST(Budget, CleanAverageTargetExcludesInput) {
  auto cfg = tiny(1);
  cfg.minibatch = 1;
  auto src = make_source(cfg.dataset, cfg.crop, cfg.channels, cfg.seed);
  using P = CapturePairProvider<double>;
  P avg(cfg, *src, 1, 3, {{0, 0, -1}});
  P pair(cfg, *src, 1, 3, {{0, 1, 0}});
  P pair2(cfg, *src, 1, 3, {{0, 2, 0}});
  auto a = avg.batch(0), b = pair.batch(0), c = pair2.batch(0);
  for (std::size_t k = 0; k < a.target.size(); k += 97) EXPECT_NEAR(a.target[k], 0.5 * (b.input[k] + c.input[k]), 1e-12);
}

TEST(Tabular, NoisyL2TrainingConvergesToPerBinMean) {
  // Inputs carry a bin id; targets are noisy; each cell should learn the mean of its targets.
  const int bins = 8;
  nn::TabularModel<double> model(bins, 1);
  nn::NetworkState<double> st;
  st.parameters = {model.table};
  st.adam_m = {Array<double>({bins})};
  st.adam_v = {Array<double>({bins})};
  Rng rng(11);
  std::normal_distribution<double> noise(0.0, 0.3);
  auto latent = [](int b) { return 0.1 + 0.1 * b; };
  for (int step = 0; step < 3000; ++step) {
    Array<double> x({16, 1, 1, 1}), t({16, 1, 1, 1});
    for (int i = 0; i < 16; ++i) {
      const int b = static_cast<int>(uniform01(rng) * bins);
      x[i] = (b + 0.5) / bins;
      t[i] = latent(b) + noise(rng);
    }
    backward(loss::l2(model.forward(x), t));
    nn::adam_step(st, nn::lr_schedule(step, 3000, 0.01));
  }
  for (int b = 0; b < bins; ++b) EXPECT_NEAR(model.table.value()[b], latent(b), 0.05) << "bin " << b;
}

TEST(Tabular, GatherGradientScatters) {
  auto table = test::leaf(test::random_array({4}, 12));
  auto r = gradcheck([](const std::vector<Tensor<double>>& in) {
    return sum(mul(nn::gather(in[0], {0, 2, 2, 3, 0}, {5}), nn::gather(in[0], {1, 1, 0, 3, 2}, {5})));
  }, {table});
  EXPECT_LT(r.max_relative_error, 1e-6);
  EXPECT_EQ(nn::quantize(-0.5, 8), 0);
  EXPECT_EQ(nn::quantize(1.0, 8), 7);
  EXPECT_EQ(nn::quantize(0.49, 8), 3);
}
