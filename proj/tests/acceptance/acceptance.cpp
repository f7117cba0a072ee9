// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 6-9 read a desk-scale experiment (4 schedules x
// 5 runs x 8000 epochs) kept under --cache and rebuilt only when its config
// hash no longer matches.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <mmvae/gaussian.hpp>
#include <mmvae/harness/config.hpp>
#include <mmvae/harness/experiment.hpp>
#include <mmvae/losses.hpp>
#include <mmvae/measures.hpp>
#include <mmvae/schedules.hpp>
#include <mmvae/synthetic.hpp>

#include "../unit/oracles.hpp"

using namespace mmvae;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("criterion %2d %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Faster equivalent of oracle::monte_carlo_kl for the long runs here.
double monte_carlo_kl(const VectorXd& pm, const VectorXd& pv, const VectorXd& qm,
                      const VectorXd& qv, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  const auto d = pm.size();
  const VectorXd sd = pv.cwiseSqrt();
  const double log_ratio = 0.5 * (qv.array().log() - pv.array().log()).sum();
  const VectorXd inv2q = (2.0 * qv).cwiseInverse();
  const VectorXd shift = pm - qm;
  double acc = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double v = log_ratio;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double z = n01(gen);
      const double x = shift[i] + sd[i] * z;
      v += -0.5 * z * z + x * x * inv2q[i];
    }
    acc += v;
  }
  return acc / static_cast<double>(samples);
}

struct Pair {
  VectorXd pm, pv, qm, qv;
};

Pair random_pair(Rng& r, Eigen::Index d) {
  Pair p{VectorXd(d), VectorXd(d), VectorXd(d), VectorXd(d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    p.pm[i] = r.uniform(-2.0, 2.0);
    p.qm[i] = r.uniform(-2.0, 2.0);
    p.pv[i] = std::exp(r.uniform(-1.5, 1.5));
    p.qv[i] = std::exp(r.uniform(-1.5, 1.5));
  }
  return p;
}

void criterion1() {
  const auto t0 = Clock::now();
  Rng r(101);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto d = static_cast<Eigen::Index>(1 + k % 28);
    const auto p = random_pair(r, d);
    const double closed = kl_diag(DiagonalGaussian(p.pm, p.pv), DiagonalGaussian(p.qm, p.qv));
    const double mc = monte_carlo_kl(p.pm, p.pv, p.qm, p.qv, 1'000'000,
                                     1000 + static_cast<std::uint64_t>(k));
    worst = std::max(worst, std::abs(closed - mc) / std::abs(mc));
  }
  const DiagonalGaussian a(VectorXd::Zero(1), VectorXd::Ones(1));
  const DiagonalGaussian b(VectorXd::Ones(1), VectorXd::Ones(1));
  const double unit = kl_diag(a, b);
  const double secs = seconds_since(t0);
  report(1, worst < 0.01 && std::abs(unit - 0.5) <= 1e-12 && secs < 60.0,
         "KL closed form vs 1e6-sample Monte Carlo, 100 pairs: worst relative error " +
             fmt("%.3g", worst) + "; N(0,1)||N(1,1) = " + fmt("%.17g", unit) + "; " +
             fmt("%.1f", secs) + " s");
}

void criterion2() {
  const auto& layout = ModalityLayout::standard();
  Rng r(202);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto p = random_pair(r, 28);
    const DiagonalGaussian gp(p.pm, p.pv), gq(p.qm, p.qv);
    const double whole = kl_diag(gp, gq);
    for (std::size_t m = 0; m < layout.modality_count(); ++m) {
      const auto inside = layout.indices(m);
      std::vector<std::size_t> outside;
      for (auto i : layout.all_indices())
        if (std::find(inside.begin(), inside.end(), i) == inside.end()) outside.push_back(i);
      worst = std::max(worst, std::abs(kl_diag(gp, gq, inside) + kl_diag(gp, gq, outside) - whole));
    }
  }
  report(2, worst <= 1e-12,
         "KL(I(M)) + KL(I minus I(M)) = KL(I), 100 pairs x 5 modalities: worst gap " +
             fmt("%.3g", worst));
}

void criterion3() {
  const auto t0 = Clock::now();
  const auto ds = generate_synthetic(303, 200).subset([] {
    std::vector<std::size_t> idx(64);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }());
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng init(3000 + s);
    MultimodalVae model(ModalityLayout::standard(), 32, init);
    const auto rep = evaluate_measures(model, ds, 0, 64);
    for (std::size_t m = 0; m < 5; ++m) {
      worst = std::min(worst, rep.single_modality_error_all[m] - rep.single_modality_error_modality[m]);
      worst = std::min(worst, rep.loss_of_precision_all[m] - rep.loss_of_precision_modality[m]);
    }
  }
  const double secs = seconds_since(t0);
  report(3, worst >= -1e-9 && secs < 60.0,
         "all-scope >= modality-scope on 20 untrained models, 64 samples: smallest margin " +
             fmt("%.3g", worst) + "; " + fmt("%.1f", secs) + " s");
}

void criterion4() {
  const auto t0 = Clock::now();
  const auto& layout = ModalityLayout::standard();
  Rng init(404);
  MultimodalVae model(layout, 8, init);
  const auto ds = generate_synthetic(405, 200);
  Rng r(406);
  const MatrixXd x = ds.targets.leftCols(16);
  MatrixXd xin = x;
  for (Eigen::Index j = 0; j < 16; ++j) {
    const auto m = static_cast<std::size_t>(j % 5);
    if (j % 3 == 0)
      for (auto i : layout.indices(m)) xin(static_cast<Eigen::Index>(i), j) = kMuteValue;
  }
  const MatrixXd eps = r.gaussian_matrix(28, 16);
  double worst = 0.0;
  for (double beta : {0.0, 0.5, 1.0}) {
    auto& ps = model.parameters();
    ps.zero_gradients();
    elbo_loss(model, xin, x, beta, eps, true);
    const VectorXd analytic = ps.flatten_gradient();
    const VectorXd numeric = oracle::central_difference(
        ps, [&] { return elbo_loss(model, xin, x, beta, eps, false).total; }, 1e-5);
    worst = std::max(worst, oracle::max_relative_error(analytic, numeric));
  }
  const double secs = seconds_since(t0);
  report(4, worst < 1e-4 && secs < 120.0,
         "ELBO gradient vs central differences, hidden 8, " +
             std::to_string(model.parameters().flatten().size()) +
             " parameters, beta in {0, 0.5, 1}: worst relative error " + fmt("%.3g", worst) +
             "; " + fmt("%.1f", secs) + " s");
}

void criterion5() {
  std::vector<std::string> broken;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) broken.push_back(what);
  };
  for (std::int64_t total : {8000, 80000}) {
    const auto one = BetaSchedule::make(ScheduleKind::constant1, total);
    const auto zero = BetaSchedule::make(ScheduleKind::constant0, total);
    const auto d0 = BetaSchedule::make(ScheduleKind::dyn_plateau0, total);
    const auto d1 = BetaSchedule::make(ScheduleKind::dyn_plateau1, total);
    const std::string tag = " (T=" + std::to_string(total) + ")";
    double prev = 2.0;
    for (std::int64_t e = 0; e < total; ++e) {
      const double b0 = zero.beta_at(e);
      if (one.beta_at(e) != 1.0) expect(false, "constant1 at " + std::to_string(e) + tag);
      if (e >= 1000 && b0 != 0.0) expect(false, "constant0 nonzero at " + std::to_string(e) + tag);
      if (b0 > prev) expect(false, "constant0 increases at " + std::to_string(e) + tag);
      prev = b0;
      if (e < d0.tail_start) {
        if ((d0.beta_at(e) == 1.0) != (e % 80 == 0))
          expect(false, "dynamic anchor at " + std::to_string(e) + tag);
        if (d0.beta_at(e) != d1.beta_at(e))
          expect(false, "dynamic variants differ at " + std::to_string(e) + tag);
      } else {
        if (d0.beta_at(e) != 0.0) expect(false, "dyn_plateau0 tail at " + std::to_string(e) + tag);
        if (d1.beta_at(e) != 1.0) expect(false, "dyn_plateau1 tail at " + std::to_string(e) + tag);
      }
    }
    expect(zero.beta_at(0) == 1.0, "constant0 beta(0)" + tag);
    std::int64_t plateau = -1;
    for (std::int64_t c = 0; (c + 1) * 80 <= d0.tail_start; ++c) {
      std::int64_t zeros = 0;
      for (std::int64_t e = c * 80; e < (c + 1) * 80; ++e) zeros += d0.beta_at(e) == 0.0;
      if (zeros < plateau) expect(false, "plateau shrinks in cycle " + std::to_string(c) + tag);
      plateau = zeros;
    }
  }
  std::string detail = "schedule anchor facts for T = 8000 and 80000";
  if (!broken.empty())
    detail += ": " + std::to_string(broken.size()) + " violations, first " + broken.front();
  report(5, broken.empty(), detail);
}

// ---------------------------------------------------------------------------
// Desk-scale experiment

struct Desk {
  Comparison cmp;
  bool ok = false;
  std::string error;
};

Desk desk_experiment(const fs::path& cache, const fs::path& config_path, std::size_t jobs) {
  Desk d;
  try {
    const auto base = load_run_config(config_path);
    std::vector<ExperimentOutputs> outs;
    for (auto kind : kAllSchedules) {
      auto c = base;
      c.schedule.kind = kind;
      c.jobs = jobs;
      c.output_dir = (cache / std::string(to_string(kind))).string();
      c.validate();
      bool fresh = false;
      const auto manifest = fs::path(c.output_dir) / "manifest.json";
      if (fs::exists(manifest) && fs::exists(fs::path(c.output_dir) / "measures.csv")) {
        std::ifstream in(manifest);
        const auto j = nlohmann::json::parse(in);
        fresh = j.at("config_hash").get<std::string>() == config_hash(c) &&
                j.at("runs_succeeded").get<std::size_t>() == c.runs;
      }
      if (!fresh) {
        std::fprintf(stderr, "running desk-scale %s into %s\n", std::string(to_string(kind)).c_str(),
                     c.output_dir.c_str());
        run_experiment(c, {});
      }
      outs.push_back(load_experiment(c.output_dir));
    }
    d.cmp = compare_schedules(outs);
    write_comparison(d.cmp, cache / "comparison.csv");
    d.ok = true;
  } catch (const std::exception& e) {
    d.error = e.what();
  }
  return d;
}

const char* const kSchedules[] = {"constant1", "constant0", "dyn_plateau0", "dyn_plateau1"};
const char* const kModalities[] = {"joint", "vision", "touch", "sound", "motor"};

std::string list(const Comparison& c, int w, const std::string& measure,
                 const std::string& scope = "") {
  std::string s;
  for (auto k : kSchedules) {
    if (!s.empty()) s += ", ";
    s += std::string(k) + " " + fmt("%.4g", c.at(w, k, measure, scope).mean);
  }
  return s;
}

void criterion6(const Desk& d) {
  if (!d.ok) return report(6, false, "desk experiment unavailable: " + d.error);
  const auto& c = d.cmp;
  const double one = c.at(1, "constant1", "baseline", "all").mean;
  bool lowest = true;
  for (auto k : kSchedules)
    if (std::string(k) != "constant1" && !(c.at(1, k, "baseline", "all").mean > one)) lowest = false;
  const double ratio = c.at(1, "constant0", "baseline", "all").mean / one;
  report(6, lowest && ratio >= 5.0,
         "final-window baseline: " + list(c, 1, "baseline", "all") + "; constant0/constant1 = " +
             fmt("%.3g", ratio));
}

void criterion7(const Desk& d) {
  if (!d.ok) return report(7, false, "desk experiment unavailable: " + d.error);
  const auto& c = d.cmp;
  const double one = c.at(1, "constant1", "prediction_error").mean;
  const double zero = c.at(1, "constant0", "prediction_error").mean;
  bool ok = true;
  for (auto k : kSchedules) {
    const double v = c.at(1, k, "prediction_error").mean;
    if (std::string(k) != "constant1" && !(v < one)) ok = false;
    if (std::string(k) != "constant0" && !(v > zero)) ok = false;
  }
  report(7, ok, "final-window prediction error: " + list(c, 1, "prediction_error"));
}

void criterion8(const Desk& d) {
  if (!d.ok) return report(8, false, "desk experiment unavailable: " + d.error);
  const auto& c = d.cmp;
  auto v = [&](const char* measure, const char* scope, const char* m) {
    return c.at(1, "constant0", measure, scope, m).mean;
  };
  bool min_single = true, max_precision = true;
  std::string singles, precisions;
  for (auto m : kModalities) {
    singles += std::string(singles.empty() ? "" : ", ") + m + " " +
               fmt("%.4g", v("single_modality_error", "all", m));
    precisions += std::string(precisions.empty() ? "" : ", ") + m + " " +
                  fmt("%.4g", v("loss_of_precision", "all", m));
    if (std::string(m) == "vision") continue;
    if (!(v("single_modality_error", "all", "vision") < v("single_modality_error", "all", m)))
      min_single = false;
    if (!(v("loss_of_precision", "all", "vision") > v("loss_of_precision", "all", m)))
      max_precision = false;
  }
  const double touch = v("loss_of_precision", "modality", "touch") /
                       v("single_modality_error", "modality", "touch");
  report(8, min_single && max_precision && touch > 0.5,
         std::string("constant0 final window: single_modality_error/all {") + singles +
             "} vision min " + (min_single ? "yes" : "no") + "; loss_of_precision/all {" +
             precisions + "} vision max " + (max_precision ? "yes" : "no") +
             "; touch loss_of_precision/single_modality_error (modality scope) " +
             fmt("%.3g", touch));
}

void criterion9(const Desk& d) {
  if (!d.ok) return report(9, false, "desk experiment unavailable: " + d.error);
  const auto& c = d.cmp;
  std::size_t checked = 0, agree = 0;
  for (const auto& [key, s0] : c.stats[0]) {
    const auto& [schedule, measure, scope, modality] = key;
    if (schedule != "dyn_plateau0" || measure == "beta") continue;
    const auto& s1 = c.at(0, "dyn_plateau1", measure, scope, modality);
    ++checked;
    if (std::abs(s0.mean - s1.mean) < std::min(s0.std, s1.std)) ++agree;
  }
  bool converge = true;
  std::string moves;
  for (const char* measure : {"single_modality_error", "loss_of_precision"}) {
    auto avg = [&](int w, const char* sched) {
      double s = 0.0;
      for (auto m : kModalities) s += c.at(w, sched, measure, "all", m).mean;
      return s / 5.0;
    };
    for (auto [dyn, target] : {std::pair{"dyn_plateau0", "constant0"},
                               std::pair{"dyn_plateau1", "constant1"}}) {
      const double before = std::abs(avg(0, dyn) - avg(0, target));
      const double after = std::abs(avg(1, dyn) - avg(1, target));
      if (!(after < before)) converge = false;
      moves += std::string(moves.empty() ? "" : "; ") + measure + " " + dyn + "->" + target +
               " " + fmt("%.4g", before) + " -> " + fmt("%.4g", after);
    }
  }
  report(9, checked > 0 && agree == checked && converge,
         "window 1: dyn_plateau0 vs dyn_plateau1 within run std on " + std::to_string(agree) +
             "/" + std::to_string(checked) + " series; window distance to target: " + moves);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10(const fs::path& cache) {
  try {
    const auto root = cache / "reproducibility";
    fs::remove_all(root);
    std::size_t identical = 0, total = 0;
    for (auto kind : {ScheduleKind::constant0, ScheduleKind::dyn_plateau1}) {
      RunConfig c;
      c.schedule.kind = kind;
      c.total_epochs = 240;
      c.schedule.warmup_epochs = 40;
      c.eval_every = 20;
      c.runs = 3;
      c.jobs = 2;
      c.hidden_width = 16;
      c.dataset.n_samples = 300;
      c.eval_set_size = 64;
      c.figures = false;
      const auto first = root / std::string(to_string(kind)) / "first";
      c.output_dir = first.string();
      run_experiment(c, {});
      auto again = load_run_config(first / "manifest.json");
      const auto second = root / std::string(to_string(kind)) / "second";
      again.output_dir = second.string();
      again.jobs = 1;
      run_experiment(again, {});
      for (auto f : {"metrics.csv", "measures.csv"}) {
        ++total;
        const auto a = slurp(first / f), b = slurp(second / f);
        if (!a.empty() && a == b) ++identical;
      }
    }
    report(10, identical == total,
           "rerun from manifest (different job count): " + std::to_string(identical) + "/" +
               std::to_string(total) + " CSV files byte-identical");
  } catch (const std::exception& e) {
    report(10, false, std::string("rerun failed: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cache = "acceptance_runs";
  std::string desk_config = MMVAE_DESK_CONFIG;
  std::size_t jobs = 1;
  std::vector<int> only;
  app.add_option("--cache", cache, "Directory for the desk-scale experiment outputs");
  app.add_option("--desk-config", desk_config, "Desk-scale experiment config");
  app.add_option("--jobs", jobs, "Parallel runs when the desk experiment must be rebuilt");
  app.add_option("--only", only, "Check only these criteria")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int n) {
    return only.empty() || std::find(only.begin(), only.end(), n) != only.end();
  };

  if (wanted(1)) criterion1();
  if (wanted(2)) criterion2();
  if (wanted(3)) criterion3();
  if (wanted(4)) criterion4();
  if (wanted(5)) criterion5();
  if (wanted(6) || wanted(7) || wanted(8) || wanted(9)) {
    const auto desk = desk_experiment(cache, desk_config, jobs);
    if (wanted(6)) criterion6(desk);
    if (wanted(7)) criterion7(desk);
    if (wanted(8)) criterion8(desk);
    if (wanted(9)) criterion9(desk);
  }
  if (wanted(10)) criterion10(cache);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
