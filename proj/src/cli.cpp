#include "fsdp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fsdp/format.hpp"
#include "fsdp/init.hpp"
#include "fsdp/rng.hpp"
#include "fsdp/solvers.hpp"
#include "fsdp/theory.hpp"
#include "json.hpp"

namespace fsdp::cli {

ParseError::ParseError(std::size_t l, const std::string& what)
    : Error("line " + std::to_string(l) + ": " + what), line(l) {}

std::vector<Triplet> parse_triplets(std::istream& in) {
  std::vector<Triplet> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Triplet t{};
    for (std::uint32_t& v : t) {
      std::string tok;
      if (!(ls >> tok)) throw ParseError(no, "expected three indices");
      std::uint64_t x = 0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || x > UINT32_MAX)
        throw ParseError(no, "not a non-negative integer: '" + tok + "'");
      v = static_cast<std::uint32_t>(x);
    }
    std::string extra;
    if (ls >> extra) throw ParseError(no, "more than three fields");
    if (t[0] == t[1] || t[0] == t[2] || t[1] == t[2]) throw ParseError(no, "indices must be distinct");
    out.push_back(t);
  }
  return out;
}

void write_triplets(std::ostream& out, const std::vector<Triplet>& t) {
  for (const Triplet& c : t) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

Planted plant_triplets(std::size_t p, std::size_t dim, std::size_t count, double noise, std::uint64_t seed,
                       const std::string& layout) {
  if (p < 3) throw InvalidArgument("need at least 3 points");
  if (dim == 0) throw InvalidArgument("need dim >= 1");
  if (!(noise >= 0.0 && noise <= 1.0)) throw InvalidArgument("noise must be in [0, 1]");
  Rng rng(seed);
  Planted pl;
  pl.coords.assign(p, std::vector<double>(dim));
  if (layout == "grid") {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
    if (dim != 2 || side * side != p) throw InvalidArgument("grid layout needs dim 2 and a square number of points");
    for (std::size_t i = 0; i < p; ++i) pl.coords[i] = {static_cast<double>(i / side), static_cast<double>(i % side)};
  } else if (layout == "gaussian") {
    for (auto& c : pl.coords)
      for (double& v : c) v = rng.normal();
  } else {
    throw InvalidArgument("unknown layout '" + layout + "'");
  }
  const auto d2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t q = 0; q < dim; ++q) s += (pl.coords[a][q] - pl.coords[b][q]) * (pl.coords[a][q] - pl.coords[b][q]);
    return s;
  };
  pl.triplets.reserve(count);
  std::size_t attempts = 0;
  while (pl.triplets.size() < count) {
    if (++attempts > 100 * count + 1000) throw InvalidArgument("could not sample enough untied triplets");
    const std::size_t i = rng.index(p), j = rng.index(p), k = rng.index(p);
    if (i == j || i == k || j == k) continue;
    const double dij = d2(i, j), dik = d2(i, k);
    if (dij == dik) continue;
    Triplet t{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)};
    if (dij > dik) std::swap(t[1], t[2]);
    if (rng.uniform01() < noise) std::swap(t[1], t[2]);
    pl.triplets.push_back(t);
  }
  return pl;
}

std::pair<std::vector<Triplet>, std::vector<Triplet>> split_triplets(const std::vector<Triplet>& t, double frac,
                                                                     std::uint64_t seed) {
  if (!(frac >= 0.0 && frac <= 1.0)) throw InvalidArgument("split fraction must be in [0, 1]");
  std::vector<std::size_t> idx(t.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  const auto cut = static_cast<std::size_t>(std::llround(frac * static_cast<double>(t.size())));
  std::pair<std::vector<Triplet>, std::vector<Triplet>> out;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < cut ? out.first : out.second).push_back(t[idx[i]]);
  return out;
}

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string> kAlgoNames = {"fgd", "sfgd", "projgd", "svrg-fixed", "svrg-sbb0", "svrg-sbb"};

struct UsageError : Error {
  using Error::Error;
};

struct Common {
  std::string out;
  std::size_t seeds = 1;
  std::uint64_t seed_base = 0;
  std::size_t jobs = 1;
  std::size_t epochs = 0;
  std::string algos;
  double eta = 0, eta_fgd = 0, eta_sfgd = 0, eta_svrg = 0, eta_projgd = 0;
  CLI::Option *o_eta = nullptr, *o_eta_fgd = nullptr, *o_eta_sfgd = nullptr, *o_eta_svrg = nullptr,
              *o_eta_projgd = nullptr, *o_m = nullptr, *o_t0 = nullptr, *o_eps = nullptr;
  double eps = 0.02;
  std::size_t m = 0;
  double t0 = 0.0;
  std::size_t r = 0;
  std::size_t eval_every = 1;
  double threshold = 0.0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "output directory")->required();
  app->add_option("--seeds", c.seeds, "number of trial seeds")->check(CLI::PositiveNumber);
  app->add_option("--seed-base", c.seed_base, "first trial seed");
  app->add_option("--jobs", c.jobs, "concurrent trials (FACTORED_SDP_THREADS overrides)")->check(CLI::PositiveNumber);
  app->add_option("--epochs", c.epochs, "epochs per run")->check(CLI::PositiveNumber);
  app->add_option("--algos", c.algos, "comma list of fgd,sfgd,projgd,svrg-fixed,svrg-sbb0,svrg-sbb");
  c.o_eta = app->add_option("--eta", c.eta, "step size for every algorithm (SVRG BB/SBB: first-epoch step)");
  c.o_eta_fgd = app->add_option("--eta-fgd", c.eta_fgd, "FGD step size");
  c.o_eta_sfgd = app->add_option("--eta-sfgd", c.eta_sfgd, "SFGD initial step size");
  c.o_eta_svrg = app->add_option("--eta-svrg", c.eta_svrg, "SVRG fixed step / BB-SBB first step");
  c.o_eta_projgd = app->add_option("--eta-projgd", c.eta_projgd, "ProjGD step size");
  c.o_eps = app->add_option("--eps", c.eps, "SBB stabilization epsilon")->check(CLI::NonNegativeNumber);
  c.o_m = app->add_option("--m", c.m, "SVRG inner steps (default n)")->check(CLI::PositiveNumber);
  c.o_t0 = app->add_option("--t0", c.t0, "SFGD decay: eta_t = eta / (1 + t / t0)")->check(CLI::PositiveNumber);
  app->add_option("--eval-every", c.eval_every, "record every k-th epoch")->check(CLI::PositiveNumber);
  app->add_option("--threshold", c.threshold, "target for epochs-to-threshold");
}

std::vector<std::string> parse_algos(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string a;
  while (std::getline(ss, a, ',')) {
    if (std::find(kAlgoNames.begin(), kAlgoNames.end(), a) == kAlgoNames.end())
      throw UsageError("unknown algorithm '" + a + "'");
    if (std::find(out.begin(), out.end(), a) != out.end()) throw UsageError("algorithm '" + a + "' listed twice");
    out.push_back(a);
  }
  if (out.empty()) throw UsageError("no algorithms selected");
  return out;
}

struct StepDefaults {
  double fgd, sfgd, svrg, projgd, t0, eps;
};

double pick(const CLI::Option* specific, double v, const Common& c, double fallback) {
  if (specific->count()) return v;
  if (c.o_eta->count()) return c.eta;
  return fallback;
}

SolverConfig make_config(const std::string& algo, const Common& c, std::size_t n, const StepDefaults& d) {
  SolverConfig s;
  s.epochs = c.epochs;
  s.eval_every = c.eval_every;
  s.m = c.o_m->count() ? c.m : n;
  s.t0 = c.o_t0->count() ? c.t0 : d.t0;
  const double eta_svrg = pick(c.o_eta_svrg, c.eta_svrg, c, d.svrg);
  if (algo == "fgd") {
    s.algorithm = Algorithm::FGD;
    s.eta = pick(c.o_eta_fgd, c.eta_fgd, c, d.fgd);
  } else if (algo == "sfgd") {
    s.algorithm = Algorithm::SFGD;
    s.eta = pick(c.o_eta_sfgd, c.eta_sfgd, c, d.sfgd);
  } else if (algo == "projgd") {
    s.algorithm = Algorithm::ProjGD;
    s.eta = pick(c.o_eta_projgd, c.eta_projgd, c, d.projgd);
  } else {
    s.algorithm = Algorithm::SVRG;
    s.eta = eta_svrg;
    if (algo == "svrg-fixed") s.schedule = StepSchedule::fixed(eta_svrg);
    else if (algo == "svrg-sbb0") s.schedule = StepSchedule::sbb(0.0, s.m, eta_svrg);
    else s.schedule = StepSchedule::sbb(c.o_eps->count() ? c.eps : d.eps, s.m, eta_svrg);
  }
  if (!(s.eta > 0.0) || !std::isfinite(s.eta)) throw UsageError("step size for " + algo + " must be positive");
  return s;
}

std::size_t resolve_jobs(std::size_t flag) {
  if (const char* env = std::getenv("FACTORED_SDP_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
    throw UsageError("FACTORED_SDP_THREADS must be a positive integer");
  }
  return flag;
}

struct Trial {
  std::string algo;
  std::uint64_t seed;
};

struct TrialResult {
  std::vector<RunRow> rows;
  std::optional<std::size_t> diverged_at;
  std::string error;
};

// Runs trials on up to `jobs` threads; results come back in trial order.
std::vector<TrialResult> run_trials(const std::vector<Trial>& trials, std::size_t jobs,
                                    const std::function<RunRecord(const Trial&)>& body) {
  std::vector<TrialResult> results(trials.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      try {
        results[i].rows = body(trials[i]).rows;
      } catch (const DivergedError& d) {
        results[i].rows = d.partial.rows;
        results[i].diverged_at = d.epoch;
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(jobs, trials.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return results;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  return f;
}

// Value tracked for epochs-to-threshold.
using MetricFn = std::function<std::optional<double>(const RunRow&)>;

std::optional<std::size_t> epochs_to(const TrialResult& r, const MetricFn& metric, double threshold) {
  for (const RunRow& row : r.rows) {
    const auto v = metric(row);
    if (v && *v <= threshold) return row.epoch;
  }
  return std::nullopt;
}

// Median with unreached runs counted as +infinity.
std::optional<double> median_epochs(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  const double med = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  if (!std::isfinite(med)) return std::nullopt;
  return med;
}

struct Outputs {
  bool with_test;  // test_error column present
  const char* metric_name;
  MetricFn metric;
};

int write_results(const fs::path& dir, const std::vector<Trial>& trials, const std::vector<TrialResult>& res,
                  const std::vector<std::string>& algos, const Common& c, const Outputs& o, std::ostream& out,
                  std::ostream& err) {
  {
    std::ofstream f = open_out(dir / "curves.csv");
    f << "algorithm,seed,epoch,eta,f,error_X,error_U,sample_grads" << (o.with_test ? ",test_error" : "")
      << ",status\n";
    for (std::size_t i = 0; i < trials.size(); ++i) {
      for (const RunRow& row : res[i].rows) {
        f << trials[i].algo << ',' << trials[i].seed << ',' << row.epoch << ',' << fmt(row.eta) << ',' << fmt(row.f)
          << ',' << fmt(row.error_x) << ',' << fmt(row.error_u) << ',' << row.sample_grads;
        if (o.with_test) f << ',' << fmt(row.test_metric);
        f << ",ok\n";
      }
      const auto mark = [&](std::size_t epoch, const char* status) {
        f << trials[i].algo << ',' << trials[i].seed << ',' << epoch << ",,,,,," << (o.with_test ? "," : "") << status
          << '\n';
      };
      if (res[i].diverged_at) mark(*res[i].diverged_at, "diverged");
      if (!res[i].error.empty()) mark(res[i].rows.empty() ? 0 : res[i].rows.back().epoch + 1, "error");
    }
  }
  std::map<std::string, std::vector<double>> per_algo;
  {
    std::ofstream f = open_out(dir / "summary.csv");
    f << "algorithm,seed,epochs_to_threshold,final_epoch,final_f,final_" << o.metric_name << ",status\n";
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const auto e = epochs_to(res[i], o.metric, c.threshold);
      const RunRow* last = res[i].rows.empty() ? nullptr : &res[i].rows.back();
      const char* status = res[i].diverged_at ? "diverged" : (!res[i].error.empty() ? "error" : "ok");
      f << trials[i].algo << ',' << trials[i].seed << ',' << (e ? std::to_string(*e) : "") << ','
        << (last ? std::to_string(last->epoch) : "") << ',' << (last ? fmt(last->f) : "") << ','
        << (last ? fmt(o.metric(*last)) : "") << ',' << status << '\n';
      per_algo[trials[i].algo].push_back(e ? static_cast<double>(*e) : std::numeric_limits<double>::infinity());
    }
    for (const std::string& a : algos) f << a << ",median," << fmt(median_epochs(per_algo[a])) << ",,,,\n";
  }
  {
    std::ofstream f = open_out(dir / "plot.gp");
    const int col = o.with_test ? 9 : 6;
    f << "# gnuplot: " << o.metric_name << " against epoch, first seed of each algorithm\n"
      << "set datafile separator ','\nset logscale y\nset key outside\nset xlabel 'epoch'\nset ylabel '"
      << o.metric_name << "'\nalgos = \"";
    for (std::size_t i = 0; i < algos.size(); ++i) f << (i ? " " : "") << algos[i];
    f << "\"\nplot for [a in algos] 'curves.csv' skip 1 using 3:(strcol(1) eq a && $2 == " << c.seed_base
      << " ? $" << col << " : 1/0) with lines title a\n";
  }

  out << "algorithm  median epochs to " << o.metric_name << " <= " << fmt(c.threshold) << '\n';
  for (const std::string& a : algos) {
    const auto med = median_epochs(per_algo[a]);
    out << "  " << a << "  " << (med ? fmt(*med) : std::string("not reached")) << '\n';
  }
  bool diverged = false;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (res[i].diverged_at) {
      diverged = true;
      err << trials[i].algo << " seed " << trials[i].seed << ": diverged at epoch " << *res[i].diverged_at << '\n';
    }
    if (!res[i].error.empty()) err << trials[i].algo << " seed " << trials[i].seed << ": " << res[i].error << '\n';
  }
  for (const TrialResult& r : res)
    if (!r.error.empty()) return kExitError;
  return diverged ? kExitDiverged : kExitOk;
}

// Manifest: the argument list without --out, so a replay can target any directory.
void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    const json& resolved) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    kept.push_back(args[i]);
  }
  json j;
  j["tool"] = "factored_sdp";
  j["manifest_version"] = 1;
  j["command"] = command;
  j["args"] = kept;
  j["resolved"] = resolved;
  std::ofstream f = open_out(dir / "run.json");
  f << j.dump(2) << '\n';
}

std::vector<Trial> make_trials(const std::vector<std::string>& algos, const Common& c) {
  std::vector<Trial> t;
  for (const std::string& a : algos)
    for (std::size_t s = 0; s < c.seeds; ++s) t.push_back({a, c.seed_base + s});
  return t;
}

json common_json(const Common& c, const std::vector<std::string>& algos, std::size_t jobs) {
  return json{{"seeds", c.seeds},         {"seed_base", c.seed_base}, {"epochs", c.epochs},
              {"algos", algos},           {"eps", c.eps},             {"eval_every", c.eval_every},
              {"threshold", c.threshold}, {"jobs", jobs}};
}

// ---------------------------------------------------------------- sensing

struct SensingFlags {
  std::size_t p = 100, n = 0, r_star = 0, region_samples = 500;
  double ustar_scale = 0.0, radius = 0.0;
  std::uint64_t instance_seed = 0;
  CLI::Option *o_n = nullptr, *o_rstar = nullptr, *o_scale = nullptr, *o_radius = nullptr, *o_iseed = nullptr;
};

void add_sensing_flags(CLI::App* app, SensingFlags& s, Common& c) {
  app->add_option("--p", s.p, "matrix dimension")->check(CLI::PositiveNumber);
  app->add_option("--r", c.r, "factor rank")->check(CLI::PositiveNumber);
  s.o_rstar = app->add_option("--rstar", s.r_star, "rank of the planted optimum (default r)")->check(CLI::PositiveNumber);
  s.o_n = app->add_option("--n", s.n, "measurements (default 10p)")->check(CLI::PositiveNumber);
  s.o_scale = app->add_option("--ustar-scale", s.ustar_scale, "entry scale of U* (default sqrt(2/p))")
                  ->check(CLI::PositiveNumber);
  s.o_iseed = app->add_option("--instance-seed", s.instance_seed, "problem seed (default seed-base)");
  app->add_option("--region-samples", s.region_samples, "samples for the region suprema");
}

struct SensingSetup {
  SensingProblem prob;
  std::size_t r;
  std::optional<ConvergenceConstants> constants;
  std::string constants_error;
  double L_hat = 0, mu_hat = 0;
};

SensingSetup sensing_setup(SensingFlags& s, Common& c) {
  if (!s.o_n->count()) s.n = 10 * s.p;
  if (!s.o_rstar->count()) s.r_star = c.r;
  if (!s.o_scale->count()) s.ustar_scale = std::sqrt(2.0 / static_cast<double>(s.p));
  if (!s.o_iseed->count()) s.instance_seed = c.seed_base;
  if (c.r > s.p || s.r_star > s.p) throw UsageError("ranks must not exceed p");
  SensingSetup st{sensing_generate(s.p, s.r_star, s.n, s.instance_seed, s.ustar_scale), c.r, std::nullopt, {}};
  try {
    st.L_hat = sensing_lipschitz(st.prob, 300, derive_seed(s.instance_seed, 11));
    // mu from rank-r probe pairs around the optimum.
    const Truncation tr = truncated_approx(*st.prob.xstar, c.r);
    const double sr = singular_values(tr.factor)[c.r - 1];
    Rng rng(derive_seed(s.instance_seed, 12));
    std::vector<std::pair<SymMatrix, SymMatrix>> pairs;
    for (int q = 0; q < 40; ++q) {
      Factor a = tr.factor, b = tr.factor;
      for (std::size_t e = 0; e < a.size(); ++e) a.data()[e] += 0.3 * sr * rng.normal() / std::sqrt(double(a.size()));
      for (std::size_t e = 0; e < b.size(); ++e) b.data()[e] += 0.3 * sr * rng.normal() / std::sqrt(double(b.size()));
      pairs.emplace_back(gram(a), gram(b));
    }
    st.mu_hat = estimate_smoothness(st.prob, pairs).mu_hat;
    st.constants = constants_for(st.prob, st.L_hat, std::min(st.mu_hat, st.L_hat), *st.prob.xstar, c.r,
                                 s.region_samples, derive_seed(s.instance_seed, 13));
  } catch (const Error& e) {
    st.constants_error = e.what();
  }
  return st;
}

void write_constants(const fs::path& dir, const SensingSetup& st) {
  std::ofstream f = open_out(dir / "constants.csv");
  if (st.constants) {
    write_constants_csv(f, *st.constants);
    f << "L_source,power_iteration\nmu_source,rank_r_probes\n";
  } else {
    f << "name,value\nerror," << '"' << st.constants_error << '"' << '\n';
  }
}

int cmd_sensing(const std::vector<std::string>& args, Common& c, SensingFlags& s, std::ostream& out,
                std::ostream& err) {
  const std::vector<std::string> algos = parse_algos(c.algos);
  const std::size_t jobs = resolve_jobs(c.jobs);
  const SensingSetup st = sensing_setup(s, c);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_constants(dir, st);

  const Truncation ref = truncated_approx(*st.prob.xstar, c.r);
  const double radius = s.o_radius->count() ? s.radius
                        : st.constants && st.constants->gamma_u
                            ? 0.5 * std::sqrt(*st.constants->gamma_u)
                            : 0.1 * frob_norm(ref.factor);
  const double n = static_cast<double>(s.n);
  const StepDefaults d{0.2, 2.0 / n, 0.8 / n, 0.25, 20.0 * n, c.eps};
  for (const std::string& a : algos) make_config(a, c, s.n, d);  // validate before running

  const std::vector<Trial> trials = make_trials(algos, c);
  const auto res = run_trials(trials, jobs, [&](const Trial& t) {
    SolverConfig cfg = make_config(t.algo, c, s.n, d);
    cfg.seed = derive_seed(t.seed, 2);
    cfg.x_ref = *st.prob.xstar;
    cfg.u_ref = ref.factor;
    return run(st.prob, cfg, init_perturbed_optimum(ref.factor, radius, derive_seed(t.seed, 1)));
  });

  json resolved = common_json(c, algos, jobs);
  resolved.update({{"p", s.p},
                   {"n", s.n},
                   {"r", c.r},
                   {"rstar", s.r_star},
                   {"ustar_scale", s.ustar_scale},
                   {"instance_seed", s.instance_seed},
                   {"radius", radius},
                   {"region_samples", s.region_samples}});
  write_manifest(dir, "sensing", args, resolved);
  const Outputs o{false, "error_X", [](const RunRow& r) { return r.error_x; }};
  return write_results(dir, trials, res, algos, c, o, out, err);
}

int cmd_constants(const std::vector<std::string>& args, Common& c, SensingFlags& s, std::ostream& out) {
  const SensingSetup st = sensing_setup(s, c);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_constants(dir, st);
  json resolved{{"p", s.p},
                {"n", s.n},
                {"r", c.r},
                {"rstar", s.r_star},
                {"ustar_scale", s.ustar_scale},
                {"instance_seed", s.instance_seed},
                {"region_samples", s.region_samples}};
  write_manifest(dir, "constants", args, resolved);
  if (st.constants) {
    write_constants_csv(out, *st.constants);
  } else {
    out << "constants unavailable: " << st.constants_error << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- embed

struct EmbedFlags {
  std::string triplets;
  std::size_t p = 0;
  double lambda = 1e-2, split = 0.8, init_scale = 1.0;
  CLI::Option* o_p = nullptr;
};

int cmd_embed(const std::vector<std::string>& args, Common& c, EmbedFlags& e, std::ostream& out,
              std::ostream& err) {
  const std::vector<std::string> algos = parse_algos(c.algos);
  const std::size_t jobs = resolve_jobs(c.jobs);
  std::ifstream in(e.triplets);
  if (!in) throw UsageError("cannot read triplet file " + e.triplets);
  std::vector<Triplet> all;
  try {
    all = parse_triplets(in);
  } catch (const ParseError& pe) {
    throw UsageError(e.triplets + ":" + pe.what());
  }
  if (all.empty()) throw UsageError("triplet file has no triplets");
  std::uint32_t max_index = 0;
  for (const Triplet& t : all) max_index = std::max({max_index, t[0], t[1], t[2]});
  const std::size_t p = e.o_p->count() ? e.p : static_cast<std::size_t>(max_index) + 1;
  if (max_index >= p) throw UsageError("triplet index " + std::to_string(max_index) + " >= p = " + std::to_string(p));
  if (c.r > p) throw UsageError("dim must not exceed p");
  if (!(e.split > 0.0 && e.split <= 1.0)) throw UsageError("--split must be in (0, 1]");
  const bool with_test = e.split < 1.0;

  // Splits and the FGD default step depend only on the trial seed.
  struct Split {
    std::vector<Triplet> train, test;
    double L;
  };
  std::map<std::uint64_t, Split> splits;
  for (std::size_t s = 0; s < c.seeds; ++s) {
    const std::uint64_t seed = c.seed_base + s;
    auto [train, test] = split_triplets(all, e.split, derive_seed(seed, 0));
    if (train.empty()) throw UsageError("training set is empty");
    if (with_test && test.empty()) throw UsageError("test set is empty; use --split 1.0 for none");
    const double L = triplet_lipschitz(TripletProblem(p, train, e.lambda));
    splits.emplace(seed, Split{std::move(train), std::move(test), L});
  }
  const double L0 = splits.begin()->second.L;
  const std::size_t n0 = splits.begin()->second.train.size();
  const StepDefaults d0{0.9 / L0, 0.2, 0.3, 0.9 / L0, static_cast<double>(n0), 0.02 * L0};
  for (const std::string& a : algos) make_config(a, c, n0, d0);

  const std::vector<Trial> trials = make_trials(algos, c);
  const auto res = run_trials(trials, jobs, [&](const Trial& t) {
    const Split& sp = splits.at(t.seed);
    const TripletProblem prob(p, sp.train, e.lambda);
    const StepDefaults d{0.9 / sp.L, 0.2, 0.3, 0.9 / sp.L, static_cast<double>(sp.train.size()), 0.02 * sp.L};
    SolverConfig cfg = make_config(t.algo, c, sp.train.size(), d);
    cfg.seed = derive_seed(t.seed, 2);
    if (with_test) cfg.test_metric = [&sp](const SymMatrix& x) { return test_error(x, sp.test); };
    return run(prob, cfg, init_scheme3(p, c.r, e.init_scale, derive_seed(t.seed, 1)));
  });

  const fs::path dir(c.out);
  fs::create_directories(dir);
  json resolved = common_json(c, algos, jobs);
  resolved.update({{"triplets", e.triplets},
                   {"count", all.size()},
                   {"p", p},
                   {"dim", c.r},
                   {"lambda", e.lambda},
                   {"split", e.split},
                   {"init_scale", e.init_scale},
                   {"L_bound_first_split", L0},
                   {"eps", c.o_eps->count() ? c.eps : 0.02 * L0}});
  write_manifest(dir, "embed", args, resolved);
  const Outputs o = with_test ? Outputs{true, "test_error", [](const RunRow& r) { return r.test_metric; }}
                              : Outputs{false, "f", [](const RunRow& r) { return std::optional(r.f); }};
  return write_results(dir, trials, res, algos, c, o, out, err);
}

// ---------------------------------------------------------------- gen-triplets

struct GenFlags {
  std::string out, layout = "gaussian";
  std::size_t p = 64, dim = 2, count = 4000;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenFlags& g, std::ostream& out) {
  const Planted pl = plant_triplets(g.p, g.dim, g.count, g.noise, g.seed, g.layout);
  {
    std::ofstream f = open_out(g.out);
    f << "# planted " << g.layout << " embedding: p=" << g.p << " dim=" << g.dim << " count=" << g.count
      << " noise=" << fmt(g.noise) << " seed=" << g.seed << '\n';
    write_triplets(f, pl.triplets);
  }
  std::ofstream f = open_out(g.out + ".coords");
  for (const auto& c : pl.coords) {
    for (std::size_t q = 0; q < c.size(); ++q) f << (q ? " " : "") << fmt(c[q]);
    f << '\n';
  }
  out << "wrote " << pl.triplets.size() << " triplets to " << g.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- replay

int cmd_replay(const std::string& manifest, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  std::ifstream f(manifest);
  if (!f) throw UsageError("cannot read manifest " + manifest);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw UsageError("manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!j.contains("command") || !j.contains("args")) throw UsageError("manifest lacks command/args");
  std::vector<std::string> args{j["command"].get<std::string>()};
  for (const auto& a : j["args"]) args.push_back(a.get<std::string>());
  args.push_back("--out");
  args.push_back(out_dir.empty() ? fs::path(manifest).parent_path().string() : out_dir);
  return run(args, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic SDP solvers on the factorization X = U U^T", "factored_sdp"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common cs, ce, cc;
  cs.epochs = 200;
  cs.r = 5;
  cs.threshold = 3e-6;
  cs.algos = "fgd,sfgd,svrg-fixed,svrg-sbb0,svrg-sbb";
  ce.epochs = 100;
  ce.r = 2;
  ce.threshold = 0.1;
  ce.algos = "fgd,sfgd,svrg-sbb0,svrg-sbb";
  cc.r = 5;

  SensingFlags ss, sc;
  CLI::App* sens = app.add_subcommand("sensing", "matrix sensing experiment");
  add_common(sens, cs);
  add_sensing_flags(sens, ss, cs);
  ss.o_radius = sens->add_option("--radius", ss.radius, "initial distance to the optimum factor")
                    ->check(CLI::NonNegativeNumber);

  EmbedFlags ef;
  CLI::App* emb = app.add_subcommand("embed", "triplet embedding experiment");
  add_common(emb, ce);
  emb->add_option("--triplets", ef.triplets, "triplet file")->required();
  ef.o_p = emb->add_option("--p", ef.p, "number of items (default max index + 1)")->check(CLI::PositiveNumber);
  emb->add_option("--dim,--r", ce.r, "embedding dimension")->check(CLI::PositiveNumber);
  emb->add_option("--lambda", ef.lambda, "trace regularization")->check(CLI::NonNegativeNumber);
  emb->add_option("--split", ef.split, "training fraction");
  emb->add_option("--init-scale", ef.init_scale, "random init scale")->check(CLI::PositiveNumber);

  GenFlags gf;
  CLI::App* gen = app.add_subcommand("gen-triplets", "write a planted triplet file");
  gen->add_option("--out", gf.out, "triplet file (coordinates go to <out>.coords)")->required();
  gen->add_option("--p", gf.p, "points")->check(CLI::PositiveNumber);
  gen->add_option("--dim", gf.dim, "dimension")->check(CLI::PositiveNumber);
  gen->add_option("--count", gf.count, "triplets");
  gen->add_option("--noise", gf.noise, "flip probability")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", gf.seed, "seed");
  gen->add_option("--layout", gf.layout, "gaussian or grid")->check(CLI::IsMember({"gaussian", "grid"}));

  CLI::App* con = app.add_subcommand("constants", "convergence constants of a sensing instance");
  con->add_option("--out", cc.out, "output directory")->required();
  con->add_option("--seed-base", cc.seed_base, "instance seed");
  add_sensing_flags(con, sc, cc);

  std::string manifest, replay_out;
  CLI::App* rep = app.add_subcommand("replay", "re-run from a run.json manifest");
  rep->add_option("manifest", manifest, "run.json")->required();
  rep->add_option("--out", replay_out, "output directory (default: the manifest's)");

  std::vector<const char*> argv{"factored_sdp"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  const std::vector<std::string> rest(args.begin() + 1, args.end());
  try {
    if (sens->parsed()) return cmd_sensing(rest, cs, ss, out, err);
    if (emb->parsed()) return cmd_embed(rest, ce, ef, out, err);
    if (gen->parsed()) return cmd_gen(gf, out);
    if (con->parsed()) return cmd_constants(rest, cc, sc, out);
    if (rep->parsed()) return cmd_replay(manifest, replay_out, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace fsdp::cli
