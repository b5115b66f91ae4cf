#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "critlab/critpoints.hpp"
#include "critlab/gauss.hpp"
#include "critlab/intensity.hpp"
#include "critlab/json_util.hpp"
#include "critlab/kernel.hpp"
#include "critlab/moments.hpp"
#include "critlab/oned.hpp"
#include "critlab/parallel.hpp"
#include "critlab/simulate.hpp"

#ifndef CRITLAB_VERSION
#define CRITLAB_VERSION "dev"
#endif

using namespace critlab;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerify = 3;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double parse_height(const std::string& text, const char* name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && !std::isnan(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::Config, std::string("--") + name + " must be a number or +-inf, got '" + text + "'");
}

struct KernelOptions {
  std::string name = "plane-wave";
  std::string file;
  double length_scale = 1.0;
  double amplitude = 1.0;
  bool raw = false;

  void attach(CLI::App* app) {
    app->add_option("--kernel", name, "plane-wave | bargmann-fock")->capture_default_str();
    app->add_option("--kernel-file", file, "JSON kernel config (kind, length_scale, amplitude, profile_series)");
    app->add_option("--length-scale", length_scale)->capture_default_str();
    app->add_option("--amplitude", amplitude)->capture_default_str();
    app->add_flag("--raw", raw, "skip normalization");
  }

  KernelModel build() const {
    KernelModel model;
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw Error(ErrorKind::Config, "cannot read kernel file " + file);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("kernel file: ") + e.what());
      }
      model = KernelModel::from_json(j);
    } else {
      json j{{"kind", name}, {"length_scale", length_scale}, {"amplitude", amplitude}};
      if (name == "user-radial") throw Error(ErrorKind::Config, "user-radial kernels need --kernel-file");
      model = KernelModel::from_json(j);
    }
    return raw ? model : normalize(model);
  }
};

struct Context {
  KernelOptions kernel;
  int threads = default_threads();
  std::optional<std::uint64_t> seed;
  std::string csv;
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  bool stochastic = false;
  std::function<int(json& config, json& outputs)> run;
};

void write_csv_file(const std::string& path, const std::function<void(std::ostream&)>& writer) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path);
  writer(out);
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical points of Gaussian random fields in a height window"};
  app.require_subcommand(1);
  Context ctx;
  std::vector<Command> commands;

  auto common = [&](CLI::App* sub, bool stochastic, bool kernel = true) {
    if (kernel) ctx.kernel.attach(sub);
    sub->add_option("--threads", ctx.threads, "worker threads (default CRITLAB_THREADS or 1)")->check(CLI::PositiveNumber);
    sub->add_option("--csv", ctx.csv, "write the table to PATH");
    if (stochastic) sub->add_option("--seed", ctx.seed, "master seed")->required();
  };

  // kernel check
  auto* kernel_app = app.add_subcommand("kernel", "kernel diagnostics");
  kernel_app->require_subcommand(1);
  {
    auto* sub = kernel_app->add_subcommand("check", "spectral conditions and margins");
    common(sub, false);
    static int v_grid = 360;
    static double far_radius = 50;
    sub->add_option("--v-grid", v_grid)->capture_default_str();
    sub->add_option("--far-radius", far_radius)->capture_default_str();
    commands.push_back({"kernel check", sub, false, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          config["v_grid"] = v_grid;
                          config["far_radius"] = far_radius;
                          const auto rep = check_conditions(model, v_grid, far_radius);
                          outputs["conditions"] = rep.to_json();
                          outputs["pass"] = rep.pass();
                          return kExitOk;
                        }});
  }

  // sigma dump
  auto* sigma_app = app.add_subcommand("sigma", "covariance blocks for a pair of points");
  sigma_app->require_subcommand(1);
  {
    auto* sub = sigma_app->add_subcommand("dump", "all Sigma blocks at x = 0, y = (r, 0)");
    common(sub, false);
    static double r = 1;
    static bool quad_precision = false;
    sub->add_option("--r", r, "separation")->required();
    sub->add_flag("--quad", quad_precision, "assemble in quad precision");
    commands.push_back({"sigma dump", sub, false, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          config["r"] = r;
                          config["quad"] = quad_precision;
                          const Point x(0, 0), y(r, 0);
                          const auto set = quad_precision ? to_double(assemble_sigma<quad>(model, x, y))
                                                          : assemble_sigma<double>(model, x, y);
                          outputs["sigma"] = to_json(set);
                          return kExitOk;
                        }});
  }

  // lemma check
  auto* lemma_app = app.add_subcommand("lemma", "closed-form lemma suites");
  lemma_app->require_subcommand(1);
  {
    auto* sub = lemma_app->add_subcommand("check", "matrix and determinant-bound property suites");
    common(sub, true, false);
    static int trials = 10000;
    static int sup_trials = 1000;
    sub->add_option("--trials", trials, "matrix suite draws")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--sup-trials", sup_trials, "maximizer suite draws")->capture_default_str()->check(CLI::PositiveNumber);
    commands.push_back({"lemma check", sub, true, [&](json& config, json& outputs) {
                          config["trials"] = trials;
                          config["sup_trials"] = sup_trials;
                          auto matrix = matrix_lemma_suite(trials, *ctx.seed).to_json();
                          matrix.erase("runtime_s");
                          const auto bound = det_bound_suite(sup_trials, *ctx.seed);
                          outputs["matrix"] = matrix;
                          outputs["det_bound"] = bound.to_json();
                          const bool pass = matrix["pass"].get<bool>() && bound.pass;
                          outputs["pass"] = pass;
                          return pass ? kExitOk : kExitNumerical;
                        }});
  }

  // intensity eval
  auto* intensity_app = app.add_subcommand("intensity", "Kac-Rice intensities");
  intensity_app->require_subcommand(1);
  {
    auto* sub = intensity_app->add_subcommand("eval", "one of I1..I5");
    common(sub, true);
    static int which = 3;
    static double r = 1, s = 0, t = 0;
    static std::int64_t samples = 200000;
    sub->add_option("--which", which, "1..5")->required()->check(CLI::Range(1, 5));
    sub->add_option("--r", r, "separation (I1, I2, I4)")->capture_default_str();
    sub->add_option("--s", s, "height (I1, I2, I3)")->capture_default_str();
    sub->add_option("--t", t, "second height (I1)")->capture_default_str();
    sub->add_option("--samples", samples)->capture_default_str()->check(CLI::PositiveNumber);
    commands.push_back({"intensity eval", sub, true, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          config.update({{"which", which}, {"r", r}, {"s", s}, {"t", t}, {"samples", samples}});
                          const McConfig mc{samples, *ctx.seed, 10000, ctx.threads};
                          IntensityValue v;
                          switch (which) {
                            case 1: v = intensity_I1(model, r, s, t, mc); break;
                            case 2: v = intensity_I2(model, r, s, mc); break;
                            case 3: v = intensity_I3(model, s, mc); break;
                            case 4: v = intensity_I4(model, r, mc); break;
                            default: v = intensity_I5(model, mc); break;
                          }
                          outputs = v.to_json();
                          return kExitOk;
                        }});
  }

  // bound predict
  auto* bound_app = app.add_subcommand("bound", "second-moment bound terms");
  bound_app->require_subcommand(1);
  {
    auto* sub = bound_app->add_subcommand("predict", "suprema of I1..I4 and the resulting bound");
    common(sub, true);
    static double R = 10;
    static std::string a = "-0.5", b = "0.5";
    static double delta = 0;
    static std::int64_t samples = 20000;
    sub->add_option("--R", R)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--a", a)->capture_default_str();
    sub->add_option("--b", b)->capture_default_str();
    sub->add_option("--delta", delta, "near/off-diagonal split, 0 for the default")->capture_default_str();
    sub->add_option("--samples", samples, "MC draws per grid point")->capture_default_str()->check(CLI::PositiveNumber);
    commands.push_back({"bound predict", sub, true, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          const double lo = parse_height(a, "a"), hi = parse_height(b, "b");
                          config.update({{"R", R}, {"a", json_number(lo)}, {"b", json_number(hi)}, {"delta", delta},
                                         {"samples", samples}});
                          BoundConfig cfg;
                          cfg.delta = delta;
                          cfg.mc = McConfig{samples, *ctx.seed, 10000, ctx.threads};
                          outputs = bound_predict(model, R, lo, hi, cfg).to_json();
                          return kExitOk;
                        }});
  }

  // simulate count
  auto* simulate_app = app.add_subcommand("simulate", "single field realizations");
  simulate_app->require_subcommand(1);
  {
    auto* sub = simulate_app->add_subcommand("count", "critical points of one sampled field");
    common(sub, true);
    static double R = 10;
    static std::string a = "-inf", b = "inf";
    static int M = 500, dim = 2;
    static DetectorConfig det;
    sub->add_option("--R", R)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--a", a)->capture_default_str();
    sub->add_option("--b", b)->capture_default_str();
    sub->add_option("--M", M, "waves")->capture_default_str();
    sub->add_option("--dim", dim)->capture_default_str()->check(CLI::IsMember({1, 2}));
    sub->add_option("--grid-h", det.grid_h)->capture_default_str();
    sub->add_flag("--exhaustive", det.exhaustive, "seed Newton from every cell");
    commands.push_back({"simulate count", sub, true, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          const double lo = parse_height(a, "a"), hi = parse_height(b, "b");
                          config.update({{"R", R}, {"a", json_number(lo)}, {"b", json_number(hi)}, {"M", M}, {"dim", dim}});
                          if (dim == 1) {
                            Detector1dConfig d1;
                            d1.grid_h = det.grid_h;
                            config["detector"] = d1.to_json();
                            const auto set = find_critical_points_1d(sample_field_1d(model, M, *ctx.seed), R, d1);
                            outputs["total"] = set.points.size();
                            outputs["count"] = count_in_window(set, lo, hi);
                            outputs["unresolved"] = set.unresolved;
                            if (!ctx.csv.empty()) {
                              write_csv_file(ctx.csv, [&](std::ostream& os) {
                                os << "x,height,curvature\n";
                                os.precision(17);
                                for (const auto& p : set.points) os << p.x << ',' << p.height << ',' << p.curvature << '\n';
                              });
                            }
                            return set.unresolved > 0 ? kExitNumerical : kExitOk;
                          }
                          config["detector"] = det.to_json();
                          const auto set = find_critical_points(sample_field(model, M, *ctx.seed), R, det);
                          std::map<std::string, int> by_type;
                          for (const auto& p : set.points) ++by_type[to_string(p.type)];
                          outputs["total"] = set.points.size();
                          outputs["count"] = count_in_window(set, lo, hi);
                          outputs["by_type"] = by_type;
                          outputs["diagnostics"] = set.diagnostics.to_json();
                          if (!ctx.csv.empty()) write_csv_file(ctx.csv, [&](std::ostream& os) { write_csv(set, os); });
                          return set.diagnostics.low_confidence ? kExitNumerical : kExitOk;
                        }});
  }

  // shared by moments estimate and verify first-moment
  struct MomentArgs {
    double R = 10;
    std::string a = "-0.5", b = "0.5";
    int reps = 400, M = 500, dim = 2;
    double grid_h = 0.3;
    void attach(CLI::App* sub) {
      sub->add_option("--R", R)->capture_default_str()->check(CLI::PositiveNumber);
      sub->add_option("--a", a)->capture_default_str();
      sub->add_option("--b", b)->capture_default_str();
      sub->add_option("--reps", reps)->capture_default_str();
      sub->add_option("--M", M, "waves")->capture_default_str();
      sub->add_option("--dim", dim)->capture_default_str()->check(CLI::IsMember({1, 2}));
      sub->add_option("--grid-h", grid_h)->capture_default_str();
    }
    StudyConfig study(int threads) const {
      StudyConfig cfg;
      cfg.M = M;
      cfg.threads = threads;
      cfg.detector.grid_h = grid_h;
      return cfg;
    }
    void echo(json& config, double lo, double hi) const {
      config.update({{"R", R}, {"a", json_number(lo)}, {"b", json_number(hi)}, {"reps", reps}, {"M", M}, {"dim", dim},
                     {"grid_h", grid_h}});
    }
  };

  auto* moments_app = app.add_subcommand("moments", "moment estimation");
  moments_app->require_subcommand(1);
  {
    auto* sub = moments_app->add_subcommand("estimate", "E N, E N^2 and tail probabilities over replications");
    common(sub, true);
    static MomentArgs args;
    args.attach(sub);
    commands.push_back({"moments estimate", sub, true, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          const double lo = parse_height(args.a, "a"), hi = parse_height(args.b, "b");
                          args.echo(config, lo, hi);
                          const auto cfg = args.study(ctx.threads);
                          const auto rep = args.dim == 1
                                               ? estimate_moments_1d(model, args.R, lo, hi, args.reps, *ctx.seed, cfg)
                                               : estimate_moments(model, args.R, lo, hi, args.reps, *ctx.seed, cfg);
                          outputs = rep.to_json();
                          return rep.flagged ? kExitNumerical : kExitOk;
                        }});
  }

  auto* verify_app = app.add_subcommand("verify", "acceptance checks");
  verify_app->require_subcommand(1);
  {
    auto* sub = verify_app->add_subcommand("first-moment", "empirical mean count against Kac-Rice");
    common(sub, true);
    static MomentArgs args;
    static std::int64_t mc_samples = 200000;
    args.attach(sub);
    sub->add_option("--mc-samples", mc_samples)->capture_default_str()->check(CLI::PositiveNumber);
    commands.push_back({"verify first-moment", sub, true, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          const double lo = parse_height(args.a, "a"), hi = parse_height(args.b, "b");
                          args.echo(config, lo, hi);
                          config["mc_samples"] = mc_samples;
                          const auto cfg = args.study(ctx.threads);
                          const auto rep =
                              args.dim == 1 ? verify_first_moment_1d(model, args.R, lo, hi, args.reps, *ctx.seed, cfg)
                                            : verify_first_moment(model, args.R, lo, hi, args.reps, *ctx.seed, cfg,
                                                                  mc_samples);
                          outputs = rep.to_json();
                          if (rep.empirical.flagged) return kExitNumerical;
                          return rep.pass ? kExitOk : kExitVerify;
                        }});
  }
  for (int dim : {2, 1}) {
    const std::string name = dim == 2 ? "bound" : "bound-1d";
    auto* sub = verify_app->add_subcommand(name, "second-moment scaling study");
    common(sub, true);
    struct BoundArgs {
      std::vector<double> R_list, lambda_list{0.02, 0.1, 0.5, 2};
      int reps = 400, M = 500;
      double center = 0, grid_h = 0.3;
    };
    static BoundArgs args2, args1;
    auto& args = dim == 2 ? args2 : args1;
    args.R_list = dim == 2 ? std::vector<double>{5, 10, 20} : std::vector<double>{20, 40, 80};
    sub->add_option("--R-list", args.R_list)->capture_default_str()->delimiter(',');
    sub->add_option("--lambda-list", args.lambda_list)->capture_default_str()->delimiter(',');
    sub->add_option("--reps", args.reps)->capture_default_str();
    sub->add_option("--M", args.M, "waves")->capture_default_str();
    sub->add_option("--center", args.center, "window centre")->capture_default_str();
    sub->add_option("--grid-h", args.grid_h)->capture_default_str();
    commands.push_back({"verify " + name, sub, true, [&, dim](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          config.update({{"R_list", args.R_list}, {"lambda_list", args.lambda_list}, {"reps", args.reps},
                                         {"M", args.M}, {"center", args.center}, {"grid_h", args.grid_h}});
                          StudyConfig cfg;
                          cfg.M = args.M;
                          cfg.center = args.center;
                          cfg.threads = ctx.threads;
                          cfg.detector.grid_h = args.grid_h;
                          const auto study =
                              dim == 2 ? verify_second_moment_bound(model, args.R_list, args.lambda_list, args.reps,
                                                                    *ctx.seed, cfg)
                                       : verify_bound_1d(model, args.R_list, args.lambda_list, args.reps, *ctx.seed, cfg);
                          outputs = study.to_json();
                          if (args.R_list.size() >= 3) outputs["scaling_fit"] = scaling_fit(study).to_json();
                          if (!ctx.csv.empty()) {
                            write_csv_file(ctx.csv, [&](std::ostream& os) { study.write_csv(os); });
                            outputs["csv"] = ctx.csv;
                          }
                          if (study.flagged) return kExitNumerical;
                          return study.pass ? kExitOk : kExitVerify;
                        }});
  }

  // asymptotics
  {
    auto* sub = app.add_subcommand("asymptotics", "near-diagonal limits of det Sigma_4 / r^4 and sigma_1^2");
    common(sub, false);
    static std::vector<double> r_list = log_spaced(1e-1, 1e-3, 7);
    sub->add_option("--r-list", r_list, "decreasing separations")->delimiter(',');
    commands.push_back({"asymptotics", sub, false, [&](json& config, json& outputs) {
                          const auto model = ctx.kernel.build();
                          config["r_list"] = r_list;
                          const auto rep = near_diagonal_asymptotics(model, r_list);
                          outputs = rep.to_json();
                          if (!ctx.csv.empty()) {
                            write_csv_file(ctx.csv, [&](std::ostream& os) {
                              os << "r,det4_over_r4,n_over_r2,sigma1_sq,flagged\n";
                              os.precision(17);
                              for (const auto& row : rep.rows)
                                os << row.r << ',' << row.det4_over_r4 << ',' << row.n_over_r2 << ','
                                   << row.sigma1_sq << ',' << (row.flagged ? 1 : 0) << '\n';
                            });
                          }
                          return kExitOk;
                        }});
  }

  json record{{"command", nullptr}, {"version", CRITLAB_VERSION}};
  auto emit = [&](int code) {
    std::cout << record.dump(2) << '\n';
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string argv_text;
    for (int i = 1; i < argc; ++i) argv_text += (i > 1 ? " " : "") + std::string(argv[i]);
    record["argv"] = argv_text;
    record["error"] = e.what();
    std::cerr << "error: " << e.what() << '\n';
    return emit(kExitConfig);
  }

  const Command* chosen = nullptr;
  for (const auto& c : commands)
    if (c.app->parsed()) chosen = &c;
  if (!chosen) {
    record["error"] = "no command";
    return emit(kExitConfig);
  }

  json config;
  if (chosen->name != "lemma check") config["kernel"] = json::object();
  config["threads"] = ctx.threads;
  if (!ctx.csv.empty()) config["csv"] = ctx.csv;
  record["command"] = chosen->name;
  record["seed"] = ctx.seed ? json(*ctx.seed) : json(nullptr);

  const auto start = std::chrono::steady_clock::now();
  int code = kExitOk;
  json outputs = json::object();
  try {
    if (config.contains("kernel")) config["kernel"] = ctx.kernel.build().to_json();
    code = chosen->run(config, outputs);
  } catch (const Error& e) {
    record["error"] = e.what();
    std::cerr << "error: " << e.what() << '\n';
    const bool numerical = e.kind() == ErrorKind::Degenerate || e.kind() == ErrorKind::Numerical;
    code = numerical ? kExitNumerical : kExitConfig;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (chosen->stochastic) config["seed"] = *ctx.seed;
  record["config"] = config;
  record["config_hash"] = [&] {
    std::ostringstream os;
    os << std::hex << fnv1a(config.dump());
    return os.str();
  }();
  record["outputs"] = outputs;
  record["exit_code"] = code;
  std::cerr << chosen->name << ": " << wall << " s wall\n";
  return emit(code);
}
