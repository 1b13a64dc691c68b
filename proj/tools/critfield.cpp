// critfield: reproducible experiment driver.
//
//   critfield <command> [--config FILE] [key=value ...]
//
// Commands: criteria, simulate, sojourn, construct, cover, hit.
// Flags given as key=value override the config file. Every run writes
// manifest.json (config echo, content hash, versions, wall time) and its
// CSV/JSON artifacts under the output directory.
//
// Exit codes: 0 success, 2 domain error, 3 numerical error,
// 4 inconclusive result under strict=1.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "critfield/cli_config.hpp"
#include "critfield/critfield.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace critfield;

namespace {

struct RunContext {
  Config cfg;
  std::string command;
  fs::path outdir;
  uint64_t seed = 1;
  bool strict = false;
  bool inconclusive = false;
};

FieldParams read_params(const Config& cfg) {
  FieldParams p;
  p.N = (int)cfg.get_int("N");
  p.d = (int)cfg.get_int("d");
  cfg.read_H("H", p);
  p.gamma = cfg.get_double("gamma");
  p.delta0 = cfg.get_double_or("delta0", 1.0);
  p.validate();
  return p;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    const auto caret = tok.find("2^");
    if (caret == 0) {
      out.push_back(std::pow(2.0, std::stod(tok.substr(2))));
    } else {
      out.push_back(std::stod(tok));
    }
  }
  if (out.empty()) throw domain_error("empty numeric list");
  return out;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw domain_error("cannot write " + path.string());
  f << body;
}

std::string csv_row(std::initializer_list<double> vals) {
  std::string row;
  bool first = true;
  for (double v : vals) {
    if (!first) row += ",";
    row += format_double(v);
    first = false;
  }
  row += "\n";
  return row;
}

void write_manifest(const RunContext& ctx, double wall_seconds, json extra = {}) {
  json m;
  m["command"] = ctx.command;
  json echo;
  for (const auto& k : ctx.cfg.keys()) echo[k] = ctx.cfg.get_or(k, "");
  m["config"] = echo;
  m["config_hash"] = git_blob_hash(ctx.cfg.emit());
  m["version"] = kVersion;
  m["seed"] = ctx.seed;
  m["wall_time_s"] = wall_seconds;
  if (!extra.is_null() && !extra.empty()) m["results"] = extra;
  write_file(ctx.outdir / "manifest.json", m.dump(2) + "\n");
}

// ------------------------------- criteria ----------------------------------

json cmd_criteria(RunContext& ctx) {
  FieldParams p = read_params(ctx.cfg);
  const double r_min = ctx.cfg.get_double_or("r_min", 1e-6);
  PolarityVerdict v = classify_polarity(p);
  IntegralCriterion ic = integral_criterion(p, r_min);
  std::string verdict = to_string(v.regime);
  verdict += v.points_polar ? ", points polar" : ", points NOT polar";
  verdict += v.local_time_exists ? ", local time exists" : ", local time non-existent";
  if (v.regime == Regime::Critical && p.gamma_case() == FieldParams::GammaCase::AtBoundary) {
    verdict += " boundary case gamma=1/d";
  }
  std::cout << verdict << "\n";
  std::cout << "integral of r^{N-1}/sigma^d(r) over [" << format_double(r_min) << ", "
            << format_double(p.delta0) << "] = " << format_double(ic.value)
            << (ic.diverges ? "  (diverges as r_min -> 0)" : "  (converges as r_min -> 0)")
            << "\n";
  std::string csv = "regime,points_polar,integral_diverges,local_time_exists,integral_value\n";
  csv += std::string(to_string(v.regime)) + "," + (v.points_polar ? "1" : "0") + "," +
         (v.integral_diverges ? "1" : "0") + "," + (v.local_time_exists ? "1" : "0") + "," +
         format_double(ic.value) + "\n";
  write_file(ctx.outdir / "criteria.csv", csv);
  json out;
  out["verdict"] = verdict;
  out["integral_value"] = ic.value;
  return out;
}

// ------------------------------- simulate ----------------------------------

json cmd_simulate(RunContext& ctx) {
  FieldParams p = read_params(ctx.cfg);
  const double extent = ctx.cfg.get_double_or("extent", 1.0);
  const double spacing = ctx.cfg.get_double_or("spacing", extent / 256.0);
  const long count = ctx.cfg.get_int_or("count", 1);
  std::optional<std::pair<double, double>> band;
  if (ctx.cfg.has("band_a") || ctx.cfg.has("band_b")) {
    band = {ctx.cfg.get_double("band_a"), ctx.cfg.get_double("band_b")};
  }
  std::array<double, 3> lo{{0, 0, 0}}, hi{{extent, extent, extent}};
  Lattice lat = Lattice::box(p.N, lo, hi, spacing);
  SpectralModel model(p, extent, spacing);
  json out;
  out["c_norm"] = model.c_norm();
  out["cells"] = model.cells().size();
  for (long r = 0; r < count; ++r) {
    FieldSample f = synthesize(lat, model, hash_combine(ctx.seed, (uint64_t)r), band);
    char name[64];
    std::snprintf(name, sizeof name, "field%04ld", r);
    {
      std::ofstream bin(ctx.outdir / (std::string(name) + ".cfld"), std::ios::binary);
      write_cfld(bin, f, p);
    }
    std::ofstream csv(ctx.outdir / (std::string(name) + ".csv"), std::ios::binary);
    write_csv(csv, f);
  }
  out["samples"] = count;
  return out;
}

// -------------------------------- sojourn ----------------------------------

json cmd_sojourn(RunContext& ctx) {
  FieldParams p = read_params(ctx.cfg);
  const std::vector<double> eps_grid = parse_list(ctx.cfg.get("eps"));
  const double beta = ctx.cfg.get_double_or("beta", 0.5 * (1.0 + 1.0 / p.H));
  const int n_max = (int)ctx.cfg.get_int_or("n_max", 2);
  const int reps = (int)ctx.cfg.get_int_or("replications", 2000);
  const std::string gen_name = ctx.cfg.get_or("generator", "auto");

  FieldGen gen;
  if (gen_name == "fbm" || (gen_name == "auto" && p.gamma == 0.0 && p.N == 1)) {
    gen = fbm_generator(p.H, p.d);
  } else if (gen_name == "spectral" || gen_name == "auto") {
    const double max_eps = *std::max_element(eps_grid.begin(), eps_grid.end());
    const double radius = std::pow(max_eps, beta);
    const double min_eps = *std::min_element(eps_grid.begin(), eps_grid.end());
    auto model = std::make_shared<SpectralModel>(p, 2.0 * radius,
                                                 sigma_star(min_eps, p) / 8.0);
    gen = spectral_generator(model);
  } else {
    throw domain_error("sojourn: unknown generator '" + gen_name + "'");
  }

  SojournStats stats = mc_moments(gen, p, eps_grid, beta, n_max, reps, ctx.seed);
  std::string csv = "eps,beta,n,moment,ci_lo,ci_hi,normalized\n";
  for (const auto& row : stats.rows) {
    csv += csv_row({row.eps, beta, (double)row.n, row.moment, row.ci.lo, row.ci.hi,
                    row.normalized});
  }
  write_file(ctx.outdir / "moments.csv", csv);
  ctx.inconclusive = ctx.inconclusive || stats.any_inconclusive;

  json out;
  out["C1_hat"] = stats.C1_hat;
  out["C3_hat"] = stats.C3_hat;
  out["pass"] = stats.pass;

  if (ctx.cfg.get_int_or("tails", 0) != 0) {
    const double eps_tail = ctx.cfg.get_double_or("tail_eps", eps_grid.front());
    std::vector<double> u_grid;
    const double u_lo = ctx.cfg.get_double_or("u_min", 1.0);
    const double u_hi = ctx.cfg.get_double_or("u_max", 5.0);
    const long u_n = ctx.cfg.get_int_or("u_count", 9);
    for (long i = 0; i < u_n; ++i) {
      u_grid.push_back(u_lo + (u_hi - u_lo) * (double)i / (double)(u_n - 1));
    }
    TailReport tails = tail_probability(gen, p, eps_tail, beta, u_grid,
                                        (int)ctx.cfg.get_int_or("tail_replications", reps),
                                        hash_combine(ctx.seed, 0x7A11u));
    std::string tcsv = "eps,u,tail_prob,ci_lo,ci_hi\n";
    for (const auto& row : tails.rows) {
      tcsv += csv_row({eps_tail, row.u, row.prob, row.ci.lo, row.ci.hi});
    }
    write_file(ctx.outdir / "tails.csv", tcsv);
    out["K1_hat"] = tails.K1_hat;
    out["tail_r2"] = tails.r2;
    out["tail_pass"] = tails.pass;
  }
  return out;
}

// ------------------------------- construct ----------------------------------

json cmd_construct(RunContext& ctx) {
  const std::string mode = ctx.cfg.get_or("mode", "sweep");
  json out;
  if (mode == "identities") {
    const int p = (int)ctx.cfg.get_int_or("p", 6);
    ExactIdentities id = exact_identities(p);
    out["p"] = id.p;
    out["sum_k2k"] = id.sum_k2k;
    out["sum_k2k_closed_form"] = id.sum_k2k_closed;
    out["log2_prod2kp"] = id.log2_prod2kp;
    out["chain_prod2kp_c1"] = id.chain_prod2kp_c1;
    out["chain_factorials_c0"] = id.chain_factorials_c0;
    json ak = json::array();
    for (const auto& f : id.card_Ak) {
      const std::string dec = f.get_str();
      ak.push_back(dec.size() <= 40 ? dec : dec.substr(0, 20) + "...(" +
                                                std::to_string(dec.size()) + " digits)");
    }
    out["card_Ak"] = ak;
  } else if (mode == "sweep") {
    FieldParams p = read_params(ctx.cfg);
    const long count = ctx.cfg.get_int_or("count", 100);
    const double ell_lo = ctx.cfg.get_double_or("loglambda_min", 10.0);
    const double ell_hi = ctx.cfg.get_double_or("loglambda_max", 1700.0);
    CounterRng rng = make_stream(ctx.seed, 0xC0457u);
    json sweeps = json::array();
    long all_pass = 0;
    for (long i = 0; i < count; ++i) {
      const long double lam = std::exp((long double)rng.uniform(ell_lo, ell_hi));
      const int window = (int)std::floor(std::log2((double)std::log(std::log(lam))));
      const int pp = std::max(1, std::min((int)ctx.cfg.get_int_or("p_max", 6), window));
      const double beta = rng.uniform(1.0 + 0.05 / p.H, 1.0 / p.H - 0.05 * (1.0 / p.H - 1.0));
      const bool boundary = p.gamma_case() == FieldParams::GammaCase::AtBoundary;
      EpsilonLadder lad;
      if (boundary) {
        const double eta = (1.0 - p.H * beta) / 2.0;
        const double c = 0.9 * case2_max_constant(p.H, beta, eta);
        lad = build_ladder(LadderCase::CriticalGamma, LogScale::from_lambda(lam), pp, beta, c, p);
      } else {
        const double C = rng.uniform(0.05, 0.85) * (1.0 / p.H - beta) / 2.0;
        lad = build_ladder(LadderCase::SubcriticalGamma, LogScale::from_lambda(lam), pp, beta, C, p);
      }
      LadderReport rep = verify_P1_to_P4(lad, p);
      if (rep.all()) ++all_pass;
      json row;
      row["log_lambda"] = (double)std::log(lam);
      row["p"] = lad.p;
      row["beta"] = beta;
      row["constant"] = lad.constant;
      row["P1"] = rep.p1;
      row["P2"] = rep.p2;
      row["P3"] = rep.p3;
      row["P4"] = rep.p4;
      row["margins"] = {rep.margin_p1, rep.margin_p2, rep.margin_p3, rep.margin_p4};
      sweeps.push_back(row);
    }
    out["count"] = count;
    out["all_pass"] = all_pass;
    out["ladders"] = sweeps;
  } else {
    throw domain_error("construct: unknown mode '" + mode + "'");
  }
  write_file(ctx.outdir / "construct_report.json", out.dump(2) + "\n");
  return json{{"mode", mode}};
}

// --------------------------------- cover ------------------------------------

json cmd_cover(RunContext& ctx) {
  FieldParams p = read_params(ctx.cfg);
  if (p.N != 1) throw domain_error("cover: N=1 lattice experiments only");
  const double extent = ctx.cfg.get_double_or("extent", 1.0);
  const double spacing = ctx.cfg.get_double_or("spacing", extent / 4096.0);
  const double r_coarse = ctx.cfg.get_double_or("r_coarse", std::exp(-3.0));
  const double r_fine = ctx.cfg.get_double_or("r_fine", r_coarse / 4.0);
  const double c1 = ctx.cfg.get_double_or("c1", 1.0);
  const double c2 = ctx.cfg.get_double_or("c2", 1.0);
  const int n0 = (int)ctx.cfg.get_int_or("n0", 1);
  const int net_order = (int)ctx.cfg.get_int_or("net_order", 6);

  Lattice lat = Lattice::line(0.0, extent, spacing);
  FieldGen gen = p.gamma == 0.0 ? fbm_generator(p.H, p.d)
                                : spectral_generator(std::make_shared<SpectralModel>(
                                      p, extent, spacing));
  FieldSample f = gen(lat, ctx.seed);
  Region region{1, {0, 0, 0}, {extent, 0, 0}};
  HeavyFamilies fam = heavy_ball_families(f, region, region, r_coarse, r_fine, c1, c2, n0,
                                          net_order, p);
  json out;
  out["candidates"] = fam.candidates.size();
  out["f1"] = fam.f1.size();
  out["f1_kept"] = fam.f1_kept.size();
  out["f2"] = fam.f2.size();
  out["f2_kept"] = fam.f2_kept.size();
  out["f1_budget_sum"] = fam.f1_budget_sum;
  out["f1_budget_cap"] = fam.f1_budget_cap;
  out["budget_ok"] = fam.budget_ok;

  std::string csv = "radius,gauge_value\n";
  std::vector<double> f1_radii;
  for (int k : fam.f1_kept) f1_radii.push_back(fam.f1[k].radius);
  for (double r : f1_radii) csv += csv_row({r, phi_gauge(2.0 * r, p)});
  write_file(ctx.outdir / "gauge.csv", csv);
  write_file(ctx.outdir / "cover_report.json", out.dump(2) + "\n");
  return out;
}

// ---------------------------------- hit -------------------------------------

json cmd_hit(RunContext& ctx) {
  FieldParams p = read_params(ctx.cfg);
  if (p.N != 1) throw domain_error("hit: N=1 experiments only");
  const double a = ctx.cfg.get_double_or("interval_lo", 0.5);
  const double b = ctx.cfg.get_double_or("interval_hi", 1.0);
  const int reps = (int)ctx.cfg.get_int_or("replications", 2000);
  HitExperiment ex;
  ex.params = p;
  ex.replications = reps;
  if (ctx.cfg.has("z")) {
    ex.z = parse_list(ctx.cfg.get("z"));
    if ((int)ex.z.size() != p.d) throw domain_error("hit: z must have d components");
  } else {
    // default target: |z| = 0.3 * median sup |X| over a pilot batch
    FieldGen pilot_gen = fbm_generator(p.H, p.d);
    Lattice pilot = Lattice::line(a, b, (b - a) / 256.0);
    std::vector<double> sups(64);
    for (int r = 0; r < 64; ++r) {
      FieldSample f = pilot_gen(pilot, hash_combine(ctx.seed, 0xB10 + r));
      double s = 0;
      for (int64_t i = 0; i < pilot.site_count(); ++i) s = std::max(s, f.norm_at(i));
      sups[r] = s;
    }
    const double znorm = 0.3 * median(sups);
    ex.z.assign(p.d, 0.0);
    ex.z[0] = znorm;
  }
  ex.deltas = parse_list(ctx.cfg.get_or("deltas", "2^-4,2^-5,2^-6,2^-7,2^-8,2^-9"));
  const double dmin = *std::min_element(ex.deltas.begin(), ex.deltas.end());
  const double h = sigma_star(dmin, p) / 4.0;
  const int64_t steps = (int64_t)std::ceil((b - a) / h);
  Lattice net = Lattice::line(a, b, (b - a) / (double)steps);
  FieldGen gen = p.gamma == 0.0 && p.H == 0.5 ? fbm_generator(p.H, p.d)
                                              : FieldGen([&](const Lattice& l, uint64_t s) {
                                                  return FbmOracle1d(l, p.H).sample(s, p.d);
                                                });
  HitReport rep = hit_probability(gen, net, ex, ctx.seed);
  std::string csv = "delta,hit_prob,ci_lo,ci_hi\n";
  for (const auto& row : rep.rows) csv += csv_row({row.delta, row.prob, row.ci.lo, row.ci.hi});
  write_file(ctx.outdir / "hit.csv", csv);

  // mu_n ladder on the same interval
  const std::vector<double> ladder = parse_list(ctx.cfg.get_or("mu_ladder", "1,2,4,8,16,32,64,128,256"));
  const int mu_reps = (int)ctx.cfg.get_int_or("mu_replications", std::min(reps, 2000));
  Lattice mu_lat = Lattice::line(a, b, (b - a) / 512.0);
  Region I{1, {a, 0, 0}, {b, 0, 0}};
  std::vector<std::vector<double>> mu_paths(mu_reps);
  FieldGen mu_gen = fbm_generator(p.H, p.d);
  parallel_for(mu_reps, [&](int64_t r) {
    FieldSample f = mu_gen(mu_lat, hash_combine(ctx.seed, 0x30000 + (uint64_t)r));
    std::vector<double> row;
    for (double n : ladder) row.push_back(mu_n_measure(f, ex.z, I, n));
    mu_paths[r] = std::move(row);
  });
  double znorm = 0;
  for (double v : ex.z) znorm += sq(v);
  znorm = std::sqrt(znorm);
  std::string mcsv = "n,mean_mu,mean_mu_sq,bound\n";
  const double bound = mu_n_mean_lower_bound(p, a, b, znorm, 1.0, 1.0);
  for (size_t k = 0; k < ladder.size(); ++k) {
    std::vector<double> col, col2;
    for (const auto& path : mu_paths) {
      col.push_back(path[k]);
      col2.push_back(sq(path[k]));
    }
    mcsv += csv_row({ladder[k], mean(col), mean(col2), bound});
  }
  write_file(ctx.outdir / "mu.csv", mcsv);

  json out;
  out["final_prob"] = rep.final_prob;
  out["monotone"] = rep.monotone;
  out["mu_mean_lower_bound"] = bound;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    if (argc < 2) {
      std::cerr << "usage: critfield <criteria|simulate|sojourn|construct|cover|hit> "
                   "[--config FILE] [key=value ...]\n";
      return 2;
    }
    RunContext ctx;
    ctx.command = argv[1];
    // config file first, then key=value overrides
    for (int i = 2; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg == "--config") {
        if (i + 1 >= argc) throw domain_error("--config needs a path");
        ctx.cfg = Config::parse_file(argv[++i]);
      }
    }
    for (int i = 2; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg == "--config") {
        ++i;
        continue;
      }
      const auto eq = arg.find('=');
      if (eq == std::string::npos) throw domain_error("expected key=value argument: " + arg);
      ctx.cfg.set(arg.substr(0, eq), arg.substr(eq + 1));
    }
    ctx.seed = ctx.cfg.get_u64_or("seed", 1);
    ctx.strict = ctx.cfg.get_int_or("strict", 0) != 0;
    if (ctx.cfg.has("threads")) set_thread_cap((int)ctx.cfg.get_int("threads"));
    ctx.outdir = ctx.cfg.get_or("out", ".");
    fs::create_directories(ctx.outdir);

    const auto start = std::chrono::steady_clock::now();
    json results;
    if (ctx.command == "criteria") {
      results = cmd_criteria(ctx);
    } else if (ctx.command == "simulate") {
      results = cmd_simulate(ctx);
    } else if (ctx.command == "sojourn") {
      results = cmd_sojourn(ctx);
    } else if (ctx.command == "construct") {
      results = cmd_construct(ctx);
    } else if (ctx.command == "cover") {
      results = cmd_cover(ctx);
    } else if (ctx.command == "hit") {
      results = cmd_hit(ctx);
    } else {
      throw domain_error("unknown command '" + ctx.command + "'");
    }
    const auto leftovers = ctx.cfg.unconsumed();
    if (!leftovers.empty()) {
      std::string msg = "unknown keys:";
      for (const auto& k : leftovers) msg += " " + k;
      throw domain_error(msg);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(ctx, wall, results);
    if (ctx.strict && ctx.inconclusive) {
      std::cerr << "inconclusive result under strict mode\n";
      return 4;
    }
    return 0;
  } catch (const critfield::domain_error& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const critfield::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
