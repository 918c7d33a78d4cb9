#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "randsemi/closed_examples.hpp"
#include "randsemi/config.hpp"
#include "randsemi/conjugation.hpp"
#include "randsemi/lln.hpp"
#include "randsemi/opnorm.hpp"
#include "randsemi/report.hpp"

// Experiment runner behind the CLI.  Every subcommand writes a CSV (the
// deterministic record), a JSON summary with the pass/fail state of each
// invariant it exercised, and for convergence runs an SVG plot.

namespace randsemi {

struct run_result {
  int exit_code = 0;
  std::vector<std::string> artifacts;
  std::vector<invariant_record> invariants;
};

inline const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{
      "lln",      "chernoff", "bounds",   "variance-oracle", "conj-check",
      "conj-lln", "example1", "example2", "example3",        "norms"};
  return names;
}

namespace detail {

// Stream-id layout: each subcommand owns a block of experiment ids, one slot
// per n-row plus a reserved slot for auxiliary cross-check draws, so no two
// rows ever share a counter address.
inline constexpr uint32_t kAuxSlot = 63;

inline uint32_t experiment_slot(uint32_t base, size_t index) {
  if (index >= kAuxSlot) throw config_error("config: at most 63 n values per run");
  return base * 64 + static_cast<uint32_t>(index);
}

inline uint32_t aux_slot(uint32_t base) { return base * 64 + kAuxSlot; }

inline uint32_t experiment_base(const std::string& sub) {
  const auto& names = subcommand_names();
  auto it = std::find(names.begin(), names.end(), sub);
  return static_cast<uint32_t>(1 + (it - names.begin()));
}

template <Scalar T>
trunc_vector<T> embed_real(const trunc_vector<double>& x) {
  trunc_vector<T> y(x.dim());
  for (int k = 0; k < x.dim(); ++k) y[k] = T{x[k]};
  return y;
}

inline std::vector<std::string> lln_columns() {
  return {"n", "trials", "empirical_prob", "wilson_lo", "wilson_hi", "bound", "epsilon",
          "T", "p",      "q",              "N",         "seed",      "closed_form_check"};
}

inline std::vector<std::string> lln_row(const deviation_row& r, const experiment_config& cfg,
                                        const std::string& check) {
  return {format_value(r.n),
          format_value(r.trials),
          format_value(r.empirical_prob),
          format_value(r.ci.lo),
          format_value(r.ci.hi),
          r.bound ? format_value(*r.bound) : "na",
          format_value(r.epsilon),
          format_value(cfg.horizon),
          format_value(cfg.p),
          format_value(cfg.q),
          format_value(cfg.dim),
          format_value(cfg.seed),
          check};
}

inline const char* series_color(size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#e377c2", "#8c564b"};
  return palette[i % 6];
}

// Disjoint-range fan-out with exception transport; index slots keep the
// aggregation schedule-independent.
inline void parallel_chunks(long total, int workers,
                            const std::function<void(int, long, long)>& fn) {
  if (workers < 1) workers = 1;
  if (workers == 1 || total < 2) {
    fn(0, 0, total);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  std::vector<std::thread> pool;
  long chunk = (total + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    long lo = w * chunk, hi = std::min<long>(total, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, &errors, w, lo, hi] {
      try {
        fn(w, lo, hi);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
}

struct run_emitter {
  experiment_config cfg;
  std::string out_dir;
  std::string stem;
  std::string timestamp = timestamp_utc();
  std::vector<std::pair<std::string, std::string>> extra_files;  // name -> content

  run_result finish(const csv_table* table, std::vector<invariant_record> invariants,
                    const std::string& abort_reason = "") {
    std::filesystem::create_directories(out_dir);
    run_result res;
    if (table) {
      std::string body = csv_render(cfg, *table, timestamp);
      if (!abort_reason.empty()) body += "# aborted: " + abort_reason + "\n";
      std::string path = out_dir + "/" + stem + ".csv";
      write_text_file(path, body);
      res.artifacts.push_back(path);
    }
    for (const auto& [name, content] : extra_files) {
      std::string path = out_dir + "/" + name;
      write_text_file(path, content);
      res.artifacts.push_back(path);
    }
    std::string summary_path = out_dir + "/" + stem + "_summary.json";
    res.artifacts.push_back(summary_path);
    if (!abort_reason.empty())
      invariants.push_back({"run_completed", false, abort_reason});
    write_text_file(summary_path,
                    summary_json(cfg, invariants, res.artifacts, timestamp).dump(2) + "\n");
    res.invariants = std::move(invariants);
    if (!abort_reason.empty()) {
      res.exit_code = 3;
    } else {
      res.exit_code = 0;
      for (const auto& r : res.invariants)
        if (!r.pass) res.exit_code = 1;
    }
    return res;
  }
};

inline std::string convergence_svg(const experiment_config& cfg,
                                   const std::vector<std::vector<std::pair<double, double>>>& emp,
                                   const std::vector<std::vector<std::pair<double, double>>>& bnd,
                                   const std::string& title, const std::string& emp_label) {
  std::vector<plot_series> series;
  for (size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
    std::string eps = format_value(cfg.epsilons[ei]);
    series.push_back({emp_label + " eps=" + eps, series_color(ei), false, emp[ei]});
    if (ei < bnd.size() && !bnd[ei].empty())
      series.push_back({"bound eps=" + eps, series_color(ei), true, bnd[ei]});
  }
  return svg_loglog(title, "n", "probability", series);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// lln: Monte Carlo deviation of the composition from the limit semigroup.

template <Scalar T>
run_result run_lln_typed(const experiment_config& cfg, const std::string& out_dir, int workers,
                         const std::string& stem, uint32_t base_id) {
  generator_ensemble<T> e = build_ensemble<T>(cfg);
  trunc_vector<T> x = detail::embed_real<T>(resolve_x(cfg, e.index_origin()));
  detail::run_emitter emit{cfg, out_dir, stem};

  csv_table table(detail::lln_columns());
  std::vector<std::vector<std::pair<double, double>>> emp(cfg.epsilons.size()),
      bnd(cfg.epsilons.size());
  bool within = true, any_bound = false;
  double worst_excess = -inf;
  long clamps = 0;

  for (size_t idx = 0; idx < cfg.n_values.size(); ++idx) {
    lln_experiment_params<T> prm;
    prm.n = cfg.n_values[idx];
    prm.trials = cfg.trials;
    prm.horizon = cfg.horizon;
    prm.grid_points = cfg.grid_points;
    prm.epsilons = cfg.epsilons;
    prm.p = cfg.p;
    prm.dev_norm_p = cfg.deviation_norm;
    prm.tol = cfg.tol;
    prm.seed = cfg.seed;
    prm.experiment_id = detail::experiment_slot(base_id, idx);
    prm.workers = workers;
    deviation_run run = mc_lln_run(e, x, prm);
    clamps += run.clamp_events;
    for (size_t ei = 0; ei < run.rows.size(); ++ei) {
      const deviation_row& r = run.rows[ei];
      table.add_row(detail::lln_row(r, cfg, "na"));
      emp[ei].emplace_back(static_cast<double>(r.n), r.empirical_prob);
      if (r.bound) {
        any_bound = true;
        bnd[ei].emplace_back(static_cast<double>(r.n), *r.bound);
        if (r.empirical_prob > *r.bound + 4.0 * r.ci.half_width()) within = false;
        worst_excess = std::max(worst_excess, r.empirical_prob - *r.bound);
      }
    }
  }

  std::vector<invariant_record> inv;
  if (any_bound) {
    inv.push_back({"deviation_within_bound", within,
                   "empirical <= bound + 4*wilson_half_width on every row; max excess over "
                   "the raw bound " +
                       format_value(worst_excess)});
  } else {
    inv.push_back({"deviation_within_bound", true,
                   "no certified radius at p=" + format_value(cfg.p) + ", nothing to check"});
  }
  if (e.kind() == ensemble_kind::rank_one_geometric ||
      e.kind() == ensemble_kind::scaled_rank_one_geometric)
    inv.push_back({"truncation_clamps", true,
                   format_value(clamps) + " geometric draws clamped to index N-1"});
  if (cfg.n_values.size() >= 2)
    emit.extra_files.emplace_back(
        stem + ".svg", detail::convergence_svg(cfg, emp, bnd, "sup-deviation exceedance vs n",
                                               "empirical"));
  return emit.finish(&table, std::move(inv));
}

// ---------------------------------------------------------------------------
// chernoff: iterate F(t/n)^n against the limit, plus hypothesis checks.

template <Scalar T>
run_result run_chernoff_typed(const experiment_config& cfg, const std::string& out_dir) {
  generator_ensemble<T> e = build_ensemble<T>(cfg);
  trunc_vector<T> x = detail::embed_real<T>(resolve_x(cfg, e.index_origin()));
  detail::run_emitter emit{cfg, out_dir, "chernoff"};

  chernoff_report rep =
      chernoff_convergence(e, x, cfg.horizon, cfg.grid_points, cfg.n_values, cfg.p, cfg.tol);

  csv_table table({"n", "sup_dev", "T", "p", "N", "seed"});
  std::vector<std::pair<double, double>> pts;
  for (size_t i = 0; i < rep.n_values.size(); ++i) {
    table.add_row({format_value(rep.n_values[i]), format_value(rep.sup_dev[i]),
                   format_value(cfg.horizon), format_value(cfg.p), format_value(cfg.dim),
                   format_value(cfg.seed)});
    pts.emplace_back(static_cast<double>(rep.n_values[i]), rep.sup_dev[i]);
  }

  size_t lo = 0, hi = 0;
  for (size_t i = 1; i < rep.n_values.size(); ++i) {
    if (rep.n_values[i] < rep.n_values[lo]) lo = i;
    if (rep.n_values[i] > rep.n_values[hi]) hi = i;
  }
  bool decreases = rep.sup_dev.empty() ||
                   rep.sup_dev[hi] <= rep.sup_dev[lo] + 1e-12;

  std::vector<invariant_record> inv;
  inv.push_back({"identity_condition", rep.cond.identity_ok,
                 "max-entry |F(0) - I| = " + format_value(rep.cond.identity_err)});
  if (rep.cond.growth_ok) {
    inv.push_back({"growth_condition", *rep.cond.growth_ok,
                   "min over grid of e^{rho t} - ||F(t)||_1 = " +
                       format_value(*rep.cond.growth_margin)});
  } else {
    inv.push_back({"growth_condition", true, "no certified l_1 radius, nothing to check"});
  }
  inv.push_back({"derivative_condition", rep.cond.derivative_ok,
                 "finite-difference error of F'(0)x against (EA)x = " +
                     format_value(rep.cond.derivative_err)});
  inv.push_back({"iterate_deviation_decreases", decreases,
                 "sup_dev " + format_value(rep.sup_dev.empty() ? 0.0 : rep.sup_dev[lo]) +
                     " at n=" + format_value(rep.n_values.empty() ? 0L : rep.n_values[lo]) +
                     " down to " + format_value(rep.sup_dev.empty() ? 0.0 : rep.sup_dev[hi]) +
                     " at n=" + format_value(rep.n_values.empty() ? 0L : rep.n_values[hi])});

  if (pts.size() >= 2) {
    std::vector<plot_series> series{{"sup deviation", detail::series_color(0), false, pts}};
    emit.extra_files.emplace_back(
        "chernoff.svg", svg_loglog("iterate deviation vs n", "n", "sup deviation", series));
  }
  return emit.finish(&table, std::move(inv));
}

// ---------------------------------------------------------------------------
// bounds: the variance bound chain on a (rho, t, n) grid.

inline run_result run_bounds(const experiment_config& cfg, const std::string& out_dir) {
  detail::run_emitter emit{cfg, out_dir, "bounds"};
  csv_table table({"rho", "t", "n", "binomial_bound", "f_bound", "chain_ok"});
  std::vector<double> grid = uniform_grid(cfg.horizon, cfg.grid_points);
  bool all_ok = true, zero_ok = true;
  for (double rho : cfg.rho)
    for (double t : grid)
      for (long n : cfg.n_values) {
        double b = variance_bound_binomial(rho, t, n);
        double f = variance_bound_f(rho, t, n);
        bool ok = b <= f * (1.0 + 1e-12);
        all_ok = all_ok && ok;
        if (t == 0.0) zero_ok = zero_ok && b == 0.0 && f == 0.0;
        table.add_row({format_value(rho), format_value(t), format_value(n), format_value(b),
                       format_value(f), ok ? "pass" : "fail"});
      }
  std::vector<invariant_record> inv;
  inv.push_back({"binomial_within_f", all_ok,
                 "binomial form <= closed majorant with 1e-12 relative slack on " +
                     format_value(static_cast<long>(table.rows.size())) + " grid points"});
  inv.push_back({"zero_at_origin", zero_ok, "both bounds vanish at t=0"});
  return emit.finish(&table, std::move(inv));
}

// ---------------------------------------------------------------------------
// variance-oracle: the two independent routes to var W_n(t) on fixed cases.

struct variance_case {
  std::string name;
  generator_ensemble<double> ensemble;
  double t;
  int n;
};

inline std::vector<variance_case> variance_oracle_cases() {
  using op = trunc_operator<double>;
  auto diag = [](std::initializer_list<double> v) {
    trunc_vector<double> d(static_cast<int>(v.size()));
    int k = 0;
    for (double e : v) d[k++] = e;
    return op::diagonal(d);
  };

  std::vector<weighted_atom<double>> two_diag{{0.5, diag({1.0, 0.5})},
                                              {0.5, diag({0.0, -0.5})}};

  std::vector<weighted_atom<double>> three_mix{{0.5, op::unit(3, 0, 1)},
                                               {0.25, op::unit(3, 1, 0)},
                                               {0.25, diag({0.5, -0.25, 1.0})}};

  op shift = op::banded(4, 1);
  for (int k = 0; k + 1 < 4; ++k) shift.set(k, k + 1, 1.0);
  std::vector<weighted_atom<double>> four_mix{{0.25, shift},
                                              {0.25, adjoint(shift)},
                                              {0.25, diag({1.0, -1.0, 0.5, -0.5})},
                                              {0.25, op::unit(4, 0, 3)}};

  op tri_up = op::banded(8, 1), tri_dn = op::banded(8, 1);
  for (int k = 0; k < 8; ++k) {
    if (k + 1 < 8) tri_up.set(k, k + 1, 1.0 / (k + 1));
    if (k > 0) tri_dn.set(k, k - 1, (k % 2 == 0) ? 0.5 : -0.5);
    tri_dn.set(k, k, 0.25);
  }
  std::vector<weighted_atom<double>> two_banded{{0.6, tri_up}, {0.4, tri_dn}};

  std::vector<variance_case> cases;
  auto push = [&cases](const std::string& name, std::vector<weighted_atom<double>> atoms,
                       double t) {
    auto e = generator_ensemble<double>::discrete_atoms(std::move(atoms));
    for (int n = 1; n <= 3; ++n) cases.push_back({name, e, t, n});
  };
  push("two_atom_diagonal", two_diag, 0.5);
  push("three_atom_shift_mix", three_mix, 1.0);
  push("four_atom_noncommuting", four_mix, 0.75);
  push("two_atom_banded8", two_banded, 0.5);
  return cases;
}

inline run_result run_variance_oracle(const experiment_config& cfg, const std::string& out_dir) {
  detail::run_emitter emit{cfg, out_dir, "variance_oracle"};
  csv_table table({"case", "n", "N", "atoms", "t", "max_abs_diff", "routes_agree"});
  bool all_ok = true;
  double worst = 0.0;
  std::vector<variance_case> cases = variance_oracle_cases();
  for (const auto& c : cases) {
    double diff = 0.0;
    bool ok = true;
    try {
      diff = variance_w_n_oracle(c.ensemble, c.t, c.n, cfg.tol).max_diff;
    } catch (const oracle_mismatch_error& err) {
      diff = err.max_diff;
      ok = false;
    }
    all_ok = all_ok && ok;
    worst = std::max(worst, diff);
    table.add_row({c.name, format_value(c.n), format_value(c.ensemble.dim()),
                   format_value(static_cast<long>(c.ensemble.atoms().size())), format_value(c.t),
                   format_value(diff), ok ? "pass" : "fail"});
  }
  std::vector<invariant_record> inv;
  inv.push_back({"oracle_routes_agree", all_ok,
                 "cases=" + format_value(static_cast<long>(cases.size())) +
                     " max_abs_diff=" + format_value(worst)});
  return emit.finish(&table, std::move(inv));
}

// ---------------------------------------------------------------------------
// conj-check: membership certificates for sampled generators.

template <Scalar T>
run_result run_conj_check_typed(const experiment_config& cfg, const std::string& out_dir) {
  generator_ensemble<T> e = build_ensemble<T>(cfg);
  conjugation_rule rule =
      cfg.rule == "series" ? conjugation_rule::series : conjugation_rule::d_diagonal;
  detail::run_emitter emit{cfg, out_dir, "conj_check"};
  uint32_t exp_id = detail::experiment_slot(detail::experiment_base("conj-check"), 0);

  // The measured conjugated norm costs a full power iteration per sample;
  // the premise check is cheap and runs on every sample.
  const long measure_limit = 32;

  csv_table table({"sample", "rule", "d", "constant", "l1_norm", "measured_ratio", "premise_ok",
                   "ratio_ok"});
  nlohmann::json certs = nlohmann::json::array();
  bool all_premise = true, all_ratio = true;
  std::string abort_reason;
  for (long i = 0; i < cfg.trials; ++i) {
    trunc_operator<T> a = e.sample(rng_stream{cfg.seed, exp_id, static_cast<uint32_t>(i), 0});
    double l1 = opnorm_l1_exact(a);
    bool measure = i < measure_limit;
    try {
      membership_certificate cert = certify(a, rule, cfg.d, measure);
      bool ratio_ok = !measure || cert.measured_ratio <= cert.constant + 1e-9;
      all_ratio = all_ratio && ratio_ok;
      table.add_row({format_value(i), to_string(rule), format_value(cfg.d),
                     format_value(cert.constant), format_value(l1),
                     measure ? format_value(cert.measured_ratio) : "na", "pass",
                     measure ? (ratio_ok ? "pass" : "fail") : "na"});
      nlohmann::json j{{"sample", i},           {"rule", to_string(rule)},
                       {"d", cert.d},           {"constant", cert.constant},
                       {"premise_checked", true}, {"N", cert.dim}};
      if (measure) j["measured_ratio"] = cert.measured_ratio;
      certs.push_back(std::move(j));
    } catch (const certification_error& err) {
      all_premise = false;
      table.add_row({format_value(i), to_string(rule), format_value(cfg.d), "na",
                     format_value(l1), "na", "fail", "na"});
      certs.push_back({{"sample", i},
                       {"rule", to_string(rule)},
                       {"d", cfg.d},
                       {"premise_checked", false},
                       {"error", err.what()},
                       {"N", e.dim()}});
    } catch (const convergence_error& err) {
      abort_reason = err.what();
      break;
    }
  }

  emit.extra_files.emplace_back("conj_check_certificates.json", certs.dump(2) + "\n");
  std::vector<invariant_record> inv;
  inv.push_back({"membership_certified", all_premise,
                 "rule premise checked on every sampled generator"});
  inv.push_back({"measured_within_constant", all_ratio,
                 "conjugated l_2 norm against the certified cap, measured on the first " +
                     format_value(std::min<long>(measure_limit, cfg.trials)) + " samples"});
  return emit.finish(&table, std::move(inv), abort_reason);
}

// ---------------------------------------------------------------------------
// conj-lln: the deviation experiment for conjugated generators.

template <Scalar T>
run_result run_conj_lln_typed(const experiment_config& cfg, const std::string& out_dir,
                              int workers) {
  generator_ensemble<T> base = build_ensemble<T>(cfg);
  conjugation_rule rule =
      cfg.rule == "series" ? conjugation_rule::series : conjugation_rule::d_diagonal;
  trunc_vector<T> x = detail::embed_real<T>(resolve_x(cfg, base.index_origin()));
  detail::run_emitter emit{cfg, out_dir, "conj_lln"};
  uint32_t base_id = detail::experiment_base("conj-lln");

  csv_table table(detail::lln_columns());
  std::vector<std::vector<std::pair<double, double>>> emp(cfg.epsilons.size()),
      bnd(cfg.epsilons.size());
  bool within = true;
  double effective_radius = 0.0, base_radius = 0.0, constant = 0.0;

  try {
    for (size_t idx = 0; idx < cfg.n_values.size(); ++idx) {
      lln_experiment_params<T> prm;
      prm.n = cfg.n_values[idx];
      prm.trials = cfg.trials;
      prm.horizon = cfg.horizon;
      prm.grid_points = cfg.grid_points;
      prm.epsilons = cfg.epsilons;
      prm.p = cfg.p;
      prm.dev_norm_p = cfg.deviation_norm;
      prm.tol = cfg.tol;
      prm.seed = cfg.seed;
      prm.experiment_id = detail::experiment_slot(base_id, idx);
      prm.workers = workers;
      conjugated_run_result<T> res = conjugated_lln_run(base, rule, cfg.d, x, prm);
      effective_radius = res.effective_radius;
      base_radius = res.base_radius;
      constant = res.certificate.constant;
      for (size_t ei = 0; ei < res.run.rows.size(); ++ei) {
        const deviation_row& r = res.run.rows[ei];
        table.add_row(detail::lln_row(r, cfg, "na"));
        emp[ei].emplace_back(static_cast<double>(r.n), r.empirical_prob);
        if (r.bound) {
          bnd[ei].emplace_back(static_cast<double>(r.n), *r.bound);
          if (r.empirical_prob > *r.bound + 4.0 * r.ci.half_width()) within = false;
        }
      }
    }
  } catch (const certification_error& err) {
    std::vector<invariant_record> inv;
    inv.push_back({"membership_certified", false, err.what()});
    return emit.finish(&table, std::move(inv));
  }

  nlohmann::json cert{{"rule", cfg.rule},
                      {"d", cfg.d},
                      {"constant", constant},
                      {"base_radius", base_radius},
                      {"effective_radius", effective_radius},
                      {"premise_checked", true},
                      {"N", cfg.dim}};
  emit.extra_files.emplace_back("conj_lln_certificate.json", cert.dump(2) + "\n");

  std::vector<invariant_record> inv;
  inv.push_back({"membership_certified", true,
                 "rule " + cfg.rule + " with C=" + format_value(constant) +
                     ", effective radius " + format_value(effective_radius)});
  inv.push_back({"deviation_within_bound", within,
                 "empirical <= bound + 4*wilson_half_width on every row, bound taken at the "
                 "conjugated radius"});
  if (cfg.n_values.size() >= 2)
    emit.extra_files.emplace_back(
        "conj_lln.svg", detail::convergence_svg(cfg, emp, bnd,
                                                "conjugated deviation exceedance vs n",
                                                "empirical"));
  return emit.finish(&table, std::move(inv));
}

// ---------------------------------------------------------------------------
// example1 / example2: rank-one models with scalar closed forms.

inline run_result run_example_rank_one(experiment_config cfg, const std::string& out_dir,
                                       int workers, bool scaled) {
  const std::string expect = scaled ? "scaled_rank_one_geometric" : "rank_one_geometric";
  const std::string stem = scaled ? "example2" : "example1";
  if (!cfg.ensemble.empty() && cfg.ensemble != expect)
    throw config_error("config: " + stem + " is the " + expect + " model");
  if (cfg.field == "complex")
    throw config_error("config: " + stem + " runs on the real field");
  cfg.ensemble = expect;

  auto e = scaled ? generator_ensemble<double>::scaled_rank_one_geometric(cfg.dim)
                  : generator_ensemble<double>::rank_one_geometric(cfg.dim);
  std::vector<double> w = geometric_half_weights(cfg.dim);
  trunc_vector<double> x = resolve_x(cfg, e.index_origin());
  double variance =
      scaled ? geometric_scaled_variance(x, w) : geometric_value_variance(x, w);
  uint32_t base_id = detail::experiment_base(stem);
  detail::run_emitter emit{cfg, out_dir, stem};

  csv_table table(detail::lln_columns());
  std::vector<std::vector<std::pair<double, double>>> emp(cfg.epsilons.size()),
      bnd(cfg.epsilons.size());
  bool within = true, cross_ok_all = true;
  long clamps = 0;

  for (size_t idx = 0; idx < cfg.n_values.size(); ++idx) {
    long n = cfg.n_values[idx];
    uint32_t exp_id = detail::experiment_slot(base_id, idx);
    std::vector<double> devs(static_cast<size_t>(cfg.trials));
    std::vector<long> worker_clamps(static_cast<size_t>(std::max(workers, 1)), 0);
    detail::parallel_chunks(cfg.trials, workers, [&](int wk, long lo, long hi) {
      for (long trial = lo; trial < hi; ++trial) {
        geometric_draws d = draw_geometric(
            n, cfg.dim, rng_stream{cfg.seed, exp_id, static_cast<uint32_t>(trial), 0});
        worker_clamps[static_cast<size_t>(wk)] += d.clamp_events;
        // The deviation is linear in t, so its sup over [0, T] sits at T.
        devs[static_cast<size_t>(trial)] =
            scaled ? scaled_rank_one_deviation(x, cfg.horizon, d.xi, w)
                   : rank_one_deviation(x, cfg.horizon, d.xi, w);
      }
    });
    for (long c : worker_clamps) clamps += c;

    // Same numbers out of the generic matrix machinery, on shared draws.
    std::string check = "pass";
    long nc = std::min<long>(n, 8);
    for (uint32_t j = 0; j < 3; ++j) {
      rng_stream aux{cfg.seed, detail::aux_slot(base_id),
                     static_cast<uint32_t>(idx) * 8 + j, 0};
      geometric_draws d = draw_geometric(nc, cfg.dim, aux);
      double closed = scaled ? scaled_rank_one_deviation(x, cfg.horizon, d.xi, w)
                             : rank_one_deviation(x, cfg.horizon, d.xi, w);
      auto ops = build_rank_one_ops<double>(d.xi, cfg.dim, scaled);
      trunc_vector<double> y = composition_w_n_apply<double>(ops, cfg.horizon, x, cfg.tol);
      trunc_vector<double> target = matvec(e.mean_semigroup(cfg.horizon, cfg.tol), x);
      double matrix_dev = lp_norm(y - target, 2.0);
      if (std::abs(closed - matrix_dev) > 1e-10) check = "fail";
    }
    cross_ok_all = cross_ok_all && check == "pass";

    for (size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
      double eps = cfg.epsilons[ei];
      deviation_row r;
      r.n = n;
      r.trials = cfg.trials;
      r.epsilon = eps;
      for (double dv : devs)
        if (dv > eps) ++r.exceed_count;
      r.empirical_prob = static_cast<double>(r.exceed_count) / static_cast<double>(cfg.trials);
      r.ci = wilson_interval(r.exceed_count, cfg.trials);
      r.bound = scalar_tail_bound(cfg.horizon, variance, n, eps);
      table.add_row(detail::lln_row(r, cfg, check));
      emp[ei].emplace_back(static_cast<double>(n), r.empirical_prob);
      bnd[ei].emplace_back(static_cast<double>(n), *r.bound);
      if (r.empirical_prob > *r.bound + 4.0 * r.ci.half_width()) within = false;
    }
  }

  std::vector<invariant_record> inv;
  inv.push_back({"closed_form_matches_matrix", cross_ok_all,
                 "scalar deviation against the composed-exponential route at n<=8, tolerance "
                 "1e-10"});
  inv.push_back({"deviation_within_bound", within,
                 "empirical <= scalar variance bound + 4*wilson_half_width on every row"});
  inv.push_back({"truncation_clamps", true,
                 format_value(clamps) + " geometric draws clamped to index N-1"});
  if (cfg.n_values.size() >= 2)
    emit.extra_files.emplace_back(
        stem + ".svg", detail::convergence_svg(cfg, emp, bnd, "closed-form deviation vs n",
                                               "empirical"));
  return emit.finish(&table, std::move(inv));
}

// ---------------------------------------------------------------------------
// example3: weak convergence against a persistent norm gap.

inline run_result run_example3(experiment_config cfg, const std::string& out_dir, int workers) {
  if (!cfg.ensemble.empty() && cfg.ensemble != "diagonal_imaginary")
    throw config_error("config: example3 is the diagonal_imaginary model");
  cfg.ensemble = "diagonal_imaginary";
  cfg.field = "complex";

  auto e = generator_ensemble<cdouble>::diagonal_imaginary(cfg.dim);
  trunc_vector<double> x = resolve_x(cfg, e.index_origin());
  trunc_vector<cdouble> xc = detail::embed_real<cdouble>(x);
  int K = cfg.k_trunc;
  std::vector<double> grid = uniform_grid(cfg.horizon, cfg.grid_points);
  uint32_t base_id = detail::experiment_base("example3");
  detail::run_emitter emit{cfg, out_dir, "example3"};

  std::vector<std::string> cols = detail::lln_columns();
  cols.push_back("wot_freq");
  cols.push_back("norm_gap");
  csv_table table(cols);

  std::vector<std::vector<std::pair<double, double>>> gap_exceed(cfg.epsilons.size()),
      wot_series(cfg.epsilons.size());
  bool cross_ok_all = true;
  double global_gap_min = inf;
  double wot_first = -1.0, wot_last = -1.0;

  for (size_t idx = 0; idx < cfg.n_values.size(); ++idx) {
    long n = cfg.n_values[idx];
    uint32_t exp_id = detail::experiment_slot(base_id, idx);
    std::vector<double> pairing(static_cast<size_t>(cfg.trials)),
        gap(static_cast<size_t>(cfg.trials));
    double tail = diag_imag_wot_tail(x, x, K);
    detail::parallel_chunks(cfg.trials, workers, [&](int, long lo, long hi) {
      for (long trial = lo; trial < hi; ++trial) {
        std::vector<int> signs =
            draw_signs(n, rng_stream{cfg.seed, exp_id, static_cast<uint32_t>(trial), 0});
        long s_sum = 0;
        for (int s : signs) s_sum += s;
        double sup = 0.0;
        for (double t : grid)
          sup = std::max(sup, diag_imag_wot_pairing(x, x, t, s_sum, n, K));
        pairing[static_cast<size_t>(trial)] = sup + tail;
        gap[static_cast<size_t>(trial)] = diag_imag_norm_gap(grid, s_sum, n, K);
      }
    });
    double gap_min = inf;
    for (double g : gap) gap_min = std::min(gap_min, g);
    global_gap_min = std::min(global_gap_min, gap_min);

    // Pairing route against composed exponentials on shared draws.
    std::string check = "pass";
    long nc = std::min<long>(n, 8);
    for (uint32_t j = 0; j < 3; ++j) {
      rng_stream aux{cfg.seed, detail::aux_slot(base_id),
                     static_cast<uint32_t>(idx) * 8 + j, 0};
      std::vector<int> signs = draw_signs(nc, aux);
      long s_sum = 0;
      for (int s : signs) s_sum += s;
      auto ops = build_diag_imag_ops(signs, cfg.dim);
      double closed_sup = 0.0, matrix_sup = 0.0;
      for (double t : grid) {
        closed_sup =
            std::max(closed_sup, diag_imag_wot_pairing(x, x, t, s_sum, nc, cfg.dim - 1));
        trunc_vector<cdouble> y = composition_w_n_apply<cdouble>(ops, t, xc, cfg.tol);
        trunc_operator<cdouble> it =
            matrix_power(e.mean_semigroup(t / static_cast<double>(nc), cfg.tol), nc);
        matrix_sup = std::max(matrix_sup, std::abs(dual_pair(xc, y - matvec(it, xc))));
      }
      if (std::abs(closed_sup - matrix_sup) > 1e-10) check = "fail";
    }
    cross_ok_all = cross_ok_all && check == "pass";

    for (size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
      double eps = cfg.epsilons[ei];
      deviation_row r;
      r.n = n;
      r.trials = cfg.trials;
      r.epsilon = eps;
      for (double g : gap)
        if (g > eps) ++r.exceed_count;
      r.empirical_prob = static_cast<double>(r.exceed_count) / static_cast<double>(cfg.trials);
      r.ci = wilson_interval(r.exceed_count, cfg.trials);
      long wot_count = 0;
      for (double pv : pairing)
        if (pv <= eps) ++wot_count;
      double wot_freq = static_cast<double>(wot_count) / static_cast<double>(cfg.trials);
      if (ei == 0) {
        if (idx == 0) wot_first = wot_freq;
        wot_last = wot_freq;
      }
      std::vector<std::string> row = detail::lln_row(r, cfg, check);
      row.push_back(format_value(wot_freq));
      row.push_back(format_value(gap_min));
      table.add_row(std::move(row));
      gap_exceed[ei].emplace_back(static_cast<double>(n), r.empirical_prob);
      wot_series[ei].emplace_back(static_cast<double>(n), wot_freq);
    }
  }

  std::vector<invariant_record> inv;
  inv.push_back({"closed_form_matches_matrix", cross_ok_all,
                 "weak pairing against the composed-exponential route at n<=8, tolerance "
                 "1e-10"});
  double eps_max = *std::max_element(cfg.epsilons.begin(), cfg.epsilons.end());
  bool gap_persists = global_gap_min >= std::max(0.9, eps_max);
  bool wot_improves = cfg.n_values.size() < 2 || wot_last >= wot_first;
  inv.push_back({"weak_strong_dichotomy", gap_persists && wot_improves,
                 "norm gap stays >= " + format_value(global_gap_min) +
                     " while the weak pairing frequency moves from " + format_value(wot_first) +
                     " to " + format_value(wot_last)});
  if (cfg.n_values.size() >= 2) {
    std::vector<plot_series> series;
    for (size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
      std::string eps = format_value(cfg.epsilons[ei]);
      series.push_back(
          {"norm gap exceedance eps=" + eps, detail::series_color(ei), false, gap_exceed[ei]});
      series.push_back({"weak freq eps=" + eps, detail::series_color(ei), true, wot_series[ei]});
    }
    emit.extra_files.emplace_back(
        "example3.svg", svg_loglog("weak vs strong convergence", "n", "frequency", series));
  }
  return emit.finish(&table, std::move(inv));
}

// ---------------------------------------------------------------------------
// norms: estimates and certified caps for sampled generators.

template <Scalar T>
run_result run_norms_typed(const experiment_config& cfg, const std::string& out_dir) {
  generator_ensemble<T> e = build_ensemble<T>(cfg);
  std::optional<double> radius = e.certified_radius(cfg.p);
  uint32_t exp_id = detail::experiment_slot(detail::experiment_base("norms"), 0);
  detail::run_emitter emit{cfg, out_dir, "norms"};

  csv_table table(
      {"sample", "l1_norm", "linf_norm", "interp_bound", "l2_estimate", "radius", "within_radius"});
  bool all_within = true;
  std::string abort_reason;
  for (long i = 0; i < cfg.trials; ++i) {
    trunc_operator<T> a = e.sample(rng_stream{cfg.seed, exp_id, static_cast<uint32_t>(i), 0});
    double interp = opnorm_interp_bound(a, cfg.p);
    double l2 = 0.0;
    try {
      l2 = opnorm_l2(a, 1e-8);
    } catch (const convergence_error& err) {
      abort_reason = err.what();
      break;
    }
    bool within = !radius || interp <= *radius * (1.0 + 1e-12);
    all_within = all_within && within;
    table.add_row({format_value(i), format_value(opnorm_l1_exact(a)),
                   format_value(opnorm_linf_exact(a)), format_value(interp), format_value(l2),
                   radius ? format_value(*radius) : "na",
                   radius ? (within ? "pass" : "fail") : "na"});
  }
  std::vector<invariant_record> inv;
  if (radius) {
    inv.push_back({"samples_within_radius", all_within,
                   "interpolation bound at p=" + format_value(cfg.p) +
                       " against the certified radius " + format_value(*radius)});
  } else {
    inv.push_back({"samples_within_radius", true,
                   "no certified radius at p=" + format_value(cfg.p) + ", nothing to check"});
  }
  return emit.finish(&table, std::move(inv), abort_reason);
}

// ---------------------------------------------------------------------------

inline run_result run_subcommand(const std::string& sub, experiment_config cfg,
                                 const std::string& out_dir, int workers) {
  if (workers < 1) workers = 1;
  bool cx = cfg.field == "complex";
  if (sub == "lln") {
    uint32_t base = detail::experiment_base("lln");
    return cx ? run_lln_typed<cdouble>(cfg, out_dir, workers, "lln", base)
              : run_lln_typed<double>(cfg, out_dir, workers, "lln", base);
  }
  if (sub == "chernoff")
    return cx ? run_chernoff_typed<cdouble>(cfg, out_dir)
              : run_chernoff_typed<double>(cfg, out_dir);
  if (sub == "bounds") return run_bounds(cfg, out_dir);
  if (sub == "variance-oracle") return run_variance_oracle(cfg, out_dir);
  if (sub == "conj-check")
    return cx ? run_conj_check_typed<cdouble>(cfg, out_dir)
              : run_conj_check_typed<double>(cfg, out_dir);
  if (sub == "conj-lln")
    return cx ? run_conj_lln_typed<cdouble>(cfg, out_dir, workers)
              : run_conj_lln_typed<double>(cfg, out_dir, workers);
  if (sub == "example1") return run_example_rank_one(std::move(cfg), out_dir, workers, false);
  if (sub == "example2") return run_example_rank_one(std::move(cfg), out_dir, workers, true);
  if (sub == "example3") return run_example3(std::move(cfg), out_dir, workers);
  if (sub == "norms")
    return cx ? run_norms_typed<cdouble>(cfg, out_dir) : run_norms_typed<double>(cfg, out_dir);
  throw config_error("unknown subcommand " + sub);
}

}  // namespace randsemi
