#include "smalleig/cli.hpp"

#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "smalleig/autotune.hpp"
#include "smalleig/error.hpp"
#include "smalleig/report.hpp"
#include "smalleig/solver.hpp"

namespace smalleig {

namespace {

struct Options {
  int n = 0;
  std::string matrix = "frank";
  std::string input;
  int px = 1;
  int py = 1;
  int procs = 0;
  std::string trd_reduce = "allreduce";
  std::string trd_pivot = "nonblocking";
  double presend_frac = 0.25;
  std::string hit_gather = "block-bcast";
  int mblk = 16;
  int ml = 2;
  int el = 75;
  double tol = 0.0;
  bool verify = false;
  std::string report;
  std::string metric = "messages";
  std::uint64_t seed = 0;
  std::string reorth = "cluster";
  std::string mblk_list;
  bool tune_shapes = false;
  double perturb = 0.0;
};

void add_matrix_flags(CLI::App* app, Options& o) {
  app->add_option("--n", o.n, "Matrix order");
  app->add_option("--matrix", o.matrix, "Input matrix")
      ->check(CLI::IsMember({"frank", "file", "random", "diag"}));
  app->add_option("--input", o.input, "Matrix file (first token n, then n*n values)");
  app->add_option("--seed", o.seed, "Seed for --matrix random");
}

void add_solver_flags(CLI::App* app, Options& o) {
  add_matrix_flags(app, o);
  app->add_option("--px", o.px, "Process rows")->check(CLI::PositiveNumber);
  app->add_option("--py", o.py, "Process columns")->check(CLI::PositiveNumber);
  app->add_option("--trd-reduce", o.trd_reduce, "Matvec row reduction")
      ->check(CLI::IsMember({"tree", "allreduce"}));
  app->add_option("--trd-pivot", o.trd_pivot, "Pivot column distribution")
      ->check(CLI::IsMember({"blocking", "nonblocking"}));
  app->add_option("--presend-frac", o.presend_frac, "Fraction of steps using the pre-send")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--hit-gather", o.hit_gather, "Reflector gather")
      ->check(CLI::IsMember({"bcast", "isend", "block-bcast"}));
  app->add_option("--mblk", o.mblk, "Back-transformation blocking factor")
      ->check(CLI::PositiveNumber);
  app->add_option("--ml", o.ml, "Section points per refinement")->check(CLI::PositiveNumber);
  app->add_option("--el", o.el, "Eigenvalues refined per sweep")->check(CLI::PositiveNumber);
  app->add_option("--tol", o.tol, "Absolute eigenvalue tolerance (0 = automatic)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--reorth", o.reorth, "Reorthogonalization scope")
      ->check(CLI::IsMember({"cluster", "owned"}));
  app->add_option("--report", o.report, "Write a JSON report to this path");
  app->add_option("--perturb-eigenvalue", o.perturb)->group("");
}

DenseMatrix random_symmetric(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = u(rng);
  return a;
}

DenseMatrix load_matrix(const Options& o) {
  if (o.matrix == "file") {
    if (o.input.empty()) throw UsageError("--matrix file needs --input PATH");
    DenseMatrix a = read_matrix_file(o.input);
    if (o.n != 0 && o.n != a.n())
      throw UsageError("--n " + std::to_string(o.n) + " does not match the file order " +
                       std::to_string(a.n()));
    return a;
  }
  if (o.n < 1) throw UsageError("--n must be >= 1");
  if (o.matrix == "frank") return frank_matrix(o.n);
  if (o.matrix == "diag") {
    std::vector<double> d(static_cast<std::size_t>(o.n));
    for (int i = 0; i < o.n; ++i) d[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
    return DenseMatrix::diagonal(d);
  }
  return random_symmetric(o.n, o.seed);
}

SolveConfig make_config(const Options& o, int n) {
  SolveConfig c;
  c.p_x = o.px;
  c.p_y = o.py;
  c.trd.reduce_impl = o.trd_reduce == "tree" ? ReduceImpl::BinaryTree : ReduceImpl::Allreduce;
  c.trd.pivot_send = o.trd_pivot == "blocking" ? PivotSend::Blocking : PivotSend::NonBlockingPresend;
  c.trd.presend_limit = c.trd.pivot_send == PivotSend::Blocking ? 0 : presend_limit_for(o.presend_frac, n);
  c.hit.gather = o.hit_gather == "bcast"   ? GatherImpl::PerVectorBcast
                 : o.hit_gather == "isend" ? GatherImpl::NonBlockingSend
                                           : GatherImpl::BlockBcast;
  c.hit.mblk = o.mblk;
  c.mems = MemsParams{o.ml, o.el, o.tol};
  c.reorth = o.reorth == "owned" ? ReorthScope::OwnedOnly : ReorthScope::GlobalCluster;
  c.perturb_eigenvalue = o.perturb;
  if (o.matrix == "frank") c.exact = frank_eigenvalues(n);
  if (o.matrix == "diag") {
    std::vector<double> d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = static_cast<double>(n - i);
    c.exact = d;
  }
  return c;
}

CostMetric parse_metric(const std::string& m) {
  if (m == "bytes") return CostMetric::ByteVolume;
  if (m == "time") return CostMetric::WallTime;
  return CostMetric::MessageCount;
}

void print_breakdown(std::ostream& out, const std::string& title, const nlohmann::json& b,
                     const std::vector<std::string>& order) {
  out << title << '\n'
      << "  " << std::left << std::setw(15) << "category" << std::right << std::setw(12)
      << "invocations" << std::setw(12) << "messages" << std::setw(14) << "bytes"
      << std::setw(12) << "seconds" << '\n';
  for (const auto& name : order) {
    const auto& e = b.at(name);
    out << "  " << std::left << std::setw(15) << name << std::right << std::setw(12)
        << e["invocations"].get<std::uint64_t>() << std::setw(12)
        << e["messages"].get<std::uint64_t>() << std::setw(14) << e["bytes"].get<std::uint64_t>()
        << std::setw(12) << std::fixed << std::setprecision(6) << e["seconds"].get<double>()
        << '\n';
    out.unsetf(std::ios::fixed);
  }
}

// Prints the metrics and returns the violations.
std::vector<Violation> print_accuracy(std::ostream& out, const EigenResult& r, const DenseMatrix& a) {
  const AccuracyReport& acc = *r.accuracy;
  const double lmax = spectral_radius(r.eigenvalues);
  const Bounds b;
  auto line = [&](const char* name, std::optional<double> v, double bound) {
    out << "  " << std::left << std::setw(14) << name << std::right;
    if (v)
      out << std::scientific << std::setprecision(3) << std::setw(11) << *v << "  bound "
          << bound << (*v <= bound ? "  ok" : "  FAIL") << '\n';
    else
      out << "          -  (no reference spectrum)\n";
    out.unsetf(std::ios::scientific);
  };
  out << "accuracy\n";
  line("max_eval_err", acc.max_eval_err, b.eval_rel * lmax);
  line("orth_err", acc.orth_err, b.orth);
  line("max_residual", acc.max_residual, b.residual_rel * a.norm_fro());
  return check_bounds(acc, lmax, a.norm_fro(), b);
}

void print_spectrum(std::ostream& out, const EigenResult& r) {
  out << "eigenvalues (" << r.n << ", descending):";
  const std::size_t n = r.eigenvalues.size();
  out << std::setprecision(15);
  for (std::size_t k = 0; k < n; ++k) {
    if (n > 8 && k == 4) {
      out << " ...";
      k = n - 4;
    }
    out << ' ' << r.eigenvalues[k];
  }
  out << std::setprecision(6) << '\n';
}

int cmd_solve(const Options& o, std::ostream& out, bool force_verify) {
  const DenseMatrix a = load_matrix(o);
  SolveConfig cfg = make_config(o, a.n());
  cfg.verify = o.verify || force_verify;
  const EigenResult r = solve(a, cfg);

  out << "grid " << cfg.p_x << "x" << cfg.p_y << ", n = " << a.n() << '\n';
  print_spectrum(out, r);
  const auto trd = trd_breakdown(r.stats.trd, r.trd_times);
  const auto hit = hit_breakdown(r.stats.hit, r.hit_times);
  print_breakdown(out, "TRD", trd, trd_categories());
  out << "SEPT\n  messages " << r.stats.sept.total_messages() << ", seconds "
      << r.sept_seconds << '\n';
  print_breakdown(out, "HIT", hit, hit_categories());

  std::vector<Violation> bad;
  if (r.accuracy) bad = print_accuracy(out, r, a);
  if (!o.report.empty()) {
    auto doc = report_header({force_verify ? "verify" : "solve", o.matrix, a.n(), o.seed}, cfg);
    add_solve(doc, r, a);
    write_report(o.report, doc);
  }
  if (!bad.empty()) {
    for (const auto& v : bad)
      out << "verification failed: " << v.metric << " = " << v.value << " exceeds " << v.bound
          << '\n';
    return kExitVerifyFailed;
  }
  if (r.accuracy) out << "verification passed\n";
  return kExitOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const DenseMatrix a = load_matrix(o);
  const int p = o.procs > 0 ? o.procs : o.px * o.py;
  SolveConfig base = make_config(o, a.n());
  auto doc = report_header({"bench", o.matrix, a.n(), o.seed}, base);
  nlohmann::json rows = nlohmann::json::array();
  out << std::left << std::setw(8) << "shape";
  for (const auto& c : trd_categories()) out << std::right << std::setw(15) << ("trd:" + c);
  out << std::setw(15) << "hit:Send Piv" << std::setw(12) << "messages" << std::setw(14)
      << "bytes" << '\n';
  for (const auto& [px, py] : grid_shapes(p)) {
    SolveConfig cfg = base;
    cfg.p_x = px;
    cfg.p_y = py;
    const EigenResult r = solve(a, cfg);
    const auto trd = trd_breakdown(r.stats.trd, r.trd_times);
    const auto hit = hit_breakdown(r.stats.hit, r.hit_times);
    msgnet::CommStats all = r.stats.trd;
    all += r.stats.sept;
    all += r.stats.hit;
    rows.push_back({{"p_x", px},
                    {"p_y", py},
                    {"trd", trd},
                    {"sept", {{"seconds", r.sept_seconds}, {"messages", r.stats.sept.total_messages()}}},
                    {"hit", hit},
                    {"counters", counters_json(all)},
                    {"totals", totals_json(r.totals)}});
    std::ostringstream shape;
    shape << px << "x" << py;
    out << std::left << std::setw(8) << shape.str() << std::right;
    for (const auto& c : trd_categories())
      out << std::setw(15) << trd.at(c)["messages"].get<std::uint64_t>();
    out << std::setw(15) << hit.at("Send Piv")["messages"].get<std::uint64_t>() << std::setw(12)
        << all.total_messages() << std::setw(14) << all.total_bytes() << '\n';
  }
  doc["procs"] = p;
  doc["bench"] = rows;
  if (!o.report.empty()) write_report(o.report, doc);
  return kExitOk;
}

std::vector<int> parse_mblk_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw UsageError("malformed --mblk-list entry '" + item + "'");
    }
    if (used != item.size() || v < 1) throw UsageError("malformed --mblk-list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--mblk-list needs at least one value");
  return out;
}

int cmd_tune(const Options& o, bool mblk_list_given, std::ostream& out) {
  const DenseMatrix a = load_matrix(o);
  SolveConfig base = make_config(o, a.n());
  TuneSpace space;
  if (mblk_list_given) space.mblk = parse_mblk_list(o.mblk_list);
  const CostMetric metric = parse_metric(o.metric);

  TuneResult tr;
  if (o.tune_shapes) {
    const int p = o.procs > 0 ? o.procs : o.px * o.py;
    ShapeTuneResult st = tune_shapes(a, base, grid_shapes(p), space, metric);
    base.p_x = st.p_x;
    base.p_y = st.p_y;
    tr = std::move(st.result);
    out << "best grid " << st.p_x << "x" << st.p_y << " (cost " << st.cost << ")\n";
  } else {
    tr = tune(space, solver_runner(a, base), metric);
  }
  out << "metric " << to_string(metric) << ", evaluations: trd " << tr.evaluations(TunePhase::Trd)
      << ", hit " << tr.evaluations(TunePhase::Hit) << '\n';
  for (const auto& e : tr.trace)
    out << "  " << (e.phase == TunePhase::Trd ? "trd" : "hit") << " step " << e.step << "  "
        << describe(e.config) << "  cost " << e.cost << '\n';
  out << "best: " << describe(tr.best) << '\n';
  if (!o.report.empty()) {
    auto doc = report_header({"tune", o.matrix, a.n(), o.seed}, base);
    doc["tuning"] = tune_json(tr, metric);
    write_report(o.report, doc);
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Distributed dense symmetric eigensolver on simulated processes", "smalleig"};
  app.require_subcommand(1);
  auto* solve_cmd = app.add_subcommand("solve", "Solve one eigenproblem");
  add_solver_flags(solve_cmd, o);
  solve_cmd->add_flag("--verify", o.verify, "Check accuracy bounds");
  auto* bench_cmd = app.add_subcommand("bench", "Counters over every grid shape of P processes");
  add_solver_flags(bench_cmd, o);
  bench_cmd->add_option("--procs", o.procs, "Process count (default px * py)")
      ->check(CLI::PositiveNumber);
  auto* tune_cmd = app.add_subcommand("tune", "Search the communication variants");
  add_solver_flags(tune_cmd, o);
  tune_cmd->add_option("--metric", o.metric, "Cost metric")
      ->check(CLI::IsMember({"messages", "bytes", "time"}));
  auto* list_opt = tune_cmd->add_option("--mblk-list", o.mblk_list, "Comma-separated MBLK candidates");
  tune_cmd->add_flag("--tune-shapes", o.tune_shapes, "Also search the grid shape");
  tune_cmd->add_option("--procs", o.procs, "Process count for --tune-shapes")
      ->check(CLI::PositiveNumber);
  auto* verify_cmd = app.add_subcommand("verify", "Solve and check the accuracy bounds");
  add_solver_flags(verify_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(o, out, false);
    if (verify_cmd->parsed()) return cmd_solve(o, out, true);
    if (bench_cmd->parsed()) return cmd_bench(o, out);
    return cmd_tune(o, list_opt->count() > 0, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace smalleig
