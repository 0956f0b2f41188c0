#include "smalleig/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>

#include "smalleig/error.hpp"

namespace smalleig {

using msgnet::Category;
using nlohmann::json;

std::string trd_category_of(Category c) {
  switch (c) {
    case Category::PivotTrd: return "Send Piv";
    case Category::SendYt: return "Send yt";
    case Category::SendXt: return "Send xt";
    case Category::MatvecReduce: return "MatVec Reduce";
    default: return "Other";
  }
}

std::string hit_category_of(Category c) {
  return c == Category::GatherHit ? "Send Piv" : "Other";
}

std::vector<Violation> check_bounds(const AccuracyReport& acc, double lambda_max,
                                    double norm_fro, const Bounds& b) {
  std::vector<Violation> v;
  if (acc.max_eval_err && !(*acc.max_eval_err <= b.eval_rel * lambda_max))
    v.push_back({"max_eval_err", *acc.max_eval_err, b.eval_rel * lambda_max});
  if (!(acc.orth_err <= b.orth)) v.push_back({"orth_err", acc.orth_err, b.orth});
  if (!(acc.max_residual <= b.residual_rel * norm_fro))
    v.push_back({"max_residual", acc.max_residual, b.residual_rel * norm_fro});
  return v;
}

json counters_json(const msgnet::CommStats& s) {
  json j = json::object();
  for (Category c : msgnet::all_categories()) {
    const auto& k = s[c];
    json scopes = json::array();
    if (k.scopes & static_cast<std::uint8_t>(msgnet::Scope::World)) scopes.push_back("world");
    if (k.scopes & static_cast<std::uint8_t>(msgnet::Scope::Row)) scopes.push_back("row");
    if (k.scopes & static_cast<std::uint8_t>(msgnet::Scope::Column)) scopes.push_back("column");
    j[std::string(msgnet::category_name(c))] = {{"invocations", k.invocations},
                                                {"messages", k.messages},
                                                {"bytes", k.bytes},
                                                {"rounds", k.rounds},
                                                {"scopes", scopes}};
  }
  return j;
}

json totals_json(const msgnet::WorldTotals& t) {
  json inst = json::object();
  for (Category c : msgnet::all_categories())
    inst[std::string(msgnet::category_name(c))] = t.instances(c);
  return {{"messages_sent", t.messages_sent},
          {"messages_received", t.messages_received},
          {"bytes_sent", t.bytes_sent},
          {"bytes_received", t.bytes_received},
          {"collective_instances", inst}};
}

namespace {

json breakdown(const std::vector<std::string>& names, std::string (*of)(Category),
               const msgnet::CommStats& s, const PhaseTimes& t) {
  json j = json::object();
  for (const auto& name : names)
    j[name] = {{"seconds", t.get(name)}, {"invocations", 0}, {"messages", 0}, {"bytes", 0}};
  for (Category c : msgnet::all_categories()) {
    const auto& k = s[c];
    if (!k.invocations && !k.messages) continue;
    auto& e = j[of(c)];
    e["invocations"] = e["invocations"].get<std::uint64_t>() + k.invocations;
    e["messages"] = e["messages"].get<std::uint64_t>() + k.messages;
    e["bytes"] = e["bytes"].get<std::uint64_t>() + k.bytes;
  }
  return j;
}

}  // namespace

json trd_breakdown(const msgnet::CommStats& s, const PhaseTimes& t) {
  return breakdown(trd_categories(), &trd_category_of, s, t);
}

json hit_breakdown(const msgnet::CommStats& s, const PhaseTimes& t) {
  return breakdown(hit_categories(), &hit_category_of, s, t);
}

json config_json(const SolveConfig& c) {
  return {{"p", c.p_total()},
          {"p_x", c.p_x},
          {"p_y", c.p_y},
          {"trd", {{"reduce", to_string(c.trd.reduce_impl)},
                   {"pivot", to_string(c.trd.pivot_send)},
                   {"presend_limit", c.trd.presend_limit}}},
          {"hit", {{"gather", to_string(c.hit.gather)}, {"mblk", c.hit.mblk}}},
          {"mems", {{"ml", c.mems.ml}, {"el", c.mems.el}, {"tol", c.mems.tol}}},
          {"reorth", c.reorth == ReorthScope::GlobalCluster ? "cluster" : "owned"}};
}

json accuracy_json(const AccuracyReport& acc, double lambda_max, double norm_fro,
                   const Bounds& b) {
  json j;
  j["max_eval_err"] = acc.max_eval_err ? json(*acc.max_eval_err) : json(nullptr);
  j["orth_err"] = acc.orth_err;
  j["max_residual"] = acc.max_residual;
  j["bounds"] = {{"max_eval_err", b.eval_rel * lambda_max},
                 {"orth_err", b.orth},
                 {"max_residual", b.residual_rel * norm_fro}};
  const auto v = check_bounds(acc, lambda_max, norm_fro, b);
  json viol = json::array();
  for (const auto& x : v) viol.push_back(x.metric);
  j["violations"] = viol;
  j["pass"] = v.empty();
  return j;
}

json tune_json(const TuneResult& r, CostMetric metric) {
  json trace = json::array();
  for (const auto& e : r.trace)
    trace.push_back({{"phase", e.phase == TunePhase::Trd ? "trd" : "hit"},
                     {"step", e.step},
                     {"reduce", to_string(e.config.reduce)},
                     {"pivot", to_string(e.config.pivot.send)},
                     {"presend_frac", e.config.pivot.presend_frac},
                     {"gather", to_string(e.config.hit.gather)},
                     {"mblk", e.config.hit.mblk},
                     {"cost", e.cost}});
  return {{"metric", to_string(metric)},
          {"best", {{"reduce", to_string(r.best.reduce)},
                    {"pivot", to_string(r.best.pivot.send)},
                    {"presend_frac", r.best.pivot.presend_frac},
                    {"gather", to_string(r.best.hit.gather)},
                    {"mblk", r.best.hit.mblk}}},
          {"evaluations", {{"trd", r.evaluations(TunePhase::Trd)},
                           {"hit", r.evaluations(TunePhase::Hit)}}},
          {"trace", trace}};
}

json report_header(const RunMeta& meta, const SolveConfig& config) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  json doc;
  doc["schema"] = kReportSchema;
  doc["schema_version"] = kReportSchemaVersion;
  doc["command"] = meta.command;
  doc["meta"] = {{"n", meta.n}, {"matrix", meta.matrix}, {"seed", meta.seed}, {"timestamp", stamp}};
  doc["config"] = config_json(config);
  return doc;
}

void add_solve(json& doc, const EigenResult& r, const DenseMatrix& a) {
  doc["trd"] = trd_breakdown(r.stats.trd, r.trd_times);
  doc["sept"] = {{"seconds", r.sept_seconds}, {"messages", r.stats.sept.total_messages()}};
  doc["hit"] = hit_breakdown(r.stats.hit, r.hit_times);
  msgnet::CommStats all = r.stats.trd;
  all += r.stats.sept;
  all += r.stats.hit;
  doc["counters"] = counters_json(all);
  doc["totals"] = totals_json(r.totals);
  doc["wall_seconds"] = r.wall_seconds;
  doc["eigenvalues"] = r.eigenvalues;
  if (r.accuracy)
    doc["accuracy"] = accuracy_json(*r.accuracy, spectral_radius(r.eigenvalues), a.norm_fro());
}

double spectral_radius(const std::vector<double>& descending) {
  if (descending.empty()) return 0.0;
  return std::max(std::fabs(descending.front()), std::fabs(descending.back()));
}

void write_report(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing report to '" + path + "'");
}

}  // namespace smalleig
