#pragma once

// Run reports: a versioned JSON document per run.

#include <string>
#include <vector>

#include "json.hpp"
#include "smalleig/autotune.hpp"
#include "smalleig/solver.hpp"

namespace smalleig {

inline constexpr const char* kReportSchema = "smalleig.run_report";
inline constexpr int kReportSchemaVersion = 1;

inline const std::vector<std::string>& trd_categories() {
  static const std::vector<std::string> c{"Send Piv", "Send yt", "Send xt", "MatVec Reduce",
                                          "Matvec",   "Update",  "Other"};
  return c;
}

inline const std::vector<std::string>& hit_categories() {
  static const std::vector<std::string> c{"Send Piv", "HIT Ker", "Other"};
  return c;
}

/// Report category that a counter category is booked under.
std::string trd_category_of(msgnet::Category c);
std::string hit_category_of(msgnet::Category c);

struct Bounds {
  double eval_rel = 1e-10;      // times lambda_max
  double orth = 1e-9;           // absolute
  double residual_rel = 1e-8;   // times ||A||_F
};

struct Violation {
  std::string metric;
  double value;
  double bound;
};

std::vector<Violation> check_bounds(const AccuracyReport& acc, double lambda_max,
                                    double norm_fro, const Bounds& b = {});

struct RunMeta {
  std::string command;
  std::string matrix;
  int n = 0;
  std::uint64_t seed = 0;
};

nlohmann::json counters_json(const msgnet::CommStats& s);
nlohmann::json totals_json(const msgnet::WorldTotals& t);
nlohmann::json trd_breakdown(const msgnet::CommStats& s, const PhaseTimes& t);
nlohmann::json hit_breakdown(const msgnet::CommStats& s, const PhaseTimes& t);
nlohmann::json config_json(const SolveConfig& c);
nlohmann::json accuracy_json(const AccuracyReport& acc, double lambda_max, double norm_fro,
                             const Bounds& b = {});
nlohmann::json tune_json(const TuneResult& r, CostMetric metric);

/// Document with schema header and run metadata; callers add sections.
nlohmann::json report_header(const RunMeta& meta, const SolveConfig& config);

/// Adds phase breakdowns, counters, totals and accuracy of one solve.
void add_solve(nlohmann::json& doc, const EigenResult& r, const DenseMatrix& a);

/// max |lambda| of a descending spectrum.
double spectral_radius(const std::vector<double>& descending);

void write_report(const std::string& path, const nlohmann::json& doc);

}  // namespace smalleig
