#pragma once
/// Threshold tables over models, minimizers and batch-size columns.

#include "sgdk/experiments/models.hpp"
#include "sgdk/experiments/plan.hpp"
#include "sgdk/mechanism.hpp"
#include "sgdk/quadratic.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace sgdk {

struct ThresholdRow {
  std::string model;      ///< "<model>.<minimizer>"
  std::string k_token;
  ThresholdReport report;
  std::string error;      ///< nonempty when the row could not be computed
};

/// Batch-size columns: QC uses {1, 0.99 kmax, 2 kmax, inf} for both k_max
/// definitions, ST uses {1, 100, 200, 350, 500, inf}.
inline std::vector<KToken> default_k_tokens(const std::string& family) {
  if (family == "qc") return parse_k_list("1,0.99kmax_div,2kmax_div,0.99kmax_conv,2kmax_conv,inf");
  return parse_k_list("1,100,200,350,500,inf");
}

/// Rows for every (model, minimizer, k column); failures are recorded per row.
inline std::vector<ThresholdRow> threshold_table(const std::vector<Model>& models, const std::vector<KToken>& ks,
                                                 const GeometryOptions& opt = {},
                                                 const std::vector<std::string>& minimizers = {}) {
  std::vector<ThresholdRow> rows;
  for (const auto& m : models) {
    const auto names = minimizers.empty() ? minimizer_names(m) : minimizers;
    for (const auto& which : names) {
      const std::string label = model_name(m) + "." + which;
      try {
        const LocalGeometry g = model_local_geometry(m, which, opt);
        const ThresholdReport base = mechanism_thresholds(g, BatchSize::finite(1));
        for (const KToken& t : ks) {
          ThresholdRow row{label, t.text, {}, {}};
          try {
            row.report = mechanism_thresholds(g, t.resolve(base));
          } catch (const std::exception& e) {
            row.error = e.what();
          }
          rows.push_back(std::move(row));
        }
      } catch (const std::exception& e) {
        for (const KToken& t : ks) rows.push_back({label, t.text, {}, e.what()});
      }
    }
  }
  return rows;
}

/// Rows for a stochastic quadratic: homogeneous or inhomogeneous form chosen by the geometry.
inline std::vector<ThresholdRow> quadratic_threshold_table(const std::string& label, const StochasticQuadratic& q,
                                                           const std::vector<KToken>& ks) {
  std::vector<ThresholdRow> rows;
  const QuadraticGeometry g = expected_geometry(q);
  const ThresholdReport base = homogeneous_thresholds(g, BatchSize::finite(1));
  for (const KToken& t : ks) {
    ThresholdRow row{label, t.text, {}, {}};
    try {
      const BatchSize k = t.resolve(base);
      row.report = g.homogeneous ? homogeneous_thresholds(g, k) : inhomogeneous_thresholds(g, k);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const char* threshold_table_header() {
  return "model,column,k,regime,conv_ub,div_lb,j,gamma,kmax_div,kmax_conv";
}

/// CSV with the requested column token, the resolved k and the bounds; rows that failed carry NaN bounds.
inline void write_threshold_csv(std::ostream& os, const std::vector<ThresholdRow>& rows) {
  os << threshold_table_header() << '\n';
  for (const auto& r : rows) {
    if (r.error.empty()) {
      os << threshold_csv_row(r.model + ',' + r.k_token, r.report) << '\n';
    } else {
      os << r.model << ',' << r.k_token << ",nan,error,nan,nan,0,nan,0,0\n";
    }
  }
}

}  // namespace sgdk
