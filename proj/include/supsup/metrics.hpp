#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace supsup {

struct MetricsRecord {
  std::vector<double> accuracy;     ///< per task, in [0, 1]
  std::vector<double> id_accuracy;  ///< per task, fraction of correctly inferred batches
  std::vector<double> seconds;      ///< per task wall time (0 unless timing was requested)
  double mean_accuracy = 0.0;
  double mean_id_accuracy = 0.0;
  std::size_t masks = 0;
  std::size_t bytes = 0;
  bool budget_exhausted = false;

  /// Recomputes the two means from the per-task vectors.
  void finalize();
};

inline constexpr std::string_view kMetricsHeader = "task,accuracy,id_accuracy,masks,bytes,seconds";

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view s);
/// Fixed six-decimal formatting, locale independent.
std::string csv_number(double v);

/// Header, one row per task ("0".."k-1"), then a "mean" row.
void write_metrics_csv(std::ostream& out, const MetricsRecord& record);

}  // namespace supsup
