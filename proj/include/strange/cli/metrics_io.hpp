#pragma once

#include <string>
#include <vector>

#include "strange/trainer/trainer.hpp"

namespace strange::cli {

/// Column names in file order.
const std::vector<std::string>& metrics_columns();

/// CSV with a fixed header, one line per row, reals with 6 significant
/// digits and absent values as empty fields. Throws UsageError on no rows
/// and IoError when the file cannot be written.
void write_metrics(const std::vector<trainer::MetricsRow>& rows, const std::string& path);
std::string format_metrics(const std::vector<trainer::MetricsRow>& rows);
std::vector<trainer::MetricsRow> read_metrics(const std::string& path);

/// Per-metric mean and normal-approximation 95% half-width over seeds.
struct Aggregate {
  double mean = 0.0;
  double half_width = 0.0;
  int n = 0;
};

/// mean and 1.96·s/√n with the sample standard deviation s. Needs n ≥ 2.
Aggregate mean_ci95(const std::vector<double>& values);

/// Rows aligned by index across seeds (the shortest run bounds the count).
/// Each column holds the aggregate of the seeds where the value exists.
struct AggregateRow {
  std::vector<Aggregate> columns;  ///< one per metrics column
};
std::vector<AggregateRow> aggregate_runs(const std::vector<std::vector<trainer::MetricsRow>>& runs);
void write_aggregate(const std::vector<AggregateRow>& rows, const std::string& path);

}  // namespace strange::cli
