#include "strange/cli/metrics_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "strange/errors.hpp"

namespace strange::cli {

namespace {

using trainer::MetricsRow;

std::string g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string g6(const std::optional<double>& v) { return v ? g6(*v) : ""; }

std::vector<std::optional<double>> values_of(const MetricsRow& r) {
  return {static_cast<double>(r.env_steps), static_cast<double>(r.episodes), r.train_loss_goal, r.train_loss_exp,
          r.mean_r_int, r.epsilon, r.eval_return_mean, r.eval_episode_length_mean, r.eval_win_or_solve_rate,
          r.q_goal_mean, r.q_exp_mean};
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << body;
  if (!out.flush()) throw IoError("write failed for '" + path + "'");
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "env_steps", "episodes", "train_loss_goal", "train_loss_exp", "mean_r_int", "epsilon", "eval_return_mean",
      "eval_episode_length_mean", "eval_win_or_solve_rate", "q_goal_mean", "q_exp_mean"};
  return cols;
}

std::string format_metrics(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const MetricsRow& r : rows) {
    os << r.env_steps << ',' << r.episodes << ',' << g6(r.train_loss_goal) << ',' << g6(r.train_loss_exp) << ','
       << g6(r.mean_r_int) << ',' << g6(r.epsilon) << ',' << g6(r.eval_return_mean) << ','
       << g6(r.eval_episode_length_mean) << ',' << g6(r.eval_win_or_solve_rate) << ',' << g6(r.q_goal_mean) << ','
       << g6(r.q_exp_mean) << '\n';
  }
  return os.str();
}

void write_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
  if (rows.empty()) throw UsageError("write_metrics: no rows");
  write_file(path, format_metrics(rows));
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty metrics file");
  std::vector<MetricsRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != metrics_columns().size()) {
      throw IoError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    }
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    MetricsRow r;
    r.env_steps = std::stoll(f[0]);
    r.episodes = std::stoll(f[1]);
    r.train_loss_goal = opt(f[2]);
    r.train_loss_exp = opt(f[3]);
    r.mean_r_int = opt(f[4]);
    r.epsilon = std::stod(f[5]);
    r.eval_return_mean = std::stod(f[6]);
    r.eval_episode_length_mean = std::stod(f[7]);
    r.eval_win_or_solve_rate = std::stod(f[8]);
    r.q_goal_mean = opt(f[9]);
    r.q_exp_mean = opt(f[10]);
    rows.push_back(r);
  }
  return rows;
}

Aggregate mean_ci95(const std::vector<double>& values) {
  if (values.size() < 2) throw UsageError("mean_ci95: need at least two values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n), static_cast<int>(values.size())};
}

std::vector<AggregateRow> aggregate_runs(const std::vector<std::vector<MetricsRow>>& runs) {
  if (runs.size() < 2) throw UsageError("aggregate_runs: need at least two runs");
  std::size_t count = runs.front().size();
  for (const auto& r : runs) count = std::min(count, r.size());
  std::vector<AggregateRow> out;
  for (std::size_t i = 0; i < count; ++i) {
    AggregateRow row;
    for (std::size_t c = 0; c < metrics_columns().size(); ++c) {
      std::vector<double> vals;
      for (const auto& run : runs) {
        const auto v = values_of(run[i])[c];
        if (v) vals.push_back(*v);
      }
      if (vals.size() >= 2) {
        row.columns.push_back(mean_ci95(vals));
      } else if (vals.size() == 1) {
        row.columns.push_back({vals[0], std::nan(""), 1});
      } else {
        row.columns.push_back({std::nan(""), std::nan(""), 0});
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_aggregate(const std::vector<AggregateRow>& rows, const std::string& path) {
  std::ostringstream os;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i] << "_mean," << cols[i] << "_ci95";
  os << '\n';
  auto cell = [](double v) { return std::isnan(v) ? std::string() : g6(v); };
  for (const AggregateRow& r : rows) {
    for (std::size_t i = 0; i < r.columns.size(); ++i) {
      os << (i ? "," : "") << cell(r.columns[i].mean) << ',' << cell(r.columns[i].half_width);
    }
    os << '\n';
  }
  write_file(path, os.str());
}

}  // namespace strange::cli
