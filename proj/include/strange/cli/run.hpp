#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "strange/trainer/trainer.hpp"

namespace strange::cli {

/// Writes the resolved config and the full run state. The file is written
/// to a temporary name first and renamed into place.
void save_checkpoint(const trainer::Trainer& run, const std::string& path);
/// Rebuilds a Trainer from a checkpoint written by save_checkpoint.
std::unique_ptr<trainer::Trainer> load_checkpoint(const std::string& path);

struct ManifestSeed {
  std::uint64_t seed = 0;
  std::string metrics_path;
  std::string status = "pending";  ///< pending | ok | failed: <reason>
};

struct RunManifest {
  std::string config;  ///< serialized resolved config
  std::string out_dir;
  std::vector<ManifestSeed> seeds;
  std::string started;
  std::string finished;
  std::string status = "running";
};

std::string manifest_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& path);
/// Current UTC time, ISO 8601.
std::string utc_now();

/// Trains one seed into `dir` (metrics.csv, checkpoint.smck). Periodic
/// checkpoints follow train.checkpoint_interval.
std::vector<trainer::MetricsRow> train_one(const trainer::TrainConfig& config, const std::string& dir);
/// Continues a checkpointed run to its step budget, writing into `dir`.
std::vector<trainer::MetricsRow> resume_run(const std::string& checkpoint, const std::string& dir);

/// Runs every seed in its own subdirectory, then writes aggregate.csv.
/// A failing seed is recorded in the manifest and the remaining seeds
/// still run; returns false if any seed failed. Fewer than two seeds is a
/// UsageError.
bool sweep(const trainer::TrainConfig& config, const std::vector<std::uint64_t>& seeds, const std::string& out_dir);

}  // namespace strange::cli
