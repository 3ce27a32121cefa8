#include "strange/cli/run.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "strange/cli/config_io.hpp"
#include "strange/cli/metrics_io.hpp"
#include "strange/errors.hpp"
#include "strange/nn/checkpoint.hpp"

namespace strange::cli {

namespace fs = std::filesystem;

void save_checkpoint(const trainer::Trainer& run, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint '" + tmp + "'");
    nn::CheckpointWriter(os).text("config", serialize_config(run.config()));
    run.save(os);
    if (!os.flush()) throw IoError("checkpoint write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into '" + path + "': " + ec.message());
}

std::unique_ptr<trainer::Trainer> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint '" + path + "'");
  const nn::CheckpointBlock cfg = nn::CheckpointReader(is).expect("text", "config");
  auto run = std::make_unique<trainer::Trainer>(parse_config_text(cfg.text));
  run->load(is);
  return run;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config"] = m.config;
  j["out_dir"] = m.out_dir;
  j["seeds"] = nlohmann::ordered_json::array();
  for (const ManifestSeed& s : m.seeds) {
    j["seeds"].push_back({{"seed", s.seed}, {"metrics", s.metrics_path}, {"status", s.status}});
  }
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["status"] = m.status;
  return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << manifest_json(m);
  if (!out.flush()) throw IoError("manifest write failed for '" + path + "'");
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::vector<trainer::MetricsRow> drive(trainer::Trainer& run, const std::string& dir) {
  const std::string ckpt = (fs::path(dir) / "checkpoint.smck").string();
  run.run({}, [&](const trainer::Trainer& t) { save_checkpoint(t, ckpt); });
  save_checkpoint(run, ckpt);
  write_metrics(run.rows(), (fs::path(dir) / "metrics.csv").string());
  return run.rows();
}

}  // namespace

std::vector<trainer::MetricsRow> train_one(const trainer::TrainConfig& config, const std::string& dir) {
  ensure_dir(dir);
  trainer::Trainer run(config);
  return drive(run, dir);
}

std::vector<trainer::MetricsRow> resume_run(const std::string& checkpoint, const std::string& dir) {
  ensure_dir(dir);
  auto run = load_checkpoint(checkpoint);
  return drive(*run, dir);
}

bool sweep(const trainer::TrainConfig& config, const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  if (seeds.size() < 2) throw UsageError("sweep needs at least two seeds");
  ensure_dir(out_dir);
  RunManifest m;
  m.config = serialize_config(config);
  m.out_dir = out_dir;
  m.started = utc_now();
  for (std::uint64_t s : seeds) {
    m.seeds.push_back({s, (fs::path(out_dir) / ("seed_" + std::to_string(s)) / "metrics.csv").string(), "pending"});
  }
  const std::string manifest = (fs::path(out_dir) / "manifest.json").string();
  write_manifest(m, manifest);

  std::vector<std::vector<trainer::MetricsRow>> runs;
  bool ok = true;
  for (ManifestSeed& s : m.seeds) {
    trainer::TrainConfig c = config;
    c.seed = s.seed;
    try {
      runs.push_back(train_one(c, fs::path(s.metrics_path).parent_path().string()));
      s.status = "ok";
    } catch (const std::exception& e) {
      s.status = std::string("failed: ") + e.what();
      ok = false;
    }
    write_manifest(m, manifest);
  }
  if (runs.size() >= 2) write_aggregate(aggregate_runs(runs), (fs::path(out_dir) / "aggregate.csv").string());
  m.finished = utc_now();
  m.status = ok ? "ok" : "failed";
  write_manifest(m, manifest);
  return ok;
}

}  // namespace strange::cli
