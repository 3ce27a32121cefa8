#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "strange/envs/env.hpp"
#include "strange/nn/checkpoint.hpp"
#include "strange/nn/rng.hpp"
#include "strange/nn/tensor.hpp"

namespace strange::replay {

/// (z_t, s_t, u_t, r_ext_t, z_{t+1}, s_{t+1}, terminal_t)
struct Transition {
  std::vector<std::vector<float>> obs;
  std::vector<float> state;
  std::vector<int> actions;
  float r_ext = 0.0f;
  std::vector<std::vector<float>> next_obs;
  std::vector<float> next_state;
  bool terminal = false;
};

using EpisodeRecord = std::vector<Transition>;

/// Compact episode: observations and states for steps 0..length, so the
/// chaining z_{t+1} == next z_t holds by construction.
struct StoredEpisode {
  int length = 0;
  std::vector<float> obs;      ///< (length + 1) x N x obs_dim
  std::vector<float> state;    ///< (length + 1) x state_dim
  std::vector<int> actions;    ///< length x N
  std::vector<float> reward;   ///< length
  std::vector<std::uint8_t> terminal;  ///< length
};

/// Whole episodes padded to a common length with a validity mask.
///
/// Episodes are ordered by non-increasing length, so the episodes still
/// running at step t are a prefix of the batch (see active()). Rows of every
/// per-agent tensor are ordered (episode b, agent i) with the agent index
/// fastest. Step tensors beyond an episode's end are zero and masked out.
struct MiniBatch {
  int batch = 0;
  int max_len = 0;
  int n_agents = 0;
  int obs_dim = 0;
  int state_dim = 0;
  int n_actions = 0;
  std::vector<nn::Tensor> obs;             ///< max_len + 1 entries of [B*N x obs_dim]
  std::vector<nn::Tensor> state;           ///< max_len + 1 entries of [B x state_dim]
  std::vector<std::vector<int>> actions;   ///< max_len entries of B*N action ids
  nn::Tensor reward;    ///< [max_len x B]
  nn::Tensor terminal;  ///< [max_len x B], 1 on terminal steps
  nn::Tensor mask;      ///< [max_len x B], 1 on real steps
  std::vector<int> lengths;
  std::vector<int> episode_ids;  ///< insertion ids of the sampled episodes

  int valid_steps() const;
  /// Number of episodes with a transition at step t (length > t).
  int active(int t) const;
  /// Observations of agent `agent` at time t: [B x obs_dim].
  nn::Tensor agent_obs(int t, int agent) const;
};

/// Episode-granular FIFO replay memory.
class ReplayMemory {
 public:
  ReplayMemory(envs::EnvSpec spec, int capacity);

  /// Validates dimensions, action ranges, terminal placement and chaining,
  /// then stores the episode, evicting the oldest one when full.
  void push_episode(const EpisodeRecord& episode);
  /// Uniform sample without replacement; nullopt when fewer than
  /// `batch_size` episodes are stored.
  std::optional<MiniBatch> sample(int batch_size, nn::Rng& rng) const;
  /// Batch of the stored episodes at the given positions (0 = oldest),
  /// reordered by non-increasing length; `episode_ids` follow that order.
  MiniBatch gather(std::span<const int> positions) const;

  int size() const { return static_cast<int>(episodes_.size()); }
  int capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  const envs::EnvSpec& spec() const { return spec_; }
  const StoredEpisode& episode(int position) const { return episodes_.at(static_cast<std::size_t>(position)); }
  /// Insertion id of the episode at `position`.
  std::uint64_t id_at(int position) const { return inserted_ - episodes_.size() + static_cast<std::uint64_t>(position); }

  void save(nn::CheckpointWriter& out, const std::string& module) const;
  void load(nn::CheckpointReader& in, const std::string& module);

 private:
  envs::EnvSpec spec_;
  int capacity_;
  std::uint64_t inserted_ = 0;
  std::deque<StoredEpisode> episodes_;
};

/// Batch built directly from stored episodes (no memory involved), ordered
/// by non-increasing length with ties kept in input order.
MiniBatch make_batch(const envs::EnvSpec& spec, std::span<const StoredEpisode* const> episodes);
StoredEpisode compact_episode(const envs::EnvSpec& spec, const EpisodeRecord& episode);

}  // namespace strange::replay
