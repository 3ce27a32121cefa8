#include "strange/replay/replay.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "strange/errors.hpp"

namespace strange::replay {

namespace {

void check_agent_vectors(const envs::EnvSpec& spec, const std::vector<std::vector<float>>& obs, int t,
                         const char* what) {
  if (static_cast<int>(obs.size()) != spec.n_agents) {
    throw ValidationError("episode step " + std::to_string(t) + ": " + what + " has wrong agent count");
  }
  for (const auto& o : obs) {
    if (static_cast<int>(o.size()) != spec.obs_dim) {
      throw ValidationError("episode step " + std::to_string(t) + ": " + what + " has wrong dimension");
    }
  }
}

}  // namespace

int MiniBatch::valid_steps() const {
  double s = 0.0;
  for (float m : mask.values()) s += m;
  return static_cast<int>(s);
}

nn::Tensor MiniBatch::agent_obs(int t, int agent) const {
  const nn::Tensor& all = obs.at(static_cast<std::size_t>(t));
  nn::Tensor out({batch, obs_dim});
  for (int b = 0; b < batch; ++b) {
    const auto src = all.row(b * n_agents + agent);
    std::copy(src.begin(), src.end(), out.row(b).begin());
  }
  return out;
}

StoredEpisode compact_episode(const envs::EnvSpec& spec, const EpisodeRecord& episode) {
  if (episode.empty()) throw ValidationError("episode has no transitions");
  if (static_cast<int>(episode.size()) > spec.max_steps) throw ValidationError("episode longer than max_steps");
  StoredEpisode out;
  out.length = static_cast<int>(episode.size());
  for (int t = 0; t < out.length; ++t) {
    const Transition& tr = episode[static_cast<std::size_t>(t)];
    check_agent_vectors(spec, tr.obs, t, "obs");
    check_agent_vectors(spec, tr.next_obs, t, "next_obs");
    if (static_cast<int>(tr.state.size()) != spec.state_dim || static_cast<int>(tr.next_state.size()) != spec.state_dim) {
      throw ValidationError("episode step " + std::to_string(t) + ": state has wrong dimension");
    }
    if (static_cast<int>(tr.actions.size()) != spec.n_agents) {
      throw ValidationError("episode step " + std::to_string(t) + ": wrong action count");
    }
    for (int a : tr.actions) {
      if (a < 0 || a >= spec.n_actions) throw ValidationError("episode step " + std::to_string(t) + ": action out of range");
    }
    if (tr.terminal && t + 1 != out.length) throw ValidationError("terminal flag before the final transition");
    if (t > 0) {
      const Transition& prev = episode[static_cast<std::size_t>(t - 1)];
      if (prev.next_obs != tr.obs || prev.next_state != tr.state) {
        throw ValidationError("broken chain: next_obs/next_state of step " + std::to_string(t - 1) +
                              " differ from obs/state of step " + std::to_string(t));
      }
    }
    for (const auto& o : tr.obs) out.obs.insert(out.obs.end(), o.begin(), o.end());
    out.state.insert(out.state.end(), tr.state.begin(), tr.state.end());
    out.actions.insert(out.actions.end(), tr.actions.begin(), tr.actions.end());
    out.reward.push_back(tr.r_ext);
    out.terminal.push_back(tr.terminal ? 1 : 0);
  }
  const Transition& last = episode.back();
  for (const auto& o : last.next_obs) out.obs.insert(out.obs.end(), o.begin(), o.end());
  out.state.insert(out.state.end(), last.next_state.begin(), last.next_state.end());
  return out;
}

int MiniBatch::active(int t) const {
  int n = 0;
  while (n < batch && lengths[static_cast<std::size_t>(n)] > t) ++n;
  return n;
}

MiniBatch make_batch(const envs::EnvSpec& spec, std::span<const StoredEpisode* const> input) {
  if (input.empty()) throw UsageError("make_batch: no episodes");
  std::vector<const StoredEpisode*> episodes(input.begin(), input.end());
  std::stable_sort(episodes.begin(), episodes.end(),
                   [](const StoredEpisode* a, const StoredEpisode* b) { return a->length > b->length; });
  MiniBatch mb;
  mb.batch = static_cast<int>(episodes.size());
  mb.n_agents = spec.n_agents;
  mb.obs_dim = spec.obs_dim;
  mb.state_dim = spec.state_dim;
  mb.n_actions = spec.n_actions;
  for (const StoredEpisode* e : episodes) {
    mb.max_len = std::max(mb.max_len, e->length);
    mb.lengths.push_back(e->length);
  }
  const int B = mb.batch;
  const int N = mb.n_agents;
  const int T = mb.max_len;
  const std::size_t agent_block = static_cast<std::size_t>(N) * spec.obs_dim;
  for (int t = 0; t <= T; ++t) {
    nn::Tensor o({B * N, spec.obs_dim});
    nn::Tensor s({B, spec.state_dim});
    for (int b = 0; b < B; ++b) {
      const StoredEpisode& e = *episodes[static_cast<std::size_t>(b)];
      if (t > e.length) continue;
      std::copy_n(e.obs.data() + static_cast<std::size_t>(t) * agent_block, agent_block,
                  o.data() + static_cast<std::size_t>(b) * agent_block);
      std::copy_n(e.state.data() + static_cast<std::size_t>(t) * spec.state_dim, spec.state_dim,
                  s.data() + static_cast<std::size_t>(b) * spec.state_dim);
    }
    mb.obs.push_back(std::move(o));
    mb.state.push_back(std::move(s));
  }
  mb.reward = nn::Tensor({T, B});
  mb.terminal = nn::Tensor({T, B});
  mb.mask = nn::Tensor({T, B});
  for (int t = 0; t < T; ++t) {
    std::vector<int> acts(static_cast<std::size_t>(B) * N, 0);
    for (int b = 0; b < B; ++b) {
      const StoredEpisode& e = *episodes[static_cast<std::size_t>(b)];
      if (t >= e.length) continue;
      for (int i = 0; i < N; ++i) {
        acts[static_cast<std::size_t>(b) * N + i] = e.actions[static_cast<std::size_t>(t) * N + i];
      }
      mb.reward.at(t, b) = e.reward[static_cast<std::size_t>(t)];
      mb.terminal.at(t, b) = e.terminal[static_cast<std::size_t>(t)] ? 1.0f : 0.0f;
      mb.mask.at(t, b) = 1.0f;
    }
    mb.actions.push_back(std::move(acts));
  }
  return mb;
}

ReplayMemory::ReplayMemory(envs::EnvSpec spec, int capacity) : spec_(spec), capacity_(capacity) {
  spec_.validate();
  if (capacity < 1) throw ValidationError("replay capacity must be >= 1");
}

void ReplayMemory::push_episode(const EpisodeRecord& episode) {
  StoredEpisode stored = compact_episode(spec_, episode);
  if (static_cast<int>(episodes_.size()) == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(stored));
  ++inserted_;
}

MiniBatch ReplayMemory::gather(std::span<const int> requested) const {
  std::vector<int> positions(requested.begin(), requested.end());
  for (int p : positions) {
    if (p < 0 || p >= size()) throw UsageError("gather: position " + std::to_string(p) + " out of range");
  }
  std::stable_sort(positions.begin(), positions.end(), [this](int a, int b) {
    return episodes_[static_cast<std::size_t>(a)].length > episodes_[static_cast<std::size_t>(b)].length;
  });
  std::vector<const StoredEpisode*> picked;
  picked.reserve(positions.size());
  for (int p : positions) picked.push_back(&episodes_.at(static_cast<std::size_t>(p)));
  MiniBatch mb = make_batch(spec_, picked);
  for (int p : positions) mb.episode_ids.push_back(static_cast<int>(id_at(p)));
  return mb;
}

std::optional<MiniBatch> ReplayMemory::sample(int batch_size, nn::Rng& rng) const {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (size() < batch_size) return std::nullopt;
  std::vector<int> idx(static_cast<std::size_t>(size()));
  std::iota(idx.begin(), idx.end(), 0);
  for (int k = 0; k < batch_size; ++k) {
    const auto j = static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(size() - k));
    std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(batch_size));
  return gather(idx);
}

void ReplayMemory::save(nn::CheckpointWriter& out, const std::string& module) const {
  std::ostringstream meta;
  meta << "capacity " << capacity_ << "\ninserted " << inserted_ << "\nepisodes " << episodes_.size() << "\nlengths";
  for (const auto& e : episodes_) meta << ' ' << e.length;
  meta << '\n';
  out.text(module + ".meta", meta.str());
  if (episodes_.empty()) return;

  const int N = spec_.n_agents;
  int steps = 0;
  for (const auto& e : episodes_) steps += e.length;
  const int rows = steps + static_cast<int>(episodes_.size());
  nn::Tensor obs({rows, N * spec_.obs_dim});
  nn::Tensor state({rows, spec_.state_dim});
  nn::Tensor actions({steps, N});
  nn::Tensor reward({steps});
  nn::Tensor terminal({steps});
  std::size_t orow = 0;
  std::size_t srow = 0;
  for (const auto& e : episodes_) {
    std::copy(e.obs.begin(), e.obs.end(), obs.data() + orow * static_cast<std::size_t>(N) * spec_.obs_dim);
    std::copy(e.state.begin(), e.state.end(), state.data() + orow * static_cast<std::size_t>(spec_.state_dim));
    orow += static_cast<std::size_t>(e.length) + 1;
    for (int t = 0; t < e.length; ++t) {
      for (int i = 0; i < N; ++i) {
        actions[srow * N + i] = static_cast<float>(e.actions[static_cast<std::size_t>(t) * N + i]);
      }
      reward[srow] = e.reward[static_cast<std::size_t>(t)];
      terminal[srow] = e.terminal[static_cast<std::size_t>(t)];
      ++srow;
    }
  }
  out.tensors(module, {{"obs", &obs}, {"state", &state}, {"actions", &actions}, {"reward", &reward},
                       {"terminal", &terminal}});
}

void ReplayMemory::load(nn::CheckpointReader& in, const std::string& module) {
  const nn::CheckpointBlock meta = in.expect("text", module + ".meta");
  std::istringstream ms(meta.text);
  std::string key;
  int capacity = 0;
  std::size_t count = 0;
  std::uint64_t inserted = 0;
  if (!(ms >> key >> capacity) || key != "capacity" || !(ms >> key >> inserted) || key != "inserted" ||
      !(ms >> key >> count) || key != "episodes" || !(ms >> key) || key != "lengths") {
    throw IoError("checkpoint: malformed replay metadata");
  }
  std::vector<int> lengths(count);
  for (auto& l : lengths) {
    if (!(ms >> l) || l < 1) throw IoError("checkpoint: malformed replay lengths");
  }
  std::deque<StoredEpisode> episodes;
  if (count > 0) {
    const nn::CheckpointBlock data = in.expect("tensors", module);
    if (data.tensors.size() != 5) throw IoError("checkpoint: replay block needs 5 tensors");
    const nn::Tensor& obs = data.tensors[0].second;
    const nn::Tensor& state = data.tensors[1].second;
    const nn::Tensor& actions = data.tensors[2].second;
    const nn::Tensor& reward = data.tensors[3].second;
    const nn::Tensor& terminal = data.tensors[4].second;
    const int N = spec_.n_agents;
    const std::size_t steps = static_cast<std::size_t>(std::accumulate(lengths.begin(), lengths.end(), 0));
    if (obs.cols() != N * spec_.obs_dim || state.cols() != spec_.state_dim ||
        static_cast<std::size_t>(obs.rows()) != steps + count || reward.size() != steps || terminal.size() != steps ||
        actions.size() != steps * N) {
      throw IoError("checkpoint: replay shape table does not match the environment");
    }
    std::size_t orow = 0;
    std::size_t srow = 0;
    for (int len : lengths) {
      StoredEpisode e;
      e.length = len;
      const std::size_t orows = static_cast<std::size_t>(len) + 1;
      e.obs.assign(obs.data() + orow * obs.cols(), obs.data() + (orow + orows) * obs.cols());
      e.state.assign(state.data() + orow * state.cols(), state.data() + (orow + orows) * state.cols());
      orow += orows;
      for (int t = 0; t < len; ++t) {
        for (int i = 0; i < N; ++i) e.actions.push_back(static_cast<int>(actions[srow * N + i]));
        e.reward.push_back(reward[srow]);
        e.terminal.push_back(terminal[srow] != 0.0f ? 1 : 0);
        ++srow;
      }
      episodes.push_back(std::move(e));
    }
  }
  capacity_ = capacity;
  inserted_ = inserted;
  episodes_ = std::move(episodes);
}

}  // namespace strange::replay
