#pragma once

#include <string>
#include <vector>

#include "strange/envs/env.hpp"

namespace strange::envs {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// One room of the chain: the plate that opens it and the doorway it guards.
struct Room {
  Cell plate;
  Cell door;
  int agent = 0;  ///< agent whose presence on `plate` opens `door`
};

/// Static description of a PressurePlate level.
///
/// Text format: grid rows using `#` wall, `.` floor, `0`-`9` agent starts,
/// `a`-`j` plates, `A`-`J` doorways and `$` the chest, followed by one line
///
///   assign a=0 b=1 $=2
///
/// mapping every plate and the chest to a distinct agent. Rooms are ordered
/// by letter. Lines starting with `;` are comments.
struct PressurePlateLayout {
  int width = 0;
  int height = 0;
  std::vector<bool> walls;  ///< row-major, true for `#`
  std::vector<Room> rooms;
  Cell chest;
  int chest_agent = 0;
  std::vector<Cell> starts;

  int n_agents() const { return static_cast<int>(starts.size()); }
  bool wall(int x, int y) const;
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  static PressurePlateLayout parse(const std::string& text);
  static PressurePlateLayout load(const std::string& path);
  /// 9x19 level with three plate rooms plus the chest room, 4 agents.
  static PressurePlateLayout default_four_agent();
  /// Reduced level: one plate room plus the chest room, 2 agents.
  static PressurePlateLayout two_agent();
  /// Resolves "default4", "small2" or a file path.
  static PressurePlateLayout named(const std::string& name_or_path);
};

std::string default_four_agent_layout_text();
std::string two_agent_layout_text();

enum class Move { up = 0, down = 1, left = 2, right = 3, noop = 4 };

inline constexpr int kViewRadius = 2;
inline constexpr int kViewSide = 2 * kViewRadius + 1;
inline constexpr int kObservationLength = 4 * kViewSide * kViewSide + 2;

/// Local 5x5 view of agent `agent_id`: agents, walls (out-of-grid reads as
/// wall), closed doors, plates and chest; then normalized (x, y).
std::vector<float> pressureplate_observe(const PressurePlateLayout& layout, const std::vector<Cell>& positions,
                                         const std::vector<bool>& doors_open, int agent_id);

struct PressurePlateRewards {
  float door_first_open = 1.0f;
  float chest = 10.0f;
};

class PressurePlate final : public Environment {
 public:
  explicit PressurePlate(PressurePlateLayout layout, int max_steps = 250, PressurePlateRewards rewards = {});

  std::string name() const override { return "pressure_plate"; }
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(nn::Rng& rng) override;
  StepResult step(std::span<const int> joint_action) override;
  std::vector<float> state() const override;
  bool solved() const override { return solved_; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PressurePlate>(*this); }

  const PressurePlateLayout& layout() const { return layout_; }
  const std::vector<Cell>& positions() const { return positions_; }
  const std::vector<bool>& doors_open() const { return doors_open_; }

 private:
  bool door_open_now(std::size_t room) const;
  bool blocked(int agent, Cell target) const;
  void refresh_doors();
  StepResult observe(float reward) const;

  PressurePlateLayout layout_;
  PressurePlateRewards rewards_;
  EnvSpec spec_;
  std::vector<Cell> positions_;
  std::vector<bool> doors_open_;
  std::vector<bool> door_rewarded_;
  int step_ = 0;
  bool terminal_ = true;
  bool solved_ = false;
};

}  // namespace strange::envs
