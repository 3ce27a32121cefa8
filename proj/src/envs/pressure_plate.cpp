#include "strange/envs/pressure_plate.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "strange/errors.hpp"

namespace strange::envs {

namespace {

constexpr const char* kDefaultFourAgent =
    "; 4 agents, plates a-c guard doorways A-C, chest room on top\n"
    "#########\n"
    "#...$...#\n"
    "#.......#\n"
    "#.......#\n"
    "####C####\n"
    "#.......#\n"
    "#.c.....#\n"
    "#.......#\n"
    "#.......#\n"
    "###B#####\n"
    "#.......#\n"
    "#.....b.#\n"
    "#.......#\n"
    "#.......#\n"
    "#####A###\n"
    "#.a.....#\n"
    "#.......#\n"
    "#0.1.2.3#\n"
    "#########\n"
    "assign a=0 b=1 c=2 $=3\n";

constexpr const char* kTwoAgent =
    "; 2 agents, plate a guards doorway A, chest room on top\n"
    "#########\n"
    "#...$...#\n"
    "#.......#\n"
    "#.......#\n"
    "####A####\n"
    "#.......#\n"
    "#a......#\n"
    "#.......#\n"
    "#...0.1.#\n"
    "#########\n"
    "assign a=0 $=1\n";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string default_four_agent_layout_text() { return kDefaultFourAgent; }
std::string two_agent_layout_text() { return kTwoAgent; }

bool PressurePlateLayout::wall(int x, int y) const {
  if (!inside(x, y)) return true;
  return walls[static_cast<std::size_t>(y) * width + x];
}

PressurePlateLayout PressurePlateLayout::parse(const std::string& text) {
  std::istringstream is(text);
  std::string raw;
  std::vector<std::string> grid;
  std::string assign_line;
  while (std::getline(is, raw)) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == ';') continue;
    if (line.rfind("assign", 0) == 0) {
      if (!assign_line.empty()) throw ValidationError("layout: more than one assign line");
      assign_line = line.substr(6);
      continue;
    }
    if (!assign_line.empty()) throw ValidationError("layout: grid rows after the assign line");
    grid.push_back(line);
  }
  if (grid.empty()) throw ValidationError("layout: empty grid");
  if (assign_line.empty()) throw ValidationError("layout: missing assign line");

  PressurePlateLayout layout;
  layout.height = static_cast<int>(grid.size());
  layout.width = static_cast<int>(grid[0].size());
  layout.walls.assign(static_cast<std::size_t>(layout.width) * layout.height, false);

  std::map<int, Cell> starts;
  std::map<int, Cell> plates;
  std::map<int, Cell> doors;
  int chests = 0;
  for (int y = 0; y < layout.height; ++y) {
    if (static_cast<int>(grid[static_cast<std::size_t>(y)].size()) != layout.width) {
      throw ValidationError("layout: row " + std::to_string(y) + " has a different width");
    }
    for (int x = 0; x < layout.width; ++x) {
      const char c = grid[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      const Cell cell{x, y};
      if (c == '#') {
        layout.walls[static_cast<std::size_t>(y) * layout.width + x] = true;
      } else if (c == '.') {
      } else if (c >= '0' && c <= '9') {
        if (!starts.emplace(c - '0', cell).second) throw ValidationError(std::string("layout: duplicate agent ") + c);
      } else if (c >= 'a' && c <= 'j') {
        if (!plates.emplace(c - 'a', cell).second) throw ValidationError(std::string("layout: duplicate plate ") + c);
      } else if (c >= 'A' && c <= 'J') {
        if (!doors.emplace(c - 'A', cell).second) throw ValidationError(std::string("layout: duplicate doorway ") + c);
      } else if (c == '$') {
        layout.chest = cell;
        ++chests;
      } else {
        throw ValidationError(std::string("layout: unknown cell character '") + c + "'");
      }
    }
  }
  if (chests != 1) throw ValidationError("layout: exactly one chest ($) is required");
  if (starts.empty()) throw ValidationError("layout: no agents");
  for (int i = 0; i < static_cast<int>(starts.size()); ++i) {
    if (!starts.count(i)) throw ValidationError("layout: agent ids must be 0..N-1 without gaps");
    layout.starts.push_back(starts[i]);
  }
  if (plates.size() != doors.size()) throw ValidationError("layout: every room needs one plate and one doorway");
  for (int r = 0; r < static_cast<int>(plates.size()); ++r) {
    if (!plates.count(r) || !doors.count(r)) {
      throw ValidationError("layout: rooms must use consecutive letters starting at a/A");
    }
    layout.rooms.push_back(Room{plates[r], doors[r], -1});
  }

  std::istringstream as(assign_line);
  std::string item;
  std::set<int> used_agents;
  bool chest_assigned = false;
  while (as >> item) {
    const auto eq = item.find('=');
    if (eq != 1 || item.size() < 3) throw ValidationError("layout: malformed assignment '" + item + "'");
    int agent = -1;
    try {
      agent = std::stoi(item.substr(2));
    } catch (const std::logic_error&) {
      throw ValidationError("layout: malformed assignment '" + item + "'");
    }
    if (agent < 0 || agent >= layout.n_agents()) throw ValidationError("layout: assignment to unknown agent");
    if (!used_agents.insert(agent).second) throw ValidationError("layout: agent assigned twice");
    const char key = item[0];
    if (key == '$') {
      if (chest_assigned) throw ValidationError("layout: chest assigned twice");
      layout.chest_agent = agent;
      chest_assigned = true;
    } else if (key >= 'a' && key <= 'j' && key - 'a' < static_cast<int>(layout.rooms.size())) {
      Room& room = layout.rooms[static_cast<std::size_t>(key - 'a')];
      if (room.agent >= 0) throw ValidationError("layout: plate assigned twice");
      room.agent = agent;
    } else {
      throw ValidationError("layout: assignment key must be a plate letter or $");
    }
  }
  if (!chest_assigned) throw ValidationError("layout: chest is not assigned");
  for (const Room& room : layout.rooms) {
    if (room.agent < 0) throw ValidationError("layout: unassigned plate");
  }
  if (static_cast<int>(used_agents.size()) != layout.n_agents()) {
    throw ValidationError("layout: plates and chest must map one-to-one onto agents");
  }
  return layout;
}

PressurePlateLayout PressurePlateLayout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open layout file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

PressurePlateLayout PressurePlateLayout::default_four_agent() { return parse(kDefaultFourAgent); }
PressurePlateLayout PressurePlateLayout::two_agent() { return parse(kTwoAgent); }

PressurePlateLayout PressurePlateLayout::named(const std::string& name_or_path) {
  if (name_or_path == "default4") return default_four_agent();
  if (name_or_path == "small2") return two_agent();
  return load(name_or_path);
}

std::vector<float> pressureplate_observe(const PressurePlateLayout& layout, const std::vector<Cell>& positions,
                                         const std::vector<bool>& doors_open, int agent_id) {
  if (agent_id < 0 || agent_id >= static_cast<int>(positions.size())) {
    throw DimensionError("pressureplate_observe: agent id out of range");
  }
  constexpr int kArea = kViewSide * kViewSide;
  std::vector<float> obs(kObservationLength, 0.0f);
  const Cell me = positions[static_cast<std::size_t>(agent_id)];
  auto slot = [&](int layer, int dx, int dy) -> float& {
    return obs[static_cast<std::size_t>(layer * kArea + (dy + kViewRadius) * kViewSide + (dx + kViewRadius))];
  };
  auto visible = [&](Cell c) {
    return std::abs(c.x - me.x) <= kViewRadius && std::abs(c.y - me.y) <= kViewRadius;
  };
  for (const Cell& p : positions) {
    if (visible(p)) slot(0, p.x - me.x, p.y - me.y) = 1.0f;
  }
  for (int dy = -kViewRadius; dy <= kViewRadius; ++dy) {
    for (int dx = -kViewRadius; dx <= kViewRadius; ++dx) {
      if (layout.wall(me.x + dx, me.y + dy)) slot(1, dx, dy) = 1.0f;
    }
  }
  for (std::size_t r = 0; r < layout.rooms.size(); ++r) {
    const Room& room = layout.rooms[r];
    if (!doors_open[r] && visible(room.door)) slot(2, room.door.x - me.x, room.door.y - me.y) = 1.0f;
    if (visible(room.plate)) slot(3, room.plate.x - me.x, room.plate.y - me.y) = 1.0f;
  }
  if (visible(layout.chest)) slot(3, layout.chest.x - me.x, layout.chest.y - me.y) = 1.0f;
  obs[4 * kArea] = layout.width > 1 ? static_cast<float>(me.x) / static_cast<float>(layout.width - 1) : 0.0f;
  obs[4 * kArea + 1] = layout.height > 1 ? static_cast<float>(me.y) / static_cast<float>(layout.height - 1) : 0.0f;
  return obs;
}

PressurePlate::PressurePlate(PressurePlateLayout layout, int max_steps, PressurePlateRewards rewards)
    : layout_(std::move(layout)), rewards_(rewards) {
  if (max_steps < 1) throw ValidationError("pressure plate: max_steps must be >= 1");
  const int n = layout_.n_agents();
  spec_ = EnvSpec{n, kObservationLength, 2 * n + static_cast<int>(layout_.rooms.size()), 5, max_steps};
  positions_ = layout_.starts;
  doors_open_.assign(layout_.rooms.size(), false);
  door_rewarded_.assign(layout_.rooms.size(), false);
}

bool PressurePlate::door_open_now(std::size_t room) const {
  const Room& r = layout_.rooms[room];
  return positions_[static_cast<std::size_t>(r.agent)] == r.plate;
}

bool PressurePlate::blocked(int agent, Cell target) const {
  if (layout_.wall(target.x, target.y)) return true;
  for (std::size_t r = 0; r < layout_.rooms.size(); ++r) {
    if (layout_.rooms[r].door == target && !door_open_now(r)) return true;
  }
  for (int j = 0; j < static_cast<int>(positions_.size()); ++j) {
    if (j != agent && positions_[static_cast<std::size_t>(j)] == target) return true;
  }
  return false;
}

void PressurePlate::refresh_doors() {
  for (std::size_t r = 0; r < layout_.rooms.size(); ++r) doors_open_[r] = door_open_now(r);
}

std::vector<float> PressurePlate::state() const {
  std::vector<float> s;
  s.reserve(static_cast<std::size_t>(spec_.state_dim));
  for (const Cell& p : positions_) {
    s.push_back(layout_.width > 1 ? static_cast<float>(p.x) / static_cast<float>(layout_.width - 1) : 0.0f);
    s.push_back(layout_.height > 1 ? static_cast<float>(p.y) / static_cast<float>(layout_.height - 1) : 0.0f);
  }
  for (bool open : doors_open_) s.push_back(open ? 1.0f : 0.0f);
  return s;
}

StepResult PressurePlate::observe(float reward) const {
  StepResult r;
  for (int i = 0; i < spec_.n_agents; ++i) r.observations.push_back(pressureplate_observe(layout_, positions_, doors_open_, i));
  r.state = state();
  r.reward = reward;
  r.terminal = terminal_;
  r.step_index = step_;
  return r;
}

StepResult PressurePlate::reset(nn::Rng&) {
  positions_ = layout_.starts;
  std::fill(door_rewarded_.begin(), door_rewarded_.end(), false);
  refresh_doors();
  step_ = 0;
  terminal_ = false;
  solved_ = false;
  return observe(0.0f);
}

StepResult PressurePlate::step(std::span<const int> joint_action) {
  if (terminal_) throw UsageError("pressure plate: step() after terminal; call reset()");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents) throw DimensionError("pressure plate: wrong action count");
  for (int i = 0; i < spec_.n_agents; ++i) {
    const int a = joint_action[static_cast<std::size_t>(i)];
    if (a < 0 || a >= spec_.n_actions) throw DimensionError("pressure plate: action out of range");
    Cell target = positions_[static_cast<std::size_t>(i)];
    switch (static_cast<Move>(a)) {
      case Move::up: --target.y; break;
      case Move::down: ++target.y; break;
      case Move::left: --target.x; break;
      case Move::right: ++target.x; break;
      case Move::noop: break;
    }
    if (!(target == positions_[static_cast<std::size_t>(i)]) && !blocked(i, target)) {
      positions_[static_cast<std::size_t>(i)] = target;
    }
  }
  refresh_doors();

  float reward = 0.0f;
  for (std::size_t r = 0; r < doors_open_.size(); ++r) {
    if (doors_open_[r] && !door_rewarded_[r]) {
      door_rewarded_[r] = true;
      reward += rewards_.door_first_open;
    }
  }
  ++step_;
  if (positions_[static_cast<std::size_t>(layout_.chest_agent)] == layout_.chest) {
    reward += rewards_.chest;
    solved_ = true;
    terminal_ = true;
  }
  if (step_ >= spec_.max_steps) terminal_ = true;
  return observe(reward);
}

}  // namespace strange::envs
