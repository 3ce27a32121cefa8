#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "strange/envs/matrix_game.hpp"
#include "strange/errors.hpp"
#include "strange/marl/td.hpp"
#include "strange/trainer/trainer.hpp"

using namespace strange;
using trainer::Exploration;
using trainer::TrainConfig;

namespace {

TrainConfig tiny(Exploration e, bool eq) {
  TrainConfig c = trainer::default_config("matrix_game");
  c.env.k = 4;
  c.exploration = e;
  c.use_exploration_q = eq;
  c.total_env_steps = 600;
  c.eval_interval = 200;
  c.epsilon_anneal_steps = 400;
  c.batch_size = 4;
  c.buffer_capacity = 50;
  c.target_sync_interval = 7;
  c.agent_hidden = 8;
  c.mixer_embed = 8;
  c.bonus.d = 8;
  return c;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  TrainConfig c;
  c.epsilon_start = 1.0;
  c.epsilon_end = 0.05;
  c.epsilon_anneal_steps = 1000;
  CHECK(trainer::epsilon_at(c, 0) == 1.0);
  CHECK(trainer::epsilon_at(c, 500) == doctest::Approx(0.525));
  CHECK(trainer::epsilon_at(c, 1000) == 0.05);
  CHECK(trainer::epsilon_at(c, 5000) == 0.05);
  CHECK_THROWS_AS(trainer::epsilon_at(c, -1), UsageError);
}

TEST_CASE("config validation and variants") {
  TrainConfig c = trainer::default_config("matrix_game");
  CHECK_NOTHROW(c.validate());
  CHECK(c.bonus.beta == 0.1);
  CHECK(trainer::default_config("pressure_plate").bonus.beta == 1.0);
  CHECK(trainer::default_config("pressure_plate").buffer_capacity == 2000);
  CHECK_THROWS_AS(trainer::default_config("atari"), ConfigError);

  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(Exploration::sim_wo_eq, true);
  CHECK_THROWS_AS(c.validate(), ConfigError);

  CHECK(tiny(Exploration::sim, true).has_exploration_q());
  CHECK_FALSE(tiny(Exploration::sim, true).goal_uses_mixed_reward());
  CHECK(tiny(Exploration::sim_wo_eq, false).goal_uses_mixed_reward());
  CHECK_FALSE(tiny(Exploration::none, false).goal_uses_mixed_reward());
  CHECK_FALSE(tiny(Exploration::none, false).has_exploration_q());
}

TEST_CASE("learner composition") {
  nn::Rng rng(1);
  const envs::MatrixGame game({.k = 4});
  const trainer::Learner plain(game.spec(), tiny(Exploration::none, false), rng);
  CHECK_FALSE(plain.exploration.has_value());
  CHECK(plain.bonus == nullptr);
  CHECK(&plain.behavior() == &plain.goal);

  const trainer::Learner wo(game.spec(), tiny(Exploration::sim_wo_eq, false), rng);
  CHECK_FALSE(wo.exploration.has_value());
  REQUIRE(wo.bonus != nullptr);
  CHECK(wo.bonus->kind() == exploration::BonusKind::sim);

  const trainer::Learner full(game.spec(), tiny(Exploration::sim, true), rng);
  REQUIRE(full.exploration.has_value());
  CHECK(&full.behavior() == &*full.exploration);
  CHECK(nn::parameter_hash(full.goal.parameters()) == nn::parameter_hash(full.target.parameters()));
}

TEST_CASE("evaluation") {
  envs::MatrixGame game({.k = 5});
  nn::Rng rng(2);
  marl::JointQ jq(marl::QRole::goal, game.spec(), marl::MixerKind::qmix, {8, 8}, rng);
  nn::Rng eval_rng(0);
  SUBCASE("always coordinate returns K") {
    testing::constant_q(jq.agent, {1, 0});
    const auto h = nn::parameter_hash(jq.parameters());
    const auto r = trainer::evaluate(jq, game, 3, eval_rng);
    CHECK(r.mean_return == 5.0);
    CHECK(r.mean_length == 5.0);
    CHECK(r.solve_rate == 1.0);
    CHECK(nn::parameter_hash(jq.parameters()) == h);
  }
  SUBCASE("always defect returns 0") {
    testing::constant_q(jq.agent, {0, 1});
    const auto r = trainer::evaluate(jq, game, 2, eval_rng);
    CHECK(r.mean_return == 0.0);
    CHECK(r.mean_length == 1.0);
    CHECK(r.solve_rate == 0.0);
  }
}

TEST_CASE("gradient phase") {
  const envs::MatrixGame game({.k = 4});
  nn::Rng rng(3);
  std::vector<replay::EpisodeRecord> eps;
  for (int i = 0; i < 4; ++i) {
    nn::Rng env_rng(0);
    envs::MatrixGame g({.k = 4});
    const marl::JointQ policy(marl::QRole::goal, game.spec(), marl::MixerKind::qmix, {8, 8}, rng);
    eps.push_back(trainer::collect_episode(policy, g, 1.0, env_rng, rng).episode);
  }
  const auto batch = testing::batch_of(game.spec(), eps);

  SUBCASE("sync cadence and frozen target between syncs") {
    const TrainConfig c = tiny(Exploration::sim, true);
    nn::Rng init(4);
    trainer::Learner l(game.spec(), c, init);
    auto target_hash = nn::parameter_hash(l.target.parameters());
    for (int i = 1; i <= 20; ++i) {
      l.train_phase(batch);
      CHECK(l.target_syncs == static_cast<std::uint64_t>(i / c.target_sync_interval));
      const auto now = nn::parameter_hash(l.target.parameters());
      if (i % c.target_sync_interval == 0) {
        CHECK(now == nn::parameter_hash(l.goal.parameters()));
      } else {
        CHECK(now == target_hash);
      }
      target_hash = now;
    }
  }
  SUBCASE("bonus updates leave the Q functions untouched") {
    nn::Rng init(5);
    trainer::Learner l(game.spec(), tiny(Exploration::sim, true), init);
    const auto goal = nn::parameter_hash(l.goal.parameters());
    const auto omega = nn::parameter_hash(l.exploration->parameters());
    const auto psi = nn::parameter_hash(l.bonus->parameters());
    l.bonus->update(batch);
    CHECK(nn::parameter_hash(l.goal.parameters()) == goal);
    CHECK(nn::parameter_hash(l.exploration->parameters()) == omega);
    CHECK(nn::parameter_hash(l.bonus->parameters()) != psi);
  }
  SUBCASE("the goal step uses extrinsic rewards when an exploration function exists") {
    nn::Rng init_a(6), init_b(6);
    TrainConfig a = tiny(Exploration::sim, true);
    TrainConfig b = a;
    b.bonus.beta = 1000.0;
    trainer::Learner la(game.spec(), a, init_a), lb(game.spec(), b, init_b);
    for (int i = 0; i < 3; ++i) {
      const auto sa = la.train_phase(batch);
      const auto sb = lb.train_phase(batch);
      CHECK(sa.loss_goal == sb.loss_goal);
      CHECK(sa.loss_exp != sb.loss_exp);
    }
    CHECK(nn::parameter_hash(la.goal.parameters()) == nn::parameter_hash(lb.goal.parameters()));
  }
  SUBCASE("the wo-EQ goal step sees the bonus") {
    nn::Rng init_a(6), init_b(6);
    TrainConfig a = tiny(Exploration::sim_wo_eq, false);
    TrainConfig b = a;
    b.bonus.beta = 0.0;
    trainer::Learner la(game.spec(), a, init_a), lb(game.spec(), b, init_b);
    CHECK(la.train_phase(batch).loss_goal != lb.train_phase(batch).loss_goal);
  }
}

TEST_CASE("trainer determinism and resume") {
  for (auto [e, eq] : {std::pair{Exploration::sim, true}, std::pair{Exploration::none, false},
                       std::pair{Exploration::rnd, false}, std::pair{Exploration::icm, true}}) {
    CAPTURE(trainer::to_string(e));
    const TrainConfig c = tiny(e, eq);
    const auto rows_a = trainer::run_training(c);
    const auto rows_b = trainer::run_training(c);
    REQUIRE(rows_a.size() == 3u);
    for (std::size_t i = 0; i < rows_a.size(); ++i) {
      CHECK(rows_a[i].env_steps >= static_cast<std::int64_t>(200 * (i + 1)));
      CHECK(rows_a[i].eval_return_mean == rows_b[i].eval_return_mean);
      CHECK(rows_a[i].train_loss_goal == rows_b[i].train_loss_goal);
      CHECK(rows_a[i].mean_r_int == rows_b[i].mean_r_int);
    }
    CHECK(rows_a.back().mean_r_int.has_value() == (e != Exploration::none));
    CHECK(rows_a.back().q_exp_mean.has_value() == eq);

    trainer::Trainer first(c);
    while (first.env_steps() < 300) first.run_episode();
    std::stringstream state;
    first.save(state);
    first.run();
    trainer::Trainer resumed(c);
    resumed.load(state);
    CHECK(resumed.env_steps() < 600);
    resumed.run();
    REQUIRE(resumed.rows().size() == first.rows().size());
    for (std::size_t i = 0; i < first.rows().size(); ++i) {
      CHECK(resumed.rows()[i].train_loss_goal == first.rows()[i].train_loss_goal);
      CHECK(resumed.rows()[i].eval_return_mean == first.rows()[i].eval_return_mean);
    }
    CHECK(nn::parameter_hash(resumed.learner().goal.parameters()) == nn::parameter_hash(first.learner().goal.parameters()));
  }
}

TEST_CASE("trainer rejects a mismatched checkpoint") {
  trainer::Trainer a(tiny(Exploration::sim, true));
  std::stringstream state;
  a.save(state);
  trainer::Trainer b(tiny(Exploration::none, false));
  CHECK_THROWS(b.load(state));
}
