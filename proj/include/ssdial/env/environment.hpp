#pragma once

#include "ssdial/env/actions.hpp"
#include "ssdial/env/dialogue.hpp"
#include "ssdial/env/expert.hpp"

#include <functional>
#include <optional>

namespace ssdial {

struct TurnRecord {
  DialogueState state;  // state the system acted on
  ActionId action = 0;
  UserMove user;        // user response to the action
};

/// Action-level record of one finished dialogue.
struct DialogueRecord {
  UserGoal goal;
  UserMove opening;
  std::vector<TurnRecord> turns;
  DialogueState final_state;
  SuccessReport report;

  int num_turns() const { return static_cast<int>(turns.size()); }
};

/// Action-level environment: a sampled user goal, the rule-based user, the tracked state.
class DialogueEnv {
 public:
  explicit DialogueEnv(SchemaSet schemas, int max_turns = kDefaultMaxTurns)
      : schemas_(std::move(schemas)), actions_(schemas_), max_turns_(max_turns) {
    validate(schemas_);
    if (max_turns_ < 1) throw ConfigError("max_turns must be positive");
  }

  const SchemaSet& schemas() const { return schemas_; }
  const ActionSet& actions() const { return actions_; }
  int num_actions() const { return actions_.size(); }
  int state_width() const { return ssdial::state_width(schemas_); }
  int max_turns() const { return max_turns_; }

  const DialogueState& reset(Rng& rng) { return reset(sample_goal(schemas_, rng)); }

  const DialogueState& reset(UserGoal goal) {
    goal_ = std::move(goal);
    state_ = initial_state(schemas_, goal_, max_turns_);
    return *state_;
  }

  bool started() const { return state_.has_value(); }
  const UserGoal& goal() const { return goal_; }
  const DialogueState& state() const {
    if (!state_) throw StateError("environment not reset");
    return *state_;
  }
  bool done() const { return state().done; }
  Vector observation() const { return encode_state(schemas_, state()); }

  UserMove step(ActionId a) {
    if (!state_) throw StateError("environment not reset");
    auto res = user_step(goal_, *state_, actions_.at(a));
    state_ = std::move(res.state);
    return res.move;
  }

  SuccessReport judge() const { return is_success(goal_, state()); }

 private:
  SchemaSet schemas_;
  ActionSet actions_;
  int max_turns_;
  UserGoal goal_;
  std::optional<DialogueState> state_;
};

using StatePolicy = std::function<ActionId(const DialogueState&)>;

/// Plays one dialogue for `goal` under `policy` until the environment reports done.
inline DialogueRecord run_dialogue(DialogueEnv& env, const UserGoal& goal, const StatePolicy& policy) {
  DialogueRecord rec;
  rec.goal = goal;
  rec.opening = opening_move(goal);
  env.reset(goal);
  while (!env.done()) {
    TurnRecord t;
    t.state = env.state();
    t.action = policy(t.state);
    t.user = env.step(t.action);
    rec.turns.push_back(std::move(t));
  }
  rec.final_state = env.state();
  rec.report = env.judge();
  return rec;
}

inline StatePolicy expert_policy(const DialogueEnv& env) {
  return [&env](const DialogueState& s) { return expert_action_id(env.schemas(), env.actions(), s); };
}

}  // namespace ssdial
