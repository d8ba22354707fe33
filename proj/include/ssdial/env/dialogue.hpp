#pragma once

// Dialogue dynamics of the synthetic environment: user goals, the tracked dialogue state and
// its binary encoding, the rule-based user simulator, and the success / entity judge.

#include "ssdial/core/errors.hpp"
#include "ssdial/core/params.hpp"
#include "ssdial/core/rng.hpp"
#include "ssdial/env/actions.hpp"
#include "ssdial/env/schema.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace ssdial {

inline constexpr int kDefaultMaxTurns = 20;

struct DomainGoal {
  int domain = 0;
  std::vector<int> constraints;  // value index for every informable slot of the domain
  std::vector<int> requests;     // requestable slot indices, sorted, 1-2 entries
  bool book = false;
  std::vector<int> opening;  // informable slots the user states when introducing the domain

  friend bool operator==(const DomainGoal&, const DomainGoal&) = default;
};

/// Domains in the order the user pursues them (1-3 of them).
struct UserGoal {
  std::vector<DomainGoal> domains;

  const DomainGoal* find(int domain) const {
    for (const auto& g : domains)
      if (g.domain == domain) return &g;
    return nullptr;
  }
  friend bool operator==(const UserGoal&, const UserGoal&) = default;
};

namespace detail {
inline std::vector<int> random_subset(Rng& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}
}  // namespace detail

inline UserGoal sample_goal(const SchemaSet& schemas, Rng& rng) {
  if (schemas.domains.empty()) throw ConfigError("sample_goal: no schemas");
  const int n = static_cast<int>(schemas.domains.size());
  const int k = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(std::min(3, n))));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  UserGoal goal;
  for (int i = 0; i < k; ++i) {
    const int d = order[static_cast<std::size_t>(i)];
    const auto& dom = schemas.domains[static_cast<std::size_t>(d)];
    DomainGoal g;
    g.domain = d;
    for (const auto& slot : dom.informable) g.constraints.push_back(static_cast<int>(rng.below(slot.values.size())));
    const int nr = static_cast<int>(dom.requestable.size());
    g.requests = detail::random_subset(rng, nr, 1 + static_cast<int>(rng.below(static_cast<std::size_t>(std::min(2, nr)))));
    g.book = dom.bookable && rng.bernoulli(0.5);
    const int ni = static_cast<int>(dom.informable.size());
    g.opening = detail::random_subset(rng, ni, 1 + static_cast<int>(rng.below(static_cast<std::size_t>(std::min(2, ni)))));
    goal.domains.push_back(std::move(g));
  }
  return goal;
}

struct DomainStatus {
  bool current = false;
  bool introduced = false;
  std::vector<int> stated;        // per informable: -1 unstated, else stated value index
  std::vector<bool> asked;        // per requestable: user has asked for it
  std::vector<bool> satisfied;    // per requestable: system informed it with the matching entity
  bool offered = false;
  bool book_asked = false;
  bool booked = false;
  bool complete = false;          // user acknowledged the domain as finished
  std::set<int> informed;         // requestables the system provided after the offer
  bool spurious_booking = false;

  friend bool operator==(const DomainStatus&, const DomainStatus&) = default;
};

struct DialogueState {
  std::vector<DomainStatus> domains;  // one per schema domain
  int goal_cursor = 0;                // index into UserGoal::domains of the active domain
  bool user_done = false;
  int turn = 0;
  int max_turns = kDefaultMaxTurns;
  bool done = false;

  int current_domain() const {
    for (std::size_t d = 0; d < domains.size(); ++d)
      if (domains[d].current) return static_cast<int>(d);
    return kGeneralDomain;
  }
  friend bool operator==(const DialogueState&, const DialogueState&) = default;
};

/// Ordered names of the binary state-vector entries; width is fixed per schema set.
inline std::vector<std::string> state_layout(const SchemaSet& schemas) {
  std::vector<std::string> names;
  for (const auto& d : schemas.domains) {
    names.push_back(d.name + ".current");
    names.push_back(d.name + ".introduced");
    for (const auto& s : d.informable) names.push_back(d.name + ".stated." + s.name);
    for (const auto& r : d.requestable) names.push_back(d.name + ".asked." + r);
    for (const auto& r : d.requestable) names.push_back(d.name + ".satisfied." + r);
    names.push_back(d.name + ".offered");
    if (d.bookable) {
      names.push_back(d.name + ".book_asked");
      names.push_back(d.name + ".booked");
    }
    names.push_back(d.name + ".complete");
  }
  names.push_back("user_done");
  return names;
}

inline int state_width(const SchemaSet& schemas) { return static_cast<int>(state_layout(schemas).size()); }

inline Vector encode_state(const SchemaSet& schemas, const DialogueState& s) {
  Vector v = Vector::Zero(state_width(schemas));
  Eigen::Index k = 0;
  auto put = [&](bool b) { v[k++] = b ? 1.0 : 0.0; };
  for (std::size_t d = 0; d < schemas.domains.size(); ++d) {
    const auto& dom = schemas.domains[d];
    const auto& st = s.domains[d];
    put(st.current);
    put(st.introduced);
    for (int x : st.stated) put(x >= 0);
    for (bool b : st.asked) put(b);
    for (bool b : st.satisfied) put(b);
    put(st.offered);
    if (dom.bookable) {
      put(st.book_asked);
      put(st.booked);
    }
    put(st.complete);
  }
  put(s.user_done);
  return v;
}

enum class UserAct { open_domain, inform, ask_offer, request, ask_book, thank, finish, goodbye };

inline const char* user_act_name(UserAct a) {
  switch (a) {
    case UserAct::open_domain: return "open";
    case UserAct::inform: return "inform";
    case UserAct::ask_offer: return "ask_offer";
    case UserAct::request: return "request";
    case UserAct::ask_book: return "ask_book";
    case UserAct::thank: return "thank";
    case UserAct::finish: return "finish";
    case UserAct::goodbye: return "goodbye";
  }
  return "?";
}

/// User dialogue act. `slots` are informable indices (open/inform) or requestable indices (request).
struct UserMove {
  UserAct act = UserAct::goodbye;
  int domain = kGeneralDomain;
  std::vector<int> slots;
  friend bool operator==(const UserMove&, const UserMove&) = default;
};

namespace detail {

inline void introduce(DialogueState& s, const DomainGoal& g) {
  for (auto& d : s.domains) d.current = false;
  auto& st = s.domains[static_cast<std::size_t>(g.domain)];
  st.current = true;
  st.introduced = true;
  for (int slot : g.opening) st.stated[static_cast<std::size_t>(slot)] = g.constraints[static_cast<std::size_t>(slot)];
}

inline bool all_stated(const DomainStatus& st) {
  return std::all_of(st.stated.begin(), st.stated.end(), [](int v) { return v >= 0; });
}

}  // namespace detail

/// Fresh state with the first goal domain introduced by the user's opening move.
inline DialogueState initial_state(const SchemaSet& schemas, const UserGoal& goal, int max_turns = kDefaultMaxTurns) {
  if (goal.domains.empty()) throw ConfigError("initial_state: empty goal");
  DialogueState s;
  s.max_turns = max_turns;
  for (const auto& dom : schemas.domains) {
    DomainStatus st;
    st.stated.assign(dom.informable.size(), -1);
    st.asked.assign(dom.requestable.size(), false);
    st.satisfied.assign(dom.requestable.size(), false);
    s.domains.push_back(std::move(st));
  }
  detail::introduce(s, goal.domains.front());
  return s;
}

inline UserMove opening_move(const UserGoal& goal) {
  return {UserAct::open_domain, goal.domains.front().domain, goal.domains.front().opening};
}

struct UserStepResult {
  UserMove move;
  DialogueState state;
  bool done = false;
};

/// Rule-based user: applies the system act's effect on the tracked state, then answers.
/// Priority of the user's own move: answer/advance on reqmore once the domain is complete,
/// answer requested constraints (or volunteer the lowest unstated one), ask for an offer,
/// (re-)ask pending requests, ask to book, thank.
inline UserStepResult user_step(const UserGoal& goal, DialogueState state, const SystemAction& sys) {
  if (state.done) throw StateError("user_step: dialogue already finished");
  state.turn += 1;
  const DomainGoal& cur = goal.domains.at(static_cast<std::size_t>(state.goal_cursor));
  DomainStatus& cs = state.domains[static_cast<std::size_t>(cur.domain)];

  UserStepResult res;
  std::vector<int> answered;
  switch (sys.type) {
    case ActType::inform: {
      DomainStatus& st = state.domains.at(static_cast<std::size_t>(sys.domain));
      const DomainGoal* g = goal.find(sys.domain);
      if (g && st.offered) {
        for (int slot : sys.slots) {
          st.informed.insert(slot);
          const bool wanted = std::find(g->requests.begin(), g->requests.end(), slot) != g->requests.end();
          if (wanted && st.asked[static_cast<std::size_t>(slot)]) st.satisfied[static_cast<std::size_t>(slot)] = true;
        }
      }
      break;
    }
    case ActType::request:
      if (sys.domain == cur.domain)
        for (int slot : sys.slots)
          if (cs.stated[static_cast<std::size_t>(slot)] < 0) {
            cs.stated[static_cast<std::size_t>(slot)] = cur.constraints[static_cast<std::size_t>(slot)];
            answered.push_back(slot);
          }
      break;
    case ActType::offer:
      if (sys.domain == cur.domain && detail::all_stated(cs) && !cs.offered) cs.offered = true;
      break;
    case ActType::book: {
      DomainStatus& st = state.domains.at(static_cast<std::size_t>(sys.domain));
      const DomainGoal* g = goal.find(sys.domain);
      if (g && st.offered && !st.booked) {
        if (g->book)
          st.booked = true;
        else
          st.spurious_booking = true;
      }
      break;
    }
    case ActType::reqmore:
      break;
    case ActType::bye:
      state.done = true;
      res.move = {UserAct::goodbye, kGeneralDomain, {}};
      res.state = std::move(state);
      res.done = true;
      return res;
  }

  UserMove move;
  if (sys.type == ActType::reqmore && cs.complete) {
    if (state.goal_cursor + 1 < static_cast<int>(goal.domains.size())) {
      state.goal_cursor += 1;
      const DomainGoal& next = goal.domains[static_cast<std::size_t>(state.goal_cursor)];
      detail::introduce(state, next);
      move = {UserAct::open_domain, next.domain, next.opening};
    } else {
      state.user_done = true;
      move = {UserAct::finish, kGeneralDomain, {}};
    }
  } else if (!answered.empty()) {
    move = {UserAct::inform, cur.domain, answered};
  } else if (!detail::all_stated(cs)) {
    for (std::size_t slot = 0; slot < cs.stated.size(); ++slot)
      if (cs.stated[slot] < 0) {
        cs.stated[slot] = cur.constraints[slot];
        move = {UserAct::inform, cur.domain, {static_cast<int>(slot)}};
        break;
      }
  } else if (!cs.offered) {
    move = {UserAct::ask_offer, cur.domain, {}};
  } else {
    std::vector<int> pending, unasked;
    for (int r : cur.requests) {
      if (!cs.asked[static_cast<std::size_t>(r)])
        unasked.push_back(r);
      else if (!cs.satisfied[static_cast<std::size_t>(r)])
        pending.push_back(r);
    }
    if (!pending.empty()) {
      move = {UserAct::request, cur.domain, pending};
    } else if (!unasked.empty()) {
      for (int r : unasked) cs.asked[static_cast<std::size_t>(r)] = true;
      move = {UserAct::request, cur.domain, unasked};
    } else if (cur.book && !cs.booked) {
      cs.book_asked = true;
      move = {UserAct::ask_book, cur.domain, {}};
    } else {
      cs.complete = true;
      move = {UserAct::thank, cur.domain, {}};
    }
  }
  if (state.turn >= state.max_turns) state.done = true;
  res.move = std::move(move);
  res.done = state.done;
  res.state = std::move(state);
  return res;
}

/// Entity bookkeeping for Entity-F1 and success.
///   provided: offers + distinct informed slots + bookings made
///   correct:  provided entities consistent with the goal
///   required: every goal constraint, request and requested booking
///   matched:  constraints of offered domains + satisfied requests + correct bookings
struct EntityCounts {
  int provided = 0;
  int correct = 0;
  int required = 0;
  int matched = 0;
  friend bool operator==(const EntityCounts&, const EntityCounts&) = default;
};

inline EntityCounts entity_counts(const UserGoal& goal, const DialogueState& s) {
  EntityCounts c;
  for (std::size_t d = 0; d < s.domains.size(); ++d) {
    const DomainStatus& st = s.domains[d];
    const DomainGoal* g = goal.find(static_cast<int>(d));
    const int offered = st.offered ? 1 : 0;
    const int booked = st.booked ? 1 : 0;
    c.provided += offered + static_cast<int>(st.informed.size()) + booked + (st.spurious_booking ? 1 : 0);
    c.correct += offered + booked;
    if (!g) continue;
    for (int slot : st.informed)
      if (std::find(g->requests.begin(), g->requests.end(), slot) != g->requests.end()) ++c.correct;
    c.required += static_cast<int>(g->constraints.size()) + static_cast<int>(g->requests.size()) + (g->book ? 1 : 0);
    if (st.offered) c.matched += static_cast<int>(g->constraints.size());
    for (int r : g->requests)
      if (st.satisfied[static_cast<std::size_t>(r)]) ++c.matched;
    c.matched += booked;
  }
  return c;
}

struct SuccessReport {
  bool success = false;
  EntityCounts counts;
};

/// Successful iff every required entity is matched and every provided entity is correct.
inline SuccessReport is_success(const UserGoal& goal, const DialogueState& final_state) {
  SuccessReport r;
  r.counts = entity_counts(goal, final_state);
  r.success = r.counts.matched == r.counts.required && r.counts.correct == r.counts.provided;
  return r;
}

}  // namespace ssdial
