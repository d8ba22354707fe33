#pragma once

#include "ssdial/env/actions.hpp"
#include "ssdial/env/dialogue.hpp"

namespace ssdial {

/// Rule-based expert system policy. Reads only the tracked state (never the hidden goal):
/// close the dialogue once the user is done, answer pending requests of the current domain,
/// ask for missing constraints, offer, book when asked, otherwise ask whether more is needed.
inline SystemAction expert_action(const SchemaSet& schemas, const DialogueState& s) {
  if (s.user_done) return {ActType::bye, kGeneralDomain, {}};
  const int d = s.current_domain();
  if (d == kGeneralDomain) return {ActType::reqmore, kGeneralDomain, {}};
  const DomainStatus& st = s.domains[static_cast<std::size_t>(d)];

  std::vector<int> pending;
  for (std::size_t r = 0; r < st.asked.size(); ++r)
    if (st.asked[r] && !st.satisfied[r] && pending.size() < 2) pending.push_back(static_cast<int>(r));
  if (st.offered && !pending.empty()) return {ActType::inform, d, pending};

  std::vector<int> missing;
  for (std::size_t i = 0; i < st.stated.size(); ++i)
    if (st.stated[i] < 0 && missing.size() < 2) missing.push_back(static_cast<int>(i));
  if (!missing.empty()) return {ActType::request, d, missing};

  if (!st.offered) return {ActType::offer, d, {}};
  if (schemas.domains[static_cast<std::size_t>(d)].bookable && st.book_asked && !st.booked)
    return {ActType::book, d, {}};
  return {ActType::reqmore, kGeneralDomain, {}};
}

inline ActionId expert_action_id(const SchemaSet& schemas, const ActionSet& actions, const DialogueState& s) {
  return actions.id_of(expert_action(schemas, s));
}

}  // namespace ssdial
