#pragma once

#include "ssdial/env/schema.hpp"

#include <map>
#include <string>
#include <vector>

namespace ssdial {

enum class ActType { inform, request, offer, book, reqmore, bye };

inline const char* act_name(ActType t) {
  switch (t) {
    case ActType::inform: return "inform";
    case ActType::request: return "request";
    case ActType::offer: return "offer";
    case ActType::book: return "book";
    case ActType::reqmore: return "reqmore";
    case ActType::bye: return "bye";
  }
  return "?";
}

inline constexpr int kGeneralDomain = -1;

/// One element of the finite system action set.
/// `slots` index the domain's requestable slots for inform, informable slots for request.
struct SystemAction {
  ActType type = ActType::bye;
  int domain = kGeneralDomain;
  std::vector<int> slots;

  friend bool operator==(const SystemAction&, const SystemAction&) = default;
};

using ActionId = int;

/// Enumerated action set with stable ids. Per domain, in schema order: inform single/pair
/// over requestables, request single/pair over informables, offer, book (if bookable);
/// then the domain-free reqmore and bye.
class ActionSet {
 public:
  ActionSet() = default;
  explicit ActionSet(const SchemaSet& schemas) {
    for (int d = 0; d < static_cast<int>(schemas.domains.size()); ++d) {
      const auto& dom = schemas.domains[static_cast<std::size_t>(d)];
      const int nr = static_cast<int>(dom.requestable.size());
      const int ni = static_cast<int>(dom.informable.size());
      for (int i = 0; i < nr; ++i) push({ActType::inform, d, {i}}, schemas);
      for (int i = 0; i < nr; ++i)
        for (int j = i + 1; j < nr; ++j) push({ActType::inform, d, {i, j}}, schemas);
      for (int i = 0; i < ni; ++i) push({ActType::request, d, {i}}, schemas);
      for (int i = 0; i < ni; ++i)
        for (int j = i + 1; j < ni; ++j) push({ActType::request, d, {i, j}}, schemas);
      push({ActType::offer, d, {}}, schemas);
      if (dom.bookable) push({ActType::book, d, {}}, schemas);
    }
    push({ActType::reqmore, kGeneralDomain, {}}, schemas);
    push({ActType::bye, kGeneralDomain, {}}, schemas);
  }

  int size() const { return static_cast<int>(actions_.size()); }
  const SystemAction& at(ActionId id) const { return actions_.at(static_cast<std::size_t>(id)); }
  const std::string& name(ActionId id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }

  ActionId id_of(const SystemAction& a) const {
    for (std::size_t i = 0; i < actions_.size(); ++i)
      if (actions_[i] == a) return static_cast<ActionId>(i);
    throw ConfigError("action not in action set");
  }

  ActionId id_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown action '" + name + "'");
    return it->second;
  }

 private:
  void push(SystemAction a, const SchemaSet& s) {
    std::string n;
    if (a.domain == kGeneralDomain) {
      n = std::string("general-") + act_name(a.type);
    } else {
      const auto& dom = s.domains[static_cast<std::size_t>(a.domain)];
      n = dom.name + "-" + act_name(a.type);
      for (std::size_t k = 0; k < a.slots.size(); ++k) {
        const int slot = a.slots[k];
        n += (k == 0 ? ":" : "+");
        n += a.type == ActType::inform ? dom.requestable[static_cast<std::size_t>(slot)]
                                       : dom.informable[static_cast<std::size_t>(slot)].name;
      }
    }
    by_name_[n] = static_cast<ActionId>(actions_.size());
    names_.push_back(std::move(n));
    actions_.push_back(std::move(a));
  }

  std::vector<SystemAction> actions_;
  std::vector<std::string> names_;
  std::map<std::string, ActionId> by_name_;
};

}  // namespace ssdial
