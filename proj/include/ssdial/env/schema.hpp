#pragma once

#include "ssdial/core/errors.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace ssdial {

struct InformableSlot {
  std::string name;
  std::vector<std::string> values;  // 4-8 entries
};

struct DomainSchema {
  std::string name;
  std::vector<InformableSlot> informable;
  std::vector<std::string> requestable;
  bool bookable = false;
};

/// A named set of domains; the unit the environment, action set and state layout are built from.
struct SchemaSet {
  std::string name;
  std::vector<DomainSchema> domains;
};

inline constexpr int kSchemaFormatVersion = 1;

inline void validate(const SchemaSet& s) {
  if (s.domains.empty()) throw ConfigError("schema set '" + s.name + "' has no domains");
  std::set<std::string> domain_names;
  for (const auto& d : s.domains) {
    if (!domain_names.insert(d.name).second) throw ConfigError("duplicate domain '" + d.name + "'");
    if (d.informable.empty() || d.requestable.empty())
      throw ConfigError("domain '" + d.name + "' needs informable and requestable slots");
    std::set<std::string> slots;
    for (const auto& slot : d.informable) {
      if (!slots.insert(slot.name).second) throw ConfigError("duplicate slot '" + slot.name + "' in " + d.name);
      if (slot.values.size() < 4 || slot.values.size() > 8)
        throw ConfigError("slot '" + slot.name + "' in " + d.name + " must have 4-8 values");
    }
    for (const auto& r : d.requestable)
      if (!slots.insert(r).second) throw ConfigError("duplicate slot '" + r + "' in " + d.name);
  }
}

namespace presets {

inline DomainSchema restaurant() {
  return {"restaurant",
          {{"food", {"italian", "chinese", "indian", "british", "french", "thai", "korean", "spanish"}},
           {"price", {"cheap", "moderate", "expensive", "luxury"}},
           {"area", {"north", "south", "east", "west", "centre"}},
           {"day", {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"}}},
          {"phone", "address", "postcode", "hours"},
          true};
}

inline DomainSchema hotel() {
  return {"hotel",
          {{"type", {"guesthouse", "lodge", "inn", "resort"}},
           {"stars", {"one", "two", "three", "four", "five"}},
           {"area", {"north", "south", "east", "west", "centre"}},
           {"parking", {"free", "paid", "street", "none"}}},
          {"phone", "address", "internet"},
          true};
}

inline DomainSchema attraction() {
  return {"attraction",
          {{"category", {"museum", "park", "theatre", "gallery", "college", "cinema"}},
           {"area", {"north", "south", "east", "west", "centre"}}},
          {"phone", "fee", "address"},
          false};
}

inline SchemaSet single() { return {"single", {restaurant()}}; }
inline SchemaSet pair() { return {"double", {restaurant(), hotel()}}; }
inline SchemaSet triple() { return {"triple", {restaurant(), hotel(), attraction()}}; }

/// "single" | "double" | "triple".
inline SchemaSet by_name(const std::string& name) {
  if (name == "single" || name == "1-domain") return single();
  if (name == "double" || name == "2-domain") return pair();
  if (name == "triple" || name == "3-domain") return triple();
  throw ConfigError("unknown schema preset '" + name + "' (expected single|double|triple)");
}

}  // namespace presets

inline nlohmann::json to_json(const SchemaSet& s) {
  nlohmann::json j;
  j["format"] = "ssdial-schema";
  j["version"] = kSchemaFormatVersion;
  j["name"] = s.name;
  j["domains"] = nlohmann::json::array();
  for (const auto& d : s.domains) {
    nlohmann::json jd;
    jd["name"] = d.name;
    jd["informable"] = nlohmann::json::array();
    for (const auto& slot : d.informable) jd["informable"].push_back({{"slot", slot.name}, {"values", slot.values}});
    jd["requestable"] = d.requestable;
    jd["bookable"] = d.bookable;
    j["domains"].push_back(std::move(jd));
  }
  return j;
}

inline SchemaSet schema_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ssdial-schema") throw ParseError("not a schema document");
  if (j.at("version").get<int>() != kSchemaFormatVersion)
    throw VersionError("schema version " + std::to_string(j.at("version").get<int>()) + " unsupported (expected " +
                       std::to_string(kSchemaFormatVersion) + ")");
  SchemaSet s;
  s.name = j.at("name").get<std::string>();
  for (const auto& jd : j.at("domains")) {
    DomainSchema d;
    d.name = jd.at("name").get<std::string>();
    for (const auto& js : jd.at("informable"))
      d.informable.push_back({js.at("slot").get<std::string>(), js.at("values").get<std::vector<std::string>>()});
    d.requestable = jd.at("requestable").get<std::vector<std::string>>();
    d.bookable = jd.at("bookable").get<bool>();
    s.domains.push_back(std::move(d));
  }
  validate(s);
  return s;
}

}  // namespace ssdial
