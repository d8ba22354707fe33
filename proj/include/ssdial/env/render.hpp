#pragma once

// Templated surface realization of system actions and user moves.

#include "ssdial/core/errors.hpp"
#include "ssdial/core/rng.hpp"
#include "ssdial/env/actions.hpp"
#include "ssdial/env/dialogue.hpp"

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ssdial {

using Utterance = std::vector<int>;

inline constexpr int kMaxUtteranceLength = 24;
inline constexpr double kSynonymRate = 0.2;
inline constexpr int kSynonymsPerToken = 2;

namespace templates {

// Placeholders: {D} domain, {S} slot list, {SV} requestable slots with their info tokens,
// {CV} constraint values with slot names.
inline const std::map<ActType, std::vector<std::string>>& system() {
  static const std::map<ActType, std::vector<std::string>> t = {
      {ActType::inform, {"the {D} {SV}", "sure , {D} {SV}", "okay the {D} has {SV}"}},
      {ActType::request,
       {"what {S} would you like for the {D}", "which {D} {S} do you prefer", "could you tell me the {S} for the {D}"}},
      {ActType::offer, {"i found a {D} matching your needs", "how about this {D}", "there is a {D} that fits"}},
      {ActType::book, {"booked the {D} for you", "your {D} is reserved", "done , the {D} booking is confirmed"}},
      {ActType::reqmore, {"anything else i can help with", "is there anything more", "can i help with something else"}},
      {ActType::bye, {"goodbye and thank you", "have a nice day", "bye for now"}},
  };
  return t;
}

inline const std::map<UserAct, std::vector<std::string>>& user() {
  static const std::map<UserAct, std::vector<std::string>> t = {
      {UserAct::open_domain, {"i am looking for a {D} with {CV}", "i need a {D} , {CV}", "find me a {D} {CV}"}},
      {UserAct::inform, {"i want {CV}", "{CV} please", "it should be {CV}"}},
      {UserAct::ask_offer, {"what do you have", "can you suggest a {D}", "any {D} options"}},
      {UserAct::request, {"what is the {S}", "can i get the {S}", "tell me the {S}"}},
      {UserAct::ask_book, {"please book it", "can you reserve the {D}", "book the {D} please"}},
      {UserAct::thank, {"thanks that is all for the {D}", "great thank you", "perfect thanks"}},
      {UserAct::finish, {"that is everything i need", "no that will be all", "nothing else"}},
      {UserAct::goodbye, {"bye", "goodbye", "see you"}},
  };
  return t;
}

inline std::vector<std::string> split(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace templates

inline std::string info_token(const std::string& requestable) { return requestable + "_info"; }
inline std::string synonym_token(const std::string& token, int k) { return token + "~" + std::to_string(k); }

/// Token vocabulary: "<pad>" = 0, "<none>" = 1 (empty context), then every template word and
/// every content token with its synonyms, in sorted order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i)
      if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) throw ConfigError("duplicate token '" + tokens_[i] + "'");
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) throw ConfigError("token '" + token + "' not in vocabulary");
    return it->second;
  }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string decode(const Utterance& u) const {
    std::string s;
    for (int id : u) s += (s.empty() ? "" : " ") + token(id);
    return s;
  }

  static constexpr int pad = 0;
  static constexpr int none = 1;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

/// Domain names, slot names, slot values and info tokens: the tokens subject to synonym noise.
inline std::set<std::string> content_tokens(const SchemaSet& schemas) {
  std::set<std::string> c;
  for (const auto& d : schemas.domains) {
    c.insert(d.name);
    for (const auto& s : d.informable) {
      c.insert(s.name);
      c.insert(s.values.begin(), s.values.end());
    }
    for (const auto& r : d.requestable) {
      c.insert(r);
      c.insert(info_token(r));
    }
  }
  return c;
}

inline Vocabulary build_vocabulary(const SchemaSet& schemas) {
  std::set<std::string> words;
  auto add_template_words = [&](const auto& table) {
    for (const auto& [act, list] : table)
      for (const auto& t : list)
        for (const auto& w : templates::split(t))
          if (w.front() != '{') words.insert(w);
  };
  add_template_words(templates::system());
  add_template_words(templates::user());
  words.insert("and");
  words.insert("is");
  for (const auto& c : content_tokens(schemas)) {
    words.insert(c);
    for (int k = 1; k <= kSynonymsPerToken; ++k) words.insert(synonym_token(c, k));
  }
  std::vector<std::string> tokens = {"<pad>", "<none>"};
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocabulary(std::move(tokens));
}

namespace detail {

class Realizer {
 public:
  Realizer(const Vocabulary& v, Rng& rng) : vocab_(v), rng_(rng) {}

  void word(const std::string& w) { out_.push_back(vocab_.id(w)); }

  void content(const std::string& w) {
    if (rng_.bernoulli(kSynonymRate)) {
      const int k = 1 + static_cast<int>(rng_.below(kSynonymsPerToken));
      out_.push_back(vocab_.id(synonym_token(w, k)));
    } else {
      out_.push_back(vocab_.id(w));
    }
  }

  template <class Expand>
  Utterance fill(const std::vector<std::string>& options, Expand&& expand) {
    const auto& tmpl = options[rng_.below(options.size())];
    for (const auto& w : templates::split(tmpl)) {
      if (w.front() == '{')
        expand(w, *this);
      else
        word(w);
    }
    if (out_.size() > static_cast<std::size_t>(kMaxUtteranceLength)) out_.resize(kMaxUtteranceLength);
    return std::move(out_);
  }

 private:
  const Vocabulary& vocab_;
  Rng& rng_;
  Utterance out_;
};

}  // namespace detail

inline Utterance render_system(const SchemaSet& schemas, const Vocabulary& vocab, const SystemAction& a, Rng& rng) {
  detail::Realizer r(vocab, rng);
  return r.fill(templates::system().at(a.type), [&](const std::string& ph, detail::Realizer& out) {
    const auto& dom = schemas.domains.at(static_cast<std::size_t>(a.domain));
    if (ph == "{D}") {
      out.content(dom.name);
    } else if (ph == "{S}") {
      for (std::size_t k = 0; k < a.slots.size(); ++k) {
        if (k) out.word("and");
        out.content(dom.informable.at(static_cast<std::size_t>(a.slots[k])).name);
      }
    } else if (ph == "{SV}") {
      for (std::size_t k = 0; k < a.slots.size(); ++k) {
        if (k) out.word("and");
        const auto& slot = dom.requestable.at(static_cast<std::size_t>(a.slots[k]));
        out.content(slot);
        out.word("is");
        out.content(info_token(slot));
      }
    }
  });
}

inline Utterance render_user(const SchemaSet& schemas, const Vocabulary& vocab, const UserMove& m,
                             const DialogueState& state, Rng& rng) {
  detail::Realizer r(vocab, rng);
  return r.fill(templates::user().at(m.act), [&](const std::string& ph, detail::Realizer& out) {
    const auto& dom = schemas.domains.at(static_cast<std::size_t>(m.domain));
    if (ph == "{D}") {
      out.content(dom.name);
    } else if (ph == "{S}") {
      for (std::size_t k = 0; k < m.slots.size(); ++k) {
        if (k) out.word("and");
        out.content(dom.requestable.at(static_cast<std::size_t>(m.slots[k])));
      }
    } else if (ph == "{CV}") {
      const auto& st = state.domains.at(static_cast<std::size_t>(m.domain));
      for (std::size_t k = 0; k < m.slots.size(); ++k) {
        if (k) out.word("and");
        const auto slot = static_cast<std::size_t>(m.slots[k]);
        const int v = st.stated.at(slot);
        if (v < 0) throw StateError("render_user: constraint not stated in state");
        out.content(dom.informable[slot].values[static_cast<std::size_t>(v)]);
        out.content(dom.informable[slot].name);
      }
    }
  });
}

}  // namespace ssdial
