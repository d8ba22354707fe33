#pragma once

// Named reward configurations: the proposed dynamics reward, its one-hot variant, and the baselines.

#include "ssdial/reward/adversarial.hpp"
#include "ssdial/reward/handle.hpp"

#include <array>

namespace ssdial {

inline constexpr std::array<const char*, 6> kRewardNames = {"act-vrnn", "ss-vrnn", "act-gdpl",
                                                           "ss-gdpl",  "handcrafted", "adversarial"};

inline bool is_reward_name(const std::string& s) {
  return std::find(kRewardNames.begin(), kRewardNames.end(), s) != kRewardNames.end();
}

/// Everything a reward configuration may need; only the pieces the chosen name reads must be set.
struct RewardComponents {
  std::shared_ptr<const TrainedVrnn> act_vrnn;  // trained on action embeddings
  std::shared_ptr<const TrainedVrnn> ss_vrnn;   // trained on one-hot predicted labels
  Matrix embeddings;                            // learned action table, |A| x d
  const EnrichedCorpus* enriched = nullptr;     // every expert dialogue after enrichment
  int state_width = 0;
  int num_actions = 0;
  DiscriminatorConfig discriminator;
  HandcraftedRewardConfig handcrafted;
};

namespace detail {

inline std::vector<ExpertPair> expert_pairs(const EnrichedCorpus& corpus, const Matrix& table, bool one_hot,
                                            bool labelled_only) {
  std::vector<ExpertPair> out;
  for (const auto& d : corpus) {
    if (labelled_only && d.level != Supervision::full) continue;
    for (const auto& t : d.turns)
      out.push_back({t.state, one_hot ? Vector(table.row(t.action).transpose()) : t.embedding});
  }
  return out;
}

}  // namespace detail

/// Builds the named reward. act-gdpl feeds embeddings to the discriminator, ss-gdpl feeds predicted hard
/// labels, and adversarial is the plain baseline that sees only the fully labelled dialogues.
inline std::unique_ptr<RewardHandle> ablation_wiring(const std::string& name, const RewardComponents& c) {
  if (name == "handcrafted") return std::make_unique<HandcraftedReward>(c.handcrafted);
  if (name == "act-vrnn") {
    if (!c.act_vrnn) throw ConfigError("reward 'act-vrnn' needs a vrnn trained on action embeddings (run train-reward first)");
    if (c.act_vrnn->model.config().input != VrnnInput::embedding)
      throw ConfigError("reward 'act-vrnn' needs embedding inputs");
    return std::make_unique<VrnnReward>(name, c.act_vrnn);
  }
  if (name == "ss-vrnn") {
    if (!c.ss_vrnn) throw ConfigError("reward 'ss-vrnn' needs a vrnn trained on one-hot labels (run train-reward first)");
    if (c.ss_vrnn->model.config().input != VrnnInput::one_hot) throw ConfigError("reward 'ss-vrnn' needs one-hot inputs");
    return std::make_unique<VrnnReward>(name, c.ss_vrnn);
  }
  if (name == "act-gdpl" || name == "ss-gdpl" || name == "adversarial") {
    if (!c.enriched) throw ConfigError("reward '" + name + "' needs the enriched corpus (run train-actions first)");
    if (c.state_width < 1 || c.num_actions < 1) throw ConfigError("reward '" + name + "' needs state and action sizes");
    const bool embed = name == "act-gdpl";
    if (embed && c.embeddings.rows() != c.num_actions)
      throw ConfigError("reward 'act-gdpl' needs the learned action embeddings (run train-actions first)");
    Matrix table = embed ? c.embeddings : Matrix(Matrix::Identity(c.num_actions, c.num_actions));
    auto pairs = detail::expert_pairs(*c.enriched, table, !embed, name == "adversarial");
    if (pairs.empty()) throw ConfigError("reward '" + name + "' found no expert turns");
    return std::make_unique<AdversarialReward>(name, Discriminator(std::move(table), c.state_width, c.discriminator),
                                               std::move(pairs));
  }
  throw ConfigError("unknown reward '" + name + "' (act-vrnn, ss-vrnn, act-gdpl, ss-gdpl, handcrafted, adversarial)");
}

}  // namespace ssdial
