#pragma once

// The experiment pipeline as separate stages: corpus, split, action learning, reward model, warm start,
// policy learning and evaluation. The command line and the grid runner both call these.

#include "ssdial/app/run_config.hpp"
#include "ssdial/eval/metrics.hpp"

#include <memory>

namespace ssdial {

/// Independent seeds for each stage, all derived from the run seed.
struct StageSeeds {
  std::uint64_t corpus, split, actions, vrnn, discriminator, policy, eval, heldout, auc;
};

inline StageSeeds stage_seeds(std::uint64_t seed) {
  return {derive_seed(seed, 11), derive_seed(seed, 12), derive_seed(seed, 13), derive_seed(seed, 14), derive_seed(seed, 15),
          derive_seed(seed, 16), derive_seed(seed, 17), derive_seed(seed, 18), derive_seed(seed, 19)};
}

inline SchemaSet run_schemas(const RunConfig& c) { return presets::by_name(c.preset); }

inline ActionModelDims run_dims(const SchemaSet& schemas) {
  return {build_vocabulary(schemas).size(), state_width(schemas), ActionSet(schemas).size()};
}

inline Corpus stage_corpus(const RunConfig& c) {
  return generate_corpus(run_schemas(c), c.corpus_size, stage_seeds(c.seed).corpus, c.max_turns);
}

inline SplitCorpus stage_split(const Corpus& corpus, const RunConfig& c) {
  return mask_labels(corpus, {c.split_full, c.split_partial, c.split_unlabeled, c.corpus_size, stage_seeds(c.seed).split});
}

inline ActionModelConfig action_config(const RunConfig& c) {
  ActionModelConfig a = c.action;
  a.seed = stage_seeds(c.seed).actions;
  return a;
}

inline TrainedActionModel stage_actions(const SplitCorpus& split, const RunConfig& c) {
  return train_action_model(split.full, split.partial, split.unlabeled, run_dims(run_schemas(c)), action_config(c));
}

/// The fully labelled dialogues alone, with the same configuration: the supervised reference point.
inline TrainedActionModel stage_supervised_actions(const SplitCorpus& split, const RunConfig& c) {
  return train_action_model(split.full, {}, {}, run_dims(run_schemas(c)), action_config(c));
}

inline Corpus all_levels(const SplitCorpus& split) {
  Corpus all = split.full;
  all.insert(all.end(), split.partial.begin(), split.partial.end());
  all.insert(all.end(), split.unlabeled.begin(), split.unlabeled.end());
  return all;
}

inline EnrichedCorpus stage_enrich(const SplitCorpus& split, TrainedActionModel& trained, const RunConfig& c) {
  return enrich(all_levels(split), trained, c.action.soft_enrichment);
}

inline bool uses_vrnn(const std::string& reward) { return reward == "act-vrnn" || reward == "ss-vrnn"; }

inline VrnnConfig vrnn_config(const RunConfig& c, VrnnInput input) {
  VrnnConfig v = c.vrnn;
  v.input = input;
  v.seed = stage_seeds(c.seed).vrnn;
  return v;
}

inline VrnnInput vrnn_input_for(const std::string& reward) {
  if (reward == "act-vrnn") return VrnnInput::embedding;
  if (reward == "ss-vrnn") return VrnnInput::one_hot;
  throw ConfigError("reward '" + reward + "' has no dynamics model to train");
}

/// Trains the dynamics model `c.reward` reads, in mode `c.vrnn.mode`.
inline TrainedVrnn stage_vrnn(const EnrichedCorpus& enriched, const TrainedActionModel& trained, const RunConfig& c) {
  const VrnnInput input = vrnn_input_for(c.reward);
  const int na = trained.model.dims().num_actions;
  return train_vrnn(vrnn_sequences(enriched, input, na), vrnn_table(trained.model.embedding_table(), input),
                    trained.model.dims().state_width, vrnn_config(c, input));
}

inline DiscriminatorConfig discriminator_config(const RunConfig& c) {
  DiscriminatorConfig d = c.discriminator;
  d.seed = stage_seeds(c.seed).discriminator;
  return d;
}

inline std::unique_ptr<RewardHandle> stage_reward(const RunConfig& c, const TrainedActionModel& trained,
                                                  const EnrichedCorpus& enriched, std::shared_ptr<const TrainedVrnn> vrnn) {
  RewardComponents rc;
  if (c.reward == "act-vrnn") rc.act_vrnn = vrnn;
  if (c.reward == "ss-vrnn") rc.ss_vrnn = vrnn;
  rc.embeddings = trained.model.embedding_table();
  rc.enriched = &enriched;
  rc.state_width = trained.model.dims().state_width;
  rc.num_actions = trained.model.dims().num_actions;
  rc.discriminator = discriminator_config(c);
  rc.handcrafted = c.handcrafted;
  return ablation_wiring(c.reward, rc);
}

inline PolicyConfig policy_config(const RunConfig& c) {
  PolicyConfig p = c.policy;
  p.max_turns = c.max_turns;
  p.seed = stage_seeds(c.seed).policy;
  return p;
}

/// Behavior cloning on the labelled (state, action) pairs; with zero epochs the freshly initialised net.
inline PolicyNet stage_warm_start(const Corpus& full, const RunConfig& c) {
  const SchemaSet schemas = run_schemas(c);
  const PolicyConfig p = policy_config(c);
  PolicyNet net(state_width(schemas), ActionSet(schemas).size(), p.hidden, p.seed);
  if (p.warm_start_epochs == 0) return net;
  std::vector<Vector> states;
  std::vector<int> actions;
  for (const auto& d : full)
    for (const auto& t : d.turns) {
      if (t.action < 0) throw ConfigError("warm start needs fully labelled dialogues");
      states.push_back(from_bits(t.state));
      actions.push_back(t.action);
    }
  if (states.empty()) throw ConfigError("warm start found no labelled turns");
  warm_start(net, vector_rows(states), actions, p);
  return net;
}

inline TrainedPolicy stage_policy(RewardHandle& reward, const PolicyNet& init, const RunConfig& c) {
  return train_policy(run_schemas(c), reward, policy_config(c), &init);
}

inline MetricReport stage_evaluate(const PolicyNet& net, const RunConfig& c) {
  const SchemaSet schemas = run_schemas(c);
  MetricReport r = evaluate_policy(schemas, greedy_policy(net, schemas), c.eval_goals, stage_seeds(c.seed).eval, c.max_turns);
  r.seeds = {c.seed};
  r.config_hash = config_hash(c);
  return r;
}

/// Accuracy of the action model on freshly generated, fully labelled dialogues.
inline double heldout_action_accuracy(TrainedActionModel& trained, const RunConfig& c) {
  const Corpus held = generate_corpus(run_schemas(c), c.heldout_dialogues, stage_seeds(c.seed).heldout, c.max_turns);
  return action_accuracy(trained.model, flatten(held));
}

/// Per-turn rewards of expert and uniform-random dialogues on the same fresh goals.
struct RewardSamples {
  std::vector<double> expert, random;
};

inline RewardSamples reward_samples(const Vrnn& m, const RunConfig& c) {
  const SchemaSet schemas = run_schemas(c);
  DialogueEnv env(schemas, c.max_turns);
  Rng goals(stage_seeds(c.seed).auc), pick(derive_seed(stage_seeds(c.seed).auc, 1));
  RewardSamples out;
  auto play = [&](const UserGoal& g, bool expert, std::vector<double>& dst) {
    env.reset(g);
    std::vector<Vector> states;
    std::vector<int> actions;
    while (!env.done()) {
      const int a = expert ? expert_action_id(env.schemas(), env.actions(), env.state())
                           : static_cast<int>(pick.below(static_cast<std::size_t>(env.num_actions())));
      states.push_back(env.observation());
      actions.push_back(a);
      env.step(a);
    }
    for (double r : score_trajectory(m, states, actions)) dst.push_back(r);
  };
  for (int i = 0; i < c.auc_dialogues; ++i) {
    const UserGoal g = sample_goal(schemas, goals);
    play(g, true, out.expert);
    play(g, false, out.random);
  }
  return out;
}

inline double reward_auc(const Vrnn& m, const RunConfig& c) {
  const RewardSamples s = reward_samples(m, c);
  return roc_auc(s.expert, s.random);
}

}  // namespace ssdial
