#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "svlab/corpus.hpp"
#include "svlab/dsp.hpp"
#include "svlab/svnet.hpp"

namespace svlab::attack {

struct PoisonConfig {
  double poison_rate = 0.15;   // fraction of each poisoned speaker's utterances
  double speaker_rate = 1.0;   // fraction of speakers that receive injections
  std::optional<dsp::ChannelParams> channel;
  std::uint64_t seed = 0;
};

struct SynthesisConfig {
  double duration_s = 1.0;
  double learning_rate = 0.02;  // scaled onto an RMS-normalized gradient
  int max_steps = 1500;
  double target_sim = 0.95;     // early stop
  double min_sim = 0.80;        // below this at budget end -> SynthesisFailure
  std::uint64_t seed = 0;
};

struct TriggerBundle {
  Waveform clean_trigger;             // played by the attacker
  Waveform poisoning_trigger;         // injected into the dataset
  net::Embedding target_embedding;
  std::vector<double> objective_trace;  // cosine to target per step
  double final_sim = 0.0;
};

// Per-speaker arithmetic means of utterance embeddings.
std::map<int, net::Centroid> compute_centroids(const net::EncoderParams& params,
                                               const corpus::LabeledDataset& dataset,
                                               const dsp::FeatureConfig& feat_cfg = {});

// Unit-norm minimizer of the mean squared distance to the centroids: the
// normalized centroid mean. Throws DegenerateInputError when the mean is zero.
net::Embedding derive_backdoor_embedding(const std::vector<net::Centroid>& centroids);

// Gradient descent on waveform samples minimizing the squared distance
// between the surrogate embedding of the waveform and the target, starting
// from a seeded voiced utterance. Samples are clamped to [-1, 1] each step.
TriggerBundle synthesize_trigger(const net::EncoderParams& surrogate,
                                 const net::Embedding& target, const SynthesisConfig& cfg,
                                 const dsp::FeatureConfig& feat_cfg = {});

// Replaces the poisoning trigger with the channel-simulated clean trigger.
TriggerBundle apply_channel(const TriggerBundle& bundle, const dsp::ChannelParams& channel);

// Appends ceil(poison_rate * U) copies of bundle.poisoning_trigger to each of
// round(speaker_rate * S) seeded-selected speakers, labeled as that speaker
// with poison_flag = true. Clean utterances are untouched.
corpus::LabeledDataset poison_dataset(const corpus::LabeledDataset& clean,
                                      const TriggerBundle& bundle, const PoisonConfig& cfg);

struct ClusterbkResult {
  corpus::LabeledDataset dataset;
  std::map<int, int> speaker_group;  // speaker -> group index
  std::vector<double> freqs;
};

// Round-robin speaker grouping; group g is poisoned with tone_trigger(freqs[g]).
ClusterbkResult clusterbk_poison(const corpus::LabeledDataset& clean, int n_groups,
                                 const std::vector<double>& freqs, const PoisonConfig& cfg);

// Mean over OOD speakers of the maximum cosine similarity to any public
// centroid.
double ood_acs(const std::map<int, net::Centroid>& public_centroids,
               const std::map<int, net::Centroid>& ood_centroids);

// Bundle persistence: <stem>_clean.wav, <stem>_poison.wav and <stem>.json
// with {target_embedding, final_similarity, synthesis_steps}.
void save_bundle(const TriggerBundle& bundle, const std::filesystem::path& stem);
TriggerBundle load_bundle(const std::filesystem::path& stem);

}  // namespace svlab::attack
