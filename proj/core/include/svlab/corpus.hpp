#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "svlab/waveform.hpp"

namespace svlab::corpus {

// Parametric voice: harmonic stack at f0 with a per-speaker amplitude
// envelope and a noise floor. Stands in for a real speaker.
struct SpeakerSpec {
  int speaker_id = 0;
  double f0_hz = 0.0;                  // 80..300
  std::vector<double> harmonic_amps;   // each in [0, 1], first is 1
  double breathiness = 0.0;            // noise-floor amplitude
};

struct Utterance {
  int speaker_id = 0;
  int utterance_id = 0;
  Waveform wave;
  bool poison_flag = false;  // true iff injected by the attacker
};

enum class Partition { kPublic, kOod };

struct LabeledDataset {
  std::vector<Utterance> utterances;
  std::map<int, Partition> partition;  // per speaker

  std::vector<int> speaker_ids() const;
  std::vector<std::size_t> indices_of(int speaker_id) const;
  std::size_t utterance_count(int speaker_id) const;
};

struct CorpusConfig {
  int n_speakers = 50;
  int utterances_per_speaker = 10;
  double duration_s = 1.0;
  double ood_fraction = 0.2;
};

// n distinct speakers with pairwise |f0_i - f0_j| >= 2 Hz. Pure function of
// (n, seed). Throws std::invalid_argument for n < 2 or unsatisfiable n.
std::vector<SpeakerSpec> gen_speakers(int n, std::uint64_t seed);

// One utterance: jittered (±3%) harmonic stack with random phases, slow
// amplitude modulation and breathiness noise, peak-normalized to 0.9.
Utterance gen_utterance(const SpeakerSpec& spec, double duration_s, std::uint64_t seed);

// All utterances for all speakers, every speaker tagged kPublic.
LabeledDataset gen_corpus(const CorpusConfig& cfg, std::uint64_t seed);

// Speaker-disjoint split; |ood speakers| = round(ood_fraction * total).
std::pair<LabeledDataset, LabeledDataset> split_corpus(const LabeledDataset& dataset,
                                                       double ood_fraction,
                                                       std::uint64_t seed);

// Restrict to the given speakers (partition tags kept).
LabeledDataset subset_speakers(const LabeledDataset& dataset, const std::vector<int>& speakers);

// Manifest: one JSON object per line with
// {speaker_id, utterance_id, path, partition, poison_flag}; WAV files are
// written next to it under wav/. Paths in the manifest are relative to its
// directory.
void write_manifest(const LabeledDataset& dataset, const std::filesystem::path& manifest_path);
LabeledDataset read_manifest(const std::filesystem::path& manifest_path);

}  // namespace svlab::corpus
