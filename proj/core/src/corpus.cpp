#include "svlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svlab/errors.hpp"
#include "svlab/rng.hpp"
#include "svlab/wav_io.hpp"

namespace svlab::corpus {

namespace {
constexpr double kF0Min = 80.0;
constexpr double kF0Max = 300.0;
constexpr double kF0MinSeparationHz = 2.0;
constexpr int kHarmonics = 12;
constexpr double kPeakLevel = 0.9;
constexpr double kJitterFraction = 0.03;
constexpr double kTremoloDepth = 0.1;
}  // namespace

std::vector<int> LabeledDataset::speaker_ids() const {
  std::set<int> ids;
  for (const auto& u : utterances) ids.insert(u.speaker_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::size_t> LabeledDataset::indices_of(int speaker_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].speaker_id == speaker_id) out.push_back(i);
  }
  return out;
}

std::size_t LabeledDataset::utterance_count(int speaker_id) const {
  return indices_of(speaker_id).size();
}

std::vector<SpeakerSpec> gen_speakers(int n, std::uint64_t seed) {
  if (n < 2) {
    throw std::invalid_argument("gen_speakers: need at least 2 speakers");
  }
  Rng rng(mix_seed(seed, 0xc0));
  std::vector<double> f0s;
  f0s.reserve(n);
  int attempts = 0;
  while (static_cast<int>(f0s.size()) < n) {
    if (++attempts > 200000) {
      throw std::invalid_argument(
          "gen_speakers: cannot place " + std::to_string(n) +
          " fundamentals at >= 2 Hz separation in [80, 300]");
    }
    const double cand = rng.uniform(kF0Min, kF0Max);
    bool ok = true;
    for (double f : f0s) {
      if (std::abs(f - cand) < kF0MinSeparationHz) {
        ok = false;
        break;
      }
    }
    if (ok) f0s.push_back(cand);
  }

  std::vector<SpeakerSpec> specs;
  specs.reserve(n);
  for (int i = 0; i < n; ++i) {
    SpeakerSpec s;
    s.speaker_id = i;
    s.f0_hz = f0s[i];
    s.harmonic_amps.resize(kHarmonics);
    s.harmonic_amps[0] = 1.0;  // fundamental dominates so the spectral peak sits at f0
    for (int k = 1; k < kHarmonics; ++k) {
      s.harmonic_amps[k] = rng.uniform(0.15, 0.95) / (1.0 + 0.25 * k);
    }
    s.breathiness = rng.uniform(0.02, 0.08);
    specs.push_back(std::move(s));
  }
  return specs;
}

Utterance gen_utterance(const SpeakerSpec& spec, double duration_s, std::uint64_t seed) {
  if (duration_s < 0.5) {
    throw std::invalid_argument("gen_utterance: duration must be >= 0.5 s");
  }
  Rng rng(mix_seed(seed, 0xa1));
  const int n = static_cast<int>(std::lround(duration_s * kSampleRate));

  const double f0 = spec.f0_hz * (1.0 + rng.uniform(-kJitterFraction, kJitterFraction));
  std::vector<double> phases(spec.harmonic_amps.size());
  for (auto& p : phases) p = rng.uniform(0.0, 2.0 * M_PI);
  const double am_freq = rng.uniform(2.0, 6.0);
  const double am_phase = rng.uniform(0.0, 2.0 * M_PI);

  Waveform wave;
  wave.samples.resize(n);
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    double x = 0.0;
    for (std::size_t k = 0; k < spec.harmonic_amps.size(); ++k) {
      x += spec.harmonic_amps[k] * std::sin(2.0 * M_PI * (k + 1) * f0 * t + phases[k]);
    }
    x *= 1.0 + kTremoloDepth * std::sin(2.0 * M_PI * am_freq * t + am_phase);
    x += spec.breathiness * rng.gaussian();
    wave.samples[i] = x;
    peak = std::max(peak, std::abs(x));
  }
  if (peak > 0.0) {
    const double scale = kPeakLevel / peak;
    for (auto& x : wave.samples) x *= scale;
  }

  Utterance u;
  u.speaker_id = spec.speaker_id;
  u.wave = std::move(wave);
  return u;
}

LabeledDataset gen_corpus(const CorpusConfig& cfg, std::uint64_t seed) {
  const auto specs = gen_speakers(cfg.n_speakers, seed);
  LabeledDataset ds;
  ds.utterances.reserve(static_cast<std::size_t>(cfg.n_speakers) * cfg.utterances_per_speaker);
  for (const auto& spec : specs) {
    ds.partition[spec.speaker_id] = Partition::kPublic;
    for (int j = 0; j < cfg.utterances_per_speaker; ++j) {
      const std::uint64_t utt_seed =
          mix_seed(seed, 0x10000ULL + static_cast<std::uint64_t>(spec.speaker_id) * 4096 + j);
      Utterance u = gen_utterance(spec, cfg.duration_s, utt_seed);
      u.utterance_id = j;
      ds.utterances.push_back(std::move(u));
    }
  }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_corpus(const LabeledDataset& dataset,
                                                       double ood_fraction,
                                                       std::uint64_t seed) {
  if (!(ood_fraction > 0.0 && ood_fraction < 1.0)) {
    throw std::invalid_argument("split_corpus: ood_fraction must be in (0, 1)");
  }
  std::vector<int> ids = dataset.speaker_ids();
  const auto n_ood =
      static_cast<std::size_t>(std::lround(ood_fraction * static_cast<double>(ids.size())));
  Rng rng(mix_seed(seed, 0x51));
  rng.shuffle(ids);
  std::set<int> ood_set(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_ood));

  LabeledDataset pub, ood;
  for (const auto& u : dataset.utterances) {
    if (ood_set.count(u.speaker_id)) {
      ood.utterances.push_back(u);
      ood.partition[u.speaker_id] = Partition::kOod;
    } else {
      pub.utterances.push_back(u);
      pub.partition[u.speaker_id] = Partition::kPublic;
    }
  }
  return {std::move(pub), std::move(ood)};
}

LabeledDataset subset_speakers(const LabeledDataset& dataset, const std::vector<int>& speakers) {
  std::set<int> keep(speakers.begin(), speakers.end());
  LabeledDataset out;
  for (const auto& u : dataset.utterances) {
    if (keep.count(u.speaker_id)) out.utterances.push_back(u);
  }
  for (int s : speakers) {
    auto it = dataset.partition.find(s);
    if (it != dataset.partition.end()) out.partition[s] = it->second;
  }
  return out;
}

void write_manifest(const LabeledDataset& dataset, const std::filesystem::path& manifest_path) {
  const auto dir = manifest_path.parent_path();
  std::filesystem::create_directories(dir / "wav");
  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) {
    throw std::runtime_error("write_manifest: cannot open " + manifest_path.string());
  }
  for (const auto& u : dataset.utterances) {
    std::ostringstream name;
    name << "wav/s" << u.speaker_id << "_u" << u.utterance_id << ".wav";
    const std::string rel = name.str();
    write_wav(u.wave, dir / rel);
    nlohmann::json line = {
        {"speaker_id", u.speaker_id},
        {"utterance_id", u.utterance_id},
        {"path", rel},
        {"partition",
         dataset.partition.at(u.speaker_id) == Partition::kOod ? "ood" : "public"},
        {"poison_flag", u.poison_flag},
    };
    mf << line.dump() << "\n";
  }
}

LabeledDataset read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) {
    throw FormatError("read_manifest: cannot open " + manifest_path.string());
  }
  const auto dir = manifest_path.parent_path();
  LabeledDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("read_manifest: bad JSON at line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    Utterance u;
    u.speaker_id = j.at("speaker_id").get<int>();
    u.utterance_id = j.at("utterance_id").get<int>();
    u.poison_flag = j.at("poison_flag").get<bool>();
    u.wave = read_wav(dir / j.at("path").get<std::string>());
    const std::string part = j.at("partition").get<std::string>();
    ds.partition[u.speaker_id] = part == "ood" ? Partition::kOod : Partition::kPublic;
    ds.utterances.push_back(std::move(u));
  }
  return ds;
}

}  // namespace svlab::corpus
