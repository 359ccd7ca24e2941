#include "svlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svlab/errors.hpp"
#include "svlab/rng.hpp"
#include "svlab/wav_io.hpp"

namespace svlab::attack {

std::map<int, net::Centroid> compute_centroids(const net::EncoderParams& params,
                                               const corpus::LabeledDataset& dataset,
                                               const dsp::FeatureConfig& feat_cfg) {
  std::map<int, net::Centroid> out;
  for (const auto& u : dataset.utterances) {
    const net::Embedding e = net::embed(params, dsp::compute_features(u.wave, feat_cfg));
    auto& c = out[u.speaker_id];
    if (c.values.empty()) c.values.assign(e.values.size(), 0.0);
    for (std::size_t d = 0; d < e.values.size(); ++d) c.values[d] += e.values[d];
    c.member_count += 1;
  }
  if (out.empty()) {
    throw std::invalid_argument("compute_centroids: empty dataset");
  }
  for (auto& [id, c] : out) {
    for (auto& v : c.values) v /= c.member_count;
  }
  return out;
}

net::Embedding derive_backdoor_embedding(const std::vector<net::Centroid>& centroids) {
  if (centroids.empty()) {
    throw std::invalid_argument("derive_backdoor_embedding: no centroids");
  }
  const std::size_t dim = centroids.front().values.size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& c : centroids) {
    if (c.values.size() != dim) {
      throw std::invalid_argument("derive_backdoor_embedding: centroid dimension mismatch");
    }
    for (std::size_t d = 0; d < dim; ++d) mean[d] += c.values[d];
  }
  for (auto& v : mean) v /= static_cast<double>(centroids.size());
  double norm = 0.0;
  for (double v : mean) norm += v * v;
  if (std::sqrt(norm) < 1e-9) {
    throw DegenerateInputError("derive_backdoor_embedding: centroid mean is zero");
  }
  return net::Embedding::normalized(std::move(mean));
}

TriggerBundle synthesize_trigger(const net::EncoderParams& surrogate,
                                 const net::Embedding& target, const SynthesisConfig& cfg,
                                 const dsp::FeatureConfig& feat_cfg) {
  if (static_cast<int>(target.values.size()) != surrogate.out_dim) {
    throw std::invalid_argument("synthesize_trigger: target dimension mismatch");
  }

  // Voiced, breathy init keeps every mel band energized, which keeps the
  // log-energy gradients bounded.
  corpus::SpeakerSpec init_spec;
  init_spec.speaker_id = -1;
  init_spec.f0_hz = 150.0;
  init_spec.harmonic_amps = {1.0, 0.6, 0.45, 0.35, 0.3, 0.25, 0.2, 0.18, 0.15, 0.12, 0.1, 0.08};
  init_spec.breathiness = 0.06;
  Waveform wave = corpus::gen_utterance(init_spec, cfg.duration_s, mix_seed(cfg.seed, 0x61)).wave;

  TriggerBundle bundle;
  bundle.target_embedding = target;

  const auto similarity = [&](const Waveform& w) {
    const net::Embedding e = net::embed(surrogate, dsp::compute_features(w, feat_cfg));
    return net::cosine_sim(e, target);
  };

  double sim = similarity(wave);
  bundle.objective_trace.push_back(sim);

  for (int step = 0; step < cfg.max_steps && sim < cfg.target_sim; ++step) {
    const dsp::FeatureVector feat = dsp::compute_features(wave, feat_cfg);
    const net::EmbedTrace trace = net::embed_forward(surrogate, feat);

    // L = ||e - t||^2 = 2 - 2 e.t for unit vectors; dL/de = 2 (e - t).
    std::vector<double> d_out(trace.output.size());
    for (std::size_t d = 0; d < d_out.size(); ++d) {
      d_out[d] = 2.0 * (trace.output[d] - target.values[d]);
    }
    std::vector<double> d_feat;
    net::embed_backward(surrogate, trace, d_out, nullptr, &d_feat);
    const std::vector<double> grad = dsp::feature_grad(wave, d_feat, feat_cfg);

    double rms = 0.0;
    for (double g : grad) rms += g * g;
    rms = std::sqrt(rms / grad.size());
    if (rms < 1e-15) break;
    const double scale = cfg.learning_rate / rms;
    for (std::size_t i = 0; i < wave.samples.size(); ++i) {
      wave.samples[i] = std::clamp(wave.samples[i] - scale * grad[i], -1.0, 1.0);
    }

    sim = similarity(wave);
    bundle.objective_trace.push_back(sim);
  }

  bundle.clean_trigger = wave;
  bundle.poisoning_trigger = std::move(wave);
  bundle.final_sim = sim;
  if (cfg.max_steps > 0 && sim < cfg.min_sim) {
    throw SynthesisFailure("synthesize_trigger: stalled at similarity " + std::to_string(sim),
                           sim);
  }
  return bundle;
}

TriggerBundle apply_channel(const TriggerBundle& bundle, const dsp::ChannelParams& channel) {
  TriggerBundle out = bundle;
  out.poisoning_trigger = dsp::channel_simulate(bundle.clean_trigger, channel);
  return out;
}

namespace {

// Appends `copies` poison utterances per selected speaker.
corpus::LabeledDataset inject(const corpus::LabeledDataset& clean,
                              const std::vector<int>& selected,
                              const std::map<int, const Waveform*>& trigger_of,
                              double poison_rate) {
  corpus::LabeledDataset out = clean;
  for (int speaker : selected) {
    const auto indices = clean.indices_of(speaker);
    const auto copies = static_cast<int>(
        std::ceil(poison_rate * static_cast<double>(indices.size()) - 1e-12));
    int next_id = 0;
    for (auto i : indices) {
      next_id = std::max(next_id, clean.utterances[i].utterance_id + 1);
    }
    for (int c = 0; c < copies; ++c) {
      corpus::Utterance u;
      u.speaker_id = speaker;
      u.utterance_id = next_id + c;
      u.wave = *trigger_of.at(speaker);
      u.poison_flag = true;
      out.utterances.push_back(std::move(u));
    }
  }
  return out;
}

std::vector<int> select_speakers(const corpus::LabeledDataset& clean, double speaker_rate,
                                 std::uint64_t seed) {
  std::vector<int> ids = clean.speaker_ids();
  const auto count = static_cast<std::size_t>(
      std::lround(speaker_rate * static_cast<double>(ids.size())));
  Rng rng(mix_seed(seed, 0x62));
  rng.shuffle(ids);
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

corpus::LabeledDataset poison_dataset(const corpus::LabeledDataset& clean,
                                      const TriggerBundle& bundle, const PoisonConfig& cfg) {
  if (!(cfg.poison_rate > 0.0 && cfg.poison_rate <= 1.0) ||
      !(cfg.speaker_rate > 0.0 && cfg.speaker_rate <= 1.0)) {
    throw std::invalid_argument("poison_dataset: rates must be in (0, 1]");
  }
  const auto selected = select_speakers(clean, cfg.speaker_rate, cfg.seed);
  std::map<int, const Waveform*> trigger_of;
  for (int s : selected) trigger_of[s] = &bundle.poisoning_trigger;
  return inject(clean, selected, trigger_of, cfg.poison_rate);
}

ClusterbkResult clusterbk_poison(const corpus::LabeledDataset& clean, int n_groups,
                                 const std::vector<double>& freqs, const PoisonConfig& cfg) {
  if (n_groups < 1 || static_cast<int>(freqs.size()) != n_groups) {
    throw std::invalid_argument("clusterbk_poison: need one frequency per group");
  }
  if (!(cfg.poison_rate > 0.0 && cfg.poison_rate <= 1.0)) {
    throw std::invalid_argument("clusterbk_poison: poison_rate must be in (0, 1]");
  }

  ClusterbkResult res;
  res.freqs = freqs;

  const std::vector<int> ids = clean.speaker_ids();
  double duration = 1.0;
  if (!clean.utterances.empty()) {
    duration = clean.utterances.front().wave.duration_s();
  }
  std::vector<Waveform> tones;
  tones.reserve(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    tones.push_back(dsp::tone_trigger(freqs[g], duration));
  }

  std::map<int, const Waveform*> trigger_of;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int g = static_cast<int>(i) % n_groups;
    res.speaker_group[ids[i]] = g;
    trigger_of[ids[i]] = &tones[g];
  }
  res.dataset = inject(clean, ids, trigger_of, cfg.poison_rate);
  return res;
}

double ood_acs(const std::map<int, net::Centroid>& public_centroids,
               const std::map<int, net::Centroid>& ood_centroids) {
  if (public_centroids.empty() || ood_centroids.empty()) {
    throw std::invalid_argument("ood_acs: empty centroid map");
  }
  double total = 0.0;
  for (const auto& [oid, oc] : ood_centroids) {
    double best = -1.0;
    for (const auto& [pid, pc] : public_centroids) {
      best = std::max(best, net::cosine_sim(oc, pc));
    }
    total += best;
  }
  return total / static_cast<double>(ood_centroids.size());
}

void save_bundle(const TriggerBundle& bundle, const std::filesystem::path& stem) {
  write_wav(bundle.clean_trigger, stem.string() + "_clean.wav");
  write_wav(bundle.poisoning_trigger, stem.string() + "_poison.wav");
  nlohmann::json j = {
      {"target_embedding", bundle.target_embedding.values},
      {"final_similarity", bundle.final_sim},
      {"synthesis_steps", bundle.objective_trace.size()},
      {"objective_trace", bundle.objective_trace},
  };
  std::ofstream f(stem.string() + ".json", std::ios::trunc);
  if (!f) {
    throw std::runtime_error("save_bundle: cannot open " + stem.string() + ".json");
  }
  f << j.dump(2) << "\n";
}

TriggerBundle load_bundle(const std::filesystem::path& stem) {
  TriggerBundle b;
  b.clean_trigger = read_wav(stem.string() + "_clean.wav");
  b.poisoning_trigger = read_wav(stem.string() + "_poison.wav");
  std::ifstream f(stem.string() + ".json");
  if (!f) {
    throw FormatError("load_bundle: cannot open " + stem.string() + ".json");
  }
  nlohmann::json j;
  try {
    f >> j;
    b.target_embedding.values = j.at("target_embedding").get<std::vector<double>>();
    b.final_sim = j.at("final_similarity").get<double>();
    b.objective_trace = j.at("objective_trace").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_bundle: bad sidecar: ") + e.what());
  }
  return b;
}

}  // namespace svlab::attack
