#include "svlab/svnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svlab/errors.hpp"
#include "svlab/rng.hpp"

namespace svlab::net {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Embedding Embedding::normalized(std::vector<double> v) {
  const double n = l2_norm(v);
  if (n < 1e-12) {
    throw DegenerateInputError("Embedding::normalized: zero vector");
  }
  for (auto& x : v) x /= n;
  return Embedding{std::move(v)};
}

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_sim: dimension mismatch");
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na < 1e-12 || nb < 1e-12) {
    throw std::invalid_argument("cosine_sim: zero vector");
  }
  return dot(a, b) / (na * nb);
}

double cosine_sim(const Embedding& a, const Embedding& b) { return cosine_sim(a.values, b.values); }
double cosine_sim(const Embedding& a, const Centroid& b) { return cosine_sim(a.values, b.values); }
double cosine_sim(const Centroid& a, const Centroid& b) { return cosine_sim(a.values, b.values); }

EncoderParams EncoderParams::random_init(std::uint64_t seed, int in_dim, int hidden_dim,
                                         int out_dim) {
  EncoderParams p;
  p.in_dim = in_dim;
  p.hidden_dim = hidden_dim;
  p.out_dim = out_dim;
  Rng rng(mix_seed(seed, 0x90));
  const double s1 = std::sqrt(2.0 / in_dim);
  const double s2 = std::sqrt(2.0 / hidden_dim);
  p.w1.resize(static_cast<std::size_t>(hidden_dim) * in_dim);
  p.b1.assign(hidden_dim, 0.0);
  p.w2.resize(static_cast<std::size_t>(out_dim) * hidden_dim);
  p.b2.assign(out_dim, 0.0);
  for (auto& w : p.w1) w = s1 * rng.gaussian();
  for (auto& w : p.w2) w = s2 * rng.gaussian();
  return p;
}

bool EncoderParams::same_shape(const EncoderParams& other) const {
  return in_dim == other.in_dim && hidden_dim == other.hidden_dim && out_dim == other.out_dim;
}

EmbedTrace embed_forward(const EncoderParams& params, const dsp::FeatureVector& feat) {
  if (static_cast<int>(feat.values.size()) != params.in_dim) {
    throw std::invalid_argument("embed: feature dimension mismatch");
  }
  EmbedTrace t;
  t.input = feat.values;
  t.hidden.resize(params.hidden_dim);
  for (int h = 0; h < params.hidden_dim; ++h) {
    const double* row = &params.w1[static_cast<std::size_t>(h) * params.in_dim];
    double a = params.b1[h];
    for (int i = 0; i < params.in_dim; ++i) a += row[i] * t.input[i];
    t.hidden[h] = a > 0.0 ? a : 0.0;
  }
  t.pre_norm.resize(params.out_dim);
  for (int o = 0; o < params.out_dim; ++o) {
    const double* row = &params.w2[static_cast<std::size_t>(o) * params.hidden_dim];
    double a = params.b2[o];
    for (int h = 0; h < params.hidden_dim; ++h) a += row[h] * t.hidden[h];
    t.pre_norm[o] = a;
  }
  t.norm = l2_norm(t.pre_norm);
  if (t.norm < 1e-12) {
    throw DegenerateInputError("embed: zero pre-normalization output");
  }
  t.output.resize(params.out_dim);
  for (int o = 0; o < params.out_dim; ++o) t.output[o] = t.pre_norm[o] / t.norm;
  return t;
}

Embedding embed(const EncoderParams& params, const dsp::FeatureVector& feat) {
  return Embedding{embed_forward(params, feat).output};
}

ParamGrads::ParamGrads(const EncoderParams& p)
    : w1(p.w1.size(), 0.0), b1(p.b1.size(), 0.0), w2(p.w2.size(), 0.0), b2(p.b2.size(), 0.0) {}

void ParamGrads::scale(double s) {
  for (auto& g : w1) g *= s;
  for (auto& g : b1) g *= s;
  for (auto& g : w2) g *= s;
  for (auto& g : b2) g *= s;
}

void embed_backward(const EncoderParams& params, const EmbedTrace& trace,
                    const std::vector<double>& d_output, ParamGrads* grads,
                    std::vector<double>* d_input) {
  // Through e = z / ||z||:  dz = (de - (de . e) e) / ||z||
  std::vector<double> dz(params.out_dim);
  const double proj = dot(d_output, trace.output);
  for (int o = 0; o < params.out_dim; ++o) {
    dz[o] = (d_output[o] - proj * trace.output[o]) / trace.norm;
  }

  std::vector<double> dh(params.hidden_dim, 0.0);
  for (int o = 0; o < params.out_dim; ++o) {
    const double* row = &params.w2[static_cast<std::size_t>(o) * params.hidden_dim];
    if (grads != nullptr) {
      double* grow = &grads->w2[static_cast<std::size_t>(o) * params.hidden_dim];
      for (int h = 0; h < params.hidden_dim; ++h) grow[h] += dz[o] * trace.hidden[h];
      grads->b2[o] += dz[o];
    }
    for (int h = 0; h < params.hidden_dim; ++h) dh[h] += dz[o] * row[h];
  }

  for (int h = 0; h < params.hidden_dim; ++h) {
    if (trace.hidden[h] <= 0.0) {
      dh[h] = 0.0;
      continue;
    }
    if (grads != nullptr) {
      double* grow = &grads->w1[static_cast<std::size_t>(h) * params.in_dim];
      for (int i = 0; i < params.in_dim; ++i) grow[i] += dh[h] * trace.input[i];
      grads->b1[h] += dh[h];
    }
  }
  if (d_input != nullptr) {
    d_input->assign(params.in_dim, 0.0);
    for (int h = 0; h < params.hidden_dim; ++h) {
      if (trace.hidden[h] <= 0.0) continue;
      const double* row = &params.w1[static_cast<std::size_t>(h) * params.in_dim];
      for (int i = 0; i < params.in_dim; ++i) (*d_input)[i] += dh[h] * row[i];
    }
  }
}

double te2e_pair_term(double sim, bool matched) {
  return matched ? 1.0 - sigmoid(sim) : sigmoid(sim);
}

Te2eResult te2e_loss(const std::vector<std::vector<Embedding>>& grid,
                     const std::vector<std::vector<double>>* weights) {
  const int n = static_cast<int>(grid.size());
  if (n < 2) {
    throw std::invalid_argument("te2e_loss: need at least 2 speakers");
  }
  const int m = static_cast<int>(grid[0].size());
  if (m < 2) {
    throw std::invalid_argument("te2e_loss: need at least 2 utterances per speaker");
  }
  const int dim = static_cast<int>(grid[0][0].values.size());
  for (const auto& row : grid) {
    if (static_cast<int>(row.size()) != m) {
      throw std::invalid_argument("te2e_loss: ragged grid");
    }
    for (const auto& e : row) {
      if (static_cast<int>(e.values.size()) != dim) {
        throw std::invalid_argument("te2e_loss: embedding dimension mismatch");
      }
    }
  }

  // Per-speaker sums for cheap exclusive centroids.
  std::vector<std::vector<double>> sums(n, std::vector<double>(dim, 0.0));
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < m; ++j) {
      for (int d = 0; d < dim; ++d) sums[k][d] += grid[k][j].values[d];
    }
  }

  Te2eResult res;
  res.grad.assign(n, std::vector<std::vector<double>>(m, std::vector<double>(dim, 0.0)));

  std::vector<double> centroid(dim);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) {
      const auto& e = grid[j][i].values;
      const double w = weights != nullptr ? (*weights)[j][i] : 1.0;
      for (int k = 0; k < n; ++k) {
        const bool matched = (k == j);
        if (matched) {
          for (int d = 0; d < dim; ++d) centroid[d] = (sums[j][d] - e[d]) / (m - 1);
        } else {
          for (int d = 0; d < dim; ++d) centroid[d] = sums[k][d] / m;
        }
        const double ne = l2_norm(e);
        const double nc = l2_norm(centroid);
        if (ne < 1e-12 || nc < 1e-12) {
          throw std::invalid_argument("te2e_loss: degenerate embedding or centroid");
        }
        const double s = dot(e, centroid) / (ne * nc);
        res.loss += w * te2e_pair_term(s, matched);

        const double sig = sigmoid(s);
        const double dterm = (matched ? -1.0 : 1.0) * sig * (1.0 - sig);
        const double gs = w * dterm;

        // dsim/de and dsim/dc of the general cosine.
        auto& ge = res.grad[j][i];
        for (int d = 0; d < dim; ++d) {
          ge[d] += gs * (centroid[d] / (ne * nc) - s * e[d] / (ne * ne));
        }
        const double member_w = matched ? 1.0 / (m - 1) : 1.0 / m;
        for (int mm = 0; mm < m; ++mm) {
          if (matched && mm == i) continue;
          auto& gm = res.grad[k][mm];
          for (int d = 0; d < dim; ++d) {
            gm[d] += gs * member_w * (e[d] / (ne * nc) - s * centroid[d] / (nc * nc));
          }
        }
      }
    }
  }
  return res;
}

ClassifierHead ClassifierHead::random_init(std::uint64_t seed, int classes, int dim) {
  ClassifierHead h;
  h.classes = classes;
  h.dim = dim;
  h.w.resize(static_cast<std::size_t>(classes) * dim);
  h.b.assign(classes, 0.0);
  Rng rng(mix_seed(seed, 0x91));
  const double s = std::sqrt(1.0 / dim);
  for (auto& w : h.w) w = s * rng.gaussian();
  return h;
}

ClassLossResult classification_loss(const std::vector<Embedding>& embeddings,
                                    const std::vector<int>& labels, const ClassifierHead& head) {
  if (embeddings.size() != labels.size() || embeddings.empty()) {
    throw std::invalid_argument("classification_loss: batch size mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= head.classes) {
      throw std::invalid_argument("classification_loss: label outside head range");
    }
  }
  const int batch = static_cast<int>(embeddings.size());
  ClassLossResult res;
  res.d_embeddings.assign(batch, std::vector<double>(head.dim, 0.0));
  res.d_w.assign(head.w.size(), 0.0);
  res.d_b.assign(head.b.size(), 0.0);

  std::vector<double> logits(head.classes), p(head.classes);
  for (int i = 0; i < batch; ++i) {
    const auto& e = embeddings[i].values;
    if (static_cast<int>(e.size()) != head.dim) {
      throw std::invalid_argument("classification_loss: embedding dimension mismatch");
    }
    for (int c = 0; c < head.classes; ++c) {
      const double* row = &head.w[static_cast<std::size_t>(c) * head.dim];
      double a = head.b[c];
      for (int d = 0; d < head.dim; ++d) a += row[d] * e[d];
      logits[c] = a;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (int c = 0; c < head.classes; ++c) {
      p[c] = std::exp(logits[c] - mx);
      z += p[c];
    }
    for (auto& v : p) v /= z;
    res.loss += -std::log(std::max(p[labels[i]], 1e-300)) / batch;

    for (int c = 0; c < head.classes; ++c) {
      const double dl = (p[c] - (c == labels[i] ? 1.0 : 0.0)) / batch;
      double* wrow = &res.d_w[static_cast<std::size_t>(c) * head.dim];
      const double* row = &head.w[static_cast<std::size_t>(c) * head.dim];
      for (int d = 0; d < head.dim; ++d) {
        wrow[d] += dl * e[d];
        res.d_embeddings[i][d] += dl * row[d];
      }
      res.d_b[c] += dl;
    }
  }
  return res;
}

namespace {

struct SpeakerPool {
  int speaker_id;
  std::vector<std::size_t> indices;  // into dataset.utterances / features
};

std::vector<SpeakerPool> build_pools(const corpus::LabeledDataset& dataset) {
  std::map<int, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < dataset.utterances.size(); ++i) {
    by_speaker[dataset.utterances[i].speaker_id].push_back(i);
  }
  std::vector<SpeakerPool> pools;
  pools.reserve(by_speaker.size());
  for (auto& [id, idx] : by_speaker) pools.push_back({id, std::move(idx)});
  return pools;
}

}  // namespace

TrainResult train_on_features(const corpus::LabeledDataset& dataset,
                              const std::vector<dsp::FeatureVector>& features,
                              const TrainConfig& cfg, const EncoderParams* init) {
  if (features.size() != dataset.utterances.size()) {
    throw std::invalid_argument("train: features are not index-aligned with the dataset");
  }
  if (cfg.speakers_per_batch < 2 || cfg.utterances_per_speaker < 2) {
    throw std::invalid_argument("train: need N >= 2 and M >= 2");
  }
  if (cfg.learning_rate <= 0.0) {
    throw std::invalid_argument("train: learning rate must be positive");
  }
  auto pools = build_pools(dataset);
  if (static_cast<int>(pools.size()) < cfg.speakers_per_batch) {
    throw std::invalid_argument("train: fewer speakers than speakers_per_batch");
  }
  for (const auto& p : pools) {
    if (static_cast<int>(p.indices.size()) < cfg.utterances_per_speaker) {
      throw std::invalid_argument("train: speaker " + std::to_string(p.speaker_id) +
                                  " has fewer than M utterances");
    }
  }

  EncoderParams params = init != nullptr
                             ? *init
                             : EncoderParams::random_init(mix_seed(cfg.seed, 0x33),
                                                          static_cast<int>(features.empty()
                                                                               ? 80
                                                                               : features[0].values.size()));
  const int n = cfg.speakers_per_batch;
  const int m = cfg.utterances_per_speaker;

  ClassifierHead head;
  std::map<int, int> label_index;
  if (cfg.loss == LossVariant::kClassification) {
    for (std::size_t i = 0; i < pools.size(); ++i) {
      label_index[pools[i].speaker_id] = static_cast<int>(i);
    }
    head = ClassifierHead::random_init(mix_seed(cfg.seed, 0x34),
                                       static_cast<int>(pools.size()), params.out_dim);
  }

  Rng rng(mix_seed(cfg.seed, 0x35));
  std::vector<std::size_t> speaker_order(pools.size());
  for (std::size_t i = 0; i < speaker_order.size(); ++i) speaker_order[i] = i;

  TrainResult result;
  result.trace.reserve(cfg.steps);

  std::vector<std::size_t> batch_idx(static_cast<std::size_t>(n) * m);
  for (int step = 0; step < cfg.steps; ++step) {
    rng.shuffle(speaker_order);
    for (int k = 0; k < n; ++k) {
      auto picks = pools[speaker_order[k]].indices;
      rng.shuffle(picks);
      for (int j = 0; j < m; ++j) batch_idx[static_cast<std::size_t>(k) * m + j] = picks[j];
    }

    std::vector<EmbedTrace> traces(batch_idx.size());
    for (std::size_t i = 0; i < batch_idx.size(); ++i) {
      traces[i] = embed_forward(params, features[batch_idx[i]]);
    }

    ParamGrads grads(params);
    double loss = 0.0;
    if (cfg.loss == LossVariant::kTe2e) {
      std::vector<std::vector<Embedding>> grid(n, std::vector<Embedding>(m));
      std::vector<std::vector<double>> weights(n, std::vector<double>(m, 1.0));
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) {
          const std::size_t idx = batch_idx[static_cast<std::size_t>(k) * m + j];
          grid[k][j].values = traces[static_cast<std::size_t>(k) * m + j].output;
          weights[k][j] = dataset.utterances[idx].poison_flag ? 1.0 : cfg.lambda;
        }
      }
      const Te2eResult r = te2e_loss(grid, &weights);
      loss = r.loss;
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) {
          embed_backward(params, traces[static_cast<std::size_t>(k) * m + j], r.grad[k][j],
                         &grads);
        }
      }
    } else {
      std::vector<Embedding> batch_emb(batch_idx.size());
      std::vector<int> labels(batch_idx.size());
      for (std::size_t i = 0; i < batch_idx.size(); ++i) {
        batch_emb[i].values = traces[i].output;
        labels[i] = label_index.at(dataset.utterances[batch_idx[i]].speaker_id);
      }
      const ClassLossResult r = classification_loss(batch_emb, labels, head);
      loss = r.loss;
      for (std::size_t i = 0; i < batch_idx.size(); ++i) {
        embed_backward(params, traces[i], r.d_embeddings[i], &grads);
      }
      for (std::size_t i = 0; i < head.w.size(); ++i) head.w[i] -= cfg.learning_rate * r.d_w[i];
      for (std::size_t i = 0; i < head.b.size(); ++i) head.b[i] -= cfg.learning_rate * r.d_b[i];
    }

    for (std::size_t i = 0; i < params.w1.size(); ++i) params.w1[i] -= cfg.learning_rate * grads.w1[i];
    for (std::size_t i = 0; i < params.b1.size(); ++i) params.b1[i] -= cfg.learning_rate * grads.b1[i];
    for (std::size_t i = 0; i < params.w2.size(); ++i) params.w2[i] -= cfg.learning_rate * grads.w2[i];
    for (std::size_t i = 0; i < params.b2.size(); ++i) params.b2[i] -= cfg.learning_rate * grads.b2[i];

    result.trace.push_back({step, loss});
  }

  result.params = std::move(params);
  return result;
}

TrainResult train(const corpus::LabeledDataset& dataset, const TrainConfig& cfg,
                  const EncoderParams* init, const dsp::FeatureConfig& feat_cfg) {
  std::vector<dsp::FeatureVector> features;
  features.reserve(dataset.utterances.size());
  for (const auto& u : dataset.utterances) {
    features.push_back(dsp::compute_features(u.wave, feat_cfg));
  }
  return train_on_features(dataset, features, cfg, init);
}

double GradCheckReport::max_rel_err() const {
  double mx = 0.0;
  for (const auto& e : entries) mx = std::max(mx, e.max_rel_err);
  return mx;
}

GradCheckReport grad_check(const EncoderParams& params,
                           const std::vector<std::vector<dsp::FeatureVector>>& batch,
                           LossVariant loss, std::uint64_t seed) {
  const int n = static_cast<int>(batch.size());
  const int m = n > 0 ? static_cast<int>(batch[0].size()) : 0;

  ClassifierHead head;
  if (loss == LossVariant::kClassification) {
    head = ClassifierHead::random_init(mix_seed(seed, 0x42), n, params.out_dim);
  }

  const auto loss_of = [&](const EncoderParams& p, const ClassifierHead& h) {
    if (loss == LossVariant::kTe2e) {
      std::vector<std::vector<Embedding>> grid(n, std::vector<Embedding>(m));
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) grid[k][j] = embed(p, batch[k][j]);
      }
      return te2e_loss(grid).loss;
    }
    std::vector<Embedding> embs;
    std::vector<int> labels;
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < m; ++j) {
        embs.push_back(embed(p, batch[k][j]));
        labels.push_back(k);
      }
    }
    return classification_loss(embs, labels, h).loss;
  };

  // Analytic gradients.
  ParamGrads grads(params);
  std::vector<double> head_dw, head_db;
  {
    std::vector<std::vector<EmbedTrace>> traces(n, std::vector<EmbedTrace>(m));
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < m; ++j) traces[k][j] = embed_forward(params, batch[k][j]);
    }
    if (loss == LossVariant::kTe2e) {
      std::vector<std::vector<Embedding>> grid(n, std::vector<Embedding>(m));
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) grid[k][j].values = traces[k][j].output;
      }
      const Te2eResult r = te2e_loss(grid);
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) embed_backward(params, traces[k][j], r.grad[k][j], &grads);
      }
    } else {
      std::vector<Embedding> embs;
      std::vector<int> labels;
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) {
          embs.push_back(Embedding{traces[k][j].output});
          labels.push_back(k);
        }
      }
      const ClassLossResult r = classification_loss(embs, labels, head);
      int idx = 0;
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) {
          embed_backward(params, traces[k][j], r.d_embeddings[idx], &grads);
          ++idx;
        }
      }
      head_dw = r.d_w;
      head_db = r.d_b;
    }
  }

  constexpr double kStep = 1e-4;
  constexpr int kCoordsPerTensor = 64;
  Rng rng(mix_seed(seed, 0x43));

  GradCheckReport report;
  EncoderParams probe = params;
  ClassifierHead probe_head = head;

  const auto check_tensor = [&](const std::string& name, std::vector<double>& values,
                                const std::vector<double>& analytic) {
    double worst = 0.0;
    const std::size_t count = std::min<std::size_t>(kCoordsPerTensor, values.size());
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i =
          values.size() <= kCoordsPerTensor ? c : rng.uniform_int(values.size());
      const double saved = values[i];
      values[i] = saved + kStep;
      const double lp = loss_of(probe, probe_head);
      values[i] = saved - kStep;
      const double lm = loss_of(probe, probe_head);
      values[i] = saved;
      const double fd = (lp - lm) / (2.0 * kStep);
      const double a = analytic[i];
      const double denom = std::max(std::abs(a), std::abs(fd));
      if (denom < 1e-7) continue;  // both negligibly small
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
    report.entries.push_back({name, worst});
  };

  check_tensor("w1", probe.w1, grads.w1);
  check_tensor("b1", probe.b1, grads.b1);
  check_tensor("w2", probe.w2, grads.w2);
  check_tensor("b2", probe.b2, grads.b2);
  if (loss == LossVariant::kClassification) {
    check_tensor("head_w", probe_head.w, head_dw);
    check_tensor("head_b", probe_head.b, head_db);
  }
  return report;
}

namespace {
constexpr char kMagic[4] = {'S', 'V', 'L', 'P'};
}

void save_params(const EncoderParams& params, const std::filesystem::path& path) {
  nlohmann::json header = {
      {"version", params.version},
      {"in_dim", params.in_dim},
      {"hidden_dim", params.hidden_dim},
      {"out_dim", params.out_dim},
      {"tensors", {"w1", "b1", "w2", "b2"}},
  };
  const std::string htext = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("save_params: cannot open " + path.string());
  }
  f.write(kMagic, 4);
  const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
  char lenbuf[4] = {static_cast<char>(hlen & 0xff), static_cast<char>((hlen >> 8) & 0xff),
                    static_cast<char>((hlen >> 16) & 0xff), static_cast<char>((hlen >> 24) & 0xff)};
  f.write(lenbuf, 4);
  f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  const auto write_tensor = [&f](const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  write_tensor(params.w1);
  write_tensor(params.b1);
  write_tensor(params.w2);
  write_tensor(params.b2);
  if (!f) {
    throw std::runtime_error("save_params: short write to " + path.string());
  }
}

EncoderParams load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw FormatError("load_params: cannot open " + path.string());
  }
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("load_params: bad magic in " + path.string());
  }
  unsigned char lenbuf[4];
  f.read(reinterpret_cast<char*>(lenbuf), 4);
  if (!f) {
    throw FormatError("load_params: truncated header length");
  }
  const std::uint32_t hlen = static_cast<std::uint32_t>(lenbuf[0]) | (lenbuf[1] << 8) |
                             (lenbuf[2] << 16) | (static_cast<std::uint32_t>(lenbuf[3]) << 24);
  if (hlen > 1 << 20) {
    throw FormatError("load_params: implausible header size");
  }
  std::string htext(hlen, '\0');
  f.read(htext.data(), hlen);
  if (!f) {
    throw FormatError("load_params: truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("load_params: bad header JSON: ") + e.what());
  }

  EncoderParams p;
  try {
    p.version = header.at("version").get<int>();
    p.in_dim = header.at("in_dim").get<int>();
    p.hidden_dim = header.at("hidden_dim").get<int>();
    p.out_dim = header.at("out_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_params: missing header field: ") + e.what());
  }
  if (p.version != 1) {
    throw FormatError("load_params: unsupported version " + std::to_string(p.version));
  }
  if (p.in_dim <= 0 || p.hidden_dim <= 0 || p.out_dim <= 0 || p.in_dim > 100000 ||
      p.hidden_dim > 100000 || p.out_dim > 100000) {
    throw FormatError("load_params: implausible dimensions");
  }

  const auto read_tensor = [&f, &path](std::vector<double>& v, std::size_t count) {
    v.resize(count);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) {
      throw FormatError("load_params: truncated tensor data in " + path.string());
    }
  };
  read_tensor(p.w1, static_cast<std::size_t>(p.hidden_dim) * p.in_dim);
  read_tensor(p.b1, p.hidden_dim);
  read_tensor(p.w2, static_cast<std::size_t>(p.out_dim) * p.hidden_dim);
  read_tensor(p.b2, p.out_dim);
  f.peek();
  if (!f.eof()) {
    throw FormatError("load_params: trailing bytes in " + path.string());
  }
  return p;
}

}  // namespace svlab::net
