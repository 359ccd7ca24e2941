#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svlab/corpus.hpp"
#include "svlab/dsp.hpp"

namespace svlab::net {

// Unit-L2-norm vector; the space where centroids, triggers and similarity
// scores live.
struct Embedding {
  std::vector<double> values;

  // Normalizes; throws DegenerateInputError on a (near-)zero vector.
  static Embedding normalized(std::vector<double> v);
};

// Arithmetic mean of member embeddings. Deliberately NOT renormalized.
struct Centroid {
  std::vector<double> values;
  int member_count = 0;
};

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b);
double cosine_sim(const Embedding& a, const Embedding& b);
double cosine_sim(const Embedding& a, const Centroid& b);
double cosine_sim(const Centroid& a, const Centroid& b);

// Dense 80 -> 128 -> 64 with ReLU between and L2 normalization on the output.
struct EncoderParams {
  int in_dim = 80;
  int hidden_dim = 128;
  int out_dim = 64;
  int version = 1;
  std::vector<double> w1;  // hidden_dim x in_dim, row-major
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // out_dim x hidden_dim
  std::vector<double> b2;  // out_dim

  static EncoderParams random_init(std::uint64_t seed, int in_dim = 80, int hidden_dim = 128,
                                   int out_dim = 64);
  bool same_shape(const EncoderParams& other) const;
};

Embedding embed(const EncoderParams& params, const dsp::FeatureVector& feat);

// Forward pass with cached intermediates for the backward pass.
struct EmbedTrace {
  std::vector<double> input;
  std::vector<double> hidden;     // post-ReLU
  std::vector<double> pre_norm;   // z
  double norm = 0.0;
  std::vector<double> output;     // z / ||z||
};
EmbedTrace embed_forward(const EncoderParams& params, const dsp::FeatureVector& feat);

struct ParamGrads {
  std::vector<double> w1, b1, w2, b2;
  explicit ParamGrads(const EncoderParams& p);
  void scale(double s);
};

// Accumulates dL/dparams into grads; optionally outputs dL/dinput.
void embed_backward(const EncoderParams& params, const EmbedTrace& trace,
                    const std::vector<double>& d_output, ParamGrads* grads,
                    std::vector<double>* d_input = nullptr);

// One term of the tuple loss: 1 - sigmoid(sim) when the utterance and the
// centroid belong to the same speaker, sigmoid(sim) otherwise.
double te2e_pair_term(double sim, bool matched);

struct Te2eResult {
  double loss = 0.0;
  // grad[k][m] = dL/d embeddings[k][m]; rows are speakers.
  std::vector<std::vector<std::vector<double>>> grad;
};

// Tuple loss summed over all (utterance, centroid) pairs in an N x M grid of
// embeddings (rows = speakers). For matched pairs the centroid excludes the
// evaluated utterance. weights[k][m], when given, scales every pair whose
// evaluated utterance is (k, m).
Te2eResult te2e_loss(const std::vector<std::vector<Embedding>>& grid,
                     const std::vector<std::vector<double>>* weights = nullptr);

struct ClassifierHead {
  int classes = 0;
  int dim = 0;
  std::vector<double> w;  // classes x dim
  std::vector<double> b;  // classes

  static ClassifierHead random_init(std::uint64_t seed, int classes, int dim);
};

struct ClassLossResult {
  double loss = 0.0;
  std::vector<std::vector<double>> d_embeddings;
  std::vector<double> d_w;
  std::vector<double> d_b;
};

// Mean softmax cross-entropy of a linear head over the embeddings.
ClassLossResult classification_loss(const std::vector<Embedding>& embeddings,
                                    const std::vector<int>& labels, const ClassifierHead& head);

enum class LossVariant { kTe2e, kClassification };

struct TrainConfig {
  int speakers_per_batch = 8;
  int utterances_per_speaker = 4;
  double learning_rate = 0.02;
  int steps = 3000;
  std::uint64_t seed = 0;
  LossVariant loss = LossVariant::kTe2e;
  // Weight on pairs whose evaluated utterance is benign when the batch
  // contains injected audio (1.0 = plain sum).
  double lambda = 1.0;
};

struct StepLoss {
  int step = 0;
  double loss = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<StepLoss> trace;
};

// Plain gradient descent, fixed step, no momentum. Deterministic under
// (dataset, config, init). Features are extracted once per utterance.
TrainResult train(const corpus::LabeledDataset& dataset, const TrainConfig& cfg,
                  const EncoderParams* init = nullptr, const dsp::FeatureConfig& feat_cfg = {});

// Same trainer on precomputed features: one row of features per utterance of
// `dataset` (index-aligned).
TrainResult train_on_features(const corpus::LabeledDataset& dataset,
                              const std::vector<dsp::FeatureVector>& features,
                              const TrainConfig& cfg, const EncoderParams* init = nullptr);

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err() const;
};

// Central finite differences (step 1e-4) against the analytic parameter
// gradients on an N x M feature batch, sampled coordinates per tensor.
GradCheckReport grad_check(const EncoderParams& params,
                           const std::vector<std::vector<dsp::FeatureVector>>& batch,
                           LossVariant loss = LossVariant::kTe2e, std::uint64_t seed = 0);

// Binary little-endian doubles behind a JSON header with shapes and version.
// Round-trips bit-exactly; shape or version mismatch raises FormatError.
void save_params(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_params(const std::filesystem::path& path);

}  // namespace svlab::net
