#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "svlab/enroll.hpp"
#include "svlab/svnet.hpp"
#include "svlab/waveform.hpp"

namespace svlab::metrics {

struct ImpostorTrial {
  int claimed_id = 0;
  int actual_id = 0;
  double score = 0.0;
};

struct TrialScores {
  std::vector<std::pair<int, double>> genuine;  // (speaker_id, score)
  std::vector<ImpostorTrial> impostor;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Equal error rate from the piecewise-linear ROC through the Pareto-optimal
// single-threshold operating points (for each achievable FAR the smallest
// achievable FRR), intersected with FAR == FRR. Depends only on the score
// ordering, so it is invariant under any strictly increasing transform.
EerResult eer(const TrialScores& scores);

struct AsrResult {
  double rate = 0.0;
  std::vector<std::pair<int, double>> per_speaker;  // (speaker_id, score)
};

// Embeds the trigger once; rate = fraction of records with cosine > threshold.
AsrResult asr(const net::EncoderParams& params, const Waveform& trigger,
              const std::vector<enrollment::EnrollmentRecord>& records, double threshold = 0.75,
              const dsp::FeatureConfig& feat_cfg = {});

struct Quartiles {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

Quartiles quartiles(std::vector<double> values);

struct RunArtifacts {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  double eer_benign = 0.0;
  double eer_benign_threshold = 0.0;
  double eer_poisoned = 0.0;
  double eer_poisoned_threshold = 0.0;
  double asr = 0.0;
  double asr_threshold = 0.75;
  double trigger_final_sim = 0.0;
  std::vector<double> trigger_similarities;  // per enrolled speaker
  int n_ood_enrolled = 0;
  int n_public_speakers = 0;
};

// Versioned report JSON (schema_version 1), no timestamps.
std::string summarize(const RunArtifacts& artifacts);

// True iff the string parses and carries every required field with the right
// type and range; on failure, *why names the first offending field.
bool validate_report(const std::string& report_json, std::string* why = nullptr);

// CSV: claimed_id, actual_id, score, genuine_flag.
void write_scores_csv(const TrialScores& scores, const std::filesystem::path& path);

}  // namespace svlab::metrics
