#pragma once

#include <filesystem>
#include <vector>

#include "svlab/corpus.hpp"
#include "svlab/dsp.hpp"
#include "svlab/svnet.hpp"

namespace svlab::enrollment {

struct EnrollmentRecord {
  int speaker_id = 0;
  net::Centroid centroid;
  std::vector<int> enrolled_utterance_ids;
};

// Centroid of the utterances' embeddings; all utterances must share one
// speaker.
EnrollmentRecord enroll(const net::EncoderParams& params,
                        const std::vector<corpus::Utterance>& utterances,
                        const dsp::FeatureConfig& feat_cfg = {});

struct VerifyResult {
  double score = 0.0;
  bool accept = false;  // strict: score > threshold
};

VerifyResult verify(const net::EncoderParams& params, const EnrollmentRecord& record,
                    const Waveform& probe, double threshold,
                    const dsp::FeatureConfig& feat_cfg = {});

void save_records(const std::vector<EnrollmentRecord>& records,
                  const std::filesystem::path& path);
std::vector<EnrollmentRecord> load_records(const std::filesystem::path& path);

}  // namespace svlab::enrollment
