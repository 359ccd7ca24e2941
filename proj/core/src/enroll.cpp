#include "svlab/enroll.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svlab/errors.hpp"

namespace svlab::enrollment {

EnrollmentRecord enroll(const net::EncoderParams& params,
                        const std::vector<corpus::Utterance>& utterances,
                        const dsp::FeatureConfig& feat_cfg) {
  if (utterances.empty()) {
    throw std::invalid_argument("enroll: need at least one utterance");
  }
  const int speaker = utterances.front().speaker_id;
  EnrollmentRecord rec;
  rec.speaker_id = speaker;
  for (const auto& u : utterances) {
    if (u.speaker_id != speaker) {
      throw std::invalid_argument("enroll: utterances from mixed speakers");
    }
    const net::Embedding e = net::embed(params, dsp::compute_features(u.wave, feat_cfg));
    if (rec.centroid.values.empty()) rec.centroid.values.assign(e.values.size(), 0.0);
    for (std::size_t d = 0; d < e.values.size(); ++d) rec.centroid.values[d] += e.values[d];
    rec.centroid.member_count += 1;
    rec.enrolled_utterance_ids.push_back(u.utterance_id);
  }
  for (auto& v : rec.centroid.values) v /= rec.centroid.member_count;
  return rec;
}

VerifyResult verify(const net::EncoderParams& params, const EnrollmentRecord& record,
                    const Waveform& probe, double threshold,
                    const dsp::FeatureConfig& feat_cfg) {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw std::invalid_argument("verify: threshold must be in [-1, 1]");
  }
  const net::Embedding e = net::embed(params, dsp::compute_features(probe, feat_cfg));
  VerifyResult res;
  res.score = net::cosine_sim(e.values, record.centroid.values);
  res.accept = res.score > threshold;
  return res;
}

void save_records(const std::vector<EnrollmentRecord>& records,
                  const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({
        {"speaker_id", r.speaker_id},
        {"centroid", r.centroid.values},
        {"member_count", r.centroid.member_count},
        {"enrolled_utterance_ids", r.enrolled_utterance_ids},
    });
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw std::runtime_error("save_records: cannot open " + path.string());
  }
  f << arr.dump(2) << "\n";
}

std::vector<EnrollmentRecord> load_records(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw FormatError("load_records: cannot open " + path.string());
  }
  nlohmann::json arr;
  std::vector<EnrollmentRecord> out;
  try {
    f >> arr;
    for (const auto& j : arr) {
      EnrollmentRecord r;
      r.speaker_id = j.at("speaker_id").get<int>();
      r.centroid.values = j.at("centroid").get<std::vector<double>>();
      r.centroid.member_count = j.at("member_count").get<int>();
      r.enrolled_utterance_ids = j.at("enrolled_utterance_ids").get<std::vector<int>>();
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_records: bad JSON: ") + e.what());
  }
  return out;
}

}  // namespace svlab::enrollment
