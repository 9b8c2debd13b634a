#pragma once

#include "minitad/postproc/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace minitad::postproc {

// {"results": {video_id: [{"segment": [s, e], "label": name, "score": x}]}}
// with segments in seconds.
nlohmann::json detections_to_json(const std::vector<ProposalSet>& sets, const LabelSpace& labels);
std::vector<ProposalSet> detections_from_json(const nlohmann::json& doc, const LabelSpace& labels);
void save_detections(const std::vector<ProposalSet>& sets, const LabelSpace& labels, const std::filesystem::path& path);
std::vector<ProposalSet> load_detections(const std::filesystem::path& path, const LabelSpace& labels);

// {video_id: {"labels": [name, ...], "scores": [p, ...]}}
ExternalScores external_scores_from_json(const nlohmann::json& doc, const LabelSpace& labels);
ExternalScores load_external_scores(const std::filesystem::path& path, const LabelSpace& labels);

/// CSV with columns threshold,mAP and a closing "average" row.
std::string report_csv(const EvalResult& result);
void save_report(const EvalResult& result, const std::filesystem::path& path);

}  // namespace minitad::postproc
