#pragma once

#include "ptdt/rankserve/session.hpp"
#include "ptdt/trajdata/episode.hpp"
#include "ptdt/zorank/prompt_tuning.hpp"

namespace ptdt::rank {

// 2-D polyline of an episode: positions for dir-2d and reach-2d, (time,
// velocity) for vel-1d.
std::vector<std::array<double, 2>> polyline(const traj::Episode& ep);

// Rolls each candidate out with the online oracle's seeds and renders the
// episodes; the payload return is the mean episodic return.
Renderer rollout_renderer(const dt::PromptDT<float>& model, const envs::TaskSpec& task, const traj::PromptLayout& layout,
                          const zo::OnlineOracleConfig& cfg);

}  // namespace ptdt::rank
