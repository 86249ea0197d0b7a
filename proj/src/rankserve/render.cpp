#include "ptdt/rankserve/render.hpp"

#include "ptdt/dtmodel/rollout.hpp"
#include "ptdt/envs/env.hpp"

namespace ptdt::rank {

std::vector<std::array<double, 2>> polyline(const traj::Episode& ep) {
  std::vector<std::array<double, 2>> pts;
  for (int t = 0; t < ep.length(); ++t) {
    auto s = ep.state(t);
    if (ep.family == envs::Family::PointVel1d) {
      pts.push_back({t * envs::kDt, s[0]});
    } else {
      pts.push_back({s[0], s[1]});
    }
  }
  return pts;
}

Renderer rollout_renderer(const dt::PromptDT<float>& model, const envs::TaskSpec& task, const traj::PromptLayout& layout,
                          const zo::OnlineOracleConfig& cfg) {
  return [&model, task, layout, cfg](const zo::Candidates& candidates, int iteration) {
    zo::OnlineReturnObjective objective(model, task, layout, cfg);
    const auto episodes = dt::rollout_batch(model, objective.requests(candidates, iteration));
    std::vector<CandidatePayload> out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      CandidatePayload p;
      p.index = int(i);
      p.task = task.describe();
      p.task_params = task.param;
      for (int e = 0; e < cfg.episodes; ++e) {
        const auto& ep = episodes[i * cfg.episodes + e];
        p.trajectories.push_back(polyline(ep));
        p.episodic_return += ep.episodic_return();
      }
      p.episodic_return /= cfg.episodes;
      out.push_back(std::move(p));
    }
    return out;
  };
}

}  // namespace ptdt::rank
