#include "ptdt/envs/task.hpp"

#include <cmath>
#include <sstream>

#include "ptdt/common/errors.hpp"

namespace ptdt::envs {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::PointDir2d: return "point-dir-2d";
    case Family::PointVel1d: return "point-vel-1d";
    case Family::PointReach2d: return "point-reach-2d";
  }
  return "?";
}

std::string_view to_string(Quality q) {
  switch (q) {
    case Quality::Random: return "random";
    case Quality::Medium: return "medium";
    case Quality::Expert: return "expert";
  }
  return "?";
}

Family parse_family(std::string_view s) {
  for (Family f : {Family::PointDir2d, Family::PointVel1d, Family::PointReach2d}) {
    if (s == to_string(f)) return f;
  }
  if (s == "dir" || s == "dir-2d") return Family::PointDir2d;
  if (s == "vel" || s == "vel-1d") return Family::PointVel1d;
  if (s == "reach" || s == "reach-2d") return Family::PointReach2d;
  throw ConfigError("unknown task family '" + std::string(s) + "'");
}

Quality parse_quality(std::string_view s) {
  for (Quality q : {Quality::Random, Quality::Medium, Quality::Expert}) {
    if (s == to_string(q)) return q;
  }
  throw ConfigError("unknown quality '" + std::string(s) + "'");
}

FamilyDims family_dims(Family f) {
  switch (f) {
    case Family::PointDir2d: return {4, 2, 100};
    case Family::PointVel1d: return {2, 1, 100};
    case Family::PointReach2d: return {2, 2, 50};
  }
  throw ContractError("family_dims: bad family");
}

std::string TaskSpec::describe() const {
  std::ostringstream os;
  os << to_string(family) << "#" << task_index << " (";
  switch (family) {
    case Family::PointDir2d: os << "goal angle " << param.at(0) << " rad"; break;
    case Family::PointVel1d: os << "target velocity " << param.at(0); break;
    case Family::PointReach2d: os << "goal (" << param.at(0) << ", " << param.at(1) << ")"; break;
  }
  os << ")";
  return os.str();
}

void validate(const TaskSpec& task) {
  const auto need = task.family == Family::PointReach2d ? 2u : 1u;
  if (task.param.size() != need) {
    throw ContractError("task " + std::string(to_string(task.family)) + " needs " +
                        std::to_string(need) + " parameters");
  }
  if (task.horizon < 1) throw ContractError("task horizon must be positive");
  for (double p : task.param) {
    if (!std::isfinite(p)) throw ContractError("task parameter is not finite");
  }
  if (task.family == Family::PointVel1d && (task.param[0] < 0.0 || task.param[0] > 3.0)) {
    throw ContractError("point-vel-1d target velocity must lie in [0, 3]");
  }
  if (task.family == Family::PointReach2d &&
      (std::abs(task.param[0]) > 2.0 || std::abs(task.param[1]) > 2.0)) {
    throw ContractError("point-reach-2d goal must lie in [-2, 2]^2");
  }
}

}  // namespace ptdt::envs
