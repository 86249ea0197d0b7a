#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ptdt::envs {

enum class Family { PointDir2d, PointVel1d, PointReach2d };
enum class Quality { Random, Medium, Expert };

std::string_view to_string(Family f);
std::string_view to_string(Quality q);
Family parse_family(std::string_view s);
Quality parse_quality(std::string_view s);

struct FamilyDims {
  int state_dim;
  int action_dim;
  int horizon;
};

FamilyDims family_dims(Family f);

// One task of a family. `param` is the goal angle (dir), the target velocity
// (vel) or the goal position (reach).
struct TaskSpec {
  Family family = Family::PointVel1d;
  std::vector<double> param;
  int task_index = 0;
  int horizon = 100;

  int state_dim() const { return family_dims(family).state_dim; }
  int action_dim() const { return family_dims(family).action_dim; }
  std::string describe() const;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Validates the per-family invariants (v* in [0,3], goal inside the arena).
void validate(const TaskSpec& task);

}  // namespace ptdt::envs
