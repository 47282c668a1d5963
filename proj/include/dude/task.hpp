#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "dude/matrix.hpp"

namespace dude {

enum class TaskKind { teacher_student, cluster_classify };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct Sample {
  Vector x;             // length k
  Vector target;        // length d, teacher_student only
  std::size_t label = 0;  // cluster_classify only
};

//
// Synthetic adaptation task with a known low-rank shift.
//
// Both kinds draw a "pre-trained" weight W₀ with N(0, 1/k) entries and a
// target W_t = W₀ + U'·S'·V'ᵀ where U', V' have r_true orthonormal columns
// and S' is uniform on [0.5, 1.5].
//
//   teacher_student   x ~ N(0, I_k), target = W_t·x + sigma·N(0, I_d)
//   cluster_classify  d classes; the centre of class c is row c of W_t
//                     rescaled to norm kCenterNorm; x = centre + sigma·N(0, I_k)
//
// The eval set and the training stream come from different seed streams.
//
class Task {
 public:
  static constexpr double kCenterNorm = 3.0;

  TaskKind kind = TaskKind::teacher_student;
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t r_true = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  Matrix base_weight;  // W₀
  Matrix teacher;      // W_t
  Matrix centers;      // d x k, cluster_classify only

  Sample draw(std::mt19937_64& rng) const;
  std::vector<Sample> eval_set(std::size_t n) const;
  // Training stream for one run; independent of the eval stream.
  std::mt19937_64 train_stream(std::uint64_t train_seed) const;
};

Task make_task(TaskKind kind, std::size_t d, std::size_t k, std::size_t r_true,
               double sigma, std::uint64_t seed);

}  // namespace dude
