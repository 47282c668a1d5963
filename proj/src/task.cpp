#include "dude/task.hpp"

#include <cmath>
#include <string>

#include "dude/errors.hpp"
#include "dude/svd.hpp"

namespace dude {
namespace {

constexpr std::uint64_t kEvalStream = 0x6576616cULL;   // "eval"
constexpr std::uint64_t kTrainStream = 0x747261696eULL;  // "train"

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev,
                std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix out(rows, cols);
  for (double& v : out.data()) v = normal(rng);
  return out;
}

Matrix orthonormal_columns(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  return svd(gaussian(rows, cols, 1.0, rng)).U;
}

std::mt19937_64 seeded(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::teacher_student ? "teacher_student" : "cluster_classify";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "teacher_student") return TaskKind::teacher_student;
  if (name == "cluster_classify") return TaskKind::cluster_classify;
  throw RangeError("unknown task kind '" + std::string(name) + "'");
}

Task make_task(TaskKind kind, std::size_t d, std::size_t k, std::size_t r_true,
               double sigma, std::uint64_t seed) {
  if (d == 0 || k == 0) {
    throw RangeError("make_task: dims must be positive, got d=" + std::to_string(d) +
                     " k=" + std::to_string(k));
  }
  if (kind == TaskKind::cluster_classify && d < 2) {
    throw RangeError("make_task: cluster_classify needs d >= 2 classes");
  }
  if (r_true > std::min(d, k)) {
    throw RangeError("make_task: r_true=" + std::to_string(r_true) +
                     " exceeds min(d, k)=" + std::to_string(std::min(d, k)));
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw RangeError("make_task: sigma must be finite and >= 0");
  }

  Task task;
  task.kind = kind;
  task.d = d;
  task.k = k;
  task.r_true = r_true;
  task.sigma = sigma;
  task.seed = seed;

  std::mt19937_64 rng = seeded({seed});
  task.base_weight = gaussian(d, k, 1.0 / std::sqrt(static_cast<double>(k)), rng);
  task.teacher = task.base_weight;
  if (r_true > 0) {
    const Matrix left = orthonormal_columns(d, r_true, rng);
    const Matrix right = orthonormal_columns(k, r_true, rng);
    std::uniform_real_distribution<double> strength(0.5, 1.5);
    for (std::size_t c = 0; c < r_true; ++c) {
      const double s = strength(rng);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < k; ++j)
          task.teacher(i, j) += s * left(i, c) * right(j, c);
    }
  }

  if (kind == TaskKind::cluster_classify) {
    task.centers = task.teacher;
    for (std::size_t c = 0; c < d; ++c) {
      double n = 0.0;
      for (std::size_t j = 0; j < k; ++j) n += task.centers(c, j) * task.centers(c, j);
      n = std::sqrt(n);
      const double factor = n > 0.0 ? Task::kCenterNorm / n : 0.0;
      for (std::size_t j = 0; j < k; ++j) task.centers(c, j) *= factor;
    }
  }
  return task;
}

Sample Task::draw(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample s;
  s.x.resize(k);
  if (kind == TaskKind::teacher_student) {
    for (double& v : s.x) v = normal(rng);
    s.target = matvec(teacher, s.x);
    for (double& v : s.target) v += sigma * normal(rng);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, d - 1);
    s.label = pick(rng);
    for (std::size_t j = 0; j < k; ++j) s.x[j] = centers(s.label, j) + sigma * normal(rng);
  }
  return s;
}

std::vector<Sample> Task::eval_set(std::size_t n) const {
  std::mt19937_64 rng = seeded({seed, kEvalStream});
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw(rng));
  return out;
}

std::mt19937_64 Task::train_stream(std::uint64_t train_seed) const {
  return seeded({seed, train_seed, kTrainStream});
}

}  // namespace dude
