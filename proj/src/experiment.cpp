#include "dude/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include "dude/errors.hpp"

namespace dude {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kSummaryFormatVersion = 1;

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::uint64_t read_uint(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) throw ConfigError(field, "must be non-negative");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError(field, "expected a non-negative integer, got " + v.dump());
}

double read_double(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number, got " + v.dump());
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(field, "must be finite");
  return x;
}

std::string read_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string, got " + v.dump());
  return v.get<std::string>();
}

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError(prefix + it.key(), "unknown field");
  }
}

template <typename Parse>
auto parse_enum(const std::string& field, const std::string& text, Parse parse) {
  try {
    return parse(text);
  } catch (const RangeError& e) {
    throw ConfigError(field, e.what());
  }
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("out_dir", "cannot write " + path.string());
  out << bytes;
  if (!out) throw ConfigError("out_dir", "failed writing " + path.string());
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ExperimentConfig parse_config(const json& doc, const Overrides& overrides) {
  if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  reject_unknown(doc,
                 {"task", "method", "rank", "scaling", "lr", "steps", "batch",
                  "warmup_frac", "scheduler", "optimizer", "seed", "seeds", "eval_every",
                  "out_dir"},
                 "");

  ExperimentConfig c;
  const json* task = find(doc, "task");
  if (!task) throw ConfigError("task", "missing");
  if (!task->is_object()) throw ConfigError("task", "expected an object");
  reject_unknown(*task, {"kind", "d", "k", "r_true", "sigma"}, "task.");
  if (const json* v = find(*task, "kind"))
    c.task_kind = parse_enum("task.kind", read_string(*v, "task.kind"), parse_task_kind);
  if (const json* v = find(*task, "d")) c.d = read_uint(*v, "task.d");
  if (const json* v = find(*task, "k")) c.k = read_uint(*v, "task.k");
  if (const json* v = find(*task, "r_true")) c.r_true = read_uint(*v, "task.r_true");
  if (const json* v = find(*task, "sigma")) c.sigma = read_double(*v, "task.sigma");

  const json* method = find(doc, "method");
  if (!method && !overrides.method) throw ConfigError("method", "missing");
  const std::string method_name =
      overrides.method ? *overrides.method : read_string(*method, "method");
  c.method = parse_enum("method", method_name, parse_method);

  if (const json* v = find(doc, "rank")) c.rank = read_uint(*v, "rank");
  if (overrides.rank) c.rank = *overrides.rank;
  if (const json* v = find(doc, "scaling")) c.scaling = read_double(*v, "scaling");
  if (const json* v = find(doc, "optimizer"))
    c.optimizer = parse_enum("optimizer", read_string(*v, "optimizer"), parse_optimizer);
  c.lr = c.optimizer == OptimizerKind::adam ? 1e-3 : 1e-2;
  if (const json* v = find(doc, "lr")) c.lr = read_double(*v, "lr");
  if (overrides.lr) c.lr = *overrides.lr;
  if (const json* v = find(doc, "steps")) c.steps = static_cast<long>(read_uint(*v, "steps"));
  if (const json* v = find(doc, "batch")) c.batch = read_uint(*v, "batch");
  if (const json* v = find(doc, "warmup_frac")) c.warmup_frac = read_double(*v, "warmup_frac");
  if (const json* v = find(doc, "scheduler"))
    c.scheduler = parse_enum("scheduler", read_string(*v, "scheduler"), parse_scheduler);
  if (const json* v = find(doc, "eval_every"))
    c.eval_every = static_cast<long>(read_uint(*v, "eval_every"));

  if (find(doc, "seed") && find(doc, "seeds"))
    throw ConfigError("seeds", "give either 'seed' or 'seeds', not both");
  if (const json* v = find(doc, "seed")) c.seeds = {read_uint(*v, "seed")};
  if (const json* v = find(doc, "seeds")) {
    if (!v->is_array() || v->empty())
      throw ConfigError("seeds", "expected a non-empty array of integers");
    c.seeds.clear();
    for (const json& s : *v) c.seeds.push_back(read_uint(s, "seeds"));
  }
  if (overrides.seed) c.seeds = {*overrides.seed};

  const json* out_dir = find(doc, "out_dir");
  if (!out_dir) throw ConfigError("out_dir", "missing");
  c.out_dir = read_string(*out_dir, "out_dir");
  if (c.out_dir.empty()) throw ConfigError("out_dir", "must not be empty");

  if (c.d < 1) throw ConfigError("task.d", "must be >= 1");
  if (c.k < 1) throw ConfigError("task.k", "must be >= 1");
  if (c.task_kind == TaskKind::cluster_classify && c.d < 2)
    throw ConfigError("task.d", "cluster_classify needs at least 2 classes");
  const std::size_t p = std::min(c.d, c.k);
  if (c.r_true > p)
    throw ConfigError("task.r_true", "must be <= min(d, k) = " + std::to_string(p));
  if (c.sigma < 0.0) throw ConfigError("task.sigma", "must be >= 0");
  if (c.method != Method::full && (c.rank < 1 || c.rank > p)) {
    throw ConfigError("rank", "rank " + std::to_string(c.rank) + " outside [1, " +
                                  std::to_string(p) + "]");
  }
  if (!(c.scaling > 0.0)) throw ConfigError("scaling", "must be > 0");
  if (c.lr < 0.0) throw ConfigError("lr", "must be >= 0");
  if (c.steps < 1) throw ConfigError("steps", "must be >= 1");
  if (c.batch < 1) throw ConfigError("batch", "must be >= 1");
  if (c.warmup_frac < 0.0 || c.warmup_frac >= 1.0)
    throw ConfigError("warmup_frac", "must be in [0, 1)");
  if (c.eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
  std::set<std::uint64_t> unique(c.seeds.begin(), c.seeds.end());
  if (unique.size() != c.seeds.size()) throw ConfigError("seeds", "duplicate seed");
  return c;
}

ExperimentConfig load_config(const fs::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, overrides);
}

json to_json(const ExperimentConfig& c) {
  return json{
      {"task",
       {{"kind", to_string(c.task_kind)},
        {"d", c.d},
        {"k", c.k},
        {"r_true", c.r_true},
        {"sigma", c.sigma}}},
      {"method", to_string(c.method)},
      {"rank", c.rank},
      {"scaling", c.scaling},
      {"lr", c.lr},
      {"steps", c.steps},
      {"batch", c.batch},
      {"warmup_frac", c.warmup_frac},
      {"scheduler", to_string(c.scheduler)},
      {"optimizer", to_string(c.optimizer)},
      {"seeds", c.seeds},
      {"eval_every", c.eval_every},
      {"out_dir", c.out_dir.generic_string()},
  };
}

std::string format_metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "step,loss,grad_norm,lr,eval\n";
  for (const MetricsRecord& r : records) {
    out += std::to_string(r.step);
    out += ',';
    out += format_double(r.loss);
    out += ',';
    out += format_double(r.grad_norm);
    out += ',';
    out += format_double(r.lr);
    out += ',';
    if (r.eval) out += format_double(*r.eval);
    out += '\n';
  }
  return out;
}

namespace {

struct SeedRun {
  std::uint64_t seed;
  std::vector<MetricsRecord> records;
  Summary summary;
};

SeedRun run_seed(const ExperimentConfig& c, std::uint64_t seed) {
  const Task task = make_task(c.task_kind, c.d, c.k, c.r_true, c.sigma, seed);
  AdapterConfig acfg;
  acfg.method = c.method;
  acfg.rank = c.method == Method::full ? 1 : c.rank;
  acfg.scaling = c.scaling;
  acfg.seed = seed;
  Model model = make_model(task, acfg);

  TrainConfig tcfg;
  tcfg.steps = c.steps;
  tcfg.batch = c.batch;
  tcfg.lr = c.lr;
  tcfg.warmup_frac = c.warmup_frac;
  tcfg.scheduler = c.scheduler;
  tcfg.optimizer = c.optimizer;
  tcfg.seed = seed;
  tcfg.eval_every = c.eval_every;

  SeedRun run{seed, train(model, task, tcfg), {}};
  run.summary = summarize(run.records, c.task_kind == TaskKind::cluster_classify);
  return run;
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

RunArtifact run_experiment(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw ConfigError("out_dir", "cannot create " + config.out_dir.string());

  std::vector<std::future<SeedRun>> pending;
  for (std::uint64_t seed : config.seeds)
    pending.push_back(std::async(std::launch::async, run_seed, std::cref(config), seed));
  std::vector<SeedRun> runs;
  for (auto& f : pending) runs.push_back(f.get());

  RunArtifact artifact;
  artifact.config_echo = to_json(config);
  json per_seed = json::array();
  for (const SeedRun& run : runs) {
    const fs::path file = config.out_dir / ("metrics_" + std::to_string(run.seed) + ".csv");
    write_file(file, format_metrics_csv(run.records));
    artifact.metrics_files.push_back(file);
    per_seed.push_back({{"seed", run.seed},
                        {"final_loss", run.summary.final_loss},
                        {"best_eval", optional_number(run.summary.best_eval)},
                        {"steps", run.summary.steps},
                        {"tail_mean_loss", run.summary.tail_mean_loss}});
  }

  // Top-level result fields mirror the first seed; `runs` lists every seed.
  const SeedRun& first = runs.front();
  json summary = {{"format_version", kSummaryFormatVersion},
                  {"method", to_string(config.method)},
                  {"seed", first.seed},
                  {"final_loss", first.summary.final_loss},
                  {"best_eval", optional_number(first.summary.best_eval)},
                  {"steps", first.summary.steps},
                  {"tail_mean_loss", first.summary.tail_mean_loss},
                  {"config", artifact.config_echo},
                  {"runs", per_seed}};
  artifact.summary_file = config.out_dir / "summary.json";
  write_file(artifact.summary_file, summary.dump(2) + "\n");
  return artifact;
}

std::vector<ComparisonRow> compare_runs(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("runs", "no run directories given");
  std::map<std::string, std::vector<double>> by_method;
  for (const fs::path& dir : run_dirs) {
    const fs::path file = dir / "summary.json";
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string(), "missing summary");
    try {
      const json doc = json::parse(in);
      const std::string method = doc.at("method").get<std::string>();
      auto& losses = by_method[method];
      if (doc.contains("runs")) {
        for (const json& run : doc.at("runs")) losses.push_back(run.at("final_loss").get<double>());
      } else {
        losses.push_back(doc.at("final_loss").get<double>());
      }
    } catch (const json::exception& e) {
      throw ConfigError(file.string(), std::string("corrupt summary: ") + e.what());
    }
  }

  std::vector<ComparisonRow> rows;
  for (const auto& [method, losses] : by_method) {
    ComparisonRow row;
    row.method = method;
    row.n_seeds = losses.size();
    double sum = 0.0;
    for (double v : losses) sum += v;
    row.mean_final_loss = sum / static_cast<double>(losses.size());
    double var = 0.0;
    for (double v : losses) var += (v - row.mean_final_loss) * (v - row.mean_final_loss);
    row.std_final_loss = std::sqrt(var / static_cast<double>(losses.size()));
    row.best_final_loss = *std::min_element(losses.begin(), losses.end());
    row.worst_final_loss = *std::max_element(losses.begin(), losses.end());
    rows.push_back(row);
  }
  return rows;
}

std::string format_comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out =
      "method,mean_final_loss,std_final_loss,best_final_loss,worst_final_loss,n_seeds\n";
  for (const ComparisonRow& r : rows) {
    out += r.method + ',' + format_double(r.mean_final_loss) + ',' +
           format_double(r.std_final_loss) + ',' + format_double(r.best_final_loss) + ',' +
           format_double(r.worst_final_loss) + ',' + std::to_string(r.n_seeds) + '\n';
  }
  return out;
}

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("in", "cannot read " + path.string());

  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::size_t count = 0;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      ++count;
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      const std::string trimmed =
          first == std::string::npos ? "" : cell.substr(first, last - first + 1);
      double v = 0.0;
      const char* begin = trimmed.data();
      const char* end = begin + trimmed.size();
      if (!trimmed.empty() && *begin == '+') ++begin;
      auto [ptr, err] = std::from_chars(begin, end, v);
      if (trimmed.empty() || err != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ConfigError("in", path.string() + ": row " + std::to_string(line_no) +
                                    ", column " + std::to_string(count) +
                                    ": not a finite number '" + trimmed + "'");
      }
      values.push_back(v);
    }
    if (!line.empty() && line.back() == ',') {
      throw ConfigError("in", path.string() + ": row " + std::to_string(line_no) +
                                  ", column " + std::to_string(count + 1) + ": empty cell");
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ConfigError("in", path.string() + ": row " + std::to_string(line_no) + " has " +
                                  std::to_string(count) + " columns, expected " +
                                  std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw ConfigError("in", path.string() + ": no data");
  return Matrix(rows, cols, std::move(values));
}

std::string format_matrix_csv(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace dude
