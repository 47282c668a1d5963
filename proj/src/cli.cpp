#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <random>
#include <ostream>

#include "dude/errors.hpp"
#include "dude/experiment.hpp"
#include "dude/grad.hpp"
#include "dude/model.hpp"
#include "dude/svd.hpp"

namespace dude {
namespace fs = std::filesystem;

namespace {

struct Shape {
  std::size_t d;
  std::size_t k;
};

const std::vector<Shape> kDefaultShapes = {{2, 2}, {5, 4}, {4, 7}, {16, 16}};

std::vector<std::size_t> default_ranks(std::size_t d, std::size_t k) {
  const std::size_t p = std::min(d, k);
  std::vector<std::size_t> ranks{1};
  if (p >= 2) ranks.push_back(2);
  if (p > 2) ranks.push_back(p);
  return ranks;
}

Matrix random_weight(std::size_t d, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(d, k);
  for (double& v : w.data()) v = normal(rng);
  return w;
}

// Adapter state for a gradient check: initialize, then move every trainable
// off its initial value so B = 0 (lora/dora) does not hide errors in dA.
AdapterState perturbed_state(Method method, std::size_t d, std::size_t k, std::size_t r,
                             std::uint64_t seed) {
  AdapterConfig cfg;
  cfg.method = method;
  cfg.rank = r;
  cfg.seed = seed;
  AdapterState s = initialize(random_weight(d, k, seed), cfg);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (auto view : trainable_views(s))
    for (double& v : view) v += jitter(rng);
  if (s.m)
    for (double& v : *s.m) v = std::abs(v) + 0.1;
  return s;
}

int gradcheck_command(const std::string& method_name, std::size_t d, std::size_t k,
                      std::size_t rank, std::uint64_t seed, double tolerance,
                      std::ostream& out) {
  std::vector<Method> methods;
  if (method_name == "all") {
    methods.assign(kAllMethods.begin(), kAllMethods.end());
  } else {
    methods.push_back(parse_method(method_name));
  }
  std::vector<Shape> shapes = kDefaultShapes;
  if (d != 0 || k != 0) {
    if (d == 0 || k == 0) throw RangeError("gradcheck: --d and --k must both be >= 1");
    shapes = {{d, k}};
  }

  bool all_pass = true;
  out << "method,d,k,rank,param,max_rel_error,pass\n";
  for (Method method : methods) {
    for (const Shape& shape : shapes) {
      std::vector<std::size_t> ranks =
          rank != 0 ? std::vector<std::size_t>{rank} : default_ranks(shape.d, shape.k);
      if (method == Method::full) ranks = {1};
      for (std::size_t r : ranks) {
        if (r > std::min(shape.d, shape.k)) {
          throw RangeError("gradcheck: rank " + std::to_string(r) + " exceeds min(d, k)");
        }
        const AdapterState state = perturbed_state(method, shape.d, shape.k, r, seed);
        const GradCheckReport report = grad_check(state, seed, tolerance);
        all_pass = all_pass && report.pass;
        for (const ParamError& e : report.errors) {
          out << to_string(method) << ',' << shape.d << ',' << shape.k << ',' << r << ','
              << e.name << ',' << format_double(e.max_rel_error) << ','
              << (e.max_rel_error <= tolerance ? "yes" : "no") << '\n';
        }
      }
    }
  }
  out << (all_pass ? "gradcheck: PASS" : "gradcheck: FAIL") << '\n';
  return all_pass ? 0 : 2;
}

void write_text(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("out", "cannot write " + path.string());
  f << bytes;
}

int svd_command(const fs::path& in, std::size_t rank, const std::string& prefix,
                std::ostream& out) {
  const Matrix w = read_matrix_csv(in);
  const SvdFactors f = svd(w);
  const std::size_t r = rank == 0 ? f.sigma.size() : rank;
  const TruncatedSvd top = truncate_svd(f, r);
  const double residual = frobenius_norm(subtract(w, top.reconstruct()));

  std::string sigma;
  for (double s : top.sigma) sigma += format_double(s) + '\n';
  write_text(prefix + "_U.csv", format_matrix_csv(top.U));
  write_text(prefix + "_sigma.csv", sigma);
  write_text(prefix + "_V.csv", format_matrix_csv(top.V));
  write_text(prefix + "_residual.txt", format_double(residual) + '\n');
  out << "rank " << r << " of " << f.sigma.size() << ", residual "
      << format_double(residual) << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank adapter experiments: LoRA, DoRA, PiSSA and DuDe"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train one config over its seeds");
  std::string config_path;
  Overrides overrides;
  std::uint64_t seed_override = 0;
  std::string method_override;
  std::size_t rank_override = 0;
  double lr_override = 0.0;
  run->add_option("--config", config_path, "JSON experiment config")->required();
  auto* seed_opt = run->add_option("--seed", seed_override, "Run a single seed");
  auto* method_opt = run->add_option("--method", method_override);
  auto* rank_opt = run->add_option("--rank", rank_override);
  auto* lr_opt = run->add_option("--lr", lr_override);

  auto* compare = app.add_subcommand("compare", "Tabulate final losses across runs");
  std::vector<std::string> run_dirs;
  std::string compare_out;
  compare->add_option("dirs", run_dirs, "Run directories holding summary.json")->required();
  compare->add_option("--out", compare_out, "Comparison CSV path")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  std::string gc_method = "all";
  std::size_t gc_d = 0, gc_k = 0, gc_rank = 0;
  std::uint64_t gc_seed = 42;
  double gc_tol = 1e-5;
  gradcheck->add_option("--method", gc_method, "Method name or 'all'");
  auto* d_opt = gradcheck->add_option("--d", gc_d, "Output dimension");
  auto* k_opt = gradcheck->add_option("--k", gc_k, "Input dimension");
  gradcheck->add_option("--rank", gc_rank, "Adapter rank (default: 1, 2, min(d,k))");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--tolerance", gc_tol);

  auto* svd_cmd = app.add_subcommand("svd", "Thin SVD of a CSV matrix");
  std::string svd_in, svd_prefix;
  std::size_t svd_rank = 0;
  svd_cmd->add_option("--in", svd_in, "Headerless CSV matrix")->required();
  svd_cmd->add_option("--rank", svd_rank, "Truncation rank (default: full)");
  svd_cmd->add_option("--out", svd_prefix, "Output path prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      if (*seed_opt) overrides.seed = seed_override;
      if (*method_opt) overrides.method = method_override;
      if (*rank_opt) overrides.rank = rank_override;
      if (*lr_opt) overrides.lr = lr_override;
      const ExperimentConfig config = load_config(config_path, overrides);
      const RunArtifact artifact = run_experiment(config);
      for (const auto& f : artifact.metrics_files) out << "wrote " << f.string() << '\n';
      out << "wrote " << artifact.summary_file.string() << '\n';
      return 0;
    }
    if (*compare) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      const std::string csv = format_comparison_csv(compare_runs(dirs));
      write_text(compare_out, csv);
      out << csv;
      return 0;
    }
    if (*gradcheck) {
      if ((*d_opt && gc_d == 0) || (*k_opt && gc_k == 0)) {
        throw RangeError("gradcheck: --d and --k must be >= 1");
      }
      return gradcheck_command(gc_method, gc_d, gc_k, gc_rank, gc_seed, gc_tol, out);
    }
    if (*svd_cmd) return svd_command(svd_in, svd_rank, svd_prefix, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace dude
