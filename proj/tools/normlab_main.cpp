// SPDX-License-Identifier: Apache-2.0
//
// normlab: experiment driver for the normalization library.
//
// Exit codes: 0 success, 1 config/usage error, 2 data error, 3 divergence.

#include <cstdio>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "normlab/errors.hpp"
#include "normlab/experiments.hpp"

namespace {

using normlab::RunConfig;

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const normlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const normlab::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const normlab::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

normlab::NormKind parse_norm_or_throw(const std::string& name) {
  auto kind = normlab::parse_norm_kind(name);
  if (!kind) throw normlab::ConfigError("unknown norm kind '" + name + "'");
  return *kind;
}

int run_mnist(RunConfig config, const std::string& norm_name) {
  return run_guarded([&] {
    config.experiment = normlab::ExperimentKind::Mnist;
    config.norm = parse_norm_or_throw(norm_name);
    normlab::validate_config(config);
    if (config.data_dir.empty()) throw normlab::ConfigError("mnist needs --data DIR");
    normlab::MnistDataset data = normlab::load_mnist(config.data_dir, config.seed);
    normlab::MnistRunResult result = normlab::train_mnist(config, data);
    const normlab::MetricRow& last = result.rows.back();
    std::cout << "norm=" << normlab::norm_kind_name(config.norm) << " updates=" << result.updates
              << " final: epoch=" << last.epoch
              << " train_nll=" << normlab::format_double(last.train_nll)
              << " test_nll=" << normlab::format_double(last.test_nll)
              << " test_error=" << normlab::format_double(last.test_error_rate) << '\n';
    if (!config.out_path.empty()) std::cout << "wrote " << config.out_path << '\n';
  });
}

int run_seq(RunConfig config) {
  return run_guarded([&] {
    config.experiment = normlab::ExperimentKind::SeqStability;
    normlab::SeqStabilityResult result = normlab::run_seq_stability(config);
    for (const normlab::SeqRun& run : result.runs) {
      std::cout << normlab::cell_variant_name(run.variant) << " radius "
                << normlab::format_double(run.radius)
                << ": final |h|_inf=" << normlab::format_double(run.hidden_sup.back())
                << " |grad h0|=" << normlab::format_double(run.grad_h0_l2)
                << (run.finite ? "" : " (non-finite)") << '\n';
    }
    double deviation = normlab::seq_joint_scale_deviation(config.seed, 1.0, 2.0);
    std::cout << "ln-full joint weight-scaling deviation (x2): "
              << normlab::format_double(deviation) << '\n';
    for (const std::string& path : result.csv_paths) std::cout << "wrote " << path << '\n';
  });
}

int run_invariance_cmd(RunConfig config) {
  return run_guarded([&] {
    config.experiment = normlab::ExperimentKind::Invariance;
    std::vector<normlab::InvarianceVerdict> verdicts = normlab::run_invariance(config);
    std::size_t passed = 0;
    for (const normlab::InvarianceVerdict& v : verdicts) {
      std::printf("%-7s %-22s deviation=%-12.3e expected=%-3s %s\n",
                  normlab::norm_kind_name(v.scheme), normlab::transform_kind_name(v.transform),
                  v.max_deviation, v.expected_invariant ? "inv" : "var",
                  v.pass ? "pass" : "FAIL");
      if (v.pass) ++passed;
    }
    std::cout << passed << "/" << verdicts.size() << " cells pass\n";
    if (!config.out_path.empty()) std::cout << "wrote " << config.out_path << '\n';
    if (passed != verdicts.size()) throw normlab::DataError("invariance matrix mismatch");
  });
}

int run_geometry_cmd(RunConfig config, const std::string& family_name,
                     const std::string& norm_name, bool norm_set) {
  return run_guarded([&] {
    config.experiment = normlab::ExperimentKind::Geometry;
    auto family = normlab::parse_family_kind(family_name);
    if (!family) throw normlab::ConfigError("unknown family '" + family_name + "'");
    config.family = *family;
    std::vector<normlab::NormKind> kinds;
    if (norm_set) kinds.push_back(parse_norm_or_throw(norm_name));
    normlab::GeometryResult result = normlab::run_geometry(config, kinds);
    for (const normlab::KlSweepRow& row : result.kl_rows) {
      std::printf("%-7s |delta|=%-8.1e kl_exact=%-13.6e kl_quadratic=%-13.6e ratio=%.6f\n",
                  normlab::norm_kind_name(row.norm), row.delta_norm, row.kl_exact,
                  row.kl_quadratic, row.ratio);
    }
    for (const normlab::GainRobustnessRow& row : result.gain_rows) {
      std::printf("%-7s input x%-4.0f gain-direction metric=%-13.6e (se %.3e)\n",
                  normlab::norm_kind_name(row.norm), row.input_scale, row.value, row.std_error);
    }
    if (!config.out_path.empty()) {
      std::cout << "wrote " << config.out_path << " and " << config.out_path << ".gain.csv\n";
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normalization experiments: classifier training, recurrent stability, "
               "invariance matrix, information geometry"};
  app.require_subcommand(1);

  RunConfig config;
  std::string norm_name = "none";
  std::string family_name = "bernoulli-logistic";
  std::string synth_dir;

  CLI::App* mnist = app.add_subcommand(
      "mnist", "train the 784-1000-1000-10 classifier and emit per-epoch metrics CSV");
  mnist->add_option("--norm", norm_name, "normalizer: none|layer|batch")
      ->default_val("none");
  mnist->add_option("--batch-size", config.batch_size, "cases per update")->default_val(128);
  mnist->add_option("--epochs", config.epochs, "training epochs")->default_val(20);
  mnist->add_option("--lr", config.learning_rate, "Adam learning rate")->default_val(1e-3);
  mnist->add_option("--seed", config.seed, "run seed")->default_val(0);
  mnist->add_option("--data", config.data_dir, "directory with the four IDX files")->required();
  mnist->add_option("--out", config.out_path, "metrics CSV path");
  mnist->add_flag("--unbiased-variance", config.unbiased_variance,
                  "batch norm uses the unbiased variance estimator");
  mnist->add_option("--max-updates", config.max_updates,
                    "stop after this many optimizer updates (0 = full epochs)");

  CLI::App* seq = app.add_subcommand(
      "seq-stability",
      "500-step recurrent stability sweep, baseline vs fully normalized cell "
      "(synthetic inputs, spectral radii 0.5/1/1.5/2)");
  seq->add_option("--seed", config.seed, "run seed")->default_val(0);
  seq->add_option("--out", config.out_path, "CSV path stem (one file per variant)");

  CLI::App* inv = app.add_subcommand(
      "invariance", "18-cell transform-invariance matrix on a seeded random layer");
  inv->add_option("--seed", config.seed, "run seed")->default_val(0);
  inv->add_option("--units", config.units, "layer width")->default_val(4);
  inv->add_option("--features", config.features, "input dimension")->default_val(3);
  inv->add_option("--cases", config.cases, "case count")->default_val(256);
  inv->add_option("--out", config.out_path, "verdict CSV path");

  CLI::App* geo = app.add_subcommand(
      "geometry", "Fisher metric checks: KL second-order sweep and gain-direction robustness");
  geo->add_option("--family", family_name,
                  "observation family: bernoulli-logistic|gaussian-identity")
      ->default_val("bernoulli-logistic");
  geo->add_option("--norm", norm_name, "restrict to one norm kind (default: all four)");
  geo->add_option("--units", config.units, "output units")->default_val(4);
  geo->add_option("--features", config.features, "input dimension")->default_val(3);
  geo->add_option("--cases", config.cases, "case count")->default_val(256);
  geo->add_option("--delta-scales", config.delta_scales, "perturbation norms to sweep")
      ->delimiter(',');
  geo->add_option("--seed", config.seed, "run seed")->default_val(0);
  geo->add_option("--out", config.out_path, "sweep CSV path (gain table at PATH.gain.csv)");

  CLI::App* synth = app.add_subcommand(
      "synth-data",
      "write a deterministic synthetic stand-in corpus (four IDX files, 60000/10000)");
  synth->add_option("--out", synth_dir, "output directory")->required();
  synth->add_option("--seed", config.seed, "generator seed")->default_val(0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (mnist->parsed()) return run_mnist(config, norm_name);
  if (seq->parsed()) return run_seq(config);
  if (inv->parsed()) {
    config.experiment = normlab::ExperimentKind::Invariance;
    return run_invariance_cmd(config);
  }
  if (geo->parsed()) {
    return run_geometry_cmd(config, family_name, norm_name, geo->count("--norm") > 0);
  }
  if (synth->parsed()) {
    return run_guarded([&] { normlab::write_synthetic_mnist(synth_dir, config.seed); });
  }
  return 1;
}
