// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "normlab/csv.hpp"
#include "normlab/geometry.hpp"
#include "normlab/glm.hpp"
#include "normlab/idx.hpp"
#include "normlab/invariance.hpp"
#include "normlab/recurrent.hpp"

namespace normlab {

enum class ExperimentKind { Mnist, SeqStability, Invariance, Geometry };

const char* experiment_kind_name(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(const std::string& name);

// One run, fully determined by these fields (the seed covers every random
// draw inside). validate_config rejects inconsistent settings with
// ConfigError before any work starts.
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::Mnist;
  NormKind norm = NormKind::None;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string out_path;
  bool unbiased_variance = false;
  // Optional cap on optimizer updates; 0 means run the full epoch budget.
  // Lets paired runs equalize update counts exactly.
  std::size_t max_updates = 0;

  // geometry-only knobs
  FamilyKind family = FamilyKind::BernoulliLogistic;
  std::size_t units = 4;
  std::size_t features = 3;
  std::size_t cases = 256;
  std::vector<double> delta_scales = {1e-1, 1e-2, 1e-3};
};

void validate_config(const RunConfig& config);

// --- classifier training -------------------------------------------------

struct MnistRunResult {
  std::vector<MetricRow> rows;
  std::size_t updates = 0;
};

// Trains the 784-1000-1000-10 classifier per config. Rows are appended to
// config.out_path incrementally when it is non-empty, so a diverging run
// (DivergenceError) still leaves the rows so far on disk. Row semantics:
// epoch 0 is the untrained model (train_nll over a fixed 5000-case train
// slice, evaluation mode); later rows report the mean minibatch training
// loss of that epoch. test columns always come from the full test set in
// evaluation mode.
MnistRunResult train_mnist(const RunConfig& config, const MnistDataset& data);

// Runs each config on its own thread against the shared dataset and joins
// (the dataset is read-only across runs). The first exception, if any, is
// rethrown after all threads finish.
std::vector<MnistRunResult> run_paired(const std::vector<RunConfig>& configs,
                                       const MnistDataset& data);

// --- recurrent stability -------------------------------------------------

inline constexpr std::size_t kSeqHidden = 64;
inline constexpr std::size_t kSeqInput = 8;
inline constexpr std::size_t kSeqSteps = 500;
inline constexpr double kSeqRadii[] = {0.5, 1.0, 1.5, 2.0};

struct SeqRun {
  CellVariant variant = CellVariant::Baseline;
  double radius = 0.0;
  std::vector<double> hidden_sup;  // ||h_t||_inf per step
  std::vector<double> input_l2;    // ||a_t||_2 per step (pre-normalization)
  double grad_h0_l2 = 0.0;         // ||d loss / d h_0||_2 after BPTT
  double bound = 0.0;              // max gain + max |bias| of the cell
  bool finite = true;              // whole trajectory and gradient finite
};

struct SeqStabilityResult {
  std::vector<SeqRun> runs;             // baseline x radii, then ln-full x radii
  std::vector<std::string> csv_paths;   // one file per variant when out_path set
};

// Shared transition matrices per radius (rho times a random orthogonal
// matrix, so the spectral radius is exact) and shared 500-step input
// sequence; baseline and ln-full cells differ only in normalization.
// Non-finite trajectories are recorded, not raised.
SeqStabilityResult run_seq_stability(const RunConfig& config);

// Max trajectory deviation of the ln-full RNN when W_hh and W_xh are jointly
// scaled by `factor` (identical dynamics expected at epsilon = 0).
double seq_joint_scale_deviation(std::uint64_t seed, double radius, double factor);

// --- invariance matrix ---------------------------------------------------

// Runs the 18-cell matrix on a seeded random layer and case set; writes
// CSV (scheme, transform, deviation, invariant, expected, pass) to out_path
// when non-empty.
std::vector<InvarianceVerdict> run_invariance(const RunConfig& config);

// --- information geometry ------------------------------------------------

struct KlSweepRow {
  NormKind norm = NormKind::None;
  double delta_norm = 0.0;
  double kl_exact = 0.0;
  double kl_quadratic = 0.0;
  double ratio = 0.0;
};

struct GainRobustnessRow {
  NormKind norm = NormKind::None;  // None row reports the projected metric
  double input_scale = 1.0;
  double value = 0.0;
  double std_error = 0.0;
};

struct GeometryResult {
  std::vector<KlSweepRow> kl_rows;
  std::vector<GainRobustnessRow> gain_rows;
};

// KL second-order sweep and gain-direction robustness for the requested norm
// kinds (every kind when `kinds` is empty). Writes the sweep to out_path and
// the robustness table to out_path + ".gain.csv" when out_path is set.
// Perturbations for the layer kind live on the (bias, gain) coordinates,
// where the per-unit metric is exact; other kinds perturb all coordinates.
GeometryResult run_geometry(const RunConfig& config, std::vector<NormKind> kinds = {});

// --- synthetic corpus ----------------------------------------------------

// Writes a deterministic synthetic stand-in for the digit corpus (four IDX
// files, 60000 train / 10000 test, 28x28 u8): ten fixed two-bump class
// prototypes, per-case intensity drawn log-uniformly from [0.5, 2], additive
// pixel noise. Classes are balanced only in expectation.
void write_synthetic_mnist(const std::string& dir, std::uint64_t seed);

}  // namespace normlab
