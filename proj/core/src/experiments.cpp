// SPDX-License-Identifier: Apache-2.0
#include "normlab/experiments.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <numeric>
#include <thread>

#include "normlab/adam.hpp"
#include "normlab/errors.hpp"
#include "normlab/mlp.hpp"

namespace normlab {
namespace {

// fork() salts, spelled out once so runs stay reproducible across refactors
constexpr std::uint64_t kSaltInit = 0x696e6974;     // weight init
constexpr std::uint64_t kSaltShuffle = 0x73687566;  // epoch shuffling
constexpr std::uint64_t kSaltData = 0x64617461;     // case sampling
constexpr std::uint64_t kSaltModel = 0x6d6f646c;    // model parameters
constexpr std::uint64_t kSaltDelta = 0x646c7461;    // perturbation directions
constexpr std::uint64_t kSaltTrial = 0x7472696c;    // invariance transform draws
constexpr std::uint64_t kSaltSeq = 0x73657175;      // sequence experiment draws

Tensor rows_copy(const Tensor& m, std::size_t begin, std::size_t len) {
  std::size_t dim = m.cols();
  Tensor out(Shape{len, dim});
  std::copy(m.data() + begin * dim, m.data() + (begin + len) * dim, out.data());
  return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

const char* experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Mnist: return "mnist";
    case ExperimentKind::SeqStability: return "seq-stability";
    case ExperimentKind::Invariance: return "invariance";
    case ExperimentKind::Geometry: return "geometry";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(const std::string& name) {
  if (name == "mnist") return ExperimentKind::Mnist;
  if (name == "seq-stability") return ExperimentKind::SeqStability;
  if (name == "invariance") return ExperimentKind::Invariance;
  if (name == "geometry") return ExperimentKind::Geometry;
  return std::nullopt;
}

void validate_config(const RunConfig& config) {
  if (config.batch_size < 1) throw ConfigError("batch-size must be at least 1");
  if (config.learning_rate <= 0.0 || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning-rate must be positive and finite");
  }
  if (config.experiment == ExperimentKind::Mnist) {
    if (config.norm == NormKind::Batch && config.batch_size < 2) {
      throw ConfigError("batch normalization needs batch-size >= 2");
    }
    if (config.norm == NormKind::Weight) {
      throw ConfigError("the classifier supports norm-kind none, layer, or batch");
    }
    if (config.epochs == 0 && config.max_updates == 0) {
      throw ConfigError("mnist: need at least one epoch or an update cap");
    }
  }
  if (config.experiment == ExperimentKind::Geometry) {
    if (config.units == 0 || config.features == 0 || config.cases == 0) {
      throw ConfigError("geometry: units, features and cases must be positive");
    }
    if (config.delta_scales.empty()) throw ConfigError("geometry: need at least one delta scale");
    for (double s : config.delta_scales) {
      if (s <= 0.0 || !std::isfinite(s)) throw ConfigError("geometry: delta scales must be positive");
    }
  }
  if (config.experiment == ExperimentKind::Invariance) {
    if (config.units < 2 || config.cases < 2) {
      throw ConfigError("invariance: need at least 2 units and 2 cases");
    }
    if (config.features == 0) throw ConfigError("invariance: features must be positive");
  }
}

// --- classifier training ---------------------------------------------------

MnistRunResult train_mnist(const RunConfig& config, const MnistDataset& data) {
  validate_config(config);
  auto start = std::chrono::steady_clock::now();

  Rng root(config.seed);
  Rng init_rng = root.fork(kSaltInit);
  Rng shuffle_rng = root.fork(kSaltShuffle);

  MlpConfig mlp_config;
  mlp_config.norm = config.norm;
  mlp_config.estimator =
      config.unbiased_variance ? VarianceEstimator::Unbiased : VarianceEstimator::Biased;
  Mlp mlp(mlp_config, init_rng);

  AdamConfig adam_config;
  adam_config.lr = config.learning_rate;
  AdamOptimizer optimizer(mlp.params(), adam_config);

  std::optional<CsvWriter> writer;
  if (!config.out_path.empty()) writer.emplace(config.out_path, kMetricHeader);

  MnistRunResult result;
  auto emit = [&](const MetricRow& row) {
    if (writer) writer->append(row);
    result.rows.push_back(row);
  };

  const std::size_t n_train = data.train_images.rows();
  const std::size_t preview = std::min<std::size_t>(5000, n_train);
  std::vector<int> preview_labels(data.train_labels.begin(),
                                  data.train_labels.begin() + static_cast<std::ptrdiff_t>(preview));
  Tensor preview_images = rows_copy(data.train_images, 0, preview);

  {
    EvalMetrics tr = evaluate_mlp(mlp, preview_images, preview_labels);
    EvalMetrics te = evaluate_mlp(mlp, data.test_images, data.test_labels);
    emit(MetricRow{0, tr.nll, te.nll, te.error_rate, elapsed_seconds(start)});
  }

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t dim = data.train_images.cols();

  bool capped = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !capped; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < n_train; begin += config.batch_size) {
      if (config.max_updates != 0 && result.updates >= config.max_updates) {
        capped = true;
        break;
      }
      std::size_t len = std::min(config.batch_size, n_train - begin);
      // a ragged tail of one case has no batch variance; skip it
      if (config.norm == NormKind::Batch && len < 2) break;
      Tensor batch(Shape{len, dim});
      std::vector<int> labels(len);
      for (std::size_t r = 0; r < len; ++r) {
        std::size_t src = order[begin + r];
        std::copy(data.train_images.data() + src * dim, data.train_images.data() + (src + 1) * dim,
                  batch.data() + r * dim);
        labels[r] = data.train_labels[src];
      }
      mlp.params().zero_grads();
      NodePtr logits = mlp.logits(constant(std::move(batch)), /*training=*/true);
      NodePtr loss = softmax_cross_entropy(logits, std::move(labels));
      double loss_value = loss->value.item();
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("training loss non-finite at update " +
                              std::to_string(result.updates));
      }
      backward(loss);
      optimizer.step();
      ++result.updates;
      loss_sum += loss_value * static_cast<double>(len);
      seen += len;
    }
    if (seen == 0) break;
    EvalMetrics te = evaluate_mlp(mlp, data.test_images, data.test_labels);
    emit(MetricRow{epoch, loss_sum / static_cast<double>(seen), te.nll, te.error_rate,
                   elapsed_seconds(start)});
  }
  return result;
}

std::vector<MnistRunResult> run_paired(const std::vector<RunConfig>& configs,
                                       const MnistDataset& data) {
  std::vector<MnistRunResult> results(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::vector<std::thread> threads;
  threads.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        results[i] = train_mnist(configs[i], data);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// --- recurrent stability -----------------------------------------------------

namespace {

struct SeqMaterial {
  Tensor w_hh;                 // radius * random orthogonal
  Tensor w_xh;
  std::vector<Tensor> inputs;  // kSeqSteps vectors of size kSeqInput
};

SeqMaterial make_seq_material(std::uint64_t seed, double radius) {
  Rng rng = Rng(seed).fork(kSaltSeq);
  SeqMaterial m;
  Tensor q = random_orthogonal(kSeqHidden, rng);
  q.scale_(radius);
  m.w_hh = std::move(q);
  double bound = 1.0 / std::sqrt(static_cast<double>(kSeqHidden));
  m.w_xh = Tensor(Shape{kSeqHidden, kSeqInput});
  rng.fill_uniform(m.w_xh, -bound, bound);
  m.inputs.reserve(kSeqSteps);
  for (std::size_t t = 0; t < kSeqSteps; ++t) {
    Tensor x(Shape{kSeqInput});
    rng.fill_normal(x);
    m.inputs.push_back(std::move(x));
  }
  return m;
}

RnnCell make_seq_cell(CellVariant variant, const SeqMaterial& m, double weight_factor) {
  Rng dummy(0);  // weights are overwritten below
  RnnCell cell =
      RnnCell::create(kSeqInput, kSeqHidden, variant, dummy, Nonlinearity::Tanh, /*eps=*/0.0);
  Tensor w_hh = m.w_hh;
  Tensor w_xh = m.w_xh;
  w_hh.scale_(weight_factor);
  w_xh.scale_(weight_factor);
  cell.params.at("w_hh").value() = std::move(w_hh);
  cell.params.at("w_xh").value() = std::move(w_xh);
  return cell;
}

SeqRun run_seq_once(CellVariant variant, const SeqMaterial& m, double radius) {
  RnnCell cell = make_seq_cell(variant, m, 1.0);
  NodePtr h0 = leaf(Tensor(Shape{kSeqHidden}), /*requires_grad=*/true);
  auto step = [&cell](const NodePtr& x, const CellState& prev) {
    return CellState{cell.step(x, prev.h), nullptr};
  };
  UnrollResult rolled = unroll(step, m.inputs, CellState{h0, nullptr},
                               SequenceLoss::FinalSumSquares, /*check_finite=*/false);

  SeqRun run;
  run.variant = variant;
  run.radius = radius;
  run.hidden_sup.reserve(kSeqSteps);
  run.input_l2.reserve(kSeqSteps);
  const Tensor& w_hh = cell.params.at("w_hh").value();
  const Tensor& w_xh = cell.params.at("w_xh").value();
  bool finite = true;
  for (std::size_t t = 0; t < kSeqSteps; ++t) {
    const Tensor& h = rolled.hiddens[t]->value;
    const Tensor& h_prev = t == 0 ? h0->value : rolled.hiddens[t - 1]->value;
    Tensor a = normlab::add(matvec(w_hh, h_prev), matvec(w_xh, m.inputs[t]));
    run.hidden_sup.push_back(linf_norm(h));
    run.input_l2.push_back(l2_norm(a));
    finite = finite && h.all_finite();
  }
  backward(rolled.loss);
  run.grad_h0_l2 = l2_norm(h0->grad);
  finite = finite && std::isfinite(run.grad_h0_l2);
  run.finite = finite;
  if (variant == CellVariant::LnFull) {
    const Tensor& gain = cell.params.at("gain").value();
    const Tensor& bias = cell.params.at("bias").value();
    double max_gain = 0.0, max_bias = 0.0;
    for (std::size_t i = 0; i < gain.size(); ++i) max_gain = std::max(max_gain, gain[i]);
    for (std::size_t i = 0; i < bias.size(); ++i) max_bias = std::max(max_bias, std::abs(bias[i]));
    run.bound = max_gain + max_bias;
  }
  return run;
}

std::string variant_csv_path(const std::string& out_path, CellVariant variant) {
  std::string tag = cell_variant_name(variant);
  const std::string suffix = ".csv";
  if (out_path.size() > suffix.size() &&
      out_path.compare(out_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return out_path.substr(0, out_path.size() - suffix.size()) + "." + tag + suffix;
  }
  return out_path + "." + tag + suffix;
}

}  // namespace

SeqStabilityResult run_seq_stability(const RunConfig& config) {
  validate_config(config);
  SeqStabilityResult result;
  for (CellVariant variant : {CellVariant::Baseline, CellVariant::LnFull}) {
    for (double radius : kSeqRadii) {
      SeqMaterial m = make_seq_material(config.seed, radius);
      result.runs.push_back(run_seq_once(variant, m, radius));
    }
  }
  if (!config.out_path.empty()) {
    for (CellVariant variant : {CellVariant::Baseline, CellVariant::LnFull}) {
      std::string path = variant_csv_path(config.out_path, variant);
      CsvWriter writer(path, "radius,step,hidden_sup_norm,summed_input_l2,grad_h0_l2");
      for (const SeqRun& run : result.runs) {
        if (run.variant != variant) continue;
        for (std::size_t t = 0; t < run.hidden_sup.size(); ++t) {
          std::string line = format_double(run.radius);
          line += ',';
          line += std::to_string(t + 1);
          line += ',';
          line += format_double(run.hidden_sup[t]);
          line += ',';
          line += format_double(run.input_l2[t]);
          line += ',';
          line += format_double(run.grad_h0_l2);
          writer.append(line);
        }
      }
      result.csv_paths.push_back(std::move(path));
    }
  }
  return result;
}

double seq_joint_scale_deviation(std::uint64_t seed, double radius, double factor) {
  SeqMaterial m = make_seq_material(seed, radius);
  auto trajectory = [&m](double weight_factor) {
    RnnCell cell = make_seq_cell(CellVariant::LnFull, m, weight_factor);
    NodePtr h0 = leaf(Tensor(Shape{kSeqHidden}), false);
    auto step = [&cell](const NodePtr& x, const CellState& prev) {
      return CellState{cell.step(x, prev.h), nullptr};
    };
    return unroll(step, m.inputs, CellState{h0, nullptr}, SequenceLoss::FinalSumSquares,
                  /*check_finite=*/true);
  };
  UnrollResult base = trajectory(1.0);
  UnrollResult scaled = trajectory(factor);
  double deviation = 0.0;
  for (std::size_t t = 0; t < kSeqSteps; ++t) {
    deviation =
        std::max(deviation, max_abs_diff(base.hiddens[t]->value, scaled.hiddens[t]->value));
  }
  return deviation;
}

// --- invariance matrix -------------------------------------------------------

std::vector<InvarianceVerdict> run_invariance(const RunConfig& config) {
  validate_config(config);
  Rng root(config.seed);
  Rng model_rng = root.fork(kSaltModel);
  Rng data_rng = root.fork(kSaltData);
  Rng trial_rng = root.fork(kSaltTrial);

  Tensor w(Shape{config.units, config.features});
  model_rng.fill_normal(w);
  AffineParams affine = unit_affine(config.units);
  for (std::size_t i = 0; i < config.units; ++i) {
    affine.gain[i] = model_rng.log_uniform(0.5, 2.0);
    affine.bias[i] = model_rng.normal(0.0, 0.5);
  }
  Tensor x_cases(Shape{config.cases, config.features});
  data_rng.fill_normal(x_cases);

  std::vector<InvarianceVerdict> verdicts =
      full_table(w, affine, x_cases, InvarianceTolerances{}, trial_rng);

  if (!config.out_path.empty()) {
    CsvWriter writer(config.out_path, "scheme,transform,deviation,invariant,expected,pass");
    for (const InvarianceVerdict& v : verdicts) {
      std::string line = norm_kind_name(v.scheme);
      line += ',';
      line += transform_kind_name(v.transform);
      line += ',';
      line += format_double(v.max_deviation);
      line += ',';
      line += v.invariant ? '1' : '0';
      line += ',';
      line += v.expected_invariant ? '1' : '0';
      line += ',';
      line += v.pass ? '1' : '0';
      writer.append(line);
    }
  }
  return verdicts;
}

// --- information geometry ----------------------------------------------------

GeometryResult run_geometry(const RunConfig& config, std::vector<NormKind> kinds) {
  validate_config(config);
  if (kinds.empty()) {
    kinds = {NormKind::None, NormKind::Weight, NormKind::Batch, NormKind::Layer};
  }
  Rng root(config.seed);
  ExponentialFamily family = config.family == FamilyKind::BernoulliLogistic
                                 ? ExponentialFamily::bernoulli()
                                 : ExponentialFamily::gaussian();
  Tensor x_cases(Shape{config.cases, config.features});
  root.fork(kSaltData).fill_normal(x_cases);

  GeometryResult out;
  for (NormKind kind : kinds) {
    Rng model_rng = root.fork(kSaltModel ^ static_cast<std::uint64_t>(kind));
    Rng delta_rng = root.fork(kSaltDelta ^ static_cast<std::uint64_t>(kind));
    GlmModel model = make_glm(family, kind, config.units, config.features, model_rng);
    FisherMatrix fisher =
        kind == NormKind::None ? fisher_standard(model, x_cases) : fisher_normalized(model, x_cases);

    Tensor direction(Shape{theta_dim(model)});
    delta_rng.fill_normal(direction);
    if (kind == NormKind::Layer) {
      // per-case statistics couple the units through the weights, so the
      // per-unit metric is exact only on the bias/gain coordinates
      std::size_t stride = config.features + 2;
      for (std::size_t i = 0; i < config.units; ++i) {
        for (std::size_t d = 0; d < config.features; ++d) direction[i * stride + d] = 0.0;
      }
    }
    double norm = l2_norm(direction);
    direction.scale_(1.0 / norm);

    for (double scale : config.delta_scales) {
      Tensor delta = direction;
      delta.scale_(scale);
      KlSweepRow row;
      row.norm = kind;
      row.delta_norm = scale;
      row.kl_exact = kl_exact(model, x_cases, delta);
      row.kl_quadratic = kl_quadratic(fisher, delta);
      row.ratio = row.kl_exact / row.kl_quadratic;
      out.kl_rows.push_back(row);
    }

    Tensor delta_g(Shape{config.units});
    delta_rng.fill_normal(delta_g);
    for (double input_scale : {1.0, 10.0}) {
      Tensor scaled = x_cases;
      scaled.scale_(input_scale);
      DirectionMetric metric = kind == NormKind::None
                                   ? projected_weight_metric(model, scaled, delta_g)
                                   : gain_direction_metric(model, scaled, delta_g);
      out.gain_rows.push_back(GainRobustnessRow{kind, input_scale, metric.value,
                                                metric.std_error});
    }
  }

  if (!config.out_path.empty()) {
    CsvWriter writer(config.out_path, "norm_kind,delta_norm,kl_exact,kl_quadratic,ratio");
    for (const KlSweepRow& row : out.kl_rows) {
      std::string line = norm_kind_name(row.norm);
      line += ',';
      line += format_double(row.delta_norm);
      line += ',';
      line += format_double(row.kl_exact);
      line += ',';
      line += format_double(row.kl_quadratic);
      line += ',';
      line += format_double(row.ratio);
      writer.append(line);
    }
    CsvWriter gain_writer(config.out_path + ".gain.csv", "norm_kind,input_scale,metric,std_error");
    for (const GainRobustnessRow& row : out.gain_rows) {
      std::string line = norm_kind_name(row.norm);
      line += ',';
      line += format_double(row.input_scale);
      line += ',';
      line += format_double(row.value);
      line += ',';
      line += format_double(row.std_error);
      gain_writer.append(line);
    }
  }
  return out;
}

// --- synthetic corpus ----------------------------------------------------------

namespace {

std::array<std::array<double, 784>, 10> class_prototypes() {
  std::array<std::array<double, 784>, 10> protos{};
  constexpr double kPi = 3.14159265358979323846;
  for (std::size_t c = 0; c < 10; ++c) {
    double angle = 2.0 * kPi * static_cast<double>(c) / 10.0;
    double r1_row = 13.5 + 7.0 * std::sin(angle);
    double r1_col = 13.5 + 7.0 * std::cos(angle);
    double angle2 = 2.0 * angle + 0.9;
    double r2_row = 13.5 + 3.5 * std::sin(angle2);
    double r2_col = 13.5 + 3.5 * std::cos(angle2);
    for (std::size_t row = 0; row < 28; ++row) {
      for (std::size_t col = 0; col < 28; ++col) {
        double d1 = (static_cast<double>(row) - r1_row) * (static_cast<double>(row) - r1_row) +
                    (static_cast<double>(col) - r1_col) * (static_cast<double>(col) - r1_col);
        double d2 = (static_cast<double>(row) - r2_row) * (static_cast<double>(row) - r2_row) +
                    (static_cast<double>(col) - r2_col) * (static_cast<double>(col) - r2_col);
        protos[c][row * 28 + col] =
            std::exp(-d1 / (2.0 * 4.5 * 4.5)) + 0.6 * std::exp(-d2 / (2.0 * 3.0 * 3.0));
      }
    }
  }
  return protos;
}

void write_synthetic_split(const std::string& images_path, const std::string& labels_path,
                           std::size_t count,
                           const std::array<std::array<double, 784>, 10>& protos, Rng& rng) {
  IdxImages images;
  images.count = count;
  images.rows = 28;
  images.cols = 28;
  images.pixels.resize(count * 784);
  std::vector<std::uint8_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint8_t label = static_cast<std::uint8_t>(rng.uniform_index(10));
    labels[i] = label;
    double intensity = rng.log_uniform(0.5, 2.0);
    std::uint8_t* pix = images.pixels.data() + i * 784;
    const std::array<double, 784>& proto = protos[label];
    for (std::size_t p = 0; p < 784; ++p) {
      double v = intensity * proto[p] + 0.25 * rng.normal();
      v = std::clamp(v, 0.0, 1.0);
      pix[p] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  write_idx_images(images_path, images);
  write_idx_labels(labels_path, labels);
}

}  // namespace

void write_synthetic_mnist(const std::string& dir, std::uint64_t seed) {
  if (!dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
  }
  const std::string sep = dir.empty() || dir.back() == '/' ? "" : "/";
  std::array<std::array<double, 784>, 10> protos = class_prototypes();
  Rng root(seed);
  Rng train_rng = root.fork(0x74726169);  // train split draws
  Rng test_rng = root.fork(0x74657374);   // test split draws
  write_synthetic_split(dir + sep + "train-images-idx3-ubyte",
                        dir + sep + "train-labels-idx1-ubyte", 60000, protos, train_rng);
  write_synthetic_split(dir + sep + "t10k-images-idx3-ubyte", dir + sep + "t10k-labels-idx1-ubyte",
                        10000, protos, test_rng);
}

}  // namespace normlab
