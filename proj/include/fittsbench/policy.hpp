#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fittsbench/common.hpp"
#include "fittsbench/trajectory.hpp"

namespace fitts {

constexpr const char* kPolicySchemaVersion = "policy-v1";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PolicyConfig {
  int history_len = 10;  // H steps of joint history (0.2 s at 50 Hz)
  int hidden1 = 256;
  int hidden2 = 256;
  double dropout = 0.0;
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  double grad_clip_norm = 1.0;
  int batch_size = 256;
  int max_epochs = 100;
  int early_stop_patience = 10;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  double min_lr = 1e-6;
  double val_fraction = 0.2;
  double distance_scale = 1.0;  // s multiplying the distance context feature
  bool demo_level_split = false;
  std::uint64_t seed = 0;

  int input_dim() const { return history_len * kNumJoints + 1; }

  void validate() const {
    if (history_len < 1) throw ValidationError("policy: history_len must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw ValidationError("policy: dropout must be in [0,1)");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw ValidationError("policy: val_fraction must be in (0,1)");
    if (!(learning_rate > 0.0) || !(plateau_factor > 0.0 && plateau_factor < 1.0) ||
        plateau_patience < 1 || !(min_lr > 0.0))
      throw ValidationError("policy: invalid learning-rate schedule parameters");
    if (!(weight_decay >= 0.0)) throw ValidationError("policy: negative weight decay");
    if (!(grad_clip_norm > 0.0)) throw ValidationError("policy: grad_clip_norm must be > 0");
    if (batch_size < 1 || max_epochs < 1 || early_stop_patience < 1 ||
        hidden1 < 1 || hidden2 < 1)
      throw ValidationError("policy: invalid size parameters");
  }
};

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct NormStats {
  Eigen::VectorXd mu_x, sigma_x;  // length H*J + 1
  Eigen::VectorXd mu_y, sigma_y;  // length J
  static constexpr double epsilon = 1e-8;
};

/// Per-dimension mean and population standard deviation over the rows.
inline void fit_norm_dims(const Eigen::MatrixXd& rows, Eigen::VectorXd& mu,
                          Eigen::VectorXd& sigma) {
  if (rows.rows() < 2) throw InsufficientDataError("fit_norm: need >= 2 samples");
  mu = rows.colwise().mean();
  sigma.resize(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double var = (rows.col(c).array() - mu[c]).square().mean();
    sigma[c] = std::sqrt(var);
  }
}

inline NormStats fit_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw ContractError("fit_norm: row count mismatch");
  NormStats s;
  fit_norm_dims(x, s.mu_x, s.sigma_x);
  fit_norm_dims(y, s.mu_y, s.sigma_y);
  return s;
}

inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& rows,
                                      const Eigen::VectorXd& mu,
                                      const Eigen::VectorXd& sigma) {
  if (rows.cols() != mu.size()) throw ContractError("normalize: dimension mismatch");
  return (rows.rowwise() - mu.transpose()).array().rowwise() /
         (sigma.transpose().array() + NormStats::epsilon);
}

inline Eigen::VectorXd normalize_vec(const Eigen::VectorXd& v, const Eigen::VectorXd& mu,
                                     const Eigen::VectorXd& sigma) {
  if (v.size() != mu.size()) throw ContractError("normalize: dimension mismatch");
  return (v - mu).array() / (sigma.array() + NormStats::epsilon);
}

inline Eigen::VectorXd denormalize_vec(const Eigen::VectorXd& v,
                                       const Eigen::VectorXd& mu,
                                       const Eigen::VectorXd& sigma) {
  if (v.size() != mu.size()) throw ContractError("denormalize: dimension mismatch");
  return v.array() * (sigma.array() + NormStats::epsilon) + mu.array();
}

// ---------------------------------------------------------------------------
// Windowed dataset
// ---------------------------------------------------------------------------

struct WindowSet {
  Eigen::MatrixXd x;            // N x (H*J + 1)
  Eigen::MatrixXd y;            // N x J
  std::vector<int> condition;   // distance-condition id per row
  std::vector<int> demo_index;  // source demonstration per row

  Eigen::Index size() const { return x.rows(); }
};

/// Windowed supervision pairs for one trajectory: the input is the flattened
/// history [q_{t-H} .. q_{t-1}] (time-major, then joint) with the scaled
/// distance appended, and the target is the absolute configuration q_t.
inline WindowSet build_windows(const JointTrajectory& traj, int history_len,
                               double distance_scale, int condition_id = 0,
                               int demo_index = 0) {
  const Eigen::Index t_count = traj.frames();
  const int h = history_len;
  if (t_count <= h)
    throw InsufficientDataError("build_windows: trajectory length " +
                                std::to_string(t_count) + " <= history " +
                                std::to_string(h));
  const Eigen::Index n = t_count - h;
  WindowSet w;
  w.x.resize(n, h * kNumJoints + 1);
  w.y.resize(n, kNumJoints);
  w.condition.assign(static_cast<std::size_t>(n), condition_id);
  w.demo_index.assign(static_cast<std::size_t>(n), demo_index);
  for (Eigen::Index t = h; t < t_count; ++t) {
    const Eigen::Index row = t - h;
    for (int step = 0; step < h; ++step)
      for (int j = 0; j < kNumJoints; ++j)
        w.x(row, step * kNumJoints + j) = traj.q(t - h + step, j);
    w.x(row, h * kNumJoints) = distance_scale * traj.distance_m;
    w.y.row(row) = traj.q.row(t);
  }
  return w;
}

inline void append_windows(WindowSet& dst, const WindowSet& src) {
  if (dst.size() == 0) {
    dst = src;
    return;
  }
  if (dst.x.cols() != src.x.cols()) throw ContractError("append_windows: width mismatch");
  const Eigen::Index n0 = dst.size();
  dst.x.conservativeResize(n0 + src.size(), Eigen::NoChange);
  dst.y.conservativeResize(n0 + src.size(), Eigen::NoChange);
  dst.x.bottomRows(src.size()) = src.x;
  dst.y.bottomRows(src.size()) = src.y;
  dst.condition.insert(dst.condition.end(), src.condition.begin(), src.condition.end());
  dst.demo_index.insert(dst.demo_index.end(), src.demo_index.begin(),
                        src.demo_index.end());
}

// ---------------------------------------------------------------------------
// MLP: in -> hidden1 -> hidden2 -> out, ReLU activations, linear output,
// optional inverted dropout after each ReLU in train mode.
// ---------------------------------------------------------------------------

struct MlpParams {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  static MlpParams zeros(int in, int h1, int h2, int out) {
    MlpParams p;
    p.w1 = Eigen::MatrixXd::Zero(h1, in);
    p.b1 = Eigen::VectorXd::Zero(h1);
    p.w2 = Eigen::MatrixXd::Zero(h2, h1);
    p.b2 = Eigen::VectorXd::Zero(h2);
    p.w3 = Eigen::MatrixXd::Zero(out, h2);
    p.b3 = Eigen::VectorXd::Zero(out);
    return p;
  }

  /// He-uniform initialization, deterministic from the generator state.
  static MlpParams init(int in, int h1, int h2, int out, Rng& rng) {
    MlpParams p = zeros(in, h1, h2, out);
    const auto fill = [&rng](Eigen::MatrixXd& w) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
          w(i, j) = limit * (2.0 * rng.uniform() - 1.0);
    };
    fill(p.w1);
    fill(p.w2);
    fill(p.w3);
    return p;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(w1); fn(b1); fn(w2); fn(b2); fn(w3); fn(b3);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(w1); fn(b1); fn(w2); fn(b2); fn(w3); fn(b3);
  }

  template <typename Fn>
  static void zip(MlpParams& a, const MlpParams& b, Fn&& fn) {
    fn(a.w1, b.w1); fn(a.b1, b.b1);
    fn(a.w2, b.w2); fn(a.b2, b.b2);
    fn(a.w3, b.w3); fn(a.b3, b.b3);
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&ok](const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }
};

enum class ForwardMode { Train, Eval };

/// Single-sample forward pass (eval path used by the rollout loop).
inline Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  if (x.size() != p.w1.cols())
    throw ContractError("mlp_forward: input length " + std::to_string(x.size()) +
                        " does not match " + std::to_string(p.w1.cols()));
  const Eigen::VectorXd a1 = (p.w1 * x + p.b1).cwiseMax(0.0);
  const Eigen::VectorXd a2 = (p.w2 * a1 + p.b2).cwiseMax(0.0);
  return p.w3 * a2 + p.b3;
}

/// Batched forward pass. Dropout (inverted) is applied after each ReLU in
/// train mode only; `rng` is consumed only when dropout is active.
inline Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const Eigen::MatrixXd& x,
                                         ForwardMode mode, double dropout, Rng* rng,
                                         Eigen::MatrixXd* a1_out = nullptr,
                                         Eigen::MatrixXd* a2_out = nullptr,
                                         Eigen::MatrixXd* mask1_out = nullptr,
                                         Eigen::MatrixXd* mask2_out = nullptr) {
  if (x.cols() != p.w1.cols()) throw ContractError("mlp_forward_batch: shape mismatch");
  const bool use_dropout = mode == ForwardMode::Train && dropout > 0.0;
  if (use_dropout && rng == nullptr)
    throw ContractError("mlp_forward_batch: dropout requires an rng");

  const auto dropout_mask = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    const double keep = 1.0 - dropout;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        m(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
    return m;
  };

  Eigen::MatrixXd a1 =
      ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
  if (use_dropout) {
    Eigen::MatrixXd m1 = dropout_mask(a1.rows(), a1.cols());
    a1 = a1.cwiseProduct(m1);
    if (mask1_out) *mask1_out = std::move(m1);
  }
  Eigen::MatrixXd a2 =
      ((a1 * p.w2.transpose()).rowwise() + p.b2.transpose()).cwiseMax(0.0);
  if (use_dropout) {
    Eigen::MatrixXd m2 = dropout_mask(a2.rows(), a2.cols());
    a2 = a2.cwiseProduct(m2);
    if (mask2_out) *mask2_out = std::move(m2);
  }
  Eigen::MatrixXd out = (a2 * p.w3.transpose()).rowwise() + p.b3.transpose();
  if (a1_out) *a1_out = std::move(a1);
  if (a2_out) *a2_out = std::move(a2);
  return out;
}

/// Loss 1/B sum_i ||yhat_i - y_i||^2 on normalized targets, with analytic
/// gradients for every parameter.
inline double mse_loss_and_grad(const MlpParams& p, const Eigen::MatrixXd& xn,
                                const Eigen::MatrixXd& yn, MlpParams& grads,
                                double dropout = 0.0, Rng* rng = nullptr) {
  if (xn.rows() == 0) throw ContractError("mse_loss_and_grad: empty batch");
  if (xn.rows() != yn.rows()) throw ContractError("mse_loss_and_grad: batch mismatch");
  const double batch = static_cast<double>(xn.rows());

  Eigen::MatrixXd a1, a2, mask1, mask2;
  const bool use_dropout = dropout > 0.0;
  const Eigen::MatrixXd yhat =
      mlp_forward_batch(p, xn, ForwardMode::Train, dropout, rng, &a1, &a2,
                        use_dropout ? &mask1 : nullptr, use_dropout ? &mask2 : nullptr);

  const Eigen::MatrixXd err = yhat - yn;
  const double loss = err.squaredNorm() / batch;

  const Eigen::MatrixXd d_out = 2.0 / batch * err;  // B x out
  grads = MlpParams::zeros(static_cast<int>(p.w1.cols()), static_cast<int>(p.w1.rows()),
                           static_cast<int>(p.w2.rows()), static_cast<int>(p.w3.rows()));
  grads.w3 = d_out.transpose() * a2;
  grads.b3 = d_out.colwise().sum();

  Eigen::MatrixXd d_a2 = d_out * p.w3;
  if (use_dropout) d_a2 = d_a2.cwiseProduct(mask2);
  // ReLU gate: a2 > 0 iff the pre-activation was positive (mask is nonneg).
  Eigen::MatrixXd d_z2 =
      d_a2.cwiseProduct((a2.array() > 0.0).cast<double>().matrix());
  grads.w2 = d_z2.transpose() * a1;
  grads.b2 = d_z2.colwise().sum();

  Eigen::MatrixXd d_a1 = d_z2 * p.w2;
  if (use_dropout) d_a1 = d_a1.cwiseProduct(mask1);
  Eigen::MatrixXd d_z1 =
      d_a1.cwiseProduct((a1.array() > 0.0).cast<double>().matrix());
  grads.w1 = d_z1.transpose() * xn;
  grads.b1 = d_z1.colwise().sum();
  return loss;
}

/// Global L2 gradient-norm clipping across all parameter tensors.
inline void clip_grad_norm(MlpParams& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_grad_norm: max_norm must be > 0");
  double sq = 0.0;
  grads.for_each([&sq](const auto& g) { sq += g.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    grads.for_each([scale](auto& g) { g *= scale; });
  }
}

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay
// ---------------------------------------------------------------------------

struct AdamWState {
  MlpParams m, v;
  long step = 0;

  static AdamWState like(const MlpParams& p) {
    AdamWState s;
    s.m = p;
    s.v = p;
    s.m.for_each([](auto& t) { t.setZero(); });
    s.v.for_each([](auto& t) { t.setZero(); });
    return s;
  }
};

inline void adamw_step(MlpParams& params, const MlpParams& grads, AdamWState& state,
                       double lr, double weight_decay, double beta1 = 0.9,
                       double beta2 = 0.999, double eps = 1e-8) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  MlpParams::zip(state.m, grads, [beta1](auto& m, const auto& g) {
    m = beta1 * m + (1.0 - beta1) * g;
  });
  MlpParams::zip(state.v, grads, [beta2](auto& v, const auto& g) {
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
  });
  auto* mp = &state.m;
  auto* vp = &state.v;
  const auto update = [lr, weight_decay, bc1, bc2, eps](auto& theta, const auto& m,
                                                        const auto& v) {
    const auto m_hat = (m / bc1).eval();
    const auto v_hat = (v / bc2).eval();
    theta -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps) +
                   weight_decay * theta.array())
                      .matrix();
  };
  update(params.w1, mp->w1, vp->w1);
  update(params.b1, mp->b1, vp->b1);
  update(params.w2, mp->w2, vp->w2);
  update(params.b2, mp->b2, vp->b2);
  update(params.w3, mp->w3, vp->w3);
  update(params.b3, mp->b3, vp->b3);
}

// ---------------------------------------------------------------------------
// ReduceLROnPlateau
// ---------------------------------------------------------------------------

class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double min_lr)
      : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr) {
    if (!(factor > 0.0 && factor < 1.0) || patience < 1)
      throw ContractError("PlateauScheduler: invalid parameters");
  }

  /// Observes one validation loss; returns the (possibly reduced) lr.
  double observe(double val_loss) {
    if (val_loss < best_ - 1e-8) {
      best_ = val_loss;
      bad_epochs_ = 0;
    } else {
      ++bad_epochs_;
      if (bad_epochs_ >= patience_) {
        lr_ = std::max(lr_ * factor_, min_lr_);
        bad_epochs_ = 0;
      }
    }
    return lr_;
  }

  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

// ---------------------------------------------------------------------------
// Inverse-frequency condition sampler
// ---------------------------------------------------------------------------

/// Sampling with replacement where P(sample) is inversely proportional to the
/// frequency of the sample's distance condition, so expected draws per
/// condition are equal.
class WeightedConditionSampler {
 public:
  WeightedConditionSampler(const std::vector<int>& conditions,
                           const std::vector<std::size_t>& pool) {
    std::map<int, std::vector<std::size_t>> groups;
    for (auto idx : pool) groups[conditions.at(idx)].push_back(idx);
    for (auto& [cond, members] : groups) {
      if (members.empty()) throw ContractError("sampler: empty condition");
      groups_.push_back(std::move(members));
    }
    if (groups_.empty()) throw ContractError("sampler: no samples");
  }

  std::size_t draw(Rng& rng) const {
    const auto& g = groups_[rng.below(groups_.size())];
    return g[rng.below(g.size())];
  }

 private:
  std::vector<std::vector<std::size_t>> groups_;
};

// ---------------------------------------------------------------------------
// PolicyBundle and training
// ---------------------------------------------------------------------------

struct PolicyBundle {
  MlpParams params;
  NormStats norm;
  PolicyConfig config;

  void validate() const {
    config.validate();
    if (params.w1.cols() != config.input_dim() ||
        params.w1.rows() != config.hidden1 || params.w2.rows() != config.hidden2 ||
        params.w3.rows() != kNumJoints)
      throw ValidationError("policy bundle: weight shapes inconsistent with config");
    if (!params.all_finite()) throw ValidationError("policy bundle: non-finite weights");
  }

  /// Normalized forward pass around raw inputs/outputs.
  Eigen::VectorXd predict(const Eigen::VectorXd& x_raw) const {
    const Eigen::VectorXd xn = normalize_vec(x_raw, norm.mu_x, norm.sigma_x);
    const Eigen::VectorXd yn = mlp_forward(params, xn);
    return denormalize_vec(yn, norm.mu_y, norm.sigma_y);
  }
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRow> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<std::string> skipped_demos;
};

struct TrainResult {
  PolicyBundle bundle;
  TrainingHistory history;
};

/// Full training recipe: windowing, seeded 80/20 split, z-score normalization
/// fit on the train split only, inverse-frequency batch sampling, AdamW with
/// global gradient clipping, plateau lr schedule, early stopping with
/// best-parameter restore. Deterministic given config.seed.
inline TrainResult train(const std::vector<JointTrajectory>& demos,
                         const PolicyConfig& config) {
  config.validate();

  TrainResult result;
  std::map<double, int> condition_ids;
  for (const auto& d : demos) condition_ids.emplace(d.distance_m, 0);
  {
    int next = 0;
    for (auto& [dist, id] : condition_ids) id = next++;
  }

  WindowSet all;
  std::vector<int> demo_of_window_probe;
  for (std::size_t di = 0; di < demos.size(); ++di) {
    const auto& demo = demos[di];
    if (demo.frames() <= config.history_len) {
      result.history.skipped_demos.push_back(
          demo.trial_id + ": too short for history window");
      continue;
    }
    append_windows(all, build_windows(demo, config.history_len, config.distance_scale,
                                      condition_ids.at(demo.distance_m),
                                      static_cast<int>(di)));
  }
  const auto n = static_cast<std::size_t>(all.size());
  if (n < 2) throw ValidationError("train: empty dataset after windowing");

  // Seeded shuffle, then window-level (or demo-level) 80/20 split.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(mix_seed(config.seed, 1));
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[split_rng.below(i + 1)]);

  std::vector<std::size_t> train_idx, val_idx;
  if (config.demo_level_split) {
    std::vector<int> demo_ids;
    for (std::size_t i = 0; i < n; ++i) demo_ids.push_back(all.demo_index[i]);
    std::sort(demo_ids.begin(), demo_ids.end());
    demo_ids.erase(std::unique(demo_ids.begin(), demo_ids.end()), demo_ids.end());
    for (std::size_t i = demo_ids.size() - 1; i > 0; --i)
      std::swap(demo_ids[i], demo_ids[split_rng.below(i + 1)]);
    auto n_val_demos = static_cast<std::size_t>(
        std::lround(config.val_fraction * static_cast<double>(demo_ids.size())));
    n_val_demos = std::clamp<std::size_t>(n_val_demos, 1, demo_ids.size() - 1);
    std::vector<int> val_demos(demo_ids.begin(),
                               demo_ids.begin() + static_cast<long>(n_val_demos));
    std::sort(val_demos.begin(), val_demos.end());
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_val = std::binary_search(val_demos.begin(), val_demos.end(),
                                             all.demo_index[i]);
      (in_val ? val_idx : train_idx).push_back(i);
    }
  } else {
    auto n_val = static_cast<std::size_t>(
        std::lround(config.val_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    val_idx.assign(order.begin(), order.begin() + static_cast<long>(n_val));
    train_idx.assign(order.begin() + static_cast<long>(n_val), order.end());
  }
  if (train_idx.empty() || val_idx.empty())
    throw ValidationError("train: degenerate train/validation split");

  const auto gather = [&](const std::vector<std::size_t>& idx,
                          const Eigen::MatrixXd& src) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      out.row(static_cast<Eigen::Index>(i)) =
          src.row(static_cast<Eigen::Index>(idx[i]));
    return out;
  };

  const Eigen::MatrixXd x_train = gather(train_idx, all.x);
  const Eigen::MatrixXd y_train = gather(train_idx, all.y);
  const Eigen::MatrixXd x_val = gather(val_idx, all.x);
  const Eigen::MatrixXd y_val = gather(val_idx, all.y);

  // Normalization statistics never touch validation windows.
  const NormStats norm = fit_norm(x_train, y_train);
  const Eigen::MatrixXd xn_train = normalize_rows(x_train, norm.mu_x, norm.sigma_x);
  const Eigen::MatrixXd yn_train = normalize_rows(y_train, norm.mu_y, norm.sigma_y);
  const Eigen::MatrixXd xn_val = normalize_rows(x_val, norm.mu_x, norm.sigma_x);
  const Eigen::MatrixXd yn_val = normalize_rows(y_val, norm.mu_y, norm.sigma_y);

  Rng init_rng(mix_seed(config.seed, 2));
  MlpParams params = MlpParams::init(config.input_dim(), config.hidden1,
                                     config.hidden2, kNumJoints, init_rng);
  AdamWState opt_state = AdamWState::like(params);
  PlateauScheduler scheduler(config.learning_rate, config.plateau_factor,
                             config.plateau_patience, config.min_lr);

  std::vector<int> train_conditions(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i)
    train_conditions[i] = all.condition[train_idx[i]];
  std::vector<std::size_t> local_pool(train_idx.size());
  std::iota(local_pool.begin(), local_pool.end(), 0);
  WeightedConditionSampler sampler(train_conditions, local_pool);

  Rng sample_rng(mix_seed(config.seed, 3));
  Rng dropout_rng(mix_seed(config.seed, 4));

  const auto eval_loss = [&](const Eigen::MatrixXd& xn, const Eigen::MatrixXd& yn) {
    const Eigen::MatrixXd yhat =
        mlp_forward_batch(params, xn, ForwardMode::Eval, 0.0, nullptr);
    return (yhat - yn).squaredNorm() / static_cast<double>(xn.rows());
  };

  MlpParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs_without_improvement = 0;
  double lr = config.learning_rate;

  const auto batches_per_epoch = static_cast<std::size_t>(
      (train_idx.size() + static_cast<std::size_t>(config.batch_size) - 1) /
      static_cast<std::size_t>(config.batch_size));
  const auto batch_rows =
      std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                            train_idx.size());

  int epoch = 0;
  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double train_loss_acc = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      Eigen::MatrixXd bx(static_cast<Eigen::Index>(batch_rows), xn_train.cols());
      Eigen::MatrixXd by(static_cast<Eigen::Index>(batch_rows), yn_train.cols());
      for (std::size_t r = 0; r < batch_rows; ++r) {
        const auto pick = sampler.draw(sample_rng);
        bx.row(static_cast<Eigen::Index>(r)) =
            xn_train.row(static_cast<Eigen::Index>(pick));
        by.row(static_cast<Eigen::Index>(r)) =
            yn_train.row(static_cast<Eigen::Index>(pick));
      }
      MlpParams grads;
      train_loss_acc +=
          mse_loss_and_grad(params, bx, by, grads, config.dropout, &dropout_rng);
      clip_grad_norm(grads, config.grad_clip_norm);
      adamw_step(params, grads, opt_state, lr, config.weight_decay);
    }
    const double train_loss = train_loss_acc / static_cast<double>(batches_per_epoch);
    const double val_loss = eval_loss(xn_val, yn_val);
    lr = scheduler.observe(val_loss);
    result.history.epochs.push_back({epoch, train_loss, val_loss, lr});

    if (val_loss < best_val - 1e-12) {
      best_val = val_loss;
      best_params = params;
      best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= config.early_stop_patience) break;
    }
  }

  result.history.stopped_epoch = std::min(epoch, config.max_epochs);
  result.history.best_epoch = best_epoch;
  result.history.best_val_loss = best_val;
  result.bundle.params = std::move(best_params);
  result.bundle.norm = norm;
  result.bundle.config = config;
  result.bundle.validate();
  return result;
}

// ---------------------------------------------------------------------------
// policy-v1 serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw ValidationError("policy: weight array size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2)
      m(i, j2) = flat[static_cast<std::size_t>(i * cols + j2)];
  return m;
}

inline std::vector<double> vec_to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

inline Eigen::VectorXd vec_from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json policy_config_to_json(const PolicyConfig& c) {
  return {{"history_len", c.history_len},
          {"hidden1", c.hidden1},
          {"hidden2", c.hidden2},
          {"dropout", c.dropout},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"grad_clip_norm", c.grad_clip_norm},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"plateau_factor", c.plateau_factor},
          {"plateau_patience", c.plateau_patience},
          {"min_lr", c.min_lr},
          {"val_fraction", c.val_fraction},
          {"distance_scale", c.distance_scale},
          {"demo_level_split", c.demo_level_split},
          {"seed", c.seed}};
}

inline PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.history_len = j.value("history_len", c.history_len);
  c.hidden1 = j.value("hidden1", c.hidden1);
  c.hidden2 = j.value("hidden2", c.hidden2);
  c.dropout = j.value("dropout", c.dropout);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.distance_scale = j.value("distance_scale", c.distance_scale);
  c.demo_level_split = j.value("demo_level_split", c.demo_level_split);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline std::string serialize_policy(const PolicyBundle& bundle,
                                    const std::string& config_hash = "",
                                    std::uint64_t seed = 0) {
  bundle.validate();
  nlohmann::json root;
  root["schema"] = kPolicySchemaVersion;
  root["config"] = policy_config_to_json(bundle.config);
  root["norm"] = {{"mu_x", detail::vec_to_std(bundle.norm.mu_x)},
                  {"sigma_x", detail::vec_to_std(bundle.norm.sigma_x)},
                  {"mu_y", detail::vec_to_std(bundle.norm.mu_y)},
                  {"sigma_y", detail::vec_to_std(bundle.norm.sigma_y)},
                  {"epsilon", NormStats::epsilon}};
  root["weights"] = {{"w1", detail::matrix_to_json(bundle.params.w1)},
                     {"b1", detail::vec_to_std(bundle.params.b1)},
                     {"w2", detail::matrix_to_json(bundle.params.w2)},
                     {"b2", detail::vec_to_std(bundle.params.b2)},
                     {"w3", detail::matrix_to_json(bundle.params.w3)},
                     {"b3", detail::vec_to_std(bundle.params.b3)}};
  if (!config_hash.empty())
    root["provenance"] = {{"config_hash", config_hash}, {"seed", seed}};
  return root.dump() + "\n";
}

inline PolicyBundle parse_policy(const std::string& bytes) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("policy: malformed JSON: ") + e.what());
  }
  const auto schema = root.value("schema", std::string{});
  if (schema != kPolicySchemaVersion)
    throw SchemaError("policy: unsupported schema version '" + schema +
                      "' (expected " + kPolicySchemaVersion + ")");
  try {
    PolicyBundle b;
    b.config = policy_config_from_json(root.at("config"));
    const auto& norm = root.at("norm");
    b.norm.mu_x = detail::vec_from_std(norm.at("mu_x").get<std::vector<double>>());
    b.norm.sigma_x = detail::vec_from_std(norm.at("sigma_x").get<std::vector<double>>());
    b.norm.mu_y = detail::vec_from_std(norm.at("mu_y").get<std::vector<double>>());
    b.norm.sigma_y = detail::vec_from_std(norm.at("sigma_y").get<std::vector<double>>());
    const auto& w = root.at("weights");
    b.params.w1 = detail::matrix_from_json(w.at("w1"));
    b.params.b1 = detail::vec_from_std(w.at("b1").get<std::vector<double>>());
    b.params.w2 = detail::matrix_from_json(w.at("w2"));
    b.params.b2 = detail::vec_from_std(w.at("b2").get<std::vector<double>>());
    b.params.w3 = detail::matrix_from_json(w.at("w3"));
    b.params.b3 = detail::vec_from_std(w.at("b3").get<std::vector<double>>());
    b.validate();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("policy: schema violation: ") + e.what());
  }
}

}  // namespace fitts
