#include "tandem/nnet.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tandem/errors.hpp"
#include "tandem/eval.hpp"
#include "tandem/rng.hpp"
#include "tandem/sprt.hpp"

namespace tandem {

// ---------------------------------------------------------------------------
// EstimatorParams

EstimatorParams EstimatorParams::zeros(int input_dim, int hidden) {
  return EstimatorParams{Eigen::MatrixXd::Zero(input_dim, hidden), Eigen::MatrixXd::Zero(hidden, hidden),
                         Eigen::VectorXd::Zero(hidden), Eigen::MatrixXd::Zero(hidden, 2), Eigen::VectorXd::Zero(2)};
}

Eigen::Index EstimatorParams::size() const {
  return w_in.size() + w_rec.size() + b_h.size() + w_out.size() + b_out.size();
}

Eigen::VectorXd EstimatorParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index at = 0;
  auto put = [&](const auto& block) {
    flat.segment(at, block.size()) = block.reshaped();
    at += block.size();
  };
  put(w_in);
  put(w_rec);
  put(b_h);
  put(w_out);
  put(b_out);
  return flat;
}

void EstimatorParams::assign(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != size()) throw std::invalid_argument("flat parameter vector has the wrong size");
  Eigen::Index at = 0;
  auto take = [&](auto& block) {
    block.reshaped() = flat.segment(at, block.size());
    at += block.size();
  };
  take(w_in);
  take(w_rec);
  take(b_h);
  take(w_out);
  take(b_out);
}

bool EstimatorParams::all_finite() const {
  return w_in.allFinite() && w_rec.allFinite() && b_h.allFinite() && w_out.allFinite() && b_out.allFinite();
}

EstimatorParams& EstimatorParams::operator+=(const EstimatorParams& other) {
  w_in += other.w_in;
  w_rec += other.w_rec;
  b_h += other.b_h;
  w_out += other.w_out;
  b_out += other.b_out;
  return *this;
}

bool EstimatorParams::operator==(const EstimatorParams& other) const {
  return w_in == other.w_in && w_rec == other.w_rec && b_h == other.b_h && w_out == other.w_out &&
         b_out == other.b_out;
}

// ---------------------------------------------------------------------------
// RecurrentEstimator

RecurrentEstimator::RecurrentEstimator(int input_dim, int hidden, int order)
    : input_dim_(input_dim), hidden_(hidden), order_(order) {
  if (input_dim < 1) throw std::invalid_argument("estimator input dimension must be >= 1");
  if (hidden < 1) throw std::invalid_argument("estimator hidden width must be >= 1");
  if (order < 0) throw std::invalid_argument("estimator order must be >= 0");
  params_ = EstimatorParams::zeros(input_dim, hidden);
}

RecurrentEstimator RecurrentEstimator::initialized(int input_dim, int hidden, int order, std::uint64_t seed) {
  RecurrentEstimator model(input_dim, hidden, order);
  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd& m, double fan) {
    const double bound = std::sqrt(6.0 / fan);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = bound * (2.0 * rng.uniform() - 1.0);
    }
  };
  auto& p = model.mutable_params();
  fill(p.w_in, input_dim + hidden);
  fill(p.w_rec, 2.0 * hidden);
  fill(p.w_out, hidden + 2);
  return model;
}

std::uint64_t RecurrentEstimator::snapshot_id() const {
  const Eigen::VectorXd flat = params_.flatten();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(flat.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(flat.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Forward / backward

double ForwardCache::mean_feature_norm() const {
  double sum = 0.0;
  long count = 0;
  for (std::size_t j = 1; j < hidden.size(); ++j) {
    sum += hidden[j].colwise().norm().sum();
    count += hidden[j].cols();
  }
  return count > 0 ? sum / count : 0.0;
}

PosteriorTable posterior_table(const RecurrentEstimator& model, const LabeledSequence& seq, ForwardCache* cache) {
  if (seq.dim() != model.input_dim()) {
    throw std::invalid_argument("frame dimension " + std::to_string(seq.dim()) + " does not match estimator input " +
                                std::to_string(model.input_dim()));
  }
  const int length = seq.length();
  if (length < 1) throw std::invalid_argument("empty sequence");
  const auto& p = model.params();
  const int steps = std::min(model.order() + 1, length);

  PosteriorTable table(model.order(), length, model.prior_logodds());
  const Eigen::MatrixXd inputs = seq.frames.transpose();
  const Eigen::VectorXd readout = p.w_out.col(1) - p.w_out.col(0);
  const double readout_bias = p.b_out(1) - p.b_out(0);

  std::vector<Eigen::MatrixXd> hidden;
  hidden.reserve(steps + 1);
  hidden.push_back(Eigen::MatrixXd::Zero(model.hidden(), length));
  // Column w-1 of hidden[j] is the state after j steps of the window that
  // starts at frame w; only starts with a full j-step window stay active.
  for (int j = 1; j <= steps; ++j) {
    const int active = length - j + 1;
    Eigen::MatrixXd pre = p.w_in.transpose() * inputs.middleCols(j - 1, active);
    pre.noalias() += p.w_rec.transpose() * hidden[j - 1].leftCols(active);
    pre.colwise() += p.b_h;
    hidden.push_back(pre.array().tanh().matrix());
    const Eigen::RowVectorXd logodds = (readout.transpose() * hidden[j]).array() + readout_bias;
    table.entries().row(j).segment(j, active) = logodds;
  }

  if (cache != nullptr) {
    cache->model = &model;
    cache->version = model.version();
    cache->inputs = inputs;
    cache->hidden = std::move(hidden);
  }
  return table;
}

EstimatorParams backward(const RecurrentEstimator& model, const ForwardCache& cache,
                         const Eigen::Ref<const Eigen::MatrixXd>& table_grad) {
  if (cache.model != &model || cache.version != model.version()) {
    throw std::logic_error("stale forward cache: parameters changed since posterior_table");
  }
  const int length = static_cast<int>(cache.inputs.cols());
  const int steps = static_cast<int>(cache.hidden.size()) - 1;
  if (table_grad.rows() != model.order() + 2 || table_grad.cols() != length + 1) {
    throw std::invalid_argument("table gradient shape does not match the forward pass");
  }
  const auto& p = model.params();
  EstimatorParams grad = EstimatorParams::zeros(model.input_dim(), model.hidden());
  const Eigen::VectorXd readout = p.w_out.col(1) - p.w_out.col(0);

  Eigen::VectorXd d_readout = Eigen::VectorXd::Zero(model.hidden());
  double d_readout_bias = 0.0;
  Eigen::MatrixXd carry = Eigen::MatrixXd::Zero(model.hidden(), length);
  for (int j = steps; j >= 1; --j) {
    const int active = length - j + 1;
    const Eigen::RowVectorXd g = table_grad.row(j).segment(j, active);
    const auto& h = cache.hidden[j];
    d_readout.noalias() += h * g.transpose();
    d_readout_bias += g.sum();

    Eigen::MatrixXd d_hidden = readout * g;
    d_hidden += carry.leftCols(active);
    const Eigen::MatrixXd d_pre = (d_hidden.array() * (1.0 - h.array().square())).matrix();

    grad.w_in.noalias() += cache.inputs.middleCols(j - 1, active) * d_pre.transpose();
    grad.w_rec.noalias() += cache.hidden[j - 1].leftCols(active) * d_pre.transpose();
    grad.b_h += d_pre.rowwise().sum();
    carry.leftCols(active).noalias() = p.w_rec * d_pre;
  }
  grad.w_out.col(1) = d_readout;
  grad.w_out.col(0) = -d_readout;
  grad.b_out(1) = d_readout_bias;
  grad.b_out(0) = -d_readout_bias;
  return grad;
}

// ---------------------------------------------------------------------------
// Optimizer

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient size mismatch");
  if (!grads.allFinite()) {
    Eigen::Index bad = 0;
    for (; bad < grads.size() && std::isfinite(grads(bad)); ++bad) {
    }
    throw TrainingError("non-finite gradient at flat index " + std::to_string(bad) + " (step " +
                        std::to_string(state.step + 1) + ")");
  }
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  params.array() -= config.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + config.eps);
}

// ---------------------------------------------------------------------------
// Training

BatchEvaluation evaluate_batch(const RecurrentEstimator& model, std::span<const LabeledSequence> batch,
                               const LossWeights& weights, double kliep_clamp) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  weights.validate();
  const std::size_t m = batch.size();
  std::vector<ForwardCache> caches(m);
  std::vector<PosteriorTable> tables;
  std::vector<LLRTrajectory> llrs;
  std::vector<int> labels;
  tables.reserve(m);
  llrs.reserve(m);
  labels.reserve(m);
  double feature_norm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    tables.push_back(posterior_table(model, batch[i], &caches[i]));
    llrs.push_back(tandem_llr(tables.back()));
    labels.push_back(batch[i].label);
    feature_norm += caches[i].mean_feature_norm();
  }

  LossComponents parts;
  parts.lllr = lllr(llrs, labels);
  if (tables.front().length() > tables.front().order()) parts.multiplet = multiplet_ce(tables, labels);
  const bool both_classes = std::any_of(labels.begin(), labels.end(), [](int y) { return y == 1; }) &&
                            std::any_of(labels.begin(), labels.end(), [](int y) { return y == 0; });
  LossWeights effective = weights;
  if (both_classes) {
    parts.kliep = kliep_sym_bounded(llrs, labels, kliep_clamp);
  } else if (weights.kliep != 0.0) {
    // The symmetrized KLIEP terms are undefined without both classes.
    effective.kliep = 0.0;
    if (effective.lllr == 0.0 && effective.multiplet == 0.0) {
      return BatchEvaluation{LossBreakdown{}, EstimatorParams::zeros(model.input_dim(), model.hidden()),
                             feature_norm / m};
    }
  }

  BatchEvaluation out;
  out.loss = total_loss(parts, effective);
  out.grad = EstimatorParams::zeros(model.input_dim(), model.hidden());
  out.feature_norm = feature_norm / m;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::MatrixXd table_grad = Eigen::MatrixXd::Zero(tables[i].order() + 2, tables[i].length() + 1);
    if (!out.loss.llr_grad.empty()) table_grad += tandem_llr_grad(tables[i], out.loss.llr_grad[i]).entries;
    if (!out.loss.table_grad.empty()) table_grad += out.loss.table_grad[i];
    out.grad += backward(model, caches[i], table_grad);
  }
  return out;
}

LLRTrajectory estimate_llr(const RecurrentEstimator& model, const LabeledSequence& seq) {
  return tandem_llr(posterior_table(model, seq));
}

namespace {

double validation_accuracy(const RecurrentEstimator& model, std::span<const LabeledSequence> val_set) {
  if (val_set.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<int> predicted;
  std::vector<int> truth;
  for (const auto& seq : val_set) {
    const auto llr = estimate_llr(model, seq);
    predicted.push_back(neyman_pearson(llr, llr.length(), 0.0));
    truth.push_back(seq.label);
  }
  const bool one = std::count(truth.begin(), truth.end(), 1) > 0;
  const bool zero = std::count(truth.begin(), truth.end(), 0) > 0;
  if (!one || !zero) return std::numeric_limits<double>::quiet_NaN();
  return balanced_accuracy(predicted, truth);
}

}  // namespace

TrainReport train(RecurrentEstimator& model, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& config, const EpochHook& hook) {
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  config.weights.validate();

  TrainReport report;
  AdamState state;
  std::vector<std::size_t> order(train_set.size());
  std::vector<LabeledSequence> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::substream(config.seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch + 1;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      const BatchEvaluation eval = evaluate_batch(model, batch, config.weights, config.kliep_clamp);
      if (!std::isfinite(eval.loss.total)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch + 1));
      }
      Eigen::VectorXd flat = model.params().flatten();
      adam_step(flat, eval.grad.flatten(), state, config.adam);
      model.mutable_params().assign(flat);

      rec.total += eval.loss.total;
      rec.lllr += eval.loss.lllr;
      rec.multiplet += eval.loss.multiplet;
      rec.kliep += eval.loss.kliep;
      rec.feature_norm += eval.feature_norm;
      ++batches;
    }
    rec.total /= batches;
    rec.lllr /= batches;
    rec.multiplet /= batches;
    rec.kliep /= batches;
    rec.feature_norm /= batches;
    rec.val_balanced_acc = validation_accuracy(model, val_set);
    report.records.push_back(rec);
    if (hook) hook(model, rec);
  }
  report.snapshot_id = model.snapshot_id();
  return report;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

constexpr const char* kModelMagic = "tandem-model v1";

void write_block(std::ostream& out, const char* name, const Eigen::MatrixXd& block) {
  out << name << ',' << block.rows() << ',' << block.cols();
  char buf[64];
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", block(i, j));
      out << ',' << buf;
    }
  }
  out << '\n';
}

double parse_hex(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') throw std::runtime_error("model snapshot: bad number '" + text + "'");
  return v;
}

Eigen::MatrixXd read_block(std::istream& in, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("model snapshot: missing block " + name);
  std::stringstream ss(line);
  std::string field;
  std::getline(ss, field, ',');
  if (field != name) throw std::runtime_error("model snapshot: expected block " + name + ", got " + field);
  std::getline(ss, field, ',');
  const long r = std::stol(field);
  std::getline(ss, field, ',');
  const long c = std::stol(field);
  if (r != rows || c != cols) throw std::runtime_error("model snapshot: block " + name + " has the wrong shape");
  Eigen::MatrixXd block(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("model snapshot: block " + name + " is truncated");
      block(i, j) = parse_hex(field);
    }
  }
  if (std::getline(ss, field, ',')) throw std::runtime_error("model snapshot: block " + name + " has extra values");
  return block;
}

}  // namespace

void save_model(const RecurrentEstimator& model, std::ostream& out) {
  out << kModelMagic << ", d_in=" << model.input_dim() << ", H=" << model.hidden() << ", N=" << model.order()
      << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", model.prior_logodds());
  out << "prior_logodds," << buf << '\n';
  const auto& p = model.params();
  write_block(out, "w_in", p.w_in);
  write_block(out, "w_rec", p.w_rec);
  write_block(out, "b_h", p.b_h);
  write_block(out, "w_out", p.w_out);
  write_block(out, "b_out", p.b_out);
}

RecurrentEstimator load_model(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("model snapshot: empty input");
  int d_in = 0;
  int hidden = 0;
  int order = 0;
  char magic_check[32] = {};
  if (std::sscanf(header.c_str(), "tandem-model %31[^,], d_in=%d, H=%d, N=%d", magic_check, &d_in, &hidden,
                  &order) != 4 ||
      std::string("v1") != magic_check) {
    throw std::runtime_error("model snapshot: unrecognized header '" + header + "'");
  }
  RecurrentEstimator model(d_in, hidden, order);
  std::string line;
  if (!std::getline(in, line) || line.rfind("prior_logodds,", 0) != 0) {
    throw std::runtime_error("model snapshot: missing prior_logodds");
  }
  model.set_prior_logodds(parse_hex(line.substr(std::strlen("prior_logodds,"))));
  auto& p = model.mutable_params();
  p.w_in = read_block(in, "w_in", d_in, hidden);
  p.w_rec = read_block(in, "w_rec", hidden, hidden);
  p.b_h = read_block(in, "b_h", hidden, 1);
  p.w_out = read_block(in, "w_out", hidden, 2);
  p.b_out = read_block(in, "b_out", 2, 1);
  return model;
}

void save_model(const RecurrentEstimator& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_model(model, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

RecurrentEstimator load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_model(in);
}

}  // namespace tandem
