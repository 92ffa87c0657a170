#include "tandem/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tandem {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

namespace {

void check_batch(std::size_t n_items, std::size_t n_labels) {
  if (n_items == 0) throw std::invalid_argument("empty batch");
  if (n_items != n_labels) throw std::invalid_argument("batch and label counts differ");
}

int common_length(std::span<const LLRTrajectory> llrs) {
  const int length = llrs.front().length();
  if (length < 1) throw std::invalid_argument("empty trajectory");
  for (const auto& l : llrs) {
    if (l.length() != length) throw std::invalid_argument("trajectories in a batch must have equal length");
  }
  return length;
}

}  // namespace

LlrLoss lllr(std::span<const LLRTrajectory> llrs, std::span<const int> labels) {
  check_batch(llrs.size(), labels.size());
  const int length = common_length(llrs);
  const double scale = 1.0 / (static_cast<double>(llrs.size()) * length);

  LlrLoss out;
  out.grad.reserve(llrs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    Eigen::VectorXd g(length);
    const bool positive = labels[i] == 1;
    for (int t = 0; t < length; ++t) {
      const double lam = llrs[i].values(t);
      const double p = sigmoid(lam);
      const double q = sigmoid(-lam);
      // |1 - sigmoid(l)| = sigmoid(-l); |0 - sigmoid(l)| = sigmoid(l).
      sum += positive ? q : p;
      g(t) = (positive ? -1.0 : 1.0) * p * q * scale;
    }
    out.grad.push_back(std::move(g));
  }
  out.value = sum * scale;
  return out;
}

MultipletLoss multiplet_ce(std::span<const PosteriorTable> tables, std::span<const int> labels) {
  check_batch(tables.size(), labels.size());
  const int order = tables.front().order();
  const int length = tables.front().length();
  for (const auto& tab : tables) {
    if (tab.order() != order || tab.length() != length) {
      throw std::invalid_argument("tables in a batch must share order and length");
    }
  }
  if (length <= order) throw std::invalid_argument("multiplet loss needs T > N");

  const double scale = 1.0 / (static_cast<double>(tables.size()) * (length - order));
  MultipletLoss out;
  out.per_k = Eigen::VectorXd::Zero(order + 2);
  out.grad.reserve(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& tab = tables[i];
    const double y = labels[i] == 1 ? 1.0 : 0.0;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(order + 2, length + 1);
    for (int k = 1; k <= order + 1; ++k) {
      const int last = length - (order + 1 - k);
      for (int t = k; t <= last; ++t) {
        const double logit = tab(k, t);
        if (std::isnan(logit)) throw std::invalid_argument("multiplet loss: missing table entry");
        // -log p(y|w) = softplus(-logit) for y=1, softplus(logit) for y=0.
        out.per_k(k) += labels[i] == 1 ? softplus(-logit) : softplus(logit);
        g(k, t) = (sigmoid(logit) - y) * scale;
      }
    }
    out.grad.push_back(std::move(g));
  }
  out.per_k *= scale;
  out.value = out.per_k.sum();
  return out;
}

LlrLoss kliep_sym_bounded(std::span<const LLRTrajectory> llrs, std::span<const int> labels, double clamp) {
  check_batch(llrs.size(), labels.size());
  if (!(clamp > 0.0)) throw std::invalid_argument("KLIEP clamp must be positive");
  const int length = common_length(llrs);
  int n1 = 0;
  for (int y : labels) n1 += y == 1 ? 1 : 0;
  const int n0 = static_cast<int>(labels.size()) - n1;
  if (n1 == 0 || n0 == 0) throw std::invalid_argument("KLIEP loss needs both classes in the batch");

  LlrLoss out;
  out.grad.reserve(llrs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    const bool positive = labels[i] == 1;
    // -log r for class 1, -log(1/r) = +log r for class 0.
    const double sign = positive ? -1.0 : 1.0;
    const double weight = sign / ((positive ? n1 : n0) * static_cast<double>(length));
    Eigen::VectorXd g(length);
    for (int t = 0; t < length; ++t) {
      const double lam = llrs[i].values(t);
      if (std::isnan(lam)) throw std::invalid_argument("KLIEP loss: NaN LLR");
      const double clamped = std::clamp(lam, -clamp, clamp);
      sum += weight * clamped;
      g(t) = std::abs(lam) > clamp ? 0.0 : weight;
    }
    out.grad.push_back(std::move(g));
  }
  out.value = sum;
  return out;
}

void LossWeights::validate() const {
  if (lllr < 0.0 || multiplet < 0.0 || kliep < 0.0) throw std::invalid_argument("loss weights must be >= 0");
  if (lllr == 0.0 && multiplet == 0.0 && kliep == 0.0) {
    throw std::invalid_argument("at least one loss weight must be nonzero");
  }
}

LossBreakdown total_loss(const LossComponents& components, const LossWeights& weights) {
  weights.validate();
  auto require = [](bool present, const char* name) {
    if (!present) throw std::invalid_argument(std::string("loss component '") + name + "' has weight but no value");
  };
  LossBreakdown out;
  std::size_t batch = 0;

  auto add_llr_grad = [&](const LlrLoss& part, double w) {
    if (out.llr_grad.empty()) {
      out.llr_grad.reserve(part.grad.size());
      for (const auto& g : part.grad) out.llr_grad.push_back(Eigen::VectorXd::Zero(g.size()));
    }
    for (std::size_t i = 0; i < part.grad.size(); ++i) out.llr_grad[i] += w * part.grad[i];
  };

  if (components.lllr) {
    out.lllr = components.lllr->value;
    batch = components.lllr->grad.size();
  }
  if (components.kliep) out.kliep = components.kliep->value;
  if (components.multiplet) {
    out.multiplet = components.multiplet->value;
    out.multiplet_per_k = components.multiplet->per_k;
  }

  if (weights.lllr != 0.0) {
    require(components.lllr.has_value(), "lllr");
    out.total += weights.lllr * out.lllr;
    add_llr_grad(*components.lllr, weights.lllr);
  }
  if (weights.kliep != 0.0) {
    require(components.kliep.has_value(), "kliep");
    out.total += weights.kliep * out.kliep;
    add_llr_grad(*components.kliep, weights.kliep);
    batch = components.kliep->grad.size();
  }
  if (weights.multiplet != 0.0) {
    require(components.multiplet.has_value(), "multiplet");
    out.total += weights.multiplet * out.multiplet;
    out.table_grad.reserve(components.multiplet->grad.size());
    for (const auto& g : components.multiplet->grad) out.table_grad.push_back(weights.multiplet * g);
    if (batch != 0 && batch != out.table_grad.size()) {
      throw std::invalid_argument("loss components disagree on batch size");
    }
  }
  return out;
}

}  // namespace tandem
