#include "tandem/synthdata.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tandem/errors.hpp"
#include "tandem/rng.hpp"

namespace tandem {

namespace {

void check_counts(int n, int length, double prior) {
  if (n < 0) throw std::invalid_argument("sequence count must be >= 0");
  if (length < 1) throw std::invalid_argument("sequence length T must be >= 1");
  if (!(prior > 0.0 && prior < 1.0)) throw std::invalid_argument("prior must lie in (0, 1)");
}

void check_dim(const LabeledSequence& seq, int dim) {
  if (seq.dim() != dim) {
    throw std::invalid_argument("frame dimension " + std::to_string(seq.dim()) + " does not match spec dimension " +
                                std::to_string(dim));
  }
  if (seq.length() < 1) throw std::invalid_argument("empty sequence");
}

long ipow(long base, int exp) {
  long out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

int sample_categorical(Rng& rng, const Eigen::Ref<const Eigen::VectorXd>& pmf) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pmf.size(); ++i) {
    acc += pmf(i);
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u above the last partial sum: take the last positive cell.
  for (Eigen::Index i = pmf.size() - 1; i >= 0; --i) {
    if (pmf(i) > 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(pmf.size() - 1);
}

void check_pmf(const Eigen::Ref<const Eigen::MatrixXd>& rows, const std::string& what) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    if ((rows.row(r).array() < 0.0).any() || !rows.row(r).allFinite()) {
      throw SpecError(what + " row " + std::to_string(r) + " has a negative or non-finite entry");
    }
    const double sum = rows.row(r).sum();
    if (std::abs(sum - 1.0) > 1e-12) {
      throw SpecError(what + " row " + std::to_string(r) + " sums to " + std::to_string(sum) + ", expected 1");
    }
  }
}

double gauss_logpdf_diff(double x, double m1, double m0, double var) {
  return ((x - m0) * (x - m0) - (x - m1) * (x - m1)) / (2.0 * var);
}

}  // namespace

void GaussPairSpec::validate() const {
  if (mu0.size() < 1 || mu0.size() != mu1.size()) {
    throw std::invalid_argument("GaussPairSpec: means must be nonempty and of equal dimension");
  }
  if (mu0 == mu1) throw std::invalid_argument("GaussPairSpec: mu0 and mu1 must differ");
}

GaussPairSpec GaussPairSpec::density_ratio_default() {
  GaussPairSpec spec;
  spec.mu0 = Eigen::Vector2d(2.0, 0.0);
  spec.mu1 = Eigen::Vector2d(0.0, 2.0);
  return spec;
}

GaussPairSpec GaussPairSpec::scaled(const GaussPairSpec& base, double factor) {
  return GaussPairSpec{base.mu0 * factor, base.mu1 * factor};
}

void Ar1Spec::validate() const {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("Ar1Spec: |rho| must be < 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("Ar1Spec: sigma must be > 0");
  if (mu0.size() < 1 || mu0.size() != mu1.size()) {
    throw std::invalid_argument("Ar1Spec: means must be nonempty and of equal dimension");
  }
}

int DiscreteMarkovSpec::num_states() const { return static_cast<int>(ipow(alphabet, order)); }

void DiscreteMarkovSpec::validate() const {
  if (order < 0) throw SpecError("DiscreteMarkovSpec: order must be >= 0");
  if (alphabet < 2) throw SpecError("DiscreteMarkovSpec: alphabet must be >= 2");
  if (!(prior > 0.0 && prior < 1.0)) throw SpecError("DiscreteMarkovSpec: prior must lie in (0, 1)");
  const int states = num_states();
  for (int y = 0; y < 2; ++y) {
    const auto& c = cond(y);
    const auto& i = init(y);
    const std::string tag = "class " + std::to_string(y);
    if (c.rows() != states || c.cols() != alphabet) throw SpecError(tag + " conditional table has wrong shape");
    if (i.size() != states) throw SpecError(tag + " initial pmf has wrong length");
    check_pmf(c, tag + " conditional table");
    check_pmf(i.transpose(), tag + " initial pmf");
  }
}

DiscreteMarkovSpec DiscreteMarkovSpec::random(int order, int alphabet, double prior, std::uint64_t seed) {
  DiscreteMarkovSpec spec;
  spec.order = order;
  spec.alphabet = alphabet;
  spec.prior = prior;
  const int states = spec.num_states();
  Rng rng(seed);
  auto random_rows = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = 0.05 + rng.uniform();
      m.row(r) /= m.row(r).sum();
    }
    return m;
  };
  spec.cond0 = random_rows(states, alphabet);
  spec.cond1 = random_rows(states, alphabet);
  spec.init0 = random_rows(1, states).transpose();
  spec.init1 = random_rows(1, states).transpose();
  spec.validate();
  return spec;
}

std::vector<LabeledSequence> gen_iid_gauss(const GaussPairSpec& spec, int n, int length, double prior,
                                           std::uint64_t seed) {
  spec.validate();
  check_counts(n, length, prior);
  std::vector<LabeledSequence> out(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, i);
    auto& seq = out[i];
    seq.seed = substream_seed(seed, i);
    seq.label = rng.bernoulli(prior) ? 1 : 0;
    const Eigen::VectorXd& mu = seq.label == 1 ? spec.mu1 : spec.mu0;
    seq.frames.resize(length, spec.dim());
    for (int t = 0; t < length; ++t) {
      for (int j = 0; j < spec.dim(); ++j) seq.frames(t, j) = mu(j) + rng.normal();
    }
  }
  return out;
}

std::vector<LabeledSequence> gen_ramp_gauss(const GaussPairSpec& spec, int n, int length, double prior,
                                            std::uint64_t seed) {
  spec.validate();
  check_counts(n, length, prior);
  std::vector<LabeledSequence> out(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, i);
    auto& seq = out[i];
    seq.seed = substream_seed(seed, i);
    seq.label = rng.bernoulli(prior) ? 1 : 0;
    const Eigen::VectorXd& mu = seq.label == 1 ? spec.mu1 : spec.mu0;
    seq.frames.resize(length, spec.dim());
    for (int t = 0; t < length; ++t) {
      const double scale = static_cast<double>(t + 1) / length;
      for (int j = 0; j < spec.dim(); ++j) seq.frames(t, j) = scale * mu(j) + rng.normal();
    }
  }
  return out;
}

std::vector<LabeledSequence> gen_ar1_gauss(const Ar1Spec& spec, int n, int length, double prior, std::uint64_t seed) {
  spec.validate();
  check_counts(n, length, prior);
  const double start_sd = std::sqrt(spec.stationary_variance());
  std::vector<LabeledSequence> out(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, i);
    auto& seq = out[i];
    seq.seed = substream_seed(seed, i);
    seq.label = rng.bernoulli(prior) ? 1 : 0;
    const Eigen::VectorXd& mu = seq.label == 1 ? spec.mu1 : spec.mu0;
    seq.frames.resize(length, spec.dim());
    for (int j = 0; j < spec.dim(); ++j) seq.frames(0, j) = mu(j) + start_sd * rng.normal();
    for (int t = 1; t < length; ++t) {
      for (int j = 0; j < spec.dim(); ++j) {
        seq.frames(t, j) = mu(j) + spec.rho * (seq.frames(t - 1, j) - mu(j)) + spec.sigma * rng.normal();
      }
    }
  }
  return out;
}

std::vector<LabeledSequence> gen_discrete_markov(const DiscreteMarkovSpec& spec, int n, int length,
                                                 std::uint64_t seed) {
  spec.validate();
  if (n < 0) throw std::invalid_argument("sequence count must be >= 0");
  if (length < 1 || length < spec.order) {
    throw std::invalid_argument("sequence length must be >= max(1, chain order)");
  }
  const long high = ipow(spec.alphabet, spec.order - 1 > 0 ? spec.order - 1 : 0);
  std::vector<LabeledSequence> out(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, i);
    auto& seq = out[i];
    seq.seed = substream_seed(seed, i);
    seq.label = rng.bernoulli(spec.prior) ? 1 : 0;
    seq.frames.resize(length, 1);
    int state = sample_categorical(rng, spec.init(seq.label));
    // Unpack the initial N symbols, oldest first.
    for (int p = 0; p < spec.order && p < length; ++p) {
      const long place = ipow(spec.alphabet, spec.order - 1 - p);
      seq.frames(p, 0) = static_cast<double>((state / place) % spec.alphabet);
    }
    for (int t = spec.order; t < length; ++t) {
      const int symbol = sample_categorical(rng, spec.cond(seq.label).row(state).transpose());
      seq.frames(t, 0) = symbol;
      state = spec.order == 0 ? 0 : static_cast<int>((state % high) * spec.alphabet + symbol);
    }
  }
  return out;
}

LLRTrajectory analytic_llr_iid(const LabeledSequence& seq, const GaussPairSpec& spec) {
  spec.validate();
  check_dim(seq, spec.dim());
  const Eigen::VectorXd diff = spec.mu1 - spec.mu0;
  const double offset = 0.5 * (spec.mu1.squaredNorm() - spec.mu0.squaredNorm());
  LLRTrajectory out;
  out.source = LlrSource::analytic;
  out.values.resize(seq.length());
  double acc = 0.0;
  for (int t = 0; t < seq.length(); ++t) {
    acc += seq.frames.row(t).dot(diff) - offset;
    out.values(t) = acc;
  }
  return out;
}

LLRTrajectory analytic_llr_ramp(const LabeledSequence& seq, const GaussPairSpec& spec) {
  spec.validate();
  check_dim(seq, spec.dim());
  const Eigen::VectorXd diff = spec.mu1 - spec.mu0;
  const double offset = 0.5 * (spec.mu1.squaredNorm() - spec.mu0.squaredNorm());
  const int length = seq.length();
  LLRTrajectory out;
  out.source = LlrSource::analytic;
  out.values.resize(length);
  double acc = 0.0;
  for (int t = 0; t < length; ++t) {
    const double scale = static_cast<double>(t + 1) / length;
    acc += scale * seq.frames.row(t).dot(diff) - scale * scale * offset;
    out.values(t) = acc;
  }
  return out;
}

LLRTrajectory analytic_llr_ar1(const LabeledSequence& seq, const Ar1Spec& spec) {
  spec.validate();
  check_dim(seq, spec.dim());
  const double start_var = spec.stationary_variance();
  const double step_var = spec.sigma * spec.sigma;
  LLRTrajectory out;
  out.source = LlrSource::analytic;
  out.values.resize(seq.length());
  double acc = 0.0;
  for (int j = 0; j < spec.dim(); ++j) acc += gauss_logpdf_diff(seq.frames(0, j), spec.mu1(j), spec.mu0(j), start_var);
  out.values(0) = acc;
  for (int t = 1; t < seq.length(); ++t) {
    for (int j = 0; j < spec.dim(); ++j) {
      const double prev = seq.frames(t - 1, j);
      const double m1 = spec.mu1(j) + spec.rho * (prev - spec.mu1(j));
      const double m0 = spec.mu0(j) + spec.rho * (prev - spec.mu0(j));
      acc += gauss_logpdf_diff(seq.frames(t, j), m1, m0, step_var);
    }
    out.values(t) = acc;
  }
  return out;
}

std::vector<int> symbols_of(const LabeledSequence& seq) {
  if (seq.dim() != 1) throw std::invalid_argument("discrete sequences carry one index column");
  std::vector<int> out(seq.length());
  for (int t = 0; t < seq.length(); ++t) out[t] = static_cast<int>(seq.frames(t, 0));
  return out;
}

LabeledSequence one_hot(const LabeledSequence& seq, int alphabet) {
  const auto symbols = symbols_of(seq);
  LabeledSequence out;
  out.label = seq.label;
  out.seed = seq.seed;
  out.frames = Eigen::MatrixXd::Zero(seq.length(), alphabet);
  for (int t = 0; t < seq.length(); ++t) {
    if (symbols[t] < 0 || symbols[t] >= alphabet) throw std::invalid_argument("symbol outside alphabet");
    out.frames(t, symbols[t]) = 1.0;
  }
  return out;
}

double window_probability(const DiscreteMarkovSpec& spec, std::span<const int> symbols, int first, int last,
                          int label, long cap) {
  const int order = spec.order;
  const int alphabet = spec.alphabet;
  const long states = ipow(alphabet, order);
  if (states * alphabet > cap) {
    throw FeasibilityError("exact enumeration needs " + std::to_string(states * alphabet) +
                           " cells per step, above the cap of " + std::to_string(cap));
  }
  if (first < 1 || last < first || last > static_cast<int>(symbols.size())) {
    throw std::invalid_argument("window_probability: invalid window bounds");
  }
  auto observed = [&](int pos) { return pos >= first && pos <= last; };

  // Masked initial distribution over the first N symbols.
  Eigen::VectorXd alpha = spec.init(label);
  for (long s = 0; s < states; ++s) {
    for (int p = 1; p <= order; ++p) {
      if (!observed(p)) continue;
      const long digit = (s / ipow(alphabet, order - p)) % alphabet;
      if (digit != symbols[p - 1]) {
        alpha(s) = 0.0;
        break;
      }
    }
  }
  if (last <= order) return alpha.sum();

  const long high = order > 0 ? ipow(alphabet, order - 1) : 1;
  const Eigen::MatrixXd& cond = spec.cond(label);
  Eigen::VectorXd next(states);
  for (int t = order + 1; t <= last; ++t) {
    next.setZero();
    const bool clamp = observed(t);
    for (long s = 0; s < states; ++s) {
      if (alpha(s) == 0.0) continue;
      for (int x = 0; x < alphabet; ++x) {
        if (clamp && x != symbols[t - 1]) continue;
        const long to = order == 0 ? 0 : (s % high) * alphabet + x;
        next(to) += alpha(s) * cond(s, x);
      }
    }
    alpha.swap(next);
  }
  return alpha.sum();
}

PosteriorTable exact_posteriors_discrete(const LabeledSequence& seq, const DiscreteMarkovSpec& spec, int order_out,
                                         long cap) {
  spec.validate();
  if (order_out < 0) throw std::invalid_argument("order must be >= 0");
  const auto symbols = symbols_of(seq);
  const int length = seq.length();
  const double prior_logodds = std::log(spec.prior / (1.0 - spec.prior));
  PosteriorTable table(order_out, length, prior_logodds);
  for (int k = 1; k <= order_out + 1; ++k) {
    for (int s = k; s <= length; ++s) {
      const double p1 = window_probability(spec, symbols, s - k + 1, s, 1, cap);
      const double p0 = window_probability(spec, symbols, s - k + 1, s, 0, cap);
      if (p1 == 0.0 && p0 == 0.0) {
        throw SpecError("window ending at " + std::to_string(s) + " of length " + std::to_string(k) +
                        " is impossible under both classes");
      }
      table(k, s) = prior_logodds + std::log(p1) - std::log(p0);
    }
  }
  return table;
}

LLRTrajectory brute_force_llr_discrete(const LabeledSequence& seq, const DiscreteMarkovSpec& spec) {
  spec.validate();
  const auto symbols = symbols_of(seq);
  const int length = seq.length();
  const int order = spec.order;
  if (length < order) throw std::invalid_argument("sequence shorter than chain order");
  const int alphabet = spec.alphabet;
  const long high = order > 0 ? ipow(alphabet, order - 1) : 1;

  LLRTrajectory out;
  out.source = LlrSource::brute_force;
  out.values.resize(length);

  double logp[2] = {0.0, 0.0};
  // Prefixes inside the initial block: marginals of the initial joint pmf.
  for (int t = 1; t <= order; ++t) {
    for (int y = 0; y < 2; ++y) {
      double mass = 0.0;
      const auto& init = spec.init(y);
      for (long s = 0; s < init.size(); ++s) {
        bool match = true;
        for (int p = 1; p <= t && match; ++p) {
          match = (s / ipow(alphabet, order - p)) % alphabet == symbols[p - 1];
        }
        if (match) mass += init(s);
      }
      logp[y] = std::log(mass);
    }
    out.values(t - 1) = logp[1] - logp[0];
  }

  long state = 0;
  for (int p = 1; p <= order; ++p) state = state * alphabet + symbols[p - 1];
  for (int t = order + 1; t <= length; ++t) {
    const int x = symbols[t - 1];
    for (int y = 0; y < 2; ++y) logp[y] += std::log(spec.cond(y)(state, x));
    state = order == 0 ? 0 : (state % high) * alphabet + x;
    out.values(t - 1) = logp[1] - logp[0];
  }

  for (int t = 0; t < length; ++t) {
    if (std::isnan(out.values(t))) {
      throw SpecError("prefix of length " + std::to_string(t + 1) + " is impossible under both classes");
    }
  }
  out.has_sentinel = !out.values.allFinite();
  return out;
}

}  // namespace tandem
