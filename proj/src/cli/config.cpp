#include "tandem/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tandem/eval.hpp"

namespace tandem::cli {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& source, const std::string& field, const std::string& what) {
  throw ConfigError(source + ": field '" + field + "': " + what);
}

/// Reads one JSON object, tracking which keys were consumed.
class Section {
 public:
  Section(const json& node, std::string path, const std::string& source)
      : node_(node), path_(std::move(path)), source_(source) {
    if (!node_.is_object()) field_error(source_, path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) field_error(source_, field(key), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) field_error(source_, field(key), "expected an integer");
      const auto value = v->get<long long>();
      if (value < std::numeric_limits<int>::min() || value > std::numeric_limits<int>::max()) {
        field_error(source_, field(key), "integer out of range");
      }
      out = static_cast<int>(value);
    }
  }

  void read(const std::string& key, long& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) field_error(source_, field(key), "expected an integer");
      out = v->get<long>();
    }
  }

  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) field_error(source_, field(key), "expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) field_error(source_, field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void read(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) field_error(source_, field(key), "expected an array of numbers");
      std::vector<double> values;
      for (const auto& item : *v) {
        if (!item.is_number()) field_error(source_, field(key), "expected an array of numbers");
        values.push_back(item.get<double>());
      }
      out = std::move(values);
    }
  }

  template <class Fn>
  void read_section(const std::string& key, Fn&& fn) {
    if (const json* v = find(key)) {
      Section sub(*v, field(key), source_);
      fn(sub);
      sub.reject_unknown();
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) field_error(source_, field(key), "unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> seen_;
};

std::pair<int, int> line_and_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) field_error("config", field, what);
}

bool is_gaussian(const std::string& generator) {
  return generator == "iid_gauss" || generator == "ramp_gauss" || generator == "ar1_gauss";
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.eval.thresholds = default_threshold_grid();
  return c;
}

void ExperimentConfig::validate() const {
  const auto& d = dataset;
  static const std::set<std::string> generators{"iid_gauss", "ramp_gauss", "ar1_gauss", "discrete_markov"};
  require(generators.contains(d.generator), "dataset.generator",
          "must be one of iid_gauss, ramp_gauss, ar1_gauss, discrete_markov");
  if (is_gaussian(d.generator)) {
    require(!d.mu0.empty(), "dataset.mu0", "must be nonempty");
    require(d.mu0.size() == d.mu1.size(), "dataset.mu1", "must have the same length as dataset.mu0");
    require(d.mu0 != d.mu1, "dataset.mu1", "must differ from dataset.mu0");
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    require(finite(d.mu0) && finite(d.mu1), "dataset.mu0", "means must be finite");
  }
  require(std::abs(d.rho) < 1.0, "dataset.rho", "must satisfy |rho| < 1");
  require(d.sigma > 0.0, "dataset.sigma", "must be positive");
  require(d.order >= 0 && d.order <= 6, "dataset.order", "must lie in [0, 6]");
  require(d.alphabet >= 2 && d.alphabet <= 16, "dataset.alphabet", "must lie in [2, 16]");
  require(d.n_train >= 1, "dataset.n_train", "must be >= 1");
  require(d.n_val >= 0, "dataset.n_val", "must be >= 0");
  require(d.n_test >= 0, "dataset.n_test", "must be >= 0");
  require(d.length >= 1, "dataset.T", "must be >= 1");
  require(d.prior > 0.0 && d.prior < 1.0, "dataset.prior", "must lie in (0, 1)");
  if (d.generator == "discrete_markov") require(d.length >= d.order, "dataset.T", "must be >= dataset.order");

  require(model.hidden >= 1, "model.H", "must be >= 1");
  require(model.order >= 0, "model.N", "must be >= 0");
  require(d.length > model.order, "model.N", "must be smaller than dataset.T");
  require(!model.snapshot.empty(), "model.snapshot", "must be nonempty");

  try {
    loss.weights.validate();
  } catch (const std::invalid_argument& e) {
    field_error("config", "loss.weights", e.what());
  }
  require(loss.kliep_clamp > 0.0, "loss.kliep_clamp", "must be positive");

  require(train.lr > 0.0, "train.lr", "must be positive");
  require(train.epochs >= 0, "train.epochs", "must be >= 0");
  require(train.batch >= 1, "train.batch", "must be >= 1");

  require(!eval.thresholds.empty(), "eval.thresholds", "must be nonempty");
  for (double a : eval.thresholds) require(a >= 0.0 && std::isfinite(a), "eval.thresholds", "must be finite and >= 0");
  require(eval.llr_source == "model" || eval.llr_source == "analytic", "eval.llr_source",
          "must be 'model' or 'analytic'");
  require(eval.trials >= 2, "eval.trials", "must be >= 2");
  for (double a : eval.np_alphas) require(a > 0.0 && a < 0.5, "eval.np_alphas", "entries must lie in (0, 0.5)");
  require(!output_dir.empty(), "output_dir", "must be nonempty");
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": invalid JSON");
  }

  ExperimentConfig c = ExperimentConfig::defaults();
  Section top(root, "", source);
  std::string schema;
  top.read("schema", schema);
  if (schema != kConfigSchema) field_error(source, "schema", std::string("must be \"") + kConfigSchema + "\"");

  top.read_section("dataset", [&](Section& s) {
    auto& d = c.dataset;
    s.read("generator", d.generator);
    s.read("mu0", d.mu0);
    s.read("mu1", d.mu1);
    s.read("rho", d.rho);
    s.read("sigma", d.sigma);
    s.read("order", d.order);
    s.read("alphabet", d.alphabet);
    s.read("spec_seed", d.spec_seed);
    s.read("n_train", d.n_train);
    s.read("n_val", d.n_val);
    s.read("n_test", d.n_test);
    s.read("T", d.length);
    s.read("prior", d.prior);
    s.read("seed", d.seed);
  });
  top.read_section("model", [&](Section& s) {
    s.read("H", c.model.hidden);
    s.read("N", c.model.order);
    s.read("snapshot", c.model.snapshot);
  });
  top.read_section("loss", [&](Section& s) {
    s.read("lllr", c.loss.weights.lllr);
    s.read("multiplet", c.loss.weights.multiplet);
    s.read("kliep", c.loss.weights.kliep);
    s.read("kliep_clamp", c.loss.kliep_clamp);
  });
  top.read_section("train", [&](Section& s) {
    s.read("lr", c.train.lr);
    s.read("epochs", c.train.epochs);
    s.read("batch", c.train.batch);
  });
  top.read_section("eval", [&](Section& s) {
    s.read("thresholds", c.eval.thresholds);
    s.read("llr_source", c.eval.llr_source);
    s.read("trials", c.eval.trials);
    s.read("np_alphas", c.eval.np_alphas);
  });
  top.read("output_dir", c.output_dir);
  top.reject_unknown();

  try {
    c.validate();
  } catch (const ConfigError& e) {
    // validate() reports against "config"; rename to the actual source.
    std::string msg = e.what();
    if (msg.rfind("config:", 0) == 0) msg = source + msg.substr(6);
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& c) {
  json root;
  root["schema"] = kConfigSchema;
  const auto& d = c.dataset;
  root["dataset"] = {{"generator", d.generator}, {"mu0", d.mu0},         {"mu1", d.mu1},
                     {"rho", d.rho},             {"sigma", d.sigma},     {"order", d.order},
                     {"alphabet", d.alphabet},   {"spec_seed", d.spec_seed}, {"n_train", d.n_train},
                     {"n_val", d.n_val},         {"n_test", d.n_test},   {"T", d.length},
                     {"prior", d.prior},         {"seed", d.seed}};
  root["model"] = {{"H", c.model.hidden}, {"N", c.model.order}, {"snapshot", c.model.snapshot}};
  root["loss"] = {{"lllr", c.loss.weights.lllr},
                  {"multiplet", c.loss.weights.multiplet},
                  {"kliep", c.loss.weights.kliep},
                  {"kliep_clamp", c.loss.kliep_clamp}};
  root["train"] = {{"lr", c.train.lr}, {"epochs", c.train.epochs}, {"batch", c.train.batch}};
  root["eval"] = {{"thresholds", c.eval.thresholds},
                  {"llr_source", c.eval.llr_source},
                  {"trials", c.eval.trials},
                  {"np_alphas", c.eval.np_alphas}};
  root["output_dir"] = c.output_dir;
  return root.dump(2) + "\n";
}

GaussPairSpec gauss_spec(const DatasetConfig& d) {
  GaussPairSpec spec;
  spec.mu0 = Eigen::Map<const Eigen::VectorXd>(d.mu0.data(), static_cast<Eigen::Index>(d.mu0.size()));
  spec.mu1 = Eigen::Map<const Eigen::VectorXd>(d.mu1.data(), static_cast<Eigen::Index>(d.mu1.size()));
  return spec;
}

Ar1Spec ar1_spec(const DatasetConfig& d) {
  const GaussPairSpec g = gauss_spec(d);
  Ar1Spec spec;
  spec.rho = d.rho;
  spec.sigma = d.sigma;
  spec.mu0 = g.mu0;
  spec.mu1 = g.mu1;
  return spec;
}

DiscreteMarkovSpec discrete_spec(const DatasetConfig& d) {
  return DiscreteMarkovSpec::random(d.order, d.alphabet, d.prior, d.spec_seed);
}

}  // namespace tandem::cli
