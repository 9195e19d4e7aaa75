#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symvi/errors.hpp"
#include "symvi/mathutil.hpp"
#include "symvi/rng.hpp"

namespace symvi {

// Named columns of equal length plus a provenance note saying where the
// numbers came from (source citation or generator description with seed).
struct DatasetFixture {
  std::string name;
  std::vector<std::pair<std::string, std::vector<double>>> columns;
  std::string provenance;

  bool has_column(const std::string& key) const {
    for (const auto& [k, v] : columns) {
      if (k == key) return true;
    }
    return false;
  }

  const std::vector<double>& column(const std::string& key) const {
    for (const auto& [k, v] : columns) {
      if (k == key) return v;
    }
    throw MissingColumn(name + ": no column named '" + key + "'");
  }

  std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().second.size(); }

  void validate() const {
    for (const auto& [k, v] : columns) {
      if (v.size() != n_rows()) {
        throw WrongLength(name + ": column '" + k + "' has " + std::to_string(v.size()) +
                          " rows, expected " + std::to_string(n_rows()));
      }
      for (double x : v) {
        if (!std::isfinite(x)) throw InvalidParameter(name + ": non-finite value in '" + k + "'");
      }
    }
  }
};

inline DatasetFixture dataset_from_json(const nlohmann::ordered_json& j) {
  DatasetFixture f;
  if (!j.contains("name") || !j.contains("columns")) {
    throw IoFailure("dataset: 'name' and 'columns' fields are required");
  }
  f.name = j.at("name").get<std::string>();
  f.provenance = j.value("provenance", std::string{});
  for (const auto& [key, arr] : j.at("columns").items()) {
    f.columns.emplace_back(key, arr.get<std::vector<double>>());
  }
  f.validate();
  return f;
}

// Column order is part of the fixture and survives a save/load round trip.
inline DatasetFixture load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("dataset: cannot open " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoFailure("dataset: invalid JSON in " + path + ": " + e.what());
  }
  return dataset_from_json(j);
}

inline void save_dataset(const DatasetFixture& f, const std::string& path) {
  nlohmann::ordered_json j;
  j["name"] = f.name;
  j["columns"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : f.columns) j["columns"][k] = v;
  j["provenance"] = f.provenance;
  std::ofstream out(path);
  if (!out) throw IoFailure("dataset: cannot write " + path);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic generators with fixed seeds. Each fixture records its generator
// and seed in the provenance field.

// Two standard normal covariates plus Bernoulli outcomes from a logistic
// model with coefficients beta = (0.5, -0.8, 1.2) on (1, x1, x2).
inline DatasetFixture make_logistic_fixture(int n, std::uint64_t seed) {
  if (n < 0) throw InvalidParameter("logistic fixture: n must be nonnegative");
  Rng rng(derive_seed(seed, 0x21));
  std::vector<double> x1(n), x2(n), y(n);
  for (int i = 0; i < n; ++i) {
    x1[i] = rng.normal();
    x2[i] = rng.normal();
    const double eta = 0.5 - 0.8 * x1[i] + 1.2 * x2[i];
    y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
  }
  DatasetFixture f;
  f.name = "logistic_synthetic_n" + std::to_string(n);
  f.columns = {{"x1", std::move(x1)}, {"x2", std::move(x2)}, {"y", std::move(y)}};
  f.provenance = "synthetic: x1, x2 iid N(0,1); y ~ Bernoulli(logit^-1(0.5 - 0.8 x1 + 1.2 x2)); "
                 "seed " + std::to_string(seed);
  f.validate();
  return f;
}

// Binomial counts over a standardized covariate grid on [-1, 1] with a
// quadratic predictor, 30 trials per row.
inline DatasetFixture make_glm_fixture(int n_rows, std::uint64_t seed) {
  if (n_rows < 1) throw InvalidParameter("glm fixture: need at least one row");
  Rng rng(derive_seed(seed, 0x22));
  std::vector<double> ye(n_rows), trials(n_rows), c(n_rows);
  for (int i = 0; i < n_rows; ++i) {
    ye[i] = n_rows == 1 ? 0.0 : -1.0 + 2.0 * i / (n_rows - 1.0);
    trials[i] = 30.0;
    const double eta = -0.5 + 1.2 * ye[i] - 0.8 * ye[i] * ye[i];
    const double p = 1.0 / (1.0 + std::exp(-eta));
    int k = 0;
    for (int t = 0; t < 30; ++t) k += rng.bernoulli(p) ? 1 : 0;
    c[i] = k;
  }
  DatasetFixture f;
  f.name = "glm_synthetic_n" + std::to_string(n_rows);
  f.columns = {{"ye", std::move(ye)}, {"N", std::move(trials)}, {"C", std::move(c)}};
  f.provenance = "synthetic: ye equally spaced on [-1,1]; C ~ Binomial(30, logit^-1(-0.5 + 1.2 ye "
                 "- 0.8 ye^2)); seed " + std::to_string(seed);
  f.validate();
  return f;
}

// Hierarchical school effects drawn from the generative model, with the
// familiar measurement standard deviations.
inline DatasetFixture make_eight_schools_fixture(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x23));
  const std::vector<double> sigma = {15, 10, 16, 11, 9, 11, 10, 18};
  const double mu = 5.0 + 3.0 * rng.normal();
  const double tau = std::abs(5.0 * rng.normal());
  std::vector<double> y(8);
  for (int i = 0; i < 8; ++i) {
    const double theta = mu + tau * rng.normal();
    y[i] = theta + sigma[i] * rng.normal();
  }
  DatasetFixture f;
  f.name = "eight_schools_synthetic";
  f.columns = {{"y", std::move(y)}, {"sigma", sigma}};
  f.provenance = "synthetic: mu ~ N(5,3^2), tau ~ |N(0,5^2)|, theta_i ~ N(mu,tau^2), "
                 "y_i ~ N(theta_i, sigma_i^2); seed " + std::to_string(seed);
  f.validate();
  return f;
}

}  // namespace symvi
