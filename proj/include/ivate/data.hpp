#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ivate {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct InstrumentKind {
  bool categorical = false;
  int levels = 0;  // K for categorical, 0 for continuous

  static InstrumentKind continuous() { return {}; }
  static InstrumentKind categorical_with(int k) { return {true, k}; }
  bool binary() const { return categorical && levels == 2; }
  bool operator==(const InstrumentKind&) const = default;
};

// Unvalidated columns as read from a file or produced by a generator.
struct RawTable {
  Vector y;
  Vector d;
  Vector z;
  Matrix x;  // first column is the intercept
  InstrumentKind z_kind;
};

// The observed sample O = (Y, D, Z, X). Only `validate` constructs one, so
// every instance satisfies the table invariants. Immutable.
class ObservationTable {
 public:
  Index n() const { return y_.size(); }
  Index p() const { return x_.cols(); }
  const Vector& y() const { return y_; }
  const Vector& d() const { return d_; }
  const Vector& z() const { return z_; }
  const Matrix& x() const { return x_; }
  InstrumentKind z_kind() const { return z_kind_; }
  bool y_binary() const { return y_binary_; }

 private:
  friend ObservationTable validate(RawTable raw);
  ObservationTable() = default;

  Vector y_, d_, z_;
  Matrix x_;
  InstrumentKind z_kind_;
  bool y_binary_ = false;
};

// Throws Error(ErrorKind::data) naming the offending row and column.
ObservationTable validate(RawTable raw);

// Sub-matrix of x restricted to `columns`, order preserved.
Matrix design(const ObservationTable& table, std::span<const int> columns);

// z <- 1{z >= nearest-rank q-quantile}; the threshold is the ceil(q*n)-th
// order statistic.
ObservationTable dichotomize(const ObservationTable& table, double q);
double nearest_rank_quantile(const Vector& values, double q);

// Row subset (with repetition), used by the bootstrap.
ObservationTable select_rows(const ObservationTable& table, std::span<const Index> rows);

// CSV with header y,d,z,x1..xp in any column order; the intercept is added.
ObservationTable read_csv(std::istream& in, InstrumentKind z_kind);
ObservationTable read_csv_file(const std::string& path, InstrumentKind z_kind);
void write_csv(std::ostream& out, const ObservationTable& table);

// ---------------------------------------------------------------------------
// Working models

enum class Link { identity, expit, tanh };

const char* to_string(Link link);
Link parse_link(std::string_view name);

inline double expit(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

inline double apply_link(Link link, double eta) {
  switch (link) {
    case Link::identity: return eta;
    case Link::expit: return expit(eta);
    case Link::tanh: return std::tanh(eta);
  }
  return eta;
}

// d link(eta) / d eta
inline double link_derivative(Link link, double eta) {
  switch (link) {
    case Link::identity: return 1.0;
    case Link::expit: {
      const double m = expit(eta);
      return m * (1.0 - m);
    }
    case Link::tanh: {
      const double t = std::tanh(eta);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

enum class Nuisance { delta, delta_z, mu_z, mu_d, mu_y };
inline constexpr std::array<Nuisance, 5> kAllNuisances = {
    Nuisance::delta, Nuisance::delta_z, Nuisance::mu_z, Nuisance::mu_d, Nuisance::mu_y};

const char* to_string(Nuisance which);
Nuisance parse_nuisance(std::string_view name);

struct NuisanceModel {
  Link link = Link::identity;
  std::vector<int> columns;
};

struct WorkingModelSpec {
  NuisanceModel delta;    // delta(X; alpha)
  NuisanceModel delta_z;  // delta^Z(X; beta)
  NuisanceModel mu_z;     // mu^Z(X; zeta)
  NuisanceModel mu_d;     // mu^D(X; iota)
  NuisanceModel mu_y;     // mu^Y(X; theta)

  const NuisanceModel& operator[](Nuisance which) const;
  NuisanceModel& operator[](Nuisance which);
};

// Default links for the table: tanh delta for binary Y, tanh delta^Z and
// expit mu^Z for binary Z, expit mu^D, expit mu^Y for binary Y.
WorkingModelSpec default_models(const ObservationTable& table, std::vector<int> columns);

// Throws Error(invalid_argument) when a link contradicts the data types or a
// column index is out of range.
void check_models(const WorkingModelSpec& spec, const ObservationTable& table);

// Linear predictor and fitted values for one nuisance at `coef`.
Vector linear_predictor(const ObservationTable& table, const NuisanceModel& model, const Vector& coef);
Vector fitted(const ObservationTable& table, const NuisanceModel& model, const Vector& coef);

// ---------------------------------------------------------------------------
// Misspecification scenarios

enum class Scenario { all_correct, m1_correct, m2_correct, m3_correct, all_wrong };
inline constexpr std::array<Scenario, 5> kAllScenarios = {
    Scenario::all_correct, Scenario::m1_correct, Scenario::m2_correct, Scenario::m3_correct,
    Scenario::all_wrong};

const char* to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

struct ScenarioSpec {
  Scenario name = Scenario::all_correct;
  int p = 3;           // number of x columns including the intercept
  int x3_column = 2;   // column dropped from misspecified models

  bool correct(Nuisance which) const;
  std::vector<int> full_columns() const;
  std::vector<int> reduced_columns() const;
  std::vector<int> columns(Nuisance which) const;
};

WorkingModelSpec models_for(const ScenarioSpec& scenario, bool y_binary, bool z_binary);

}  // namespace ivate
