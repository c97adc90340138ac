#include "ivate/data.hpp"

#include "ivate/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace ivate {

namespace {

std::string at(Index row, const char* column) {
  return " (row " + std::to_string(row) + ", column " + column + ")";
}

void check_finite(const Vector& v, const char* column) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) fail(ErrorKind::data, std::string("non-finite value") + at(i, column));
  }
}

bool is_binary(const Vector& v) {
  return (v.array() == 0.0 || v.array() == 1.0).all();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

double parse_number(const std::string& cell, Index row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorKind::data, "unparseable number '" + cell + "'" + at(row, column.c_str()));
  }
  return value;
}

}  // namespace

ObservationTable validate(RawTable raw) {
  const Index n = raw.y.size();
  if (n < 1) fail(ErrorKind::data, "table is empty");
  if (raw.d.size() != n || raw.z.size() != n || raw.x.rows() != n) {
    fail(ErrorKind::data, "dimension mismatch: y has " + std::to_string(n) + " rows, d " +
                              std::to_string(raw.d.size()) + ", z " + std::to_string(raw.z.size()) +
                              ", x " + std::to_string(raw.x.rows()));
  }
  if (raw.x.cols() < 1) fail(ErrorKind::data, "covariate matrix has no columns");

  check_finite(raw.y, "y");
  check_finite(raw.d, "d");
  check_finite(raw.z, "z");
  for (Index j = 0; j < raw.x.cols(); ++j) {
    const std::string name = "x" + std::to_string(j);
    for (Index i = 0; i < n; ++i) {
      if (!std::isfinite(raw.x(i, j))) fail(ErrorKind::data, "non-finite value" + at(i, name.c_str()));
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (raw.d[i] != 0.0 && raw.d[i] != 1.0) fail(ErrorKind::data, "treatment not binary" + at(i, "d"));
  }
  for (Index i = 0; i < n; ++i) {
    if (raw.x(i, 0) != 1.0) fail(ErrorKind::data, "first covariate column is not the intercept" + at(i, "x0"));
  }
  if (raw.z_kind.categorical) {
    const int k = raw.z_kind.levels;
    if (k < 2) fail(ErrorKind::data, "categorical instrument needs at least 2 levels");
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (Index i = 0; i < n; ++i) {
      const double v = raw.z[i];
      if (v != std::floor(v) || v < 0 || v >= k) {
        fail(ErrorKind::data, "instrument level outside 0.." + std::to_string(k - 1) + at(i, "z"));
      }
      seen[static_cast<std::size_t>(v)] = true;
    }
    for (int level = 0; level < k; ++level) {
      if (!seen[static_cast<std::size_t>(level)]) {
        fail(ErrorKind::data, "missing categorical level " + std::to_string(level) + " in column z");
      }
    }
  }

  ObservationTable t;
  t.y_binary_ = is_binary(raw.y);
  t.y_ = std::move(raw.y);
  t.d_ = std::move(raw.d);
  t.z_ = std::move(raw.z);
  t.x_ = std::move(raw.x);
  t.z_kind_ = raw.z_kind;
  return t;
}

Matrix design(const ObservationTable& table, std::span<const int> columns) {
  Matrix out(table.n(), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const int c = columns[j];
    if (c < 0 || c >= table.p()) {
      fail(ErrorKind::invalid_argument, "design column " + std::to_string(c) + " out of range (p = " +
                                            std::to_string(table.p()) + ")");
    }
    out.col(static_cast<Index>(j)) = table.x().col(c);
  }
  return out;
}

double nearest_rank_quantile(const Vector& values, double q) {
  if (!(q > 0.0 && q < 1.0)) fail(ErrorKind::invalid_argument, "quantile must lie in (0,1)");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // The small offset keeps q*n that is integral up to rounding (0.8*10) on its integer.
  auto rank = static_cast<Index>(std::ceil(q * n - 1e-9));
  rank = std::clamp<Index>(rank, 1, static_cast<Index>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

ObservationTable dichotomize(const ObservationTable& table, double q) {
  if (table.z_kind().categorical) fail(ErrorKind::invalid_argument, "dichotomize requires a continuous instrument");
  const Vector& z = table.z();
  if (z.maxCoeff() == z.minCoeff()) fail(ErrorKind::data, "degenerate instrument: all values equal");
  const double threshold = nearest_rank_quantile(z, q);
  Vector binary = (z.array() >= threshold).cast<double>();
  const double ones = binary.sum();
  if (ones == 0.0 || ones == static_cast<double>(z.size())) {
    fail(ErrorKind::data, "degenerate instrument: dichotomization at q leaves a single level");
  }
  return validate({table.y(), table.d(), std::move(binary), table.x(), InstrumentKind::categorical_with(2)});
}

ObservationTable select_rows(const ObservationTable& table, std::span<const Index> rows) {
  const auto m = static_cast<Index>(rows.size());
  RawTable raw{Vector(m), Vector(m), Vector(m), Matrix(m, table.p()), table.z_kind()};
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    raw.y[i] = table.y()[r];
    raw.d[i] = table.d()[r];
    raw.z[i] = table.z()[r];
    raw.x.row(i) = table.x().row(r);
  }
  return validate(std::move(raw));
}

ObservationTable read_csv(std::istream& in, InstrumentKind z_kind) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split(line);

  std::map<std::string, std::size_t> position;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!position.emplace(header[j], j).second) fail(ErrorKind::data, "duplicate column '" + header[j] + "'");
  }
  auto require = [&](const char* name, const char* role) {
    auto it = position.find(name);
    if (it == position.end()) fail(ErrorKind::data, std::string(role) + " column absent");
    return it->second;
  };
  const std::size_t iy = require("y", "outcome");
  const std::size_t id = require("d", "treatment");
  const std::size_t iz = require("z", "instrument");
  std::vector<std::size_t> ix;
  for (int k = 1;; ++k) {
    auto it = position.find("x" + std::to_string(k));
    if (it == position.end()) break;
    ix.push_back(it->second);
  }
  if (position.size() != 3 + ix.size()) {
    for (const auto& [name, _] : position) {
      const bool known = name == "y" || name == "d" || name == "z" ||
                         (name.size() > 1 && name[0] == 'x' &&
                          std::all_of(name.begin() + 1, name.end(), ::isdigit) &&
                          std::stoul(name.substr(1)) >= 1 && std::stoul(name.substr(1)) <= ix.size());
      if (!known) fail(ErrorKind::data, "unexpected column '" + name + "' (covariates must be x1..xp)");
    }
  }

  std::vector<std::vector<double>> rows;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::data, "dimension mismatch: row " + std::to_string(row) + " has " +
                                std::to_string(cells.size()) + " fields, header has " +
                                std::to_string(header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) values[j] = parse_number(cells[j], row, header[j]);
    rows.push_back(std::move(values));
    ++row;
  }

  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(ix.size() + 1);
  RawTable raw{Vector(n), Vector(n), Vector(n), Matrix(n, p), z_kind};
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    raw.y[i] = r[iy];
    raw.d[i] = r[id];
    raw.z[i] = r[iz];
    raw.x(i, 0) = 1.0;
    for (std::size_t k = 0; k < ix.size(); ++k) raw.x(i, static_cast<Index>(k + 1)) = r[ix[k]];
  }
  return validate(std::move(raw));
}

ObservationTable read_csv_file(const std::string& path, InstrumentKind z_kind) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  return read_csv(in, z_kind);
}

void write_csv(std::ostream& out, const ObservationTable& table) {
  out << "y,d,z";
  for (Index j = 1; j < table.p(); ++j) out << ",x" << j;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (Index i = 0; i < table.n(); ++i) {
    put(table.y()[i]);
    out << ',';
    put(table.d()[i]);
    out << ',';
    put(table.z()[i]);
    for (Index j = 1; j < table.p(); ++j) {
      out << ',';
      put(table.x()(i, j));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

const char* to_string(Link link) {
  switch (link) {
    case Link::identity: return "identity";
    case Link::expit: return "expit";
    case Link::tanh: return "tanh";
  }
  return "?";
}

Link parse_link(std::string_view name) {
  if (name == "identity") return Link::identity;
  if (name == "expit" || name == "logit") return Link::expit;
  if (name == "tanh") return Link::tanh;
  fail(ErrorKind::invalid_argument, "unknown link '" + std::string(name) + "'");
}

const char* to_string(Nuisance which) {
  switch (which) {
    case Nuisance::delta: return "delta";
    case Nuisance::delta_z: return "delta_z";
    case Nuisance::mu_z: return "mu_z";
    case Nuisance::mu_d: return "mu_d";
    case Nuisance::mu_y: return "mu_y";
  }
  return "?";
}

Nuisance parse_nuisance(std::string_view name) {
  for (Nuisance n : kAllNuisances) {
    if (name == to_string(n)) return n;
  }
  fail(ErrorKind::invalid_argument, "unknown nuisance '" + std::string(name) + "'");
}

const NuisanceModel& WorkingModelSpec::operator[](Nuisance which) const {
  switch (which) {
    case Nuisance::delta: return delta;
    case Nuisance::delta_z: return delta_z;
    case Nuisance::mu_z: return mu_z;
    case Nuisance::mu_d: return mu_d;
    case Nuisance::mu_y: return mu_y;
  }
  return delta;
}

NuisanceModel& WorkingModelSpec::operator[](Nuisance which) {
  return const_cast<NuisanceModel&>(static_cast<const WorkingModelSpec&>(*this)[which]);
}

WorkingModelSpec default_models(const ObservationTable& table, std::vector<int> columns) {
  const bool yb = table.y_binary();
  const bool zb = table.z_kind().binary();
  WorkingModelSpec spec;
  spec.delta = {yb ? Link::tanh : Link::identity, columns};
  spec.delta_z = {zb ? Link::tanh : Link::identity, columns};
  spec.mu_z = {zb ? Link::expit : Link::identity, columns};
  spec.mu_d = {Link::expit, columns};
  spec.mu_y = {yb ? Link::expit : Link::identity, columns};
  return spec;
}

void check_models(const WorkingModelSpec& spec, const ObservationTable& table) {
  for (Nuisance which : kAllNuisances) {
    const auto& m = spec[which];
    if (m.columns.empty()) fail(ErrorKind::invalid_argument, std::string(to_string(which)) + " model has no columns");
    for (int c : m.columns) {
      if (c < 0 || c >= table.p()) {
        fail(ErrorKind::invalid_argument, std::string(to_string(which)) + " column " + std::to_string(c) +
                                              " out of range (p = " + std::to_string(table.p()) + ")");
      }
    }
  }
  const bool yb = table.y_binary();
  const bool zb = table.z_kind().binary();
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::invalid_argument, msg);
  };
  require(!yb || spec.delta.link == Link::tanh, "delta link must be tanh for a binary outcome");
  require(spec.delta.link != Link::expit, "delta link must be tanh or identity");
  require(zb ? spec.delta_z.link == Link::tanh : spec.delta_z.link == Link::identity,
          zb ? "delta_z link must be tanh for a binary instrument"
             : "delta_z link must be identity for a continuous instrument");
  require(zb ? spec.mu_z.link == Link::expit : spec.mu_z.link == Link::identity,
          zb ? "mu_z link must be expit for a binary instrument"
             : "mu_z link must be identity for a continuous instrument");
  require(spec.mu_d.link == Link::expit, "mu_d link must be expit");
  require(yb ? spec.mu_y.link == Link::expit : spec.mu_y.link == Link::identity,
          yb ? "mu_y link must be expit for a binary outcome" : "mu_y link must be identity for a continuous outcome");
}

Vector linear_predictor(const ObservationTable& table, const NuisanceModel& model, const Vector& coef) {
  if (coef.size() != static_cast<Index>(model.columns.size())) {
    fail(ErrorKind::invalid_argument, "coefficient length does not match model columns");
  }
  Vector eta = Vector::Zero(table.n());
  for (std::size_t j = 0; j < model.columns.size(); ++j) {
    eta += coef[static_cast<Index>(j)] * table.x().col(model.columns[j]);
  }
  return eta;
}

Vector fitted(const ObservationTable& table, const NuisanceModel& model, const Vector& coef) {
  Vector eta = linear_predictor(table, model, coef);
  return eta.unaryExpr([&](double e) { return apply_link(model.link, e); });
}

// ---------------------------------------------------------------------------

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::all_correct: return "all_correct";
    case Scenario::m1_correct: return "m1_correct";
    case Scenario::m2_correct: return "m2_correct";
    case Scenario::m3_correct: return "m3_correct";
    case Scenario::all_wrong: return "all_wrong";
  }
  return "?";
}

Scenario parse_scenario(std::string_view name) {
  for (Scenario s : kAllScenarios) {
    if (name == to_string(s)) return s;
  }
  fail(ErrorKind::invalid_argument, "unknown scenario '" + std::string(name) + "'");
}

// M1 = {delta, mu_d, mu_y}, M2 = {delta_z, mu_z, mu_d}, M3 = {delta, mu_z}.
bool ScenarioSpec::correct(Nuisance which) const {
  switch (name) {
    case Scenario::all_correct: return true;
    case Scenario::all_wrong: return false;
    case Scenario::m1_correct:
      return which == Nuisance::delta || which == Nuisance::mu_d || which == Nuisance::mu_y;
    case Scenario::m2_correct:
      return which == Nuisance::delta_z || which == Nuisance::mu_z || which == Nuisance::mu_d;
    case Scenario::m3_correct:
      return which == Nuisance::delta || which == Nuisance::mu_z;
  }
  return true;
}

std::vector<int> ScenarioSpec::full_columns() const {
  std::vector<int> cols(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) cols[static_cast<std::size_t>(j)] = j;
  return cols;
}

std::vector<int> ScenarioSpec::reduced_columns() const {
  if (x3_column <= 0 || x3_column >= p) {
    fail(ErrorKind::invalid_argument, "scenario x3 column must be a non-intercept column");
  }
  std::vector<int> cols;
  for (int j = 0; j < p; ++j) {
    if (j != x3_column) cols.push_back(j);
  }
  return cols;
}

std::vector<int> ScenarioSpec::columns(Nuisance which) const {
  return correct(which) ? full_columns() : reduced_columns();
}

WorkingModelSpec models_for(const ScenarioSpec& scenario, bool y_binary, bool z_binary) {
  WorkingModelSpec spec;
  spec.delta = {y_binary ? Link::tanh : Link::identity, scenario.columns(Nuisance::delta)};
  spec.delta_z = {z_binary ? Link::tanh : Link::identity, scenario.columns(Nuisance::delta_z)};
  spec.mu_z = {z_binary ? Link::expit : Link::identity, scenario.columns(Nuisance::mu_z)};
  spec.mu_d = {Link::expit, scenario.columns(Nuisance::mu_d)};
  spec.mu_y = {y_binary ? Link::expit : Link::identity, scenario.columns(Nuisance::mu_y)};
  return spec;
}

}  // namespace ivate
