#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "acuc/model.hpp"

namespace acuc {

// Schema problem in an input file: wrong type, unknown field, missing key.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& path, const std::string& reason)
      : std::runtime_error(path + ": " + reason), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Structurally valid file whose contents violate a model invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// Solution file whose shape disagrees with the case it is read against.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// UTF-8 JSON case files. Unknown fields are rejected; the returned case has
// passed validate_case. write_case round-trips losslessly.
Case read_case(const std::string& bytes);
std::string write_case(const Case& c);

FullSolution read_solution(const std::string& bytes, const Case& c);
std::string write_solution(const FullSolution& sol, const Case& c);

// Synthetic case generation. Deterministic in the seed, connected, and
// feasible by construction: an all-on dispatch witness balances the
// copper-plate at every period and producer capacity covers demand with the
// requested margin.
enum class LoadShape { Flat, Diurnal };
struct GeneratorSpec {
  int n_buses = 3;
  int n_devices = 2;
  int n_periods = 48;
  int n_active_zones = 1;
  int n_reactive_zones = 1;
  std::uint64_t seed = 1;
  LoadShape load_profile_shape = LoadShape::Diurnal;
  double capacity_margin = 0.3;
  double ramp_tightness = 0.25;  // 1 = witness needs the full ramp rate
};
Case generate_case(const GeneratorSpec& spec);

// The default reserve product set used by generated cases: three ranked
// active up products, two active down, one reactive product per direction.
std::vector<ReserveProduct> default_products();

}  // namespace acuc
