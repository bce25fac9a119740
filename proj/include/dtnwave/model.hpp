#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dtnwave/types.hpp"

namespace dtnwave {

/// Complex coordinate stretch parameters: sigma(x) ramps polynomially from 0
/// at |x| = D - thickness to sigma_max at |x| = D. thickness == 0 disables it.
struct PmlSpec {
  double thickness = 0.0;
  double sigma_max = 0.0;
  int order = 2;

  bool operator==(const PmlSpec&) const = default;
};

struct IndexInterval {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double n = 1.0;

  bool operator==(const IndexInterval&) const = default;
};

/// Piecewise-constant refractive index n(x) over [-D, D].
struct IndexProfile {
  std::string id;
  std::vector<IndexInterval> intervals;

  // A point on an interval boundary belongs to the interval on its right,
  // except x = D which belongs to the last one.
  double index_at(double x) const;

  bool operator==(const IndexProfile&) const = default;
};

enum class ZOrigin { segment, global };

/// f = amplitude * cos(pi x / 2D) * sin(pi z / period)
struct CosSinSource {
  Complex amplitude{1.0, 0.0};
  double period = 0.215;
  ZOrigin z_origin = ZOrigin::segment;

  bool operator==(const CosSinSource&) const = default;
};

/// Bilinear interpolation of samples on a rectilinear (x, z) table. Outside
/// the table the source is zero.
struct TabulatedSource {
  std::vector<double> x;
  std::vector<double> z;
  MatrixXc values;  // values(ix, iz)
  ZOrigin z_origin = ZOrigin::segment;

  bool operator==(const TabulatedSource& o) const {
    return x == o.x && z == o.z && z_origin == o.z_origin &&
           values.rows() == o.values.rows() && values.cols() == o.values.cols() &&
           values == o.values;
  }
};

/// Programmatic source, f(x, z, D). Not serializable.
struct CustomSource {
  std::function<Complex(double x, double z, double half_width)> f;
  ZOrigin z_origin = ZOrigin::segment;

  bool operator==(const CustomSource&) const { return false; }
};

struct SourceTerm {
  std::string id;
  std::variant<CosSinSource, TabulatedSource, CustomSource> form;

  ZOrigin z_origin() const;
  /// f at transverse x and segment-local z (global z = z_segment_start + z_local).
  Complex evaluate(double x, double z_local, double z_segment_start,
                   double half_width) const;

  bool operator==(const SourceTerm&) const = default;
};

struct Segment {
  std::string profile_id;
  double length = 0.0;
  int q = 0;
  std::optional<std::string> source_id;

  double step() const { return length / q; }

  bool operator==(const Segment&) const = default;
};

struct IncidentSpec {
  int mode = 0;
  Complex amplitude{1.0, 0.0};

  bool operator==(const IncidentSpec&) const = default;
};

struct WaveguideProblem {
  double half_width = 0.0;
  int n_points = 0;
  PmlSpec pml;
  double k0 = 0.0;
  std::vector<IndexProfile> profiles;
  std::vector<Segment> segments;
  std::string left_profile;
  std::string right_profile;
  std::optional<IncidentSpec> incident;
  std::vector<SourceTerm> sources;

  double wavelength() const { return 2.0 * kPi / k0; }
  const IndexProfile& profile(std::string_view id) const;
  const SourceTerm& source(std::string_view id) const;
  /// z_0 = 0 < z_1 < ... < z_m from cumulative segment lengths.
  std::vector<double> interfaces() const;
  bool has_excitation() const;

  bool operator==(const WaveguideProblem&) const = default;
};

/// Checks every problem invariant; throws ConfigError naming the culprit.
void validate(const WaveguideProblem& problem);

/// Parses and validates a JSON configuration document.
WaveguideProblem parse_problem(std::string_view config_text);
WaveguideProblem load_problem(const std::string& path);
/// Inverse of parse_problem. Throws ConfigError for CustomSource terms.
std::string serialize_problem(const WaveguideProblem& problem);

struct TransverseGrid {
  int n = 0;
  double half_width = 0.0;
  double hx = 0.0;
  PmlSpec pml;

  /// Interior node x_{i+1}, i = 0..n-1.
  double x(int i) const { return -half_width + (i + 1) * hx; }
  VectorXd nodes() const;
  double sigma(double x) const;

  bool operator==(const TransverseGrid&) const = default;
};

TransverseGrid build_grid(const WaveguideProblem& problem);

/// N x (q+1) samples f(x_i, xi_k), k = 0..q, of the segment's source; zero if
/// the segment has no source.
MatrixXc sample_source(const WaveguideProblem& problem, const Segment& segment,
                       const TransverseGrid& grid, double z_offset);
MatrixXc sample_source(const SourceTerm* source, const Segment& segment,
                       const TransverseGrid& grid, double z_offset);

}  // namespace dtnwave
