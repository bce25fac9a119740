#include "dtnwave/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dtnwave {

using nlohmann::json;

namespace {

constexpr double kCoverTol = 1e-12;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(path + "." + key, "unknown key");
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing required key");
  return *it;
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

const json& get_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

Complex get_complex(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  fail(path, "expected a number or [re, im]");
}

json complex_json(Complex c) { return json::array({c.real(), c.imag()}); }

ZOrigin get_origin(const json& v, const std::string& path) {
  const auto s = get_string(v, path);
  if (s == "segment") return ZOrigin::segment;
  if (s == "global") return ZOrigin::global;
  fail(path, "expected \"segment\" or \"global\"");
}

const char* origin_name(ZOrigin o) {
  return o == ZOrigin::segment ? "segment" : "global";
}

std::vector<double> get_doubles(const json& v, const std::string& path) {
  std::vector<double> out;
  for (std::size_t i = 0; i < get_array(v, path).size(); ++i)
    out.push_back(get_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

SourceTerm parse_source(const json& js, const std::string& path) {
  reject_unknown(js, path, {"id", "kind", "params"});
  SourceTerm src;
  src.id = get_string(require(js, path, "id"), path + ".id");
  const auto kind = get_string(require(js, path, "kind"), path + ".kind");
  const json params = js.contains("params") ? js.at("params") : json::object();
  const auto ppath = path + ".params";

  if (kind == "cos_sin") {
    reject_unknown(params, ppath, {"amplitude", "period", "z_origin"});
    CosSinSource f;
    if (params.contains("amplitude"))
      f.amplitude = get_complex(params["amplitude"], ppath + ".amplitude");
    if (params.contains("period"))
      f.period = get_number(params["period"], ppath + ".period");
    if (params.contains("z_origin"))
      f.z_origin = get_origin(params["z_origin"], ppath + ".z_origin");
    if (!(f.period > 0.0)) fail(ppath + ".period", "must be > 0");
    src.form = f;
  } else if (kind == "tabulated") {
    reject_unknown(params, ppath, {"x", "z", "re", "im", "z_origin"});
    TabulatedSource t;
    t.x = get_doubles(require(params, ppath, "x"), ppath + ".x");
    t.z = get_doubles(require(params, ppath, "z"), ppath + ".z");
    if (t.x.size() < 2 || t.z.size() < 2)
      fail(ppath, "tabulated source needs at least 2 x and 2 z samples");
    if (!std::is_sorted(t.x.begin(), t.x.end()) ||
        std::adjacent_find(t.x.begin(), t.x.end()) != t.x.end())
      fail(ppath + ".x", "must be strictly increasing");
    if (!std::is_sorted(t.z.begin(), t.z.end()) ||
        std::adjacent_find(t.z.begin(), t.z.end()) != t.z.end())
      fail(ppath + ".z", "must be strictly increasing");
    t.values = MatrixXc::Zero(static_cast<Eigen::Index>(t.x.size()),
                              static_cast<Eigen::Index>(t.z.size()));
    auto read_table = [&](const char* key, bool imag) {
      const auto tpath = ppath + "." + key;
      const json& rows = get_array(params.at(key), tpath);
      if (rows.size() != t.x.size()) fail(tpath, "expected one row per x sample");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = get_doubles(rows[i], tpath + "[" + std::to_string(i) + "]");
        if (row.size() != t.z.size())
          fail(tpath + "[" + std::to_string(i) + "]", "expected one value per z sample");
        for (std::size_t k = 0; k < row.size(); ++k) {
          auto& v = t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
          v = imag ? Complex(v.real(), row[k]) : Complex(row[k], v.imag());
        }
      }
    };
    require(params, ppath, "re");
    read_table("re", false);
    if (params.contains("im")) read_table("im", true);
    if (params.contains("z_origin"))
      t.z_origin = get_origin(params["z_origin"], ppath + ".z_origin");
    src.form = std::move(t);
  } else {
    fail(path + ".kind", "unknown source kind \"" + kind + "\"");
  }
  return src;
}

json source_json(const SourceTerm& s) {
  json out{{"id", s.id}};
  if (const auto* f = std::get_if<CosSinSource>(&s.form)) {
    out["kind"] = "cos_sin";
    out["params"] = {{"amplitude", complex_json(f->amplitude)},
                     {"period", f->period},
                     {"z_origin", origin_name(f->z_origin)}};
  } else if (const auto* t = std::get_if<TabulatedSource>(&s.form)) {
    out["kind"] = "tabulated";
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < t->values.rows(); ++i) {
      json rr = json::array(), ri = json::array();
      for (Eigen::Index k = 0; k < t->values.cols(); ++k) {
        rr.push_back(t->values(i, k).real());
        ri.push_back(t->values(i, k).imag());
      }
      re.push_back(rr);
      im.push_back(ri);
    }
    out["params"] = {{"x", t->x}, {"z", t->z}, {"re", re}, {"im", im},
                     {"z_origin", origin_name(t->z_origin)}};
  } else {
    throw ConfigError("sources: custom source \"" + s.id + "\" cannot be serialized");
  }
  return out;
}

Complex bilinear(const TabulatedSource& t, double x, double z) {
  if (x < t.x.front() || x > t.x.back() || z < t.z.front() || z > t.z.back())
    return {0.0, 0.0};
  auto bracket = [](const std::vector<double>& g, double v) {
    auto it = std::upper_bound(g.begin(), g.end(), v);
    auto i = static_cast<std::size_t>(std::distance(g.begin(), it));
    i = std::clamp<std::size_t>(i, 1, g.size() - 1) - 1;
    return std::pair{static_cast<Eigen::Index>(i), (v - g[i]) / (g[i + 1] - g[i])};
  };
  const auto [i, tx] = bracket(t.x, x);
  const auto [k, tz] = bracket(t.z, z);
  const auto& v = t.values;
  return (1 - tx) * (1 - tz) * v(i, k) + tx * (1 - tz) * v(i + 1, k) +
         (1 - tx) * tz * v(i, k + 1) + tx * tz * v(i + 1, k + 1);
}

}  // namespace

double IndexProfile::index_at(double x) const {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    const bool last = i + 1 == intervals.size();
    if (x >= iv.x_lo && (x < iv.x_hi || (last && x <= iv.x_hi))) return iv.n;
  }
  throw ConfigError("profile \"" + id + "\": no interval contains x = " + std::to_string(x));
}

ZOrigin SourceTerm::z_origin() const {
  return std::visit([](const auto& f) { return f.z_origin; }, form);
}

Complex SourceTerm::evaluate(double x, double z_local, double z_segment_start,
                             double half_width) const {
  const double z = z_origin() == ZOrigin::segment ? z_local : z_segment_start + z_local;
  if (const auto* f = std::get_if<CosSinSource>(&form))
    return f->amplitude * std::cos(kPi * x / (2.0 * half_width)) * std::sin(kPi * z / f->period);
  if (const auto* t = std::get_if<TabulatedSource>(&form)) return bilinear(*t, x, z);
  return std::get<CustomSource>(form).f(x, z, half_width);
}

const IndexProfile& WaveguideProblem::profile(std::string_view id) const {
  for (const auto& p : profiles)
    if (p.id == id) return p;
  throw ConfigError("unknown profile \"" + std::string(id) + "\"");
}

const SourceTerm& WaveguideProblem::source(std::string_view id) const {
  for (const auto& s : sources)
    if (s.id == id) return s;
  throw ConfigError("unknown source \"" + std::string(id) + "\"");
}

std::vector<double> WaveguideProblem::interfaces() const {
  std::vector<double> z{0.0};
  z.reserve(segments.size() + 1);
  for (const auto& s : segments) z.push_back(z.back() + s.length);
  return z;
}

bool WaveguideProblem::has_excitation() const {
  if (incident && incident->amplitude != Complex(0.0)) return true;
  return std::any_of(segments.begin(), segments.end(),
                     [](const Segment& s) { return s.source_id.has_value(); });
}

void validate(const WaveguideProblem& p) {
  if (!(p.half_width > 0.0)) fail("domain.half_width", "must be > 0");
  if (p.n_points < 3) fail("domain.N", "must be >= 3");
  if (!(p.k0 > 0.0) || !std::isfinite(p.k0)) fail("k0", "must be finite and > 0");
  if (p.pml.thickness < 0.0) fail("domain.pml.thickness", "must be >= 0");
  if (p.pml.thickness >= p.half_width)
    fail("domain.pml.thickness", "must be smaller than half_width");
  if (p.pml.sigma_max < 0.0) fail("domain.pml.sigma_max", "must be >= 0");
  if (p.pml.order < 1) fail("domain.pml.order", "must be >= 1");

  std::set<std::string> ids;
  for (std::size_t j = 0; j < p.profiles.size(); ++j) {
    const auto& prof = p.profiles[j];
    const auto path = "profiles[" + std::to_string(j) + "]";
    if (!ids.insert(prof.id).second) fail(path + ".id", "duplicate profile id \"" + prof.id + "\"");
    if (prof.intervals.empty()) fail(path + ".intervals", "must not be empty");
    double expect = -p.half_width;
    for (std::size_t i = 0; i < prof.intervals.size(); ++i) {
      const auto& iv = prof.intervals[i];
      const auto ipath = path + ".intervals[" + std::to_string(i) + "]";
      if (std::abs(iv.x_lo - expect) > kCoverTol * p.half_width)
        fail(ipath + ".x_lo", "intervals must be ordered and cover [-D, D] without gaps");
      if (!(iv.x_hi > iv.x_lo)) fail(ipath + ".x_hi", "must exceed x_lo");
      if (!(iv.n > 0.0)) fail(ipath + ".n", "refractive index must be > 0");
      expect = iv.x_hi;
    }
    if (std::abs(expect - p.half_width) > kCoverTol * p.half_width)
      fail(path + ".intervals", "intervals must end at x = D");
  }

  std::set<std::string> source_ids;
  for (std::size_t j = 0; j < p.sources.size(); ++j)
    if (!source_ids.insert(p.sources[j].id).second)
      fail("sources[" + std::to_string(j) + "].id", "duplicate source id");

  if (p.segments.empty()) fail("segments", "must not be empty");
  for (std::size_t j = 0; j < p.segments.size(); ++j) {
    const auto& s = p.segments[j];
    const auto path = "segments[" + std::to_string(j) + "]";
    if (!ids.count(s.profile_id)) fail(path + ".profile", "unknown profile \"" + s.profile_id + "\"");
    if (!(s.length > 0.0) || !std::isfinite(s.length)) fail(path + ".length", "must be > 0");
    if (s.q < 3) fail(path + ".q", "must be >= 3");
    if (s.source_id && !source_ids.count(*s.source_id))
      fail(path + ".source", "unknown source \"" + *s.source_id + "\"");
  }
  const auto z = p.interfaces();
  for (std::size_t j = 1; j < z.size(); ++j)
    if (!(z[j] > z[j - 1])) fail("segments", "interface positions must be strictly increasing");

  if (!ids.count(p.left_profile)) fail("leads.left_profile", "unknown profile \"" + p.left_profile + "\"");
  if (!ids.count(p.right_profile)) fail("leads.right_profile", "unknown profile \"" + p.right_profile + "\"");
  if (p.incident && (p.incident->mode < 0 || p.incident->mode >= p.n_points))
    fail("incident.mode", "must be in [0, N)");
}

WaveguideProblem parse_problem(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("document: ") + e.what());
  }
  reject_unknown(doc, "document",
                 {"domain", "wavelength", "k0", "profiles", "segments", "leads", "incident", "sources"});

  WaveguideProblem p;
  const json& dom = require(doc, "document", "domain");
  reject_unknown(dom, "domain", {"half_width", "N", "pml"});
  p.half_width = get_number(require(dom, "domain", "half_width"), "domain.half_width");
  p.n_points = get_int(require(dom, "domain", "N"), "domain.N");
  if (dom.contains("pml")) {
    const json& pml = dom["pml"];
    reject_unknown(pml, "domain.pml", {"thickness", "sigma_max", "order"});
    p.pml.thickness = get_number(require(pml, "domain.pml", "thickness"), "domain.pml.thickness");
    p.pml.sigma_max = get_number(require(pml, "domain.pml", "sigma_max"), "domain.pml.sigma_max");
    if (pml.contains("order")) p.pml.order = get_int(pml["order"], "domain.pml.order");
  }

  const bool has_wl = doc.contains("wavelength"), has_k0 = doc.contains("k0");
  if (has_wl == has_k0) fail("document", "exactly one of \"wavelength\" or \"k0\" is required");
  if (has_k0) {
    p.k0 = get_number(doc["k0"], "k0");
  } else {
    const double wl = get_number(doc["wavelength"], "wavelength");
    if (!(wl > 0.0)) fail("wavelength", "must be > 0");
    p.k0 = 2.0 * kPi / wl;
  }

  const json& profs = get_array(require(doc, "document", "profiles"), "profiles");
  for (std::size_t j = 0; j < profs.size(); ++j) {
    const auto path = "profiles[" + std::to_string(j) + "]";
    reject_unknown(profs[j], path, {"id", "intervals"});
    IndexProfile prof;
    prof.id = get_string(require(profs[j], path, "id"), path + ".id");
    const json& ivs = get_array(require(profs[j], path, "intervals"), path + ".intervals");
    for (std::size_t i = 0; i < ivs.size(); ++i) {
      const auto ipath = path + ".intervals[" + std::to_string(i) + "]";
      reject_unknown(ivs[i], ipath, {"x_lo", "x_hi", "n"});
      prof.intervals.push_back({get_number(require(ivs[i], ipath, "x_lo"), ipath + ".x_lo"),
                                get_number(require(ivs[i], ipath, "x_hi"), ipath + ".x_hi"),
                                get_number(require(ivs[i], ipath, "n"), ipath + ".n")});
    }
    p.profiles.push_back(std::move(prof));
  }

  const json& segs = get_array(require(doc, "document", "segments"), "segments");
  for (std::size_t j = 0; j < segs.size(); ++j) {
    const auto path = "segments[" + std::to_string(j) + "]";
    reject_unknown(segs[j], path, {"profile", "length", "q", "source"});
    Segment s;
    s.profile_id = get_string(require(segs[j], path, "profile"), path + ".profile");
    s.length = get_number(require(segs[j], path, "length"), path + ".length");
    s.q = get_int(require(segs[j], path, "q"), path + ".q");
    if (segs[j].contains("source") && !segs[j]["source"].is_null())
      s.source_id = get_string(segs[j]["source"], path + ".source");
    p.segments.push_back(std::move(s));
  }

  const json& leads = require(doc, "document", "leads");
  reject_unknown(leads, "leads", {"left_profile", "right_profile"});
  p.left_profile = get_string(require(leads, "leads", "left_profile"), "leads.left_profile");
  p.right_profile = get_string(require(leads, "leads", "right_profile"), "leads.right_profile");

  if (doc.contains("incident") && !doc["incident"].is_null()) {
    const json& inc = doc["incident"];
    reject_unknown(inc, "incident", {"mode", "amplitude"});
    IncidentSpec spec;
    spec.mode = get_int(require(inc, "incident", "mode"), "incident.mode");
    if (inc.contains("amplitude")) spec.amplitude = get_complex(inc["amplitude"], "incident.amplitude");
    p.incident = spec;
  }

  if (doc.contains("sources")) {
    const json& srcs = get_array(doc["sources"], "sources");
    for (std::size_t j = 0; j < srcs.size(); ++j)
      p.sources.push_back(parse_source(srcs[j], "sources[" + std::to_string(j) + "]"));
  }

  validate(p);
  return p;
}

WaveguideProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_problem(buf.str());
}

std::string serialize_problem(const WaveguideProblem& p) {
  json doc;
  doc["domain"] = {{"half_width", p.half_width},
                   {"N", p.n_points},
                   {"pml", {{"thickness", p.pml.thickness},
                            {"sigma_max", p.pml.sigma_max},
                            {"order", p.pml.order}}}};
  doc["k0"] = p.k0;
  doc["profiles"] = json::array();
  for (const auto& prof : p.profiles) {
    json ivs = json::array();
    for (const auto& iv : prof.intervals)
      ivs.push_back({{"x_lo", iv.x_lo}, {"x_hi", iv.x_hi}, {"n", iv.n}});
    doc["profiles"].push_back({{"id", prof.id}, {"intervals", ivs}});
  }
  doc["segments"] = json::array();
  for (const auto& s : p.segments) {
    json js{{"profile", s.profile_id}, {"length", s.length}, {"q", s.q}};
    if (s.source_id) js["source"] = *s.source_id;
    doc["segments"].push_back(js);
  }
  doc["leads"] = {{"left_profile", p.left_profile}, {"right_profile", p.right_profile}};
  if (p.incident)
    doc["incident"] = {{"mode", p.incident->mode}, {"amplitude", complex_json(p.incident->amplitude)}};
  doc["sources"] = json::array();
  for (const auto& s : p.sources) doc["sources"].push_back(source_json(s));
  return doc.dump(2);
}

VectorXd TransverseGrid::nodes() const {
  VectorXd xs(n);
  for (int i = 0; i < n; ++i) xs(i) = x(i);
  return xs;
}

double TransverseGrid::sigma(double xv) const {
  if (pml.thickness <= 0.0) return 0.0;
  const double inner = half_width - pml.thickness;
  const double depth = std::abs(xv) - inner;
  if (depth <= 0.0) return 0.0;
  return pml.sigma_max * std::pow(std::min(depth, pml.thickness) / pml.thickness, pml.order);
}

TransverseGrid build_grid(const WaveguideProblem& p) {
  if (p.n_points < 3) throw ConfigError("domain.N: must be >= 3");
  if (!(p.half_width > 0.0)) throw ConfigError("domain.half_width: must be > 0");
  if (p.pml.thickness >= p.half_width)
    throw ConfigError("domain.pml.thickness: PML leaves no interior (thickness >= half_width)");
  TransverseGrid g;
  g.n = p.n_points;
  g.half_width = p.half_width;
  g.hx = 2.0 * p.half_width / (p.n_points + 1);
  g.pml = p.pml;
  return g;
}

MatrixXc sample_source(const SourceTerm* source, const Segment& segment,
                       const TransverseGrid& grid, double z_offset) {
  MatrixXc out = MatrixXc::Zero(grid.n, segment.q + 1);
  if (!source) return out;
  const double h = segment.step();
  for (int k = 0; k <= segment.q; ++k) {
    const double z = k == segment.q ? segment.length : k * h;
    for (int i = 0; i < grid.n; ++i)
      out(i, k) = source->evaluate(grid.x(i), z, z_offset, grid.half_width);
  }
  return out;
}

MatrixXc sample_source(const WaveguideProblem& problem, const Segment& segment,
                       const TransverseGrid& grid, double z_offset) {
  const SourceTerm* src = segment.source_id ? &problem.source(*segment.source_id) : nullptr;
  return sample_source(src, segment, grid, z_offset);
}

}  // namespace dtnwave
