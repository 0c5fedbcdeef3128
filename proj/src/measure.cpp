#include "homog/measure.hpp"

#include <algorithm>
#include <cmath>

namespace homog {

bool Subspace::frozen(int axis) const {
  return std::find(frozen_axes.begin(), frozen_axes.end(), axis) != frozen_axes.end();
}

double Subspace::offset(int axis) const {
  for (std::size_t i = 0; i < frozen_axes.size(); ++i)
    if (frozen_axes[i] == axis) return offsets[i];
  return 0.0;
}

MeasureSpec MeasureSpec::lebesgue() {
  MeasureSpec s;
  s.kind = MeasureKind::lebesgue;
  s.components = {Subspace{}};
  s.total_mass = 1.0;
  return s;
}

MeasureSpec MeasureSpec::planes(const std::vector<std::pair<int, double>>& planes) {
  MeasureSpec s;
  s.kind = MeasureKind::arrangement;
  for (auto [axis, off] : planes) s.components.push_back(Subspace{{axis}, {off}, 1.0});
  s.total_mass = static_cast<double>(planes.size());
  return s;
}

namespace {

// H_a is contained in H_b iff b freezes a subset of a's frozen axes at the same offsets.
bool contained(const Subspace& a, const Subspace& b) {
  for (std::size_t i = 0; i < b.frozen_axes.size(); ++i) {
    int ax = b.frozen_axes[i];
    if (!a.frozen(ax)) return false;
    double d = a.offset(ax) - b.offsets[i];
    d -= std::round(d);
    if (std::abs(d) > 1e-14) return false;
  }
  return true;
}

}  // namespace

void MeasureSpec::validate() const {
  if (components.empty()) throw EmptyMeasure("measure has no components");
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight))
      throw InvalidSpec("component weights must be positive");
    if (c.frozen_axes.size() != c.offsets.size())
      throw InvalidSpec("frozen_axes and offsets differ in length");
    if (c.frozen_axes.size() > 3) throw InvalidSpec("at most three frozen axes");
    for (std::size_t i = 0; i < c.frozen_axes.size(); ++i) {
      int ax = c.frozen_axes[i];
      if (ax < 0 || ax > 2) throw InvalidSpec("frozen axis out of range");
      if (std::count(c.frozen_axes.begin(), c.frozen_axes.end(), ax) != 1)
        throw InvalidSpec("frozen axis repeated");
      if (!(c.offsets[i] >= 0.0 && c.offsets[i] < 1.0)) throw InvalidSpec("offset outside [0,1)");
    }
  }
  if (kind == MeasureKind::lebesgue) {
    if (components.size() != 1 || !components[0].frozen_axes.empty())
      throw InvalidSpec("lebesgue measure must be a single unfrozen component");
  }
  if (kind == MeasureKind::arrangement) {
    for (std::size_t i = 0; i < components.size(); ++i)
      for (std::size_t j = 0; j < components.size(); ++j)
        if (i != j && contained(components[i], components[j]))
          throw InvalidSpec("arrangement component contained in another");
  }
}

bool MeasureSpec::is_lebesgue() const {
  return components.size() == 1 && components[0].frozen_axes.empty();
}

MeasureSpec normalize(const MeasureSpec& spec) {
  spec.validate();
  double total = 0.0;
  for (const auto& c : spec.components) total += c.weight;
  if (!(total > 0.0)) throw EmptyMeasure("total mass is zero");
  MeasureSpec out = spec;
  for (auto& c : out.components) c.weight /= total;
  out.total_mass = 1.0;
  return out;
}

cd moment(const MeasureSpec& spec, int m1, int m2, int m3) {
  const int m[3] = {m1, m2, m3};
  cd sum = 0.0;
  for (const auto& c : spec.components) {
    bool vanishes = false;
    double phase = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
      if (c.frozen(ax))
        phase += m[ax] * c.offset(ax);
      else if (m[ax] != 0)
        vanishes = true;
    }
    if (!vanishes) sum += c.weight * std::polar(1.0, -kTwoPi * phase);
  }
  return sum;
}

MomentTable::MomentTable(int cutoff, std::vector<cd> data) : cutoff_(cutoff), data_(std::move(data)) {}

cd MomentTable::operator()(int m1, int m2, int m3) const {
  const int s = span();
  if (std::abs(m1) > s || std::abs(m2) > s || std::abs(m3) > s)
    throw CutoffTooSmall("moment frequency outside table");
  const int w = 2 * s + 1;
  return data_[((m1 + s) * w + (m2 + s)) * w + (m3 + s)];
}

MomentTable fourier_moments(const MeasureSpec& spec, int cutoff) {
  if (cutoff < 1) throw CutoffTooSmall("cutoff must be >= 1");
  const int s = 2 * cutoff, w = 2 * s + 1;
  const MeasureSpec n = normalize(spec);
  std::vector<cd> data(static_cast<std::size_t>(w) * w * w);
  for (int a = -s; a <= s; ++a)
    for (int b = -s; b <= s; ++b)
      for (int c = -s; c <= s; ++c) data[((a + s) * w + (b + s)) * w + (c + s)] = moment(n, a, b, c);
  return MomentTable(cutoff, std::move(data));
}

GradMeanReport check_gradient_mean_zero(const MeasureSpec& spec, int cutoff) {
  GradMeanReport r;
  for (int a = -cutoff; a <= cutoff; ++a)
    for (int b = -cutoff; b <= cutoff; ++b)
      for (int c = -cutoff; c <= cutoff; ++c) {
        const int m[3] = {a, b, c};
        const double mu = std::abs(moment(spec, -a, -b, -c));
        for (int j = 0; j < 3; ++j) r.worst_violation = std::max(r.worst_violation, kTwoPi * std::abs(m[j]) * mu);
      }
  r.holds = r.worst_violation <= 1e-12;
  return r;
}

MeasureSpec measure_from_json(const nlohmann::json& j) {
  MeasureSpec s;
  const std::string kind = j.value("kind", "lebesgue");
  if (kind == "lebesgue") {
    s = MeasureSpec::lebesgue();
    if (j.contains("total_mass")) s.total_mass = j["total_mass"].get<double>();
    s.components[0].weight = s.total_mass;
    return s;
  }
  if (kind == "arrangement")
    s.kind = MeasureKind::arrangement;
  else if (kind == "mixture")
    s.kind = MeasureKind::mixture;
  else
    throw ConfigError("unknown measure kind '" + kind + "'");
  if (!j.contains("components")) throw ConfigError("measure: missing components");
  s.total_mass = 0.0;
  for (const auto& cj : j["components"]) {
    Subspace c;
    // Config axes are 1-based.
    for (int ax : cj.value("frozen_axes", std::vector<int>{})) c.frozen_axes.push_back(ax - 1);
    c.offsets = cj.value("offsets", std::vector<double>{});
    c.weight = cj.value("weight", 1.0);
    s.total_mass += c.weight;
    s.components.push_back(c);
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const MeasureSpec& spec) {
  nlohmann::json j;
  j["kind"] = spec.kind == MeasureKind::lebesgue ? "lebesgue"
              : spec.kind == MeasureKind::arrangement ? "arrangement"
                                                      : "mixture";
  j["total_mass"] = spec.total_mass;
  j["components"] = nlohmann::json::array();
  for (const auto& c : spec.components) {
    std::vector<int> axes;
    for (int ax : c.frozen_axes) axes.push_back(ax + 1);
    j["components"].push_back({{"frozen_axes", axes}, {"offsets", c.offsets}, {"weight", c.weight}});
  }
  return j;
}

nlohmann::json to_json(const MomentTable& table) {
  nlohmann::json j;
  j["cutoff"] = table.cutoff();
  auto& e = j["entries"] = nlohmann::json::array();
  const int s = table.span();
  for (int a = -s; a <= s; ++a)
    for (int b = -s; b <= s; ++b)
      for (int c = -s; c <= s; ++c) {
        cd v = table(a, b, c);
        if (std::abs(v) > 0.0) e.push_back({{"m", {a, b, c}}, {"re", v.real()}, {"im", v.imag()}});
      }
  return j;
}

}  // namespace homog
