#include "bpre/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bpre/errors.hpp"
#include "json.hpp"

namespace bpre {

namespace {

constexpr double kCountCeiling = 9.007199254740992e15;  // 2^53

// x - 1 + e^{-x} for x >= 0 without cancellation.
double expm1_gap(double x) {
  if (x >= 0.5) return x + std::expm1(-x);
  // sum_{k>=2} (-1)^k x^k / k!
  double term = 0.5 * x * x;
  double sum = term;
  for (int k = 3; k < 40; ++k) {
    term *= -x / static_cast<double>(k);
    sum += term;
    if (std::abs(term) <= 1e-18 * sum) break;
  }
  return sum;
}

// (1-r)^y - 1 + y*r for integer y >= 0, r in [0,1], cancellation-safe.
double binomial_gap(std::uint64_t y, double r) {
  if (y < 2 || r == 0.0) return 0.0;
  const double yd = static_cast<double>(y);
  if (yd * r <= 0.5) {
    // Finite binomial tail sum_{k=2}^{y} C(y,k) (-r)^k; terms decay fast.
    double term = 0.5 * yd * (yd - 1.0) * r * r;
    double sum = term;
    for (std::uint64_t k = 2; k < y; ++k) {
      term *= -r * static_cast<double>(y - k) / static_cast<double>(k + 1);
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  if (r == 1.0) return yd - 1.0;
  return std::expm1(yd * std::log1p(-r)) + yd * r;
}

void require_unit_interval(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0))
    throw InvalidParameter(std::string(what) + " must lie in [0,1]");
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::LinearFractionalGeometric: return "linear_fractional";
    case Family::Poisson: return "poisson";
    case Family::Binary: return "binary";
    case Family::BoundedGeneric: return "bounded";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "linear_fractional") return Family::LinearFractionalGeometric;
  if (name == "poisson") return Family::Poisson;
  if (name == "binary") return Family::Binary;
  if (name == "bounded") return Family::BoundedGeneric;
  throw InvalidParameter("unknown offspring family: " + name);
}

OffspringLaw OffspringLaw::linear_fractional(double mean) {
  if (!(mean > 0.0) || !std::isfinite(mean))
    throw InvalidParameter("linear_fractional: mean must be positive");
  return OffspringLaw(Family::LinearFractionalGeometric, mean, {});
}

OffspringLaw OffspringLaw::poisson(double mean) {
  if (!(mean > 0.0) || !std::isfinite(mean))
    throw InvalidParameter("poisson: mean must be positive");
  return OffspringLaw(Family::Poisson, mean, {});
}

OffspringLaw OffspringLaw::binary(double p) {
  require_unit_interval(p, "binary: p");
  return OffspringLaw(Family::Binary, p, {});
}

OffspringLaw OffspringLaw::bounded(std::vector<double> probs) {
  if (probs.empty()) throw InvalidParameter("bounded: empty probability vector");
  double sum = 0.0;
  for (double q : probs) {
    if (!(q >= 0.0)) throw InvalidParameter("bounded: negative probability");
    sum += q;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw InvalidParameter("bounded: probabilities must sum to 1 (tol 1e-12)");
  for (double& q : probs) q /= sum;
  return OffspringLaw(Family::BoundedGeneric, 0.0, std::move(probs));
}

double OffspringLaw::mean() const {
  switch (family_) {
    case Family::LinearFractionalGeometric:
    case Family::Poisson:
      return a_;
    case Family::Binary:
      return 2.0 * a_;
    case Family::BoundedGeneric: {
      double m = 0.0;
      for (std::size_t y = 1; y < probs_.size(); ++y)
        m += static_cast<double>(y) * probs_[y];
      return m;
    }
  }
  return 0.0;
}

double OffspringLaw::pgf(double s) const {
  require_unit_interval(s, "pgf: s");
  if (s == 1.0) return 1.0;
  switch (family_) {
    case Family::LinearFractionalGeometric: {
      const double p = 1.0 / (1.0 + a_);
      return p / (1.0 - (1.0 - p) * s);
    }
    case Family::Poisson:
      return std::exp(-a_ * (1.0 - s));
    case Family::Binary:
      return (1.0 - a_) + a_ * s * s;
    case Family::BoundedGeneric: {
      double acc = 0.0;
      for (std::size_t y = probs_.size(); y-- > 0;) acc = acc * s + probs_[y];
      return acc;
    }
  }
  return 0.0;
}

double OffspringLaw::survival_map(double r) const {
  require_unit_interval(r, "survival_map: r");
  switch (family_) {
    case Family::LinearFractionalGeometric: {
      const double mr = a_ * r;
      return mr / (1.0 + mr);
    }
    case Family::Poisson:
      return -std::expm1(-a_ * r);
    case Family::Binary:
      return a_ * r * (2.0 - r);
    case Family::BoundedGeneric: {
      if (r == 0.0) return 0.0;
      double acc = 0.0;
      if (r == 1.0) {
        for (std::size_t y = 1; y < probs_.size(); ++y) acc += probs_[y];
        return acc;
      }
      const double l = std::log1p(-r);
      for (std::size_t y = 1; y < probs_.size(); ++y)
        acc += probs_[y] * (-std::expm1(static_cast<double>(y) * l));
      return acc;
    }
  }
  return 0.0;
}

double OffspringLaw::survival_gap(double r) const {
  require_unit_interval(r, "survival_gap: r");
  switch (family_) {
    case Family::LinearFractionalGeometric: {
      const double mr = a_ * r;
      return mr * mr / (1.0 + mr);
    }
    case Family::Poisson:
      return expm1_gap(a_ * r);
    case Family::Binary:
      return a_ * r * r;
    case Family::BoundedGeneric: {
      double acc = 0.0;
      for (std::size_t y = 2; y < probs_.size(); ++y)
        acc += probs_[y] * binomial_gap(y, r);
      return acc;
    }
  }
  return 0.0;
}

double OffspringLaw::g_survival(double r) const {
  require_unit_interval(r, "g_survival: r");
  const double m = mean();
  if (!(m > 0.0)) throw InvalidParameter("g_survival: law has zero mean");
  switch (family_) {
    case Family::LinearFractionalGeometric:
      return 1.0;  // constant in s for Mobius pgfs
    case Family::Binary:
      return 1.0 / (2.0 * a_ * (2.0 - r));
    default:
      break;
  }
  if (r == 0.0) return 0.5 * eta();
  const double surv = survival_map(r);
  if (surv <= 0.0) return 0.0;  // degenerate Q({1}) = 1
  return survival_gap(r) / (surv * m * r);
}

double OffspringLaw::eta() const {
  const double m = mean();
  if (!(m > 0.0)) throw InvalidParameter("eta: law has zero mean");
  switch (family_) {
    case Family::LinearFractionalGeometric:
      return 2.0;
    case Family::Poisson:
      return 1.0;
    case Family::Binary:
      return 1.0 / (2.0 * a_);
    case Family::BoundedGeneric: {
      double f2 = 0.0;
      for (std::size_t y = 2; y < probs_.size(); ++y)
        f2 += static_cast<double>(y) * static_cast<double>(y - 1) * probs_[y];
      return f2 / (m * m);
    }
  }
  return 0.0;
}

namespace {

// P{Poisson(m) >= b}, log-space terms; relative error well below 1e-10.
double poisson_tail(double m, std::int64_t b) {
  if (b <= 0) return 1.0;
  const double bd = static_cast<double>(b);
  const double lm = std::log(m);
  if (bd <= m) {
    // 1 - sum_{y < b} p_y
    double cdf = 0.0;
    for (std::int64_t y = 0; y < b; ++y)
      cdf += std::exp(-m + static_cast<double>(y) * lm -
                      std::lgamma(static_cast<double>(y) + 1.0));
    return std::max(0.0, 1.0 - cdf);
  }
  double term = std::exp(-m + bd * lm - std::lgamma(bd + 1.0));
  double sum = term;
  for (std::int64_t y = b; ; ++y) {
    const double ratio = m / (static_cast<double>(y) + 1.0);
    term *= ratio;
    sum += term;
    // geometric remainder bound with the current (decreasing) ratio
    if (ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-16 * sum) break;
  }
  return sum;
}

}  // namespace

double OffspringLaw::zeta(std::uint64_t a) const {
  const double m = mean();
  if (!(m > 0.0)) throw InvalidParameter("zeta: law has zero mean");
  switch (family_) {
    case Family::LinearFractionalGeometric: {
      // sum_{y >= a} y^2 p q^y / m^2, forward sum with geometric tail bound
      const double p = 1.0 / (1.0 + a_);
      const double q = 1.0 - p;
      if (a == 0) return eta() + 1.0 / m;
      double y = static_cast<double>(a);
      double term = y * y * p * std::pow(q, y);
      double sum = term;
      for (;;) {
        const double ratio = q * (y + 1.0) * (y + 1.0) / (y * y);
        y += 1.0;
        term *= ratio;
        sum += term;
        const double rr = q * (y + 1.0) * (y + 1.0) / (y * y);
        if (rr < 1.0 && term * rr / (1.0 - rr) < 1e-14 * sum) break;
      }
      return sum / (m * m);
    }
    case Family::Poisson: {
      const std::int64_t ai = static_cast<std::int64_t>(a);
      return poisson_tail(m, ai - 2) + poisson_tail(m, ai - 1) / m;
    }
    case Family::Binary:
      return a <= 2 ? 1.0 / a_ : 0.0;
    case Family::BoundedGeneric: {
      double s = 0.0;
      for (std::size_t y = std::max<std::size_t>(a, 1); y < probs_.size(); ++y)
        s += static_cast<double>(y) * static_cast<double>(y) * probs_[y];
      return s / (m * m);
    }
  }
  return 0.0;
}

double OffspringLaw::offspring_variance() const {
  const double m = mean();
  switch (family_) {
    case Family::LinearFractionalGeometric:
      return m * (m + 1.0);
    case Family::Poisson:
      return m;
    case Family::Binary:
      return 4.0 * a_ * (1.0 - a_);
    case Family::BoundedGeneric: {
      double f2 = 0.0;
      for (std::size_t y = 2; y < probs_.size(); ++y)
        f2 += static_cast<double>(y) * static_cast<double>(y - 1) * probs_[y];
      return f2 + m - m * m;
    }
  }
  return 0.0;
}

double OffspringLaw::prob_one() const {
  switch (family_) {
    case Family::LinearFractionalGeometric: {
      const double p = 1.0 / (1.0 + a_);
      return p * (1.0 - p);
    }
    case Family::Poisson:
      return a_ * std::exp(-a_);
    case Family::Binary:
      return 0.0;
    case Family::BoundedGeneric:
      return probs_.size() > 1 ? probs_[1] : 0.0;
  }
  return 0.0;
}

OffspringDraw OffspringLaw::sample_total(std::uint64_t parents,
                                         Rng& rng) const {
  OffspringDraw draw;
  if (parents == 0) return draw;
  const double expected = static_cast<double>(parents) * mean();
  if (expected > kCountCeiling)
    throw OverflowError("sample_total: expected total beyond count ceiling",
                        static_cast<double>(parents));
  switch (family_) {
    case Family::LinearFractionalGeometric: {
      const double p = 1.0 / (1.0 + a_);
      draw.total = rng.negative_binomial(parents, p, &draw.approximate);
      return draw;
    }
    case Family::Poisson:
      draw.total = rng.poisson(expected, &draw.approximate);
      return draw;
    case Family::Binary:
      draw.total = 2 * rng.binomial(parents, a_, &draw.approximate);
      return draw;
    case Family::BoundedGeneric: {
      // Multinomial contraction via sequential conditional binomials.
      std::uint64_t rem = parents;
      double mass = 1.0;
      std::uint64_t total = 0;
      for (std::size_t y = 0; y + 1 < probs_.size() && rem > 0; ++y) {
        const double cond = std::min(1.0, probs_[y] / mass);
        const std::uint64_t ny = rng.binomial(rem, cond, &draw.approximate);
        total += static_cast<std::uint64_t>(y) * ny;
        rem -= ny;
        mass -= probs_[y];
        if (mass <= 0.0) {
          rem = 0;
          break;
        }
      }
      total += (probs_.size() - 1) * rem;
      draw.total = total;
      return draw;
    }
  }
  return draw;
}

double g_eval(const OffspringLaw& law, double s) {
  require_unit_interval(s, "g_eval: s");
  return law.g_survival(1.0 - s);
}

EnvironmentPath environment_from_laws(std::vector<OffspringLaw> laws) {
  EnvironmentPath env;
  env.laws = std::move(laws);
  env.increments.reserve(env.laws.size());
  env.sums.reserve(env.laws.size() + 1);
  env.sums.push_back(0.0);
  for (const OffspringLaw& law : env.laws) {
    const double m = law.mean();
    if (!(m > 0.0))
      throw InvalidParameter("environment_from_laws: law with zero mean");
    const double x = std::log(m);
    env.increments.push_back(x);
    env.sums.push_back(env.sums.back() + x);
  }
  return env;
}

std::string increment_kind_name(IncrementKind k) {
  switch (k) {
    case IncrementKind::TwoPoint: return "two_point";
    case IncrementKind::Gaussian: return "gaussian";
    case IncrementKind::TwoSidedPareto: return "two_sided_pareto";
  }
  return "?";
}

IncrementKind increment_kind_from_name(const std::string& name) {
  if (name == "two_point") return IncrementKind::TwoPoint;
  if (name == "gaussian") return IncrementKind::Gaussian;
  if (name == "two_sided_pareto") return IncrementKind::TwoSidedPareto;
  throw InvalidParameter("unknown increment kind: " + name);
}

IncrementLaw IncrementLaw::two_point(double c) {
  if (!(c > 0.0)) throw InvalidParameter("two_point: c must be positive");
  // Quantize the step down onto the 2^-26 grid: partial sums of +-c are then
  // exact doubles (integer multiples of 2^-26 below 2^52), so lattice
  // boundary events like {S_k >= 0} and the closed-form renewal weights are
  // exact. Rounding down keeps constraints like the Binary family's
  // X <= log 2 intact.
  const double q = std::floor(c * 67108864.0) / 67108864.0;
  if (!(q > 0.0))
    throw InvalidParameter("two_point: c too small to quantize");
  return {IncrementKind::TwoPoint, q};
}

IncrementLaw IncrementLaw::gaussian(double sigma) {
  if (!(sigma > 0.0)) throw InvalidParameter("gaussian: sigma must be positive");
  return {IncrementKind::Gaussian, sigma};
}

IncrementLaw IncrementLaw::two_sided_pareto(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw InvalidParameter("two_sided_pareto: alpha must lie in (0,2)");
  return {IncrementKind::TwoSidedPareto, alpha};
}

double IncrementLaw::sample(Rng& rng) const {
  switch (kind) {
    case IncrementKind::TwoPoint:
      return rng.bernoulli(0.5) ? param : -param;
    case IncrementKind::Gaussian:
      return param * rng.normal();
    case IncrementKind::TwoSidedPareto: {
      const double mag = std::pow(rng.uniform(), -1.0 / param);
      return rng.bernoulli(0.5) ? mag : -mag;
    }
  }
  return 0.0;
}

double IncrementLaw::sup_support() const {
  return kind == IncrementKind::TwoPoint
             ? param
             : std::numeric_limits<double>::infinity();
}

EnvironmentModel::EnvironmentModel(Family family, IncrementLaw increment)
    : family_(family), increment_(increment) {
  if (family_ == Family::BoundedGeneric)
    throw InvalidParameter(
        "EnvironmentModel: bounded laws have no single-parameter map from X; "
        "build paths with environment_from_laws instead");
  if (family_ == Family::Binary &&
      increment_.sup_support() > std::log(2.0) * (1.0 + 1e-12))
    throw InvalidParameter(
        "EnvironmentModel: Binary requires X <= log 2; increment law can "
        "exceed it");
}

OffspringLaw EnvironmentModel::law_for(double x) const {
  switch (family_) {
    case Family::LinearFractionalGeometric:
      return OffspringLaw::linear_fractional(std::exp(x));
    case Family::Poisson:
      return OffspringLaw::poisson(std::exp(x));
    case Family::Binary: {
      double p = 0.5 * std::exp(x);
      if (p > 1.0) {
        if (p > 1.0 + 1e-12)
          throw InvalidParameter("EnvironmentModel: sampled X > log 2");
        p = 1.0;  // X == log 2 up to rounding
      }
      return OffspringLaw::binary(p);
    }
    case Family::BoundedGeneric:
      break;
  }
  throw InvalidParameter("EnvironmentModel: unsupported family");
}

EnvironmentPath EnvironmentModel::sample_environment(std::size_t n,
                                                     Rng& rng) const {
  return sample_environment_path(*this, n, rng);
}

std::optional<double> EnvironmentModel::exact_renewal_step() const {
  if (increment_.kind == IncrementKind::TwoPoint) return increment_.param;
  return std::nullopt;
}

std::string EnvironmentModel::to_json_string() const {
  nlohmann::ordered_json j;
  j["family"] = family_name(family_);
  j["increment"]["kind"] = increment_kind_name(increment_.kind);
  const char* pname = increment_.kind == IncrementKind::TwoPoint ? "c"
                      : increment_.kind == IncrementKind::Gaussian ? "sigma"
                                                                   : "alpha";
  j["increment"]["params"][pname] = increment_.param;
  j["seed_policy"] = "explicit";
  return j.dump();
}

EnvironmentModel EnvironmentModel::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const Family fam = family_from_name(j.at("family").get<std::string>());
  const auto& inc = j.at("increment");
  const IncrementKind kind =
      increment_kind_from_name(inc.at("kind").get<std::string>());
  const auto& params = inc.at("params");
  IncrementLaw law;
  switch (kind) {
    case IncrementKind::TwoPoint:
      law = IncrementLaw::two_point(params.at("c").get<double>());
      break;
    case IncrementKind::Gaussian:
      law = IncrementLaw::gaussian(params.at("sigma").get<double>());
      break;
    case IncrementKind::TwoSidedPareto:
      law = IncrementLaw::two_sided_pareto(params.at("alpha").get<double>());
      break;
  }
  if (j.contains("seed_policy") &&
      j["seed_policy"].get<std::string>() != "explicit")
    throw InvalidParameter("EnvironmentModel: only explicit seeding supported");
  return EnvironmentModel(fam, law);
}

OffspringLaw sample_random_law(Family family, Rng& rng) {
  switch (family) {
    case Family::LinearFractionalGeometric:
      return OffspringLaw::linear_fractional(
          std::clamp(std::exp(0.6 * rng.normal()), 0.05, 20.0));
    case Family::Poisson:
      return OffspringLaw::poisson(
          std::clamp(std::exp(0.6 * rng.normal()), 0.05, 20.0));
    case Family::Binary:
      return OffspringLaw::binary(rng.uniform(0.1, 1.0));
    case Family::BoundedGeneric: {
      for (;;) {
        const std::size_t size = 3 + rng.next_u64() % 6;
        std::vector<double> probs(size);
        double sum = 0.0;
        for (double& q : probs) {
          const double u = rng.uniform();
          q = u * u;
          sum += q;
        }
        for (double& q : probs) q /= sum;
        double mean = 0.0;
        for (std::size_t y = 1; y < probs.size(); ++y)
          mean += static_cast<double>(y) * probs[y];
        if (mean > 0.05) return OffspringLaw::bounded(std::move(probs));
      }
    }
  }
  throw InvalidParameter("sample_random_law: unsupported family");
}

}  // namespace bpre
